# UMBLT package initialization
__version__ = "1.1.0"
