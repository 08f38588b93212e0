"""
Exception hierarchy for the UMBLT Reconstruction Toolkit
"""

from typing import Optional, Tuple


class UMBLTError(Exception):
    """Base class for all toolkit errors"""


class GridError(UMBLTError, ValueError):
    """Invalid grid, out-of-range index, non-nested grids or malformed field"""


class CoefficientError(UMBLTError, ValueError):
    """Unknown preset, non-finite sample or non-SPD diffusion tensor"""


class AssemblyError(UMBLTError, ValueError):
    """Invalid input to a system assembly (non-positive weights, empty boundary set)"""


class SolverError(UMBLTError, RuntimeError):
    """Singular matrix, non-convergence or residual above tolerance"""


class PositivityError(UMBLTError):
    """A field required to be positive is not"""

    def __init__(self, message: str, node: Optional[Tuple[int, int]] = None,
                 point: Optional[Tuple[float, float]] = None, value: Optional[float] = None):
        super().__init__(message)
        self.node = node
        self.point = point
        self.value = value


class PerturbationError(UMBLTError, ValueError):
    """Zero-norm rescale, germ outside [-1, 1] or polynomial order out of range"""


class EnsembleError(UMBLTError):
    """Too many ensemble samples failed"""


class ConfigError(UMBLTError, ValueError):
    """Invalid experiment configuration"""
