"""
Logging Configuration for the UMBLT Reconstruction Toolkit
Uses loguru for structured stage logging
"""

import sys
from pathlib import Path
from typing import Optional

from loguru import logger

from .config import settings


CONSOLE_FORMAT = (
    "<green>{time:YYYY-MM-DD HH:mm:ss}</green> | "
    "<level>{level: <8}</level> | "
    "<cyan>{name}</cyan>:<cyan>{function}</cyan>:<cyan>{line}</cyan> | "
    "<level>{message}</level>"
)

FILE_FORMAT = (
    "{time:YYYY-MM-DD HH:mm:ss.SSS} | {level: <8} | "
    "{name}:{function}:{line} | {message}"
)


def setup_logger(level: Optional[str] = None):
    """
    Configure process-wide logging with loguru

    Features:
    - Console logging with color
    - Optional rotating file sink when LOG_FILE is set

    Args:
        level: Override for settings.LOG_LEVEL

    Returns:
        Configured logger instance
    """
    level = level or settings.LOG_LEVEL

    # Remove default handler
    logger.remove()

    logger.add(
        sys.stderr,
        format=CONSOLE_FORMAT,
        level=level,
        colorize=True,
        backtrace=True,
        diagnose=False,
    )

    if settings.LOG_FILE:
        log_path = Path(settings.LOG_FILE)
        log_path.parent.mkdir(parents=True, exist_ok=True)
        logger.add(
            str(log_path),
            format=FILE_FORMAT,
            level=level,
            rotation=settings.LOG_ROTATION,
            retention=settings.LOG_RETENTION,
            compression="zip",
            backtrace=True,
            diagnose=False,
            enqueue=True,
        )

    logger.debug(f"Logger initialized - Level: {level}")

    return logger


# Create configured logger instance
app_logger = setup_logger()


def get_logger(name: str):
    """
    Get a contextual logger for a specific module

    Args:
        name: Module name for context

    Returns:
        Configured logger instance
    """
    return logger.bind(module=name)


def add_run_log(path: Path, level: Optional[str] = None) -> int:
    """Attach a plain-text sink for a single run; returns the sink id"""
    return logger.add(
        str(path),
        format=FILE_FORMAT,
        level=level or settings.LOG_LEVEL,
        mode="w",
        enqueue=True,
    )


def remove_run_log(sink_id: int):
    """Detach a sink added by add_run_log"""
    logger.remove(sink_id)


def log_stage(stage: str, **fields):
    """Log a pipeline stage with pipe-separated key=value fields"""
    parts = [f"Stage: {stage}"]
    for key, value in fields.items():
        if isinstance(value, float):
            parts.append(f"{key}={value:.6g}")
        else:
            parts.append(f"{key}={value}")
    logger.info(" | ".join(parts))


def log_solve(method: str, unknowns: int, residual: float, duration: float, iterations: int = 0):
    """Log a linear solve"""
    logger.debug(
        f"Solve: {method} | Unknowns: {unknowns} | Iterations: {iterations} | "
        f"Residual: {residual:.3e} | Duration: {duration:.3f}s"
    )


def log_error(error: Exception, context: str = ""):
    """Log error with context"""
    logger.opt(exception=error).error(f"Error in {context}: {str(error)}")


def log_hypothesis_violation(name: str, detail: str):
    """Log a violated modelling hypothesis (reported, never raised)"""
    logger.warning(f"HYPOTHESIS VIOLATED: {name} | {detail}")


if __name__ == "__main__":
    # Test logging
    test_logger = get_logger("test_module")
    test_logger.info("Test info message")
    log_stage("forward", residual=1.2e-13, min_psi=0.42, wall_time=0.031)
    log_hypothesis_violation("H1", "max |D - I| on boundary = 5.0")
