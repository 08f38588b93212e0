"""
Shepp-Logan Phantom
Analytic point evaluation of the ten-ellipse head phantom on [-1, 1]^2
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np


# (x0, y0, semi-axis a, semi-axis b, rotation in degrees)
ELLIPSES: Tuple[Tuple[float, float, float, float, float], ...] = (
    (0.0, 0.0, 0.69, 0.92, 0.0),
    (0.0, -0.0184, 0.6624, 0.874, 0.0),
    (0.22, 0.0, 0.11, 0.31, -18.0),
    (-0.22, 0.0, 0.16, 0.41, 18.0),
    (0.0, 0.35, 0.21, 0.25, 0.0),
    (0.0, 0.1, 0.046, 0.046, 0.0),
    (0.0, -0.1, 0.046, 0.046, 0.0),
    (-0.08, -0.605, 0.046, 0.023, 0.0),
    (0.0, -0.605, 0.023, 0.023, 0.0),
    (0.06, -0.605, 0.023, 0.046, 0.0),
)

CLASSIC_INTENSITIES = (2.0, -0.98, -0.02, -0.02, 0.01, 0.01, 0.01, 0.01, 0.01, 0.01)

# Higher-contrast variant commonly used for display
MODIFIED_INTENSITIES = (1.0, -0.8, -0.2, -0.2, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1)


@dataclass(frozen=True)
class SheppLogan:
    """
    Callable phantom S(x, y).

    Intensities of overlapping ellipses add up. Points outside every ellipse
    evaluate to 0.
    """
    modified: bool = False
    scale: float = 1.0

    @property
    def intensities(self) -> Tuple[float, ...]:
        return MODIFIED_INTENSITIES if self.modified else CLASSIC_INTENSITIES

    def __call__(self, x, y) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        out = np.zeros(np.broadcast(x, y).shape)
        for (x0, y0, a, b, phi), rho in zip(ELLIPSES, self.intensities):
            t = np.deg2rad(phi)
            dx, dy = x - x0, y - y0
            xr = dx * np.cos(t) + dy * np.sin(t)
            yr = -dx * np.sin(t) + dy * np.cos(t)
            out = out + np.where((xr / a) ** 2 + (yr / b) ** 2 <= 1.0, rho, 0.0)
        return self.scale * out

    def support(self) -> str:
        return "ellipse x^2/0.69^2 + y^2/0.92^2 <= 1"
