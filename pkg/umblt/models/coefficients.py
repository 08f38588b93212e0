"""
Optical Coefficient Models
Analytic coefficient fields, experiment presets, acoustic modulation and
hypothesis checks on sampled coefficients
"""

from dataclasses import dataclass, field
from typing import List, Optional, Tuple, Union

import numpy as np

from .mesh import EdgeField, Grid2D, NodeField
from .phantom import SheppLogan
from ..utils.config import settings
from ..utils.errors import CoefficientError
from ..utils.logger import get_logger, log_hypothesis_violation

logger = get_logger(__name__)


def _shape(x, y) -> Tuple[int, ...]:
    return np.broadcast(np.asarray(x), np.asarray(y)).shape


# ----------------------------------------------------------------------
# Scalar fields. All are module-level classes so that they pickle into
# ensemble worker processes.
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class ConstantField:
    value: float

    def __call__(self, x, y) -> np.ndarray:
        return np.full(_shape(x, y), float(self.value))


@dataclass(frozen=True)
class Experiment1Diffusion:
    """D = cos^2(x + 2y) - 3 sin^2(3x - 4y) + 5"""

    def __call__(self, x, y) -> np.ndarray:
        return np.cos(x + 2 * y) ** 2 - 3 * np.sin(3 * x - 4 * y) ** 2 + 5


@dataclass(frozen=True)
class Experiment1Absorption:
    """sigma_a = cos^2(5x) + sin^2(5y) + 1"""

    def __call__(self, x, y) -> np.ndarray:
        return np.cos(5 * x) ** 2 + np.sin(5 * y) ** 2 + 1


@dataclass(frozen=True)
class Experiment2Diffusion:
    """D = 3 - max(|x|, |y|)"""

    def __call__(self, x, y) -> np.ndarray:
        return 3 - np.maximum(np.abs(x), np.abs(y))


@dataclass(frozen=True)
class Experiment2Absorption:
    """sigma_a = 3/2 - sgn(x^2 + y^2 - 4/5) / 2 with sgn(0) = 0"""

    def __call__(self, x, y) -> np.ndarray:
        return 1.5 - 0.5 * np.sign(np.asarray(x) ** 2 + np.asarray(y) ** 2 - 0.8)


@dataclass(frozen=True)
class ModulationParams:
    """Acoustic plane wave: amplitude epsilon, wave vector q and phase varphi"""
    epsilon: float = 0.0
    q: Tuple[float, float] = (0.0, 0.0)
    varphi: float = 0.0

    def __post_init__(self):
        if not np.isfinite(self.epsilon) or self.epsilon < 0:
            raise CoefficientError(f"Modulation amplitude must be >= 0, got {self.epsilon}")
        object.__setattr__(self, "q", (float(self.q[0]), float(self.q[1])))

    def wave(self, x, y) -> np.ndarray:
        """cos(q . x + varphi)"""
        return np.cos(self.q[0] * np.asarray(x) + self.q[1] * np.asarray(y) + self.varphi)

    def with_epsilon(self, epsilon: float) -> "ModulationParams":
        return ModulationParams(epsilon, self.q, self.varphi)


@dataclass(frozen=True)
class ModulatedField:
    """base * (1 + epsilon * factor * cos(q . x + varphi))"""
    base: object
    factor: float
    modulation: ModulationParams

    def __call__(self, x, y) -> np.ndarray:
        m = self.modulation
        return self.base(x, y) * (1.0 + m.epsilon * self.factor * m.wave(x, y))


@dataclass(frozen=True)
class PerturbedField:
    """base + scale * perturbation"""
    base: object
    perturbation: object
    scale: float

    def __call__(self, x, y) -> np.ndarray:
        return self.base(x, y) + self.scale * self.perturbation(x, y)


@dataclass(frozen=True)
class TensorDiffusion:
    """Symmetric 2x2 diffusion tensor given by its components"""
    d11: object
    d12: object
    d22: object

    def __call__(self, x, y) -> np.ndarray:
        """Components stacked as (d11, d12, d22) along the first axis"""
        return np.stack([
            np.broadcast_to(self.d11(x, y), _shape(x, y)),
            np.broadcast_to(self.d12(x, y), _shape(x, y)),
            np.broadcast_to(self.d22(x, y), _shape(x, y)),
        ])

    def scaled(self, factor: float, modulation: ModulationParams) -> "TensorDiffusion":
        return TensorDiffusion(
            ModulatedField(self.d11, factor, modulation),
            ModulatedField(self.d12, factor, modulation),
            ModulatedField(self.d22, factor, modulation),
        )

    def shifted(self, perturbation, scale: float) -> "TensorDiffusion":
        """D + scale * perturbation * I"""
        return TensorDiffusion(
            PerturbedField(self.d11, perturbation, scale),
            self.d12,
            PerturbedField(self.d22, perturbation, scale),
        )


def rotated_tensor(a: float, b: float, theta: float) -> TensorDiffusion:
    """Constant tensor R(theta) diag(a, b) R(theta)^T"""
    if a <= 0 or b <= 0:
        raise CoefficientError(f"Rotated tensor needs a, b > 0, got a={a}, b={b}")
    c, s = np.cos(theta), np.sin(theta)
    return TensorDiffusion(
        ConstantField(a * c * c + b * s * s),
        ConstantField((a - b) * c * s),
        ConstantField(a * s * s + b * c * c),
    )


def tensor_eigenvalues(d11: np.ndarray, d12: np.ndarray, d22: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """(smallest, largest) eigenvalue of [[d11, d12], [d12, d22]] elementwise"""
    mean = 0.5 * (d11 + d22)
    radius = np.hypot(0.5 * (d11 - d22), d12)
    return mean - radius, mean + radius


# ----------------------------------------------------------------------
# Coefficient bundles
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class OpticalCoefficients:
    """Diffusion D (scalar or TensorDiffusion), absorption sigma_a, gamma and ell"""
    D: object
    sigma_a: object
    gamma: float = field(default_factory=lambda: settings.DEFAULT_GAMMA)
    ell: float = field(default_factory=lambda: settings.DEFAULT_ELL)

    def __post_init__(self):
        if not (np.isfinite(self.ell) and self.ell > 0):
            raise CoefficientError(f"Extrapolation length must be > 0, got {self.ell}")
        if not np.isfinite(self.gamma):
            raise CoefficientError(f"gamma must be finite, got {self.gamma}")

    @property
    def is_anisotropic(self) -> bool:
        return isinstance(self.D, TensorDiffusion)

    def replace(self, **changes) -> "OpticalCoefficients":
        values = dict(D=self.D, sigma_a=self.sigma_a, gamma=self.gamma, ell=self.ell)
        values.update(changes)
        return OpticalCoefficients(**values)


@dataclass(frozen=True)
class SourceField:
    S: object
    support: str = ""

    def __call__(self, x, y) -> np.ndarray:
        return self.S(x, y)


def experiment_coefficients(
    exp_id: Union[int, str],
    gamma: Optional[float] = None,
    ell: Optional[float] = None,
) -> Tuple[OpticalCoefficients, SourceField]:
    """
    Coefficients and source of the two reference experiments

    Args:
        exp_id: 1 or 2
        gamma: Elasto-optical constant (settings.DEFAULT_GAMMA when omitted)
        ell: Extrapolation length (settings.DEFAULT_ELL when omitted)

    Returns:
        (OpticalCoefficients, SourceField) with the Shepp-Logan source
    """
    exp = str(exp_id)
    if exp == "1":
        D, sigma = Experiment1Diffusion(), Experiment1Absorption()
    elif exp == "2":
        D, sigma = Experiment2Diffusion(), Experiment2Absorption()
    else:
        raise CoefficientError(f"Unknown experiment id: {exp_id}")
    phantom = SheppLogan()
    coefficients = OpticalCoefficients(
        D=D,
        sigma_a=sigma,
        gamma=settings.DEFAULT_GAMMA if gamma is None else float(gamma),
        ell=settings.DEFAULT_ELL if ell is None else float(ell),
    )
    return coefficients, SourceField(phantom, phantom.support())


PRESETS = ("experiment1", "experiment2", "constant", "anisotropic-rotated")


def coefficients_from_preset(
    name: str,
    gamma: Optional[float] = None,
    ell: Optional[float] = None,
    **params: float,
) -> Tuple[OpticalCoefficients, SourceField]:
    """
    Resolve a named coefficient preset with parameter overrides

    Presets:
        experiment1, experiment2: the reference experiments
        constant: D (default 1), sigma_a (default 1)
        anisotropic-rotated: a (2), b (1), theta (pi/6), sigma_a (1)
    """
    if name == "experiment1":
        return experiment_coefficients(1, gamma, ell)
    if name == "experiment2":
        return experiment_coefficients(2, gamma, ell)

    if name == "constant":
        D = ConstantField(params.pop("D", 1.0))
    elif name == "anisotropic-rotated":
        D = rotated_tensor(params.pop("a", 2.0), params.pop("b", 1.0), params.pop("theta", np.pi / 6))
    else:
        raise CoefficientError(f"Unknown coefficient preset: {name} (expected one of {', '.join(PRESETS)})")
    sigma = ConstantField(params.pop("sigma_a", 1.0))
    if params:
        raise CoefficientError(f"Unknown parameters for preset {name}: {', '.join(sorted(params))}")

    phantom = SheppLogan()
    coefficients = OpticalCoefficients(
        D=D,
        sigma_a=sigma,
        gamma=settings.DEFAULT_GAMMA if gamma is None else float(gamma),
        ell=settings.DEFAULT_ELL if ell is None else float(ell),
    )
    return coefficients, SourceField(phantom, phantom.support())


# ----------------------------------------------------------------------
# Modulation
# ----------------------------------------------------------------------

def modulate(c: OpticalCoefficients, s: SourceField, m: ModulationParams, x, y):
    """
    Modulated (D_eps, sigma_eps, S_eps) at the given point(s)

    D_eps = (1 + eps (2 gamma - 1) cos) D, sigma_eps = (1 + eps (2 gamma + 1) cos) sigma_a
    and S_eps = (1 + eps cos) S with cos = cos(q . x + varphi). Tensor D is
    returned as stacked components.
    """
    wave = m.wave(x, y)
    D = c.D(x, y)
    D_eps = (1.0 + m.epsilon * (2 * c.gamma - 1) * wave) * D
    sigma_eps = (1.0 + m.epsilon * (2 * c.gamma + 1) * wave) * c.sigma_a(x, y)
    S_eps = (1.0 + m.epsilon * wave) * s(x, y)
    return D_eps, sigma_eps, S_eps


def modulate_coefficients(
    c: OpticalCoefficients, s: SourceField, m: ModulationParams
) -> Tuple[OpticalCoefficients, SourceField]:
    """Field-level counterpart of modulate()"""
    if c.is_anisotropic:
        D = c.D.scaled(2 * c.gamma - 1, m)
    else:
        D = ModulatedField(c.D, 2 * c.gamma - 1, m)
    sigma = ModulatedField(c.sigma_a, 2 * c.gamma + 1, m)
    return c.replace(D=D, sigma_a=sigma), SourceField(ModulatedField(s.S, 1.0, m), s.support)


# ----------------------------------------------------------------------
# Sampling
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class SampledFields:
    """
    Coefficients evaluated on a grid.

    d_edges and d_nodes hold one entry for scalar D and three (d11, d12, d22)
    for a tensor.
    """
    grid: Grid2D
    sigma: NodeField
    source: Optional[NodeField]
    d_edges: Tuple[EdgeField, ...]
    d_nodes: Tuple[NodeField, ...]

    @property
    def is_tensor(self) -> bool:
        return len(self.d_edges) == 3

    def edge_components(self):
        """((d11, d12) on x-edges, (d12, d22) on y-edges); d12 is None for scalar D"""
        if self.is_tensor:
            d11, d12, d22 = self.d_edges
            return (d11.x_edges, d12.x_edges), (d12.y_edges, d22.y_edges)
        d = self.d_edges[0]
        return (d.x_edges, None), (None, d.y_edges)


def _evaluate(fn, X: np.ndarray, Y: np.ndarray, name: str) -> np.ndarray:
    try:
        values = np.asarray(fn(X, Y), dtype=float)
    except Exception as e:
        raise CoefficientError(f"Evaluation of {name} failed: {e}") from e
    if not np.isfinite(values).all():
        bad = np.argwhere(~np.isfinite(values.reshape((-1,) + X.shape)))[0]
        raise CoefficientError(f"{name} is not finite at sample index {tuple(int(b) for b in bad)}")
    return values


def sample_fields(c: OpticalCoefficients, s: Optional[SourceField], g: Grid2D) -> SampledFields:
    """
    Evaluate sigma_a and S at nodes and D at the half-points

    D is evaluated analytically at every half-point (no averaging); it is also
    sampled at the nodes for the hypothesis checks.
    """
    X, Y = g.node_coordinates()
    Xe, Ye = g.x_edge_coordinates()
    Xn, Yn = g.y_edge_coordinates()

    sigma = NodeField(g, _evaluate(c.sigma_a, X, Y, "sigma_a"))
    source = NodeField(g, np.broadcast_to(_evaluate(s, X, Y, "S"), g.shape)) if s is not None else None

    d_node = _evaluate(c.D, X, Y, "D")
    d_x = _evaluate(c.D, Xe, Ye, "D")
    d_y = _evaluate(c.D, Xn, Yn, "D")
    if c.is_anisotropic:
        d_edges = tuple(EdgeField(g, d_x[k], d_y[k]) for k in range(3))
        d_nodes = tuple(NodeField(g, d_node[k]) for k in range(3))
    else:
        d_edges = (EdgeField(g, np.broadcast_to(d_x, Xe.shape), np.broadcast_to(d_y, Xn.shape)),)
        d_nodes = (NodeField(g, np.broadcast_to(d_node, g.shape)),)
    return SampledFields(g, sigma, source, d_edges, d_nodes)


# ----------------------------------------------------------------------
# Hypotheses
# ----------------------------------------------------------------------

@dataclass
class HypothesisReport:
    """Outcome of the coefficient hypothesis checks; violations are reported, not raised"""
    min_eigenvalue: float
    max_eigenvalue: float
    lambda_estimate: float
    min_sigma: float
    max_boundary_deviation: float
    ell: float
    h1_passed: bool
    h3_passed: bool
    h4_passed: bool
    violations: List[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.h1_passed and self.h3_passed and self.h4_passed and self.ell > 0

    def to_dict(self) -> dict:
        return {
            "min_eigenvalue": self.min_eigenvalue,
            "max_eigenvalue": self.max_eigenvalue,
            "lambda_estimate": self.lambda_estimate,
            "min_sigma": self.min_sigma,
            "max_boundary_deviation": self.max_boundary_deviation,
            "h1_passed": self.h1_passed,
            "h3_passed": self.h3_passed,
            "h4_passed": self.h4_passed,
        }


def _eigen_bounds(fields: SampledFields) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Eigenvalue bounds of D over nodes and half-points, plus node-only values"""
    if fields.is_tensor:
        parts = [
            tensor_eigenvalues(*(e.x_edges for e in fields.d_edges)),
            tensor_eigenvalues(*(e.y_edges for e in fields.d_edges)),
            tensor_eigenvalues(*(n.values for n in fields.d_nodes)),
        ]
        lo = np.concatenate([p[0].ravel() for p in parts])
        hi = np.concatenate([p[1].ravel() for p in parts])
        node_lo, node_hi = parts[2]
    else:
        d = fields.d_edges[0]
        lo = hi = np.concatenate([d.x_edges.ravel(), d.y_edges.ravel(), fields.d_nodes[0].values])
        node_lo = node_hi = fields.d_nodes[0].values
    return lo, hi, node_lo, node_hi


def diffusion_eigen_range(fields: SampledFields) -> Tuple[float, float]:
    """Smallest and largest eigenvalue of D over nodes and half-points"""
    lo, hi, _, _ = _eigen_bounds(fields)
    return float(lo.min()), float(hi.max())


def check_hypotheses(c: OpticalCoefficients, g: Grid2D, fields: Optional[SampledFields] = None) -> HypothesisReport:
    """
    Check H1 (D = I on the boundary), H3 (uniform ellipticity) and
    H4 (sigma_a >= 0) on the sampled coefficients

    Args:
        c: Coefficients to check
        g: Grid to sample on
        fields: Pre-sampled fields on g, sampled here when omitted

    Returns:
        HypothesisReport
    """
    fields = fields or sample_fields(c, None, g)
    lo, hi, node_lo, node_hi = _eigen_bounds(fields)
    min_eig, max_eig = float(lo.min()), float(hi.max())
    lambda_estimate = min(min_eig, 1.0 / max_eig) if max_eig > 0 else min_eig
    min_sigma = float(fields.sigma.values.min())

    boundary = g.boundary_mask()
    deviation = float(np.maximum(np.abs(node_lo - 1.0), np.abs(node_hi - 1.0))[boundary].max())

    report = HypothesisReport(
        min_eigenvalue=min_eig,
        max_eigenvalue=max_eig,
        lambda_estimate=lambda_estimate,
        min_sigma=min_sigma,
        max_boundary_deviation=deviation,
        ell=c.ell,
        h1_passed=deviation <= 1e-12,
        h3_passed=min_eig > 0,
        h4_passed=min_sigma >= 0,
    )
    if not report.h1_passed:
        report.violations.append(f"H1: max |D - I| on boundary = {deviation:.4g}")
    if not report.h3_passed:
        report.violations.append(f"H3: min eigenvalue of D = {min_eig:.4g}")
    if not report.h4_passed:
        report.violations.append(f"H4: min sigma_a = {min_sigma:.4g}")
    for violation in report.violations:
        name, detail = violation.split(": ", 1)
        log_hypothesis_violation(name, detail)

    logger.info(
        f"Hypotheses: {g.describe()} | lambda={lambda_estimate:.4g} | min_eig={min_eig:.4g} | "
        f"min_sigma={min_sigma:.4g} | passed={report.passed}"
    )
    return report
