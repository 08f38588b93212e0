"""
Uncertainty Quantification Service
Legendre chaos perturbations of the optical coefficients, parallel
reconstruction ensembles and the discrete stability bound
"""

import multiprocessing as mp
import time
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.polynomial import legendre

from .assembly_service import (
    BoundarySelection,
    RhsKind,
    assemble_forward_matrix,
    assemble_internal_matrix,
    assemble_rhs,
)
from .pipeline_service import AdjointMode, TwoGridData, get_pipeline_service
from .solver_service import NormMode, get_solver_service
from ..models.coefficients import (
    OpticalCoefficients,
    PerturbedField,
    SampledFields,
    SourceField,
    diffusion_eigen_range,
    sample_fields,
)
from ..models.mesh import Grid2D, NodeField, build_grid, discrete_norm
from ..utils.config import settings
from ..utils.errors import EnsembleError, PerturbationError
from ..utils.logger import get_logger, log_error, log_stage

logger = get_logger(__name__)

# Points per vectorized chunk when evaluating Fourier modes
EVAL_CHUNK = 65_536


# ----------------------------------------------------------------------
# Legendre chaos
# ----------------------------------------------------------------------

def legendre_eval(k: int, t, max_order: Optional[int] = None):
    """
    Normalized Legendre polynomial Phi_k(t) = sqrt(2k + 1) P_k(t)

    Orthonormal under the uniform density 1/2 on [-1, 1].
    """
    max_order = settings.PCE_MAX_ORDER if max_order is None else max_order
    if not 0 <= int(k) <= max_order:
        raise PerturbationError(f"Polynomial order {k} outside [0, {max_order}]")
    t_arr = np.asarray(t, dtype=float)
    if np.any(np.abs(t_arr) > 1.0) or not np.isfinite(t_arr).all():
        raise PerturbationError("Legendre germ must lie in [-1, 1]")
    value = np.sqrt(2 * k + 1) * legendre.legval(t_arr, [0.0] * int(k) + [1.0])
    return float(value) if np.ndim(value) == 0 else value


@dataclass(frozen=True)
class PceBasis:
    """Phi_0 .. Phi_K under the uniform density on [-1, 1]"""
    max_order: int = 10

    def evaluate(self, xi) -> np.ndarray:
        """Phi_k(xi) for k = 0..K along the first axis"""
        return np.stack([np.asarray(legendre_eval(k, xi, self.max_order)) for k in range(self.max_order + 1)])

    def variance(self, coefficient_values) -> np.ndarray:
        """Var of sum_k u_k Phi_k(xi) from the values u_1..u_K (first axis)"""
        return np.sum(np.asarray(coefficient_values, dtype=float) ** 2, axis=0)

    def orthonormality_matrix(self, n_quad: Optional[int] = None) -> np.ndarray:
        """Gauss-Legendre approximation of int Phi_i Phi_j p dt; identity up to round-off"""
        nodes, weights = legendre.leggauss(n_quad or self.max_order + 1)
        phi = self.evaluate(nodes)
        return (phi * (0.5 * weights)) @ phi.T


def wave_vectors(k: int) -> np.ndarray:
    """Integer wave vectors n in 2D with max(|n1|, |n2|) = k (8k of them)"""
    if k < 1:
        raise PerturbationError(f"Wave-vector shell must be >= 1, got {k}")
    r = np.arange(-k, k + 1)
    n1, n2 = np.meshgrid(r, r, indexing="ij")
    vectors = np.column_stack([n1.ravel(), n2.ravel()])
    return vectors[np.max(np.abs(vectors), axis=1) == k]


def _readonly(values) -> np.ndarray:
    values = np.array(values, dtype=float, copy=True)
    values.flags.writeable = False
    return values


@dataclass(frozen=True, eq=False)
class FourierModes:
    """u(x) = sum_n a_n sin(pi n.x) + b_n cos(pi n.x)"""
    vectors: np.ndarray
    sin_coeffs: np.ndarray
    cos_coeffs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "vectors", _readonly(self.vectors))
        object.__setattr__(self, "sin_coeffs", _readonly(self.sin_coeffs))
        object.__setattr__(self, "cos_coeffs", _readonly(self.cos_coeffs))

    def __call__(self, x, y) -> np.ndarray:
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        points = np.column_stack([x.ravel(), y.ravel()])
        out = np.empty(points.shape[0])
        for start in range(0, points.shape[0], EVAL_CHUNK):
            arg = np.pi * (points[start:start + EVAL_CHUNK] @ self.vectors.T)
            out[start:start + EVAL_CHUNK] = np.sin(arg) @ self.sin_coeffs + np.cos(arg) @ self.cos_coeffs
        return out.reshape(x.shape)


@dataclass(frozen=True, eq=False)
class PceField:
    """sum_k weight_k u_k(x) with weight_k = Phi_k(xi)"""
    modes: Tuple[FourierModes, ...]
    weights: Tuple[float, ...]

    def __call__(self, x, y) -> np.ndarray:
        out = np.zeros(np.broadcast(np.asarray(x), np.asarray(y)).shape)
        for u_k, w in zip(self.modes, self.weights):
            if w != 0.0:
                out = out + w * u_k(x, y)
        return out


@dataclass(frozen=True, eq=False)
class PerturbationEnsemble:
    """Frozen coefficient fields u_k (k = 1..K) for D and sigma_a"""
    uD_modes: Tuple[FourierModes, ...]
    uSigma_modes: Tuple[FourierModes, ...]
    seed: int
    max_order: int

    @property
    def basis(self) -> PceBasis:
        return PceBasis(self.max_order)


def build_perturbation_ensemble(k_max: Optional[int] = None, seed: int = 0) -> PerturbationEnsemble:
    """
    Draw the Fourier coefficients of every u_k uniformly from [-1, 1]

    Args:
        k_max: Chaos order K (also the largest wave-vector shell)
        seed: Generator seed; identical seeds give identical fields

    Returns:
        PerturbationEnsemble with read-only coefficient arrays
    """
    k_max = settings.PCE_MAX_ORDER if k_max is None else int(k_max)
    if k_max < 1:
        raise PerturbationError(f"Chaos order must be >= 1, got {k_max}")
    rng = np.random.default_rng(seed)

    def _draw() -> Tuple[FourierModes, ...]:
        modes = []
        for k in range(1, k_max + 1):
            vectors = wave_vectors(k)
            modes.append(FourierModes(
                vectors,
                rng.uniform(-1.0, 1.0, len(vectors)),
                rng.uniform(-1.0, 1.0, len(vectors)),
            ))
        return tuple(modes)

    ensemble = PerturbationEnsemble(_draw(), _draw(), int(seed), k_max)
    logger.debug(f"Perturbation ensemble built | K={k_max} | seed={seed}")
    return ensemble


def draw_perturbation(e: PerturbationEnsemble, xi: float) -> Tuple[PceField, PceField]:
    """(u_D, u_sigma) = sum_{k>=1} u_k Phi_k(xi)"""
    if not (np.isfinite(xi) and -1.0 <= xi <= 1.0):
        raise PerturbationError(f"Germ xi must lie in [-1, 1], got {xi}")
    weights = tuple(float(legendre_eval(k, xi, e.max_order)) for k in range(1, e.max_order + 1))
    return PceField(e.uD_modes, weights), PceField(e.uSigma_modes, weights)


# ----------------------------------------------------------------------
# Perturbed coefficients
# ----------------------------------------------------------------------

def diffusion_norm(fields: SampledFields) -> float:
    """H1 norm of D at the nodes; tensor norms count d12 twice"""
    if fields.is_tensor:
        d11, d12, d22 = (discrete_norm(n, "H1") for n in fields.d_nodes)
        return float(np.sqrt(d11 ** 2 + 2 * d12 ** 2 + d22 ** 2))
    return discrete_norm(fields.d_nodes[0], "H1")


def diffusion_difference_norm(a: SampledFields, b: SampledFields) -> float:
    """H1 norm of D_a - D_b at the nodes"""
    diffs = [NodeField(a.grid, x.values - y.values) for x, y in zip(a.d_nodes, b.d_nodes)]
    if a.is_tensor:
        d11, d12, d22 = (discrete_norm(d, "H1") for d in diffs)
        return float(np.sqrt(d11 ** 2 + 2 * d12 ** 2 + d22 ** 2))
    return discrete_norm(diffs[0], "H1")


@dataclass
class PerturbedCoefficients:
    coefficients: OpticalCoefficients
    fields: SampledFields
    d_scale: float
    sigma_scale: float
    dD_H1: float
    dSigma_L2: float
    admissible: bool
    reason: str = ""


def perturb_coefficients(
    c_true: OpticalCoefficients,
    u_D,
    u_sigma,
    e_D: float,
    e_sigma: float,
    g: Grid2D,
    true_fields: Optional[SampledFields] = None,
) -> PerturbedCoefficients:
    """
    D~ = D + u_D e_D |D|_H1 / |u_D|_H1 and sigma~ = sigma + u_sigma e_sigma |sigma|_L2 / |u_sigma|_L2

    Norms are discrete node norms on g, so the relative size of each
    perturbation equals its level to round-off. A tensor D is shifted by u_D I.
    A zero level leaves the coefficient untouched.

    Returns:
        PerturbedCoefficients; admissible is False when D~ is not SPD or sigma~ < 0
    """
    if e_D < 0 or e_sigma < 0:
        raise PerturbationError(f"Uncertainty levels must be >= 0, got e_D={e_D}, e_sigma={e_sigma}")
    true_fields = true_fields or sample_fields(c_true, None, g)

    D, d_scale = c_true.D, 0.0
    if e_D > 0:
        u_norm = discrete_norm(NodeField.from_function(g, u_D), "H1")
        if u_norm == 0.0:
            raise PerturbationError("Diffusion perturbation has zero H1 norm")
        if c_true.is_anisotropic:
            d_scale = e_D * diffusion_norm(true_fields) / (np.sqrt(2.0) * u_norm)
            D = c_true.D.shifted(u_D, d_scale)
        else:
            d_scale = e_D * diffusion_norm(true_fields) / u_norm
            D = PerturbedField(c_true.D, u_D, d_scale)

    sigma, sigma_scale = c_true.sigma_a, 0.0
    if e_sigma > 0:
        u_norm = discrete_norm(NodeField.from_function(g, u_sigma), "L2")
        if u_norm == 0.0:
            raise PerturbationError("Absorption perturbation has zero L2 norm")
        sigma_scale = e_sigma * discrete_norm(true_fields.sigma, "L2") / u_norm
        sigma = PerturbedField(c_true.sigma_a, u_sigma, sigma_scale)

    perturbed = c_true.replace(D=D, sigma_a=sigma)
    fields = sample_fields(perturbed, None, g)
    min_eig, _ = diffusion_eigen_range(fields)
    min_sigma = float(fields.sigma.values.min())
    reason = ""
    if min_eig <= 0:
        reason = f"D not SPD (min eigenvalue {min_eig:.4g})"
    elif min_sigma < 0:
        reason = f"sigma_a negative (min {min_sigma:.4g})"

    return PerturbedCoefficients(
        coefficients=perturbed,
        fields=fields,
        d_scale=float(d_scale),
        sigma_scale=float(sigma_scale),
        dD_H1=diffusion_difference_norm(fields, true_fields),
        dSigma_L2=discrete_norm(NodeField(g, fields.sigma.values - true_fields.sigma.values), "L2"),
        admissible=not reason,
        reason=reason,
    )


# ----------------------------------------------------------------------
# Metrics and the discrete bound
# ----------------------------------------------------------------------

@dataclass
class UqSample:
    sample_id: int
    xi: float
    e_D: float
    e_sigma: float
    dD_H1: float = float("nan")
    dSigma_L2: float = float("nan")
    dS_L2: float = float("nan")
    rejected: int = 0
    error: Optional[str] = None

    @property
    def failed(self) -> bool:
        return self.error is not None


@dataclass(frozen=True)
class BaselineNorms:
    """|D|_H1, |sigma_a|_L2 and |S|_L2 (interior) on the reconstruction grid"""
    D_H1: float
    sigma_L2: float
    S_L2: float


def relative_std_metrics(samples: Sequence[UqSample], baseline: BaselineNorms) -> Tuple[float, float, float]:
    """
    (E_S, E_D, E_sigma) with E_X = sqrt(mean |dX|^2) / |X|

    Failed samples are skipped. A zero baseline norm gives NaN.
    """
    usable = [s for s in samples if not s.failed]
    if not usable:
        raise EnsembleError("Relative standard deviation needs at least one successful sample")

    def _metric(values: List[float], norm: float) -> float:
        if norm == 0:
            return float("nan")
        return float(np.sqrt(np.mean(np.square(values))) / norm)

    return (
        _metric([s.dS_L2 for s in usable], baseline.S_L2),
        _metric([s.dD_H1 for s in usable], baseline.D_H1),
        _metric([s.dSigma_L2 for s in usable], baseline.sigma_L2),
    )


@dataclass
class BoundCheck:
    lhs: float
    rhs: float
    holds: bool
    sample_id: int = -1


def discrete_uq_bound(L, L_tilde, A, A_tilde, h: np.ndarray) -> BoundCheck:
    """
    Stability of s = L A^-1 h under coefficient errors

    lhs = |L~ A~^-1 h - L A^-1 h|_2,
    rhs = |h|_2 (|A^-1|_2 |L~ - L|_2 + |L~|_2 |A~^-1|_2 |A^-1|_2 |A~ - A|_2),
    with every spectral norm from power iteration; holds allows the
    BOUND_SLACK tolerance on rhs.
    """
    solver = get_solver_service()
    h = np.asarray(h, dtype=float).ravel()
    x = solver.solve_sparse(A, h).solution
    x_tilde = solver.solve_sparse(A_tilde, h).solution
    lhs = float(np.linalg.norm(L_tilde @ x_tilde - L @ x))

    A_inv = solver.norm2_estimate(A, NormMode.INVERSE)
    A_tilde_inv = solver.norm2_estimate(A_tilde, NormMode.INVERSE)
    dL = solver.norm2_estimate(L_tilde - L, NormMode.DIRECT)
    dA = solver.norm2_estimate(A_tilde - A, NormMode.DIRECT)
    L_tilde_norm = solver.norm2_estimate(L_tilde, NormMode.DIRECT)

    rhs = float(np.linalg.norm(h) * (A_inv * dL + L_tilde_norm * A_tilde_inv * A_inv * dA))
    holds = lhs <= rhs * (1.0 + settings.BOUND_SLACK)
    return BoundCheck(lhs, rhs, bool(holds))


# ----------------------------------------------------------------------
# Ensembles
# ----------------------------------------------------------------------

class SweepKind(str, Enum):
    BOTH = "both"
    D_ONLY = "D_only"
    SIGMA_ONLY = "sigma_only"
    JOINT = "joint"


@dataclass
class EnsemblePlan:
    """What to run: levels, sweep kind, sample count and bound-check subsample"""
    levels: Tuple[float, ...]
    sweep: Union[SweepKind, str] = SweepKind.BOTH
    samples: int = 100
    seed: int = 0
    jobs: int = 1
    bound_check_count: int = 10
    bound_grid_n: int = 21
    k_max: int = 10
    gamma_set: Optional[BoundarySelection] = None
    f: float = 1.0
    adjoint_mode: Union[AdjointMode, str] = AdjointMode.DATA

    def runs(self) -> List[Tuple[str, float, float, float, bool]]:
        """(sweep name, level, e_D, e_sigma, is distribution run) for every run"""
        try:
            sweep = SweepKind(self.sweep)
        except ValueError as e:
            expected = ", ".join(k.value for k in SweepKind)
            raise EnsembleError(f"Unknown sweep {self.sweep!r} (expected one of {expected})") from e
        levels = sorted(float(v) for v in self.levels)
        top = levels[-1]
        runs = []
        if sweep in (SweepKind.BOTH, SweepKind.D_ONLY):
            runs += [("D", v, v, 0.0, sweep == SweepKind.D_ONLY and v == top) for v in levels]
        if sweep in (SweepKind.BOTH, SweepKind.SIGMA_ONLY):
            runs += [("sigma", v, 0.0, v, sweep == SweepKind.SIGMA_ONLY and v == top) for v in levels]
        if sweep == SweepKind.JOINT:
            runs += [("joint", v, v, v, v == top) for v in levels]
        if sweep == SweepKind.BOTH:
            runs.append(("joint", top, top, top, True))
        return runs


@dataclass
class EnsembleRun:
    sweep: str
    level: float
    e_D: float
    e_sigma: float
    samples: List[UqSample]
    E_S: float
    E_D: float
    E_sigma: float
    mean_source: Optional[NodeField] = None

    @property
    def failures(self) -> int:
        return sum(s.failed for s in self.samples)

    @property
    def rejections(self) -> int:
        return sum(s.rejected for s in self.samples)


@dataclass
class EnsembleReport:
    runs: List[EnsembleRun]
    distribution: EnsembleRun
    bound_checks: List[BoundCheck]
    baseline: BaselineNorms
    truth: NodeField
    wall_time: float = 0.0

    @property
    def stability_rows(self) -> List[Dict]:
        return [{"sweep": r.sweep, "level": r.level, "E_S": r.E_S} for r in self.runs]

    @property
    def mean_source(self) -> NodeField:
        return self.distribution.mean_source

    @property
    def mean_error(self) -> float:
        """L2 distance of the mean reconstruction to the truth, interior nodes"""
        g = self.truth.grid
        return discrete_norm(NodeField(g, np.where(g.interior_mask(), self.mean_source.values - self.truth.values, 0.0)))

    @property
    def median_error(self) -> float:
        return float(np.median([s.dS_L2 for s in self.distribution.samples if not s.failed]))

    @property
    def failures(self) -> int:
        return sum(r.failures for r in self.runs)

    @property
    def rejections(self) -> int:
        return sum(r.rejections for r in self.runs)


@dataclass
class _WorkerContext:
    ensemble: PerturbationEnsemble
    coefficients: OpticalCoefficients
    grid: Grid2D
    true_fields: SampledFields
    H: NodeField
    psi: NodeField
    truth: NodeField
    seed: int
    max_redraws: int
    adjoint_mode: AdjointMode = AdjointMode.DATA
    gamma_set: Optional[BoundarySelection] = None
    f: float = 1.0


_context: Optional[_WorkerContext] = None


def _init_worker(context: _WorkerContext):
    global _context
    _context = context


def _draw_admissible(ctx: _WorkerContext, sample_id: int, e_D: float, e_sigma: float,
                     g: Grid2D, true_fields: SampledFields):
    """Redraw with the next counter value until the perturbed coefficients are admissible"""
    for attempt in range(ctx.max_redraws + 1):
        rng = np.random.default_rng([ctx.seed, sample_id, attempt])
        xi = float(rng.uniform(-1.0, 1.0))
        u_D, u_sigma = draw_perturbation(ctx.ensemble, xi)
        perturbed = perturb_coefficients(ctx.coefficients, u_D, u_sigma, e_D, e_sigma, g, true_fields)
        if perturbed.admissible:
            return xi, perturbed, attempt
        logger.debug(f"Sample {sample_id} rejected | attempt={attempt} | {perturbed.reason}")
    raise PerturbationError(f"No admissible draw for sample {sample_id} after {ctx.max_redraws + 1} attempts")


def _run_sample(task: Tuple[int, float, float]) -> Tuple[UqSample, Optional[np.ndarray]]:
    """Reconstruct one perturbed sample; failures are recorded, never raised"""
    sample_id, e_D, e_sigma = task
    ctx = _context
    sample = UqSample(sample_id, float("nan"), e_D, e_sigma)
    try:
        xi, perturbed, rejected = _draw_admissible(ctx, sample_id, e_D, e_sigma, ctx.grid, ctx.true_fields)
        result = get_pipeline_service().reconstruct_source(
            ctx.grid, perturbed.coefficients, ctx.psi, ctx.H,
            adjoint_mode=ctx.adjoint_mode, gamma_set=ctx.gamma_set, f=ctx.f,
        )
        interior = ctx.grid.interior_mask()
        delta = NodeField(ctx.grid, np.where(interior, result.source.values - ctx.truth.values, 0.0))
        sample.xi = xi
        sample.rejected = rejected
        sample.dD_H1 = perturbed.dD_H1
        sample.dSigma_L2 = perturbed.dSigma_L2
        sample.dS_L2 = discrete_norm(delta, "L2")
        return sample, result.source.values
    except Exception as e:
        log_error(e, f"ensemble sample {sample_id}")
        sample.error = f"{type(e).__name__}: {e}"
        return sample, None


class UQService:
    """
    Service class for perturbation ensembles
    Samples run in a process pool over immutable shared inputs and are merged
    by sample index
    """

    def __init__(self):
        """Initialize UQ Service"""
        self.max_failure_fraction = settings.MAX_FAILURE_FRACTION
        self.max_redraws = settings.MAX_REDRAWS
        logger.debug(
            f"UQ Service initialized | max_failure_fraction={self.max_failure_fraction} | "
            f"max_redraws={self.max_redraws}"
        )

    def baseline_norms(self, c: OpticalCoefficients, truth: NodeField,
                       fields: Optional[SampledFields] = None) -> BaselineNorms:
        fields = fields or sample_fields(c, None, truth.grid)
        return BaselineNorms(
            D_H1=diffusion_norm(fields),
            sigma_L2=discrete_norm(fields.sigma, "L2"),
            S_L2=discrete_norm(truth.interior_masked(), "L2"),
        )

    def run_ensemble(
        self,
        c: OpticalCoefficients,
        s: SourceField,
        data: TwoGridData,
        plan: EnsemblePlan,
    ) -> EnsembleReport:
        """
        Run every sweep of the plan against the two-grid internal data

        Args:
            c: True coefficients (perturbed per sample for the inversion)
            s: True source (used for the bound-check data)
            data: Fine-grid data restricted to the coarse grid
            plan: Levels, sweep kind, sample count, seed and jobs

        Returns:
            EnsembleReport; raises EnsembleError when more than
            MAX_FAILURE_FRACTION of a run's samples fail
        """
        start = time.time()
        grid = data.coarse_grid
        ensemble = build_perturbation_ensemble(plan.k_max, plan.seed)
        true_fields = sample_fields(c, None, grid)
        baseline = self.baseline_norms(c, data.source_coarse, true_fields)
        context = _WorkerContext(
            ensemble=ensemble,
            coefficients=c,
            grid=grid,
            true_fields=true_fields,
            H=data.H_coarse,
            psi=data.psi_coarse,
            truth=data.source_coarse,
            seed=plan.seed,
            max_redraws=self.max_redraws,
            adjoint_mode=AdjointMode(plan.adjoint_mode),
            gamma_set=plan.gamma_set,
            f=plan.f,
        )

        runs = []
        distribution = None
        pool = None
        try:
            if plan.jobs > 1:
                pool = mp.Pool(processes=plan.jobs, initializer=_init_worker, initargs=(context,))
            else:
                _init_worker(context)

            for sweep, level, e_D, e_sigma, is_distribution in plan.runs():
                run = self._run_level(pool, context, sweep, level, e_D, e_sigma, plan, baseline)
                runs.append(run)
                if is_distribution:
                    distribution = run
        finally:
            if pool is not None:
                pool.close()
                pool.join()

        bound_checks = self._bound_checks(context, s, distribution, plan)
        report = EnsembleReport(runs, distribution, bound_checks, baseline, data.source_coarse,
                                time.time() - start)
        log_stage(
            "ensemble", runs=len(runs), samples=plan.samples, failures=report.failures,
            rejections=report.rejections, mean_error=report.mean_error, median_error=report.median_error,
            wall_time=report.wall_time,
        )
        return report

    def _run_level(self, pool, context: _WorkerContext, sweep: str, level: float, e_D: float,
                   e_sigma: float, plan: EnsemblePlan, baseline: BaselineNorms) -> EnsembleRun:
        tasks = [(i, e_D, e_sigma) for i in range(plan.samples)]
        if pool is None:
            results = [_run_sample(t) for t in tasks]
        else:
            chunksize = max(1, len(tasks) // (4 * plan.jobs))
            results = list(pool.imap(_run_sample, tasks, chunksize=chunksize))
        results.sort(key=lambda r: r[0].sample_id)

        samples = [r[0] for r in results]
        sources = [r[1] for r in results if r[1] is not None]
        failures = len(samples) - len(sources)
        if failures > self.max_failure_fraction * len(samples):
            raise EnsembleError(
                f"{failures} of {len(samples)} samples failed in sweep {sweep} at level {level:g}"
            )

        E_S, E_D, E_sigma = relative_std_metrics(samples, baseline)
        mean_source = NodeField(context.grid, np.mean(sources, axis=0))
        log_stage(
            "sweep", sweep=sweep, level=level, E_S=E_S, E_D=E_D, E_sigma=E_sigma,
            failures=failures, rejections=sum(s.rejected for s in samples),
        )
        return EnsembleRun(sweep, level, e_D, e_sigma, samples, E_S, E_D, E_sigma, mean_source)

    def _bound_checks(self, context: _WorkerContext, s: SourceField, run: EnsembleRun,
                      plan: EnsemblePlan) -> List[BoundCheck]:
        """Discrete stability bound on a reduced single grid for the first samples of a run"""
        count = min(plan.bound_check_count, plan.samples)
        if count <= 0:
            return []
        pipeline = get_pipeline_service()
        c = context.coefficients
        g = build_grid(context.grid.bounds, plan.bound_grid_n, plan.bound_grid_n)
        fields = sample_fields(c, s, g)
        phi0 = pipeline.forward_solve(g, c, s, fields=fields)
        adjoint = pipeline.adjoint_positive(g, c, plan.gamma_set, plan.f, fields)
        internal = pipeline.internal_data(g, c, s, phi0, adjoint.psi, fields=fields)
        L = assemble_forward_matrix(g, c, fields).matrix
        A = assemble_internal_matrix(g, c, adjoint.psi, fields).matrix
        h = assemble_rhs(g, RhsKind.INTERNAL, internal.H)

        checks = []
        for sample_id in range(count):
            try:
                _, perturbed, _ = _draw_admissible(context, sample_id, run.e_D, run.e_sigma, g, fields)
                L_tilde = assemble_forward_matrix(g, perturbed.coefficients, perturbed.fields).matrix
                A_tilde = assemble_internal_matrix(g, perturbed.coefficients, adjoint.psi, perturbed.fields).matrix
                check = discrete_uq_bound(L, L_tilde, A, A_tilde, h)
            except Exception as e:
                log_error(e, f"bound check {sample_id}")
                continue
            check.sample_id = sample_id
            if not check.holds:
                logger.warning(f"Bound violated | sample={sample_id} | lhs={check.lhs:.4g} | rhs={check.rhs:.4g}")
            checks.append(check)
        logger.info(f"✓ Bound checks: {sum(c.holds for c in checks)}/{len(checks)} hold on {g.describe()}")
        return checks


# Singleton instance
_uq_service = None


def get_uq_service() -> UQService:
    """Get or create UQ service singleton"""
    global _uq_service
    if _uq_service is None:
        _uq_service = UQService()
    return _uq_service
