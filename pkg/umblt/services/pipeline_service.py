"""
UMBLT Pipeline Service
Forward solve, positive adjoint, internal data, measurement expansion and
source reconstruction
"""

import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
from scipy.integrate import trapezoid

from .assembly_service import (
    BoundarySelection,
    RhsKind,
    assemble_forward_matrix,
    assemble_forward_system,
    assemble_internal_matrix,
    assemble_mixed_adjoint,
    assemble_modulated_forward,
    assemble_modulation_derivative,
    assemble_rhs,
    staggered_product,
)
from .solver_service import SolveReport, get_solver_service
from ..models.coefficients import (
    ModulationParams,
    OpticalCoefficients,
    SampledFields,
    SourceField,
    sample_fields,
)
from ..models.mesh import Grid2D, NodeField, Side, discrete_norm, restrict_fine_to_coarse
from ..utils.errors import PositivityError
from ..utils.logger import get_logger, log_error, log_stage

logger = get_logger(__name__)


class AdjointMode(str, Enum):
    """data pairs the supplied psi_0 with H; believed re-solves the adjoint with the inversion coefficients"""
    DATA = "data"
    BELIEVED = "believed"


@dataclass
class AdjointSolution:
    """Positive adjoint psi_0 and the Robin data g it induces"""
    psi: NodeField
    robin_data: NodeField
    selection: BoundarySelection
    dirichlet_mask: np.ndarray
    report: SolveReport

    @property
    def min_psi(self) -> float:
        return float(self.psi.values.min())


@dataclass
class InternalData:
    """
    Internal functional H_psi and the adjoint that produced it.

    Boundary entries of H use one-sided products (diagnostic_mask) and never
    enter a reconstruction right-hand side.
    """
    H: NodeField
    psi: NodeField
    gamma: float
    provenance: str
    diagnostic_mask: np.ndarray

    @property
    def F(self) -> NodeField:
        """H_psi / psi"""
        return NodeField(self.H.grid, self.H.values / self.psi.values)


@dataclass
class ReconstructionDiagnostics:
    residual: float
    min_psi: float
    adjoint_mode: str
    reports: Dict[str, SolveReport] = field(default_factory=dict)


@dataclass
class ReconstructionResult:
    """Reconstructed source (interior entries meaningful) and phi_0"""
    source: NodeField
    phi0: NodeField
    interior_mask: np.ndarray
    diagnostics: ReconstructionDiagnostics

    def relative_error(self, truth: NodeField) -> float:
        """Relative L2 error against truth, interior nodes only"""
        return relative_interior_error(self.source, truth)


@dataclass
class ExpansionRow:
    epsilon: float
    measurement: float
    quotient: float
    quotient_mismatch: float
    remainder: float


@dataclass
class MeasurementExpansionReport:
    """
    First-order check of M(eps) = M(0) + eps * int H_psi cos(q.x + varphi) + O(eps^2).

    remainder = |M(eps) - M(0) - eps dM| with dM the exact discrete derivative;
    quotient_mismatch = |(M(eps) - M(0)) / eps - int H cos|.
    """
    baseline: float
    internal_integral: float
    derivative: float
    rows: List[ExpansionRow]
    remainder_order: float
    mismatch_order: float

    @property
    def consistency_gap(self) -> float:
        """|dM - int H cos| / |int H cos|"""
        scale = abs(self.internal_integral)
        return abs(self.derivative - self.internal_integral) / (scale if scale > 0 else 1.0)


@dataclass
class TwoGridData:
    """Fine-grid data products and their coarse restrictions"""
    fine_grid: Grid2D
    coarse_grid: Grid2D
    phi0_fine: NodeField
    adjoint: AdjointSolution
    internal: InternalData
    H_coarse: NodeField
    psi_coarse: NodeField
    source_coarse: NodeField


def relative_interior_error(estimate: NodeField, truth: NodeField) -> float:
    mask = truth.grid.interior_mask()
    diff = NodeField(truth.grid, np.where(mask, estimate.values - truth.values, 0.0))
    scale = discrete_norm(truth.interior_masked(), "L2")
    return discrete_norm(diff, "L2") / (scale if scale > 0 else 1.0)


def boundary_weights(g: Grid2D, sides: Optional[Sequence[Side]] = None) -> np.ndarray:
    """Trapezoid weights along the chosen sides; each corner gets h/2 per incident side"""
    weights = np.zeros(g.n_nodes)
    for side in sides or tuple(Side):
        side = Side(side)
        h = g.dy if side in (Side.LEFT, Side.RIGHT) else g.dx
        nodes = g.side_nodes(side)
        w = np.full(nodes.size, h)
        w[0] = w[-1] = 0.5 * h
        weights[nodes] += w
    return weights


def boundary_quadrature(g: Grid2D, values, selection: Optional[BoundarySelection] = None) -> float:
    """Trapezoid rule over the selected sides (all sides when selection is None)"""
    vec = values.values if isinstance(values, NodeField) else np.asarray(values, dtype=float)
    sides = None if selection is None else [s.side for s in selection.sides]
    return float(np.dot(boundary_weights(g, sides), vec))


def domain_quadrature(g: Grid2D, values) -> float:
    """Tensor trapezoid rule over the rectangle"""
    arr = values.as_array() if isinstance(values, NodeField) else np.asarray(values, dtype=float).reshape(g.shape)
    return float(trapezoid(trapezoid(arr, dx=g.dy, axis=1), dx=g.dx))


def _fit_order(eps: np.ndarray, values: np.ndarray) -> float:
    values = np.abs(values)
    if eps.size < 2 or np.any(values <= 0):
        return float("nan")
    return float(np.polyfit(np.log(eps), np.log(values), 1)[0])


class PipelineService:
    """
    Service class for the UMBLT workflow
    Every stage logs residual, minimum adjoint and wall time
    """

    def __init__(self):
        """Initialize Pipeline Service"""
        self.solver = get_solver_service()
        logger.debug("Pipeline Service initialized")

    def forward_solve(
        self,
        g: Grid2D,
        c: OpticalCoefficients,
        s: SourceField,
        robin_data: Optional[Union[NodeField, np.ndarray]] = None,
        fields: Optional[SampledFields] = None,
    ) -> NodeField:
        """
        Solve L phi_0 = s (plus optional Robin data on boundary rows)

        Args:
            g: Grid
            c: Coefficients
            s: Source
            robin_data: Boundary data g (zero when omitted)
            fields: Pre-sampled coefficients and source on g

        Returns:
            phi_0 as a NodeField
        """
        start = time.time()
        try:
            system = assemble_forward_system(g, c, s, fields, robin_data)
            report = self.solver.solve_sparse(system)
            phi = NodeField(g, report.solution)
        except Exception as e:
            log_error(e, "forward_solve")
            raise

        if system.rhs.min() >= 0 and robin_data is None and phi.values.min() < -1e-10 * max(1.0, phi.values.max()):
            logger.warning(f"Forward solution has negative values (min {phi.values.min():.3e}) for a nonnegative source")
        log_stage("forward", grid=g.describe(), residual=report.residual_norm, wall_time=time.time() - start)
        return phi

    def adjoint_positive(
        self,
        g: Grid2D,
        c: OpticalCoefficients,
        gamma_set: Optional[BoundarySelection] = None,
        f=1.0,
        fields: Optional[SampledFields] = None,
    ) -> AdjointSolution:
        """
        Positive adjoint with Dirichlet data f on Gamma and zero Robin data elsewhere

        The induced Robin data g = psi_0 + ell nu.D grad psi_0 is the L-row
        evaluation on Dirichlet nodes and exactly zero on the Robin nodes.
        Raises PositivityError with the offending node when min psi_0 <= 0.
        """
        start = time.time()
        selection = gamma_set or BoundarySelection.full()
        try:
            fields = fields or sample_fields(c, None, g)
            system = assemble_mixed_adjoint(g, c, selection, f, fields)
            report = self.solver.solve_sparse(system)
        except Exception as e:
            log_error(e, "adjoint_positive")
            raise

        psi = report.solution
        k = int(np.argmin(psi))
        if psi[k] <= 0:
            i, j = g.inverse_index(k + 1)
            X, Y = g.node_coordinates()
            point = (float(X.ravel()[k]), float(Y.ravel()[k]))
            error = PositivityError(
                f"Adjoint is not positive: psi({i}, {j}) = {psi[k]:.4g} at {point}", (i, j), point, float(psi[k])
            )
            log_error(error, "adjoint_positive")
            raise error

        mask = selection.node_mask(g)
        forward = assemble_forward_matrix(g, c, fields)
        robin = np.where(mask, forward.matrix @ psi, 0.0)

        log_stage(
            "adjoint", grid=g.describe(), gamma=selection.describe(), residual=report.residual_norm,
            min_psi=float(psi[k]), wall_time=time.time() - start,
        )
        return AdjointSolution(NodeField(g, psi), NodeField(g, robin), selection, mask, report)

    def internal_data(
        self,
        g: Grid2D,
        c: OpticalCoefficients,
        s: SourceField,
        phi0: NodeField,
        psi0: NodeField,
        gamma: Optional[float] = None,
        fields: Optional[SampledFields] = None,
    ) -> InternalData:
        """
        H_psi = (2 gamma - 1) D grad phi_0 . grad psi + (2 gamma + 1) sigma_a phi_0 psi - psi S

        The gradient product uses the edge-averaged staggered form, which makes
        A_psi phi_0 = H_psi hold exactly at interior nodes when L phi_0 = s.
        """
        gamma = c.gamma if gamma is None else float(gamma)
        if psi0.values.min() <= 0:
            k = int(np.argmin(psi0.values))
            raise PositivityError(f"Adjoint is not positive at node {g.inverse_index(k + 1)}", g.inverse_index(k + 1))
        if fields is None or fields.source is None:
            fields = sample_fields(c, s, g)

        phi, psi = phi0.values, psi0.values
        product = staggered_product(fields, phi, psi)
        H = (
            (2 * gamma - 1) * product
            + (2 * gamma + 1) * fields.sigma.values * phi * psi
            - psi * fields.source.values
        )
        log_stage("internal_data", grid=g.describe(), gamma=gamma, max_abs_H=float(np.abs(H).max()))
        return InternalData(NodeField(g, H), psi0, gamma, g.describe(), g.boundary_mask())

    def simulate_measurement_expansion(
        self,
        g: Grid2D,
        c: OpticalCoefficients,
        s: SourceField,
        m: ModulationParams,
        epsilons: Sequence[float] = (1e-1, 1e-2, 1e-3),
        gamma_set: Optional[BoundarySelection] = None,
        f=1.0,
    ) -> MeasurementExpansionReport:
        """
        Validate the first-order expansion of the modulated boundary measurement

        M(eps) = -(1/ell) * sum over the boundary of g phi_eps (trapezoid rule),
        compared with the internal quadrature of H_psi cos(q.x + varphi).

        Args:
            g: Grid
            c: Unmodulated coefficients
            s: Source
            m: Wave vector and phase (its epsilon is ignored)
            epsilons: Ladder of modulation amplitudes
            gamma_set: Partial-data boundary part (full data when None)
            f: Adjoint Dirichlet data

        Returns:
            MeasurementExpansionReport
        """
        start = time.time()
        try:
            fields = sample_fields(c, s, g)
            adjoint = self.adjoint_positive(g, c, gamma_set, f, fields)
            system = assemble_forward_system(g, c, s, fields)
            lu = self.solver.factorize(system.matrix)
            phi0 = lu.solve(system.rhs)
            internal = self.internal_data(g, c, s, NodeField(g, phi0), adjoint.psi, fields=fields)

            X, Y = g.node_coordinates()
            integral = domain_quadrature(g, internal.H.as_array() * m.wave(X, Y))

            weights = boundary_weights(g, None if gamma_set is None else [e.side for e in gamma_set.sides])
            pairing = -(weights * adjoint.robin_data.values) / c.ell
            baseline = float(pairing @ phi0)

            L1, s1 = assemble_modulation_derivative(g, c, s, m)
            phi_dot = lu.solve(s1 - L1 @ phi0)
            derivative = float(pairing @ phi_dot)

            rows = []
            for eps in epsilons:
                modulated = assemble_modulated_forward(g, c, s, m.with_epsilon(eps))
                phi_eps = self.solver.solve_sparse(modulated).solution
                value = float(pairing @ phi_eps)
                quotient = (value - baseline) / eps
                rows.append(ExpansionRow(
                    epsilon=float(eps),
                    measurement=value,
                    quotient=quotient,
                    quotient_mismatch=abs(quotient - integral),
                    remainder=abs(value - baseline - eps * derivative),
                ))
        except Exception as e:
            log_error(e, "simulate_measurement_expansion")
            raise

        eps_arr = np.array([r.epsilon for r in rows])
        report = MeasurementExpansionReport(
            baseline=baseline,
            internal_integral=integral,
            derivative=derivative,
            rows=rows,
            remainder_order=_fit_order(eps_arr, np.array([r.remainder for r in rows])),
            mismatch_order=_fit_order(eps_arr, np.array([r.quotient_mismatch for r in rows])),
        )
        log_stage(
            "measurement_expansion", grid=g.describe(), remainder_order=report.remainder_order,
            mismatch_order=report.mismatch_order, gap=report.consistency_gap, wall_time=time.time() - start,
        )
        return report

    def reconstruct_source(
        self,
        g: Grid2D,
        c_believed: OpticalCoefficients,
        psi0: NodeField,
        H: NodeField,
        gamma: Optional[float] = None,
        adjoint_mode: Union[AdjointMode, str] = AdjointMode.DATA,
        gamma_set: Optional[BoundarySelection] = None,
        f=1.0,
    ) -> ReconstructionResult:
        """
        Solve A_psi phi_0 = h_psi and return S = (L phi_0) on interior nodes

        Args:
            g: Coarse grid
            c_believed: Coefficients used for inversion (may differ from the truth)
            psi0: Adjoint paired with H
            H: Internal data on g
            gamma: Override for c_believed.gamma
            adjoint_mode: "data" uses psi0; "believed" re-solves the adjoint
                with c_believed and the same Dirichlet data
            gamma_set: Dirichlet part for the "believed" adjoint
            f: Dirichlet data for the "believed" adjoint

        Returns:
            ReconstructionResult with boundary entries of the source set to 0
        """
        start = time.time()
        if gamma is not None:
            c_believed = c_believed.replace(gamma=float(gamma))
        try:
            mode = AdjointMode(adjoint_mode)
            fields = sample_fields(c_believed, None, g)
            reports = {}
            if mode == AdjointMode.BELIEVED:
                adjoint = self.adjoint_positive(g, c_believed, gamma_set, f, fields)
                psi0 = adjoint.psi
                reports["adjoint"] = adjoint.report

            A = assemble_internal_matrix(g, c_believed, psi0, fields)
            h = assemble_rhs(g, RhsKind.INTERNAL, H)
            report = self.solver.solve_sparse(A.matrix, h)
            reports["internal"] = report

            L = assemble_forward_matrix(g, c_believed, fields)
            interior = g.interior_mask()
            source = np.where(interior, L.matrix @ report.solution, 0.0)
        except Exception as e:
            log_error(e, "reconstruct_source")
            raise

        residual = float(np.linalg.norm(A.matrix @ report.solution - h))
        min_psi = float(psi0.values.min())
        log_stage(
            "reconstruct", grid=g.describe(), residual=residual, min_psi=min_psi,
            adjoint=mode.value, wall_time=time.time() - start,
        )
        return ReconstructionResult(
            source=NodeField(g, source),
            phi0=NodeField(g, report.solution),
            interior_mask=interior,
            diagnostics=ReconstructionDiagnostics(residual, min_psi, mode.value, reports),
        )

    def prepare_two_grid(
        self,
        c: OpticalCoefficients,
        s: SourceField,
        fine: Grid2D,
        coarse: Grid2D,
        gamma_set: Optional[BoundarySelection] = None,
        f=1.0,
    ) -> TwoGridData:
        """
        Generate data on the fine grid and resample it onto the coarse grid

        Forward and adjoint solves and H_psi are computed on the fine grid;
        H_psi, psi_0 and the true source are injected onto the coarse grid.
        """
        coarse.refinement_factor(fine)
        fields = sample_fields(c, s, fine)
        phi0 = self.forward_solve(fine, c, s, fields=fields)
        adjoint = self.adjoint_positive(fine, c, gamma_set, f, fields)
        internal = self.internal_data(fine, c, s, phi0, adjoint.psi, fields=fields)

        X, Y = coarse.node_coordinates()
        data = TwoGridData(
            fine_grid=fine,
            coarse_grid=coarse,
            phi0_fine=phi0,
            adjoint=adjoint,
            internal=internal,
            H_coarse=restrict_fine_to_coarse(internal.H, coarse),
            psi_coarse=restrict_fine_to_coarse(adjoint.psi, coarse),
            source_coarse=NodeField(coarse, np.broadcast_to(s(X, Y), coarse.shape)),
        )
        log_stage("two_grid", fine=fine.describe(), coarse=coarse.describe(), min_psi=adjoint.min_psi)
        return data


# Singleton instance
_pipeline_service = None


def get_pipeline_service() -> PipelineService:
    """Get or create pipeline service singleton"""
    global _pipeline_service
    if _pipeline_service is None:
        _pipeline_service = PipelineService()
    return _pipeline_service
