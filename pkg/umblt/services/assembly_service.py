"""
Sparse System Assembly
Staggered-grid discretizations of the forward operator L, the internal-data
operator A_psi and the mixed Dirichlet/Robin adjoint problem
"""

from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np
import scipy.io
import scipy.sparse as sp

from ..models.coefficients import (
    ModulationParams,
    OpticalCoefficients,
    SampledFields,
    SourceField,
    modulate_coefficients,
    sample_fields,
    tensor_eigenvalues,
)
from ..models.mesh import EdgeField, Grid2D, NodeField, Side
from ..utils.errors import AssemblyError, CoefficientError
from ..utils.logger import get_logger

logger = get_logger(__name__)

CORNER_FACTOR = np.sqrt(2.0) / 2.0


class SystemKind(str, Enum):
    FORWARD = "forward"
    INTERNAL = "internal"
    MIXED_ADJOINT = "mixed_adjoint"


class RhsKind(str, Enum):
    SOURCE = "source"
    BOUNDARY = "boundary"
    INTERNAL = "internal"


@dataclass(frozen=True, eq=False)
class SparseSystem:
    """CSR matrix plus right-hand side for one of the discretized problems"""
    matrix: sp.csr_matrix
    rhs: np.ndarray
    kind: SystemKind
    grid: Grid2D

    def __post_init__(self):
        n = self.grid.n_nodes
        if self.matrix.shape != (n, n):
            raise AssemblyError(f"Matrix shape {self.matrix.shape} does not match {n} grid nodes")
        rhs = np.asarray(self.rhs, dtype=float)
        if rhs.shape != (n,):
            raise AssemblyError(f"Right-hand side has shape {rhs.shape}, expected ({n},)")
        if np.any(self.matrix.diagonal() == 0):
            row = int(np.flatnonzero(self.matrix.diagonal() == 0)[0])
            raise AssemblyError(f"Row {row} of the {self.kind.value} matrix has a zero diagonal")
        rhs = rhs.copy()
        rhs.flags.writeable = False
        object.__setattr__(self, "rhs", rhs)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def triplets(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Consolidated (row, col, value) triples, 0-based"""
        coo = self.matrix.tocoo()
        return coo.row, coo.col, coo.data

    def with_rhs(self, rhs: np.ndarray) -> "SparseSystem":
        return SparseSystem(self.matrix, rhs, self.kind, self.grid)

    def to_matrix_market(self, path: Union[str, Path], include_rhs: bool = False):
        """Write the matrix (and optionally the rhs as <stem>_rhs.mtx) in Matrix Market format"""
        path = Path(path)
        scipy.io.mmwrite(str(path), self.matrix, comment=f"{self.kind.value} system on {self.grid.describe()}")
        if include_rhs:
            scipy.io.mmwrite(str(path.with_name(path.stem + "_rhs.mtx")), self.rhs.reshape(-1, 1))


# ----------------------------------------------------------------------
# Boundary selection
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class SideInterval:
    """One side of the domain, optionally restricted to an open parameter interval"""
    side: Side
    interval: Optional[Tuple[float, float]] = None

    def __post_init__(self):
        object.__setattr__(self, "side", Side(self.side))
        if self.interval is not None:
            lo, hi = (float(v) for v in self.interval)
            if not lo < hi:
                raise AssemblyError(f"Empty interval ({lo}, {hi}) on side {self.side.value}")
            object.__setattr__(self, "interval", (lo, hi))

    def describe(self) -> str:
        if self.interval is None:
            return self.side.value
        return f"{self.side.value}:{self.interval[0]:g}:{self.interval[1]:g}"


_CORNER_SIDES = {
    (0, 0): (Side.LEFT, Side.BOTTOM),
    (0, -1): (Side.LEFT, Side.TOP),
    (-1, 0): (Side.RIGHT, Side.BOTTOM),
    (-1, -1): (Side.RIGHT, Side.TOP),
}


@dataclass(frozen=True)
class BoundarySelection:
    """
    Open boundary subset Gamma carrying Dirichlet data.

    Each selected side contributes the nodes strictly inside its parameter
    interval, so endpoints of Gamma go to the Robin side. A corner is a
    Dirichlet node only when both incident sides are selected in full.
    """
    sides: Tuple[SideInterval, ...]

    def __post_init__(self):
        sides = tuple(s if isinstance(s, SideInterval) else SideInterval(Side(s)) for s in self.sides)
        if not sides:
            raise AssemblyError("Boundary selection Gamma is empty")
        names = [s.side for s in sides]
        if len(set(names)) != len(names):
            raise AssemblyError(f"Duplicate side in boundary selection: {[n.value for n in names]}")
        object.__setattr__(self, "sides", sides)

    @classmethod
    def full(cls) -> "BoundarySelection":
        return cls(tuple(SideInterval(s) for s in Side))

    @classmethod
    def parse(cls, text: str) -> "BoundarySelection":
        """Parse `top,left:-0.5:0.5` style selections"""
        parts = [p.strip() for p in text.split(",") if p.strip()]
        sides = []
        for part in parts:
            fields = part.split(":")
            try:
                side = Side(fields[0].lower())
            except ValueError:
                raise AssemblyError(f"Unknown boundary side: {fields[0]}")
            if len(fields) == 1:
                sides.append(SideInterval(side))
            elif len(fields) == 3:
                sides.append(SideInterval(side, (float(fields[1]), float(fields[2]))))
            else:
                raise AssemblyError(f"Malformed boundary selection entry: {part}")
        return cls(tuple(sides))

    @property
    def is_full(self) -> bool:
        return len(self.sides) == 4 and all(s.interval is None for s in self.sides)

    def describe(self) -> str:
        return ",".join(s.describe() for s in self.sides)

    def node_mask(self, g: Grid2D) -> np.ndarray:
        """Flat boolean mask of the Dirichlet nodes"""
        mask = np.zeros(g.shape, dtype=bool)
        full_sides = set()
        for entry in self.sides:
            coords = g.side_coordinate(entry.side)
            lo, hi = entry.interval if entry.interval is not None else (coords[0], coords[-1])
            inside = (coords > lo) & (coords < hi)
            inside[0] = inside[-1] = False
            if entry.side == Side.LEFT:
                mask[0, :] |= inside
            elif entry.side == Side.RIGHT:
                mask[-1, :] |= inside
            elif entry.side == Side.BOTTOM:
                mask[:, 0] |= inside
            else:
                mask[:, -1] |= inside
            if entry.interval is None:
                full_sides.add(entry.side)
        for (ci, cj), incident in _CORNER_SIDES.items():
            if all(side in full_sides for side in incident):
                mask[ci, cj] = True
        return mask.ravel()

    def contains_side(self, side: Side) -> bool:
        return any(s.side == Side(side) for s in self.sides)


# ----------------------------------------------------------------------
# Edge flux operators
# ----------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class FluxOperators:
    """
    Sparse maps from node values to the normal flux on each half-point.

    gx gives F1 = D11 du/dx + D12 [du/dy] on the x-edges (i + 1/2, j) and gy
    gives F2 = D12 [du/dx] + D22 du/dy on the y-edges (i, j + 1/2). The
    tangential derivative is the mean of the centred derivatives at the two
    end nodes, one-sided on the boundary lines.
    """
    grid: Grid2D
    gx: sp.csr_matrix
    gy: sp.csr_matrix


def _node_ids(g: Grid2D, i: np.ndarray, j: np.ndarray) -> np.ndarray:
    return (i * g.ny + j).ravel()


def build_flux_operators(fields: SampledFields) -> FluxOperators:
    g = fields.grid
    (d11x, d12x), (d12y, d22y) = fields.edge_components()

    # x-edges
    i, j = np.meshgrid(np.arange(g.nx - 1), np.arange(g.ny), indexing="ij")
    n_xe = i.size
    rows = [np.arange(n_xe)] * 2
    cols = [_node_ids(g, i + 1, j), _node_ids(g, i, j)]
    normal = (d11x / g.dx).ravel()
    vals = [normal, -normal]
    if d12x is not None:
        jp = np.minimum(j + 1, g.ny - 1)
        jm = np.maximum(j - 1, 0)
        t = (d12x / ((jp - jm) * 2.0 * g.dy)).ravel()
        rows += [np.arange(n_xe)] * 4
        cols += [_node_ids(g, i, jp), _node_ids(g, i + 1, jp), _node_ids(g, i, jm), _node_ids(g, i + 1, jm)]
        vals += [t, t, -t, -t]
    gx = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n_xe, g.n_nodes)
    ).tocsr()

    # y-edges
    i, j = np.meshgrid(np.arange(g.nx), np.arange(g.ny - 1), indexing="ij")
    n_ye = i.size
    rows = [np.arange(n_ye)] * 2
    cols = [_node_ids(g, i, j + 1), _node_ids(g, i, j)]
    normal = (d22y / g.dy).ravel()
    vals = [normal, -normal]
    if d12y is not None:
        ip = np.minimum(i + 1, g.nx - 1)
        im = np.maximum(i - 1, 0)
        t = (d12y / ((ip - im) * 2.0 * g.dx)).ravel()
        rows += [np.arange(n_ye)] * 4
        cols += [_node_ids(g, ip, j), _node_ids(g, ip, j + 1), _node_ids(g, im, j), _node_ids(g, im, j + 1)]
        vals += [t, t, -t, -t]
    gy = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n_ye, g.n_nodes)
    ).tocsr()

    return FluxOperators(g, gx, gy)


def _edge_weights(g: Grid2D, psi: Optional[np.ndarray], kappa: float):
    """
    Per-node multipliers of the east/west/north/south edge fluxes in interior rows.

    Without psi the rows realize -div(D grad u); with psi they realize the
    psi-weighted +div(D grad u) of A_psi, each edge weighted by
    psi_ij + kappa (psi_neighbour - psi_ij).
    """
    if psi is None:
        ones = np.ones(g.shape)
        return -ones, ones, -ones, ones
    p = psi.reshape(g.shape)
    east = np.zeros(g.shape)
    west = np.zeros(g.shape)
    north = np.zeros(g.shape)
    south = np.zeros(g.shape)
    east[:-1, :] = p[:-1, :] + kappa * (p[1:, :] - p[:-1, :])
    west[1:, :] = -(p[1:, :] + kappa * (p[:-1, :] - p[1:, :]))
    north[:, :-1] = p[:, :-1] + kappa * (p[:, 1:] - p[:, :-1])
    south[:, 1:] = -(p[:, 1:] + kappa * (p[:, :-1] - p[:, 1:]))
    return east, west, north, south


def _row_operators(g: Grid2D, ell: float, psi: Optional[np.ndarray], kappa: float):
    """Edge-to-row maps Wx (n x n_xe) and Wy (n x n_ye) for interior and Robin rows"""
    east, west, north, south = _edge_weights(g, psi, kappa)
    interior = g.interior_mask().reshape(g.shape)

    # interior rows
    ii, jj = np.nonzero(interior)
    node = ii * g.ny + jj
    wx_rows = [node, node]
    wx_cols = [ii * g.ny + jj, (ii - 1) * g.ny + jj]
    wx_vals = [east[ii, jj] / g.dx, west[ii, jj] / g.dx]
    wy_rows = [node, node]
    wy_cols = [ii * (g.ny - 1) + jj, ii * (g.ny - 1) + jj - 1]
    wy_vals = [north[ii, jj] / g.dy, south[ii, jj] / g.dy]

    # Robin rows: u + ell * (outward flux), corner normal along the diagonal
    jr = np.arange(g.ny)
    cy = np.where((jr == 0) | (jr == g.ny - 1), CORNER_FACTOR, 1.0)
    wx_rows += [0 * g.ny + jr, (g.nx - 1) * g.ny + jr]
    wx_cols += [0 * g.ny + jr, (g.nx - 2) * g.ny + jr]
    wx_vals += [-ell * cy, ell * cy]

    ir = np.arange(g.nx)
    cx = np.where((ir == 0) | (ir == g.nx - 1), CORNER_FACTOR, 1.0)
    wy_rows += [ir * g.ny + 0, ir * g.ny + (g.ny - 1)]
    wy_cols += [ir * (g.ny - 1) + 0, ir * (g.ny - 1) + (g.ny - 2)]
    wy_vals += [-ell * cx, ell * cx]

    wx = sp.coo_matrix(
        (np.concatenate(wx_vals), (np.concatenate(wx_rows), np.concatenate(wx_cols))),
        shape=(g.n_nodes, (g.nx - 1) * g.ny),
    ).tocsr()
    wy = sp.coo_matrix(
        (np.concatenate(wy_vals), (np.concatenate(wy_rows), np.concatenate(wy_cols))),
        shape=(g.n_nodes, g.nx * (g.ny - 1)),
    ).tocsr()
    return wx, wy


def _assemble(fields: SampledFields, c: OpticalCoefficients, psi: Optional[np.ndarray]) -> sp.csr_matrix:
    g = fields.grid
    kappa = (2.0 * c.gamma - 1.0) / 2.0
    flux = build_flux_operators(fields)
    wx, wy = _row_operators(g, c.ell, psi, kappa)

    interior = g.interior_mask()
    sigma = fields.sigma.values
    if psi is None:
        diag = np.where(interior, sigma, 1.0)
    else:
        diag = np.where(interior, 2.0 * c.gamma * sigma * psi, 1.0)

    matrix = (wx @ flux.gx + wy @ flux.gy + sp.diags(diag)).tocsr()
    matrix.sum_duplicates()
    matrix.eliminate_zeros()
    matrix.sort_indices()
    return matrix


def _fields_for(g: Grid2D, c: OpticalCoefficients, fields: Optional[SampledFields],
                s: Optional[SourceField] = None) -> SampledFields:
    if fields is not None:
        if fields.grid != g:
            raise AssemblyError(f"Sampled fields live on {fields.grid.describe()}, not {g.describe()}")
        return fields
    return sample_fields(c, s, g)


def _check_psi(g: Grid2D, psi: Union[NodeField, np.ndarray]) -> np.ndarray:
    values = psi.values if isinstance(psi, NodeField) else np.asarray(psi, dtype=float)
    if values.shape != (g.n_nodes,):
        raise AssemblyError(f"Adjoint has shape {values.shape}, expected ({g.n_nodes},)")
    if np.any(values <= 0):
        k = int(np.argmin(values))
        i, j = g.inverse_index(k + 1)
        raise AssemblyError(f"Adjoint must be positive; psi({i}, {j}) = {values[k]:.4g}")
    return values


def _check_spd(fields: SampledFields):
    lo_x, _ = tensor_eigenvalues(*(e.x_edges for e in fields.d_edges))
    lo_y, _ = tensor_eigenvalues(*(e.y_edges for e in fields.d_edges))
    lo_n, _ = tensor_eigenvalues(*(n.values for n in fields.d_nodes))
    worst = min(lo_x.min(), lo_y.min(), lo_n.min())
    if worst <= 0:
        raise CoefficientError(f"Diffusion tensor is not SPD: smallest sampled eigenvalue {worst:.4g}")


# ----------------------------------------------------------------------
# Public assembly operations
# ----------------------------------------------------------------------

def assemble_forward_matrix(
    g: Grid2D, c: OpticalCoefficients, fields: Optional[SampledFields] = None
) -> SparseSystem:
    """
    Forward matrix L (zero right-hand side)

    Interior rows discretize -div(D grad u) + sigma_a u; boundary rows
    discretize u + ell nu.D grad u with the diagonal normal at corners.
    Tensor-valued D is routed to assemble_anisotropic.
    """
    if c.is_anisotropic:
        return assemble_anisotropic(g, c, fields=fields)
    fields = _fields_for(g, c, fields)
    matrix = _assemble(fields, c, None)
    return SparseSystem(matrix, np.zeros(g.n_nodes), SystemKind.FORWARD, g)


def assemble_forward_system(
    g: Grid2D,
    c: OpticalCoefficients,
    s: SourceField,
    fields: Optional[SampledFields] = None,
    robin_data: Optional[np.ndarray] = None,
) -> SparseSystem:
    """L with rhs s (and optional Robin data g on boundary rows)"""
    fields = _fields_for(g, c, fields, s)
    if fields.source is None:
        fields = sample_fields(c, s, g)
    system = assemble_forward_matrix(g, c, fields)
    rhs = assemble_rhs(g, RhsKind.SOURCE, fields.source)
    if robin_data is not None:
        rhs = rhs + assemble_rhs(g, RhsKind.BOUNDARY, robin_data)
    return system.with_rhs(rhs)


def assemble_internal_matrix(
    g: Grid2D,
    c: OpticalCoefficients,
    psi: Union[NodeField, np.ndarray],
    fields: Optional[SampledFields] = None,
) -> SparseSystem:
    """
    Internal-data matrix A_psi (zero right-hand side)

    Interior off-diagonals are D_half (psi_ij + (2 gamma - 1)/2 (psi_nb - psi_ij)) / h^2,
    the diagonal is minus their sum plus 2 gamma sigma_ij psi_ij. Boundary
    rows coincide with the Robin rows of L.
    """
    psi_values = _check_psi(g, psi)
    if c.is_anisotropic:
        return assemble_anisotropic(g, c, psi=psi_values, fields=fields)
    fields = _fields_for(g, c, fields)
    matrix = _assemble(fields, c, psi_values)
    return SparseSystem(matrix, np.zeros(g.n_nodes), SystemKind.INTERNAL, g)


def assemble_anisotropic(
    g: Grid2D,
    c: OpticalCoefficients,
    psi: Optional[Union[NodeField, np.ndarray]] = None,
    fields: Optional[SampledFields] = None,
) -> SparseSystem:
    """
    Tensor-D forward matrix, or the internal-data matrix when psi is given

    Fluxes carry the D12 cross terms through averaged tangential derivatives
    (9-point interior stencil). Robin rows use the full tensor flux at the
    adjacent half-point.
    """
    fields = _fields_for(g, c, fields)
    if fields.is_tensor:
        _check_spd(fields)
    psi_values = None if psi is None else _check_psi(g, psi)
    matrix = _assemble(fields, c, psi_values)
    kind = SystemKind.FORWARD if psi_values is None else SystemKind.INTERNAL
    return SparseSystem(matrix, np.zeros(g.n_nodes), kind, g)


def _boundary_values(g: Grid2D, f, mask: np.ndarray) -> np.ndarray:
    if isinstance(f, NodeField):
        values = f.values
    elif callable(f):
        X, Y = g.node_coordinates()
        values = np.broadcast_to(np.asarray(f(X, Y), dtype=float), g.shape).ravel()
    else:
        values = np.broadcast_to(np.asarray(f, dtype=float), (g.n_nodes,))
    return np.where(mask, values, 0.0)


def assemble_mixed_adjoint(
    g: Grid2D,
    c: OpticalCoefficients,
    gamma_set: Optional[BoundarySelection],
    f=1.0,
    fields: Optional[SampledFields] = None,
) -> SparseSystem:
    """
    Mixed adjoint system: Dirichlet data f on Gamma, zero Robin data elsewhere

    Args:
        g: Grid
        c: Coefficients (sigma_a enters the interior rows, no source)
        gamma_set: Dirichlet boundary part; None selects the whole boundary
        f: Positive Dirichlet data (constant, callable or NodeField)
        fields: Pre-sampled coefficients on g

    Returns:
        SparseSystem of kind mixed_adjoint
    """
    selection = gamma_set or BoundarySelection.full()
    mask = selection.node_mask(g)
    if not mask.any():
        raise AssemblyError(f"Boundary selection {selection.describe()} contains no nodes on {g.describe()}")
    data = _boundary_values(g, f, mask)
    if np.any(data[mask] <= 0):
        k = int(np.flatnonzero(mask & (data <= 0))[0])
        i, j = g.inverse_index(k + 1)
        raise AssemblyError(f"Dirichlet data must be positive on Gamma; f({i}, {j}) = {data[k]:.4g}")

    forward = assemble_forward_matrix(g, c, fields)
    keep = sp.diags((~mask).astype(float))
    matrix = (keep @ forward.matrix + sp.diags(mask.astype(float))).tocsr()
    matrix.eliminate_zeros()
    matrix.sort_indices()
    logger.debug(f"Mixed adjoint: {g.describe()} | Gamma={selection.describe()} | Dirichlet rows={int(mask.sum())}")
    return SparseSystem(matrix, data, SystemKind.MIXED_ADJOINT, g)


def assemble_rhs(g: Grid2D, kind: Union[RhsKind, str], values) -> np.ndarray:
    """
    Right-hand side vector

    source and internal kinds keep interior values and zero the boundary;
    boundary kind keeps boundary values and zeros the interior.
    """
    kind = RhsKind(kind)
    vec = values.values if isinstance(values, NodeField) else np.asarray(values, dtype=float)
    vec = np.broadcast_to(vec, (g.n_nodes,))
    interior = g.interior_mask()
    if kind == RhsKind.BOUNDARY:
        return np.where(interior, 0.0, vec)
    return np.where(interior, vec, 0.0)


def assemble_modulated_forward(
    g: Grid2D, c: OpticalCoefficients, s: SourceField, m: ModulationParams
) -> SparseSystem:
    """L_eps with s_eps for the modulated coefficients"""
    c_eps, s_eps = modulate_coefficients(c, s, m)
    return assemble_forward_system(g, c_eps, s_eps)


def staggered_product(fields: SampledFields, phi: np.ndarray, psi: np.ndarray) -> np.ndarray:
    """
    Nodewise [D grad phi . grad psi]

    Per axis, the mean over the adjacent half-points of the flux of phi times
    the forward difference of psi. Interior nodes average two half-points per
    axis; boundary nodes use the single available one.
    """
    g = fields.grid
    flux = build_flux_operators(fields)
    p = np.asarray(psi, dtype=float).reshape(g.shape)
    prod_x = (flux.gx @ phi).reshape(g.nx - 1, g.ny) * np.diff(p, axis=0) / g.dx
    prod_y = (flux.gy @ phi).reshape(g.nx, g.ny - 1) * np.diff(p, axis=1) / g.dy

    sum_x = np.zeros(g.shape)
    cnt_x = np.zeros(g.shape)
    sum_x[:-1, :] += prod_x
    sum_x[1:, :] += prod_x
    cnt_x[:-1, :] += 1
    cnt_x[1:, :] += 1

    sum_y = np.zeros(g.shape)
    cnt_y = np.zeros(g.shape)
    sum_y[:, :-1] += prod_y
    sum_y[:, 1:] += prod_y
    cnt_y[:, :-1] += 1
    cnt_y[:, 1:] += 1

    return (sum_x / cnt_x + sum_y / cnt_y).ravel()


def robin_rows(system: SparseSystem, values: np.ndarray) -> np.ndarray:
    """Matrix rows applied to values, kept on boundary rows only"""
    applied = system.matrix @ np.asarray(values, dtype=float)
    return np.where(system.grid.interior_mask(), 0.0, applied)


def assemble_modulation_derivative(
    g: Grid2D, c: OpticalCoefficients, s: SourceField, m: ModulationParams
) -> Tuple[sp.csr_matrix, np.ndarray]:
    """
    First-order parts (L_1, s_1) with L_eps = L + eps L_1 and s_eps = s + eps s_1

    L_1 is the flux and absorption part of L for the coefficients
    (2 gamma - 1) cos D and (2 gamma + 1) cos sigma_a; the identity on boundary
    rows does not depend on eps and is removed.
    """
    fields = sample_fields(c, s, g)
    X, Y = g.node_coordinates()
    Xe, Ye = g.x_edge_coordinates()
    Xn, Yn = g.y_edge_coordinates()
    wave_n = m.wave(X, Y)
    wave_x = m.wave(Xe, Ye)
    wave_y = m.wave(Xn, Yn)
    d_factor = 2.0 * c.gamma - 1.0
    s_factor = 2.0 * c.gamma + 1.0

    derivative = SampledFields(
        grid=g,
        sigma=NodeField(g, s_factor * wave_n * fields.sigma.as_array()),
        source=NodeField(g, wave_n * fields.source.as_array()),
        d_edges=tuple(
            EdgeField(g, d_factor * wave_x * e.x_edges, d_factor * wave_y * e.y_edges) for e in fields.d_edges
        ),
        d_nodes=tuple(NodeField(g, d_factor * wave_n * n.as_array()) for n in fields.d_nodes),
    )
    matrix = _assemble(derivative, c, None) - sp.diags(g.boundary_mask().astype(float))
    matrix = matrix.tocsr()
    matrix.eliminate_zeros()
    return matrix, assemble_rhs(g, RhsKind.SOURCE, derivative.source)
