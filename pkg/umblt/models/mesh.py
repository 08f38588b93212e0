"""
Staggered Grid Geometry
Node classification, index maps, inter-grid restriction and discrete norms
"""

from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Callable, Sequence, Tuple, Union

import numpy as np

from ..utils.errors import GridError


class NodeClass(str, Enum):
    """Partition of grid nodes"""
    INTERIOR = "I"
    BOUNDARY = "B"
    CORNER = "B_c"


class Side(str, Enum):
    """Sides of the rectangular domain"""
    LEFT = "left"
    RIGHT = "right"
    BOTTOM = "bottom"
    TOP = "top"


class NormKind(str, Enum):
    L2 = "L2"
    H1 = "H1"
    LINF = "Linf"


@dataclass(frozen=True)
class Grid2D:
    """
    Uniform node-centred grid on [x_min, x_max] x [y_min, y_max].

    Nodes are addressed 1-based as (i, j) with i along x and j along y.
    Storage is 0-based and C-ordered on an (nx, ny) array, so the flat
    position of (i, j) is index(i, j) - 1 with index(i, j) = (i - 1) * ny + j.
    D and first-order quantities live on the half-points (i + 1/2, j) and
    (i, j + 1/2).
    """
    x_min: float
    x_max: float
    y_min: float
    y_max: float
    nx: int
    ny: int

    def __post_init__(self):
        if int(self.nx) != self.nx or int(self.ny) != self.ny:
            raise GridError(f"Node counts must be integers, got Nx={self.nx}, Ny={self.ny}")
        if self.nx < 3 or self.ny < 3:
            raise GridError(
                f"Grid needs at least 3 nodes per axis for an interior node, got Nx={self.nx}, Ny={self.ny}"
            )
        if not (np.isfinite([self.x_min, self.x_max, self.y_min, self.y_max]).all()):
            raise GridError("Grid bounds must be finite")
        if not (self.x_max > self.x_min and self.y_max > self.y_min):
            raise GridError(
                f"Degenerate bounds [{self.x_min}, {self.x_max}] x [{self.y_min}, {self.y_max}]"
            )

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / (self.nx - 1)

    @property
    def dy(self) -> float:
        return (self.y_max - self.y_min) / (self.ny - 1)

    @property
    def n_nodes(self) -> int:
        return self.nx * self.ny

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.nx, self.ny)

    @property
    def bounds(self) -> Tuple[float, float, float, float]:
        return (self.x_min, self.x_max, self.y_min, self.y_max)

    @property
    def x(self) -> np.ndarray:
        return self.x_min + np.arange(self.nx) * self.dx

    @property
    def y(self) -> np.ndarray:
        return self.y_min + np.arange(self.ny) * self.dy

    def describe(self) -> str:
        return (
            f"{self.nx}x{self.ny} on [{self.x_min:g}, {self.x_max:g}] x [{self.y_min:g}, {self.y_max:g}]"
        )

    # ------------------------------------------------------------------
    # Index maps
    # ------------------------------------------------------------------

    def _check_node(self, i: int, j: int):
        if not (1 <= i <= self.nx and 1 <= j <= self.ny):
            raise GridError(f"Node ({i}, {j}) outside 1..{self.nx} x 1..{self.ny}")

    def index(self, i: int, j: int) -> int:
        """Linear index I(i, j) = (i - 1) * Ny + j, 1-based"""
        self._check_node(i, j)
        return (i - 1) * self.ny + j

    def inverse_index(self, k: int) -> Tuple[int, int]:
        """Inverse of index()"""
        if not 1 <= k <= self.n_nodes:
            raise GridError(f"Linear index {k} outside 1..{self.n_nodes}")
        i, j = divmod(k - 1, self.ny)
        return i + 1, j + 1

    def flat(self, i: int, j: int) -> int:
        """0-based storage position of node (i, j)"""
        return self.index(i, j) - 1

    def is_neighbor(self, a: Tuple[int, int], b: Tuple[int, int]) -> bool:
        """(i, j) ~ (i', j') when the nodes share an edge"""
        return abs(a[0] - b[0]) + abs(a[1] - b[1]) == 1

    # ------------------------------------------------------------------
    # Coordinates
    # ------------------------------------------------------------------

    def node_coordinates(self) -> Tuple[np.ndarray, np.ndarray]:
        """(X, Y) arrays of shape (nx, ny)"""
        return np.meshgrid(self.x, self.y, indexing="ij")

    def x_edge_coordinates(self) -> Tuple[np.ndarray, np.ndarray]:
        """Half-points (i + 1/2, j), shape (nx - 1, ny)"""
        xe = self.x_min + (np.arange(self.nx - 1) + 0.5) * self.dx
        return np.meshgrid(xe, self.y, indexing="ij")

    def y_edge_coordinates(self) -> Tuple[np.ndarray, np.ndarray]:
        """Half-points (i, j + 1/2), shape (nx, ny - 1)"""
        ye = self.y_min + (np.arange(self.ny - 1) + 0.5) * self.dy
        return np.meshgrid(self.x, ye, indexing="ij")

    # ------------------------------------------------------------------
    # Classification
    # ------------------------------------------------------------------

    def node_class_array(self) -> np.ndarray:
        """NodeClass of every node, shape (nx, ny), object dtype"""
        classes = np.full(self.shape, NodeClass.BOUNDARY, dtype=object)
        classes[1:-1, 1:-1] = NodeClass.INTERIOR
        for ci, cj in ((0, 0), (0, -1), (-1, 0), (-1, -1)):
            classes[ci, cj] = NodeClass.CORNER
        return classes

    def interior_mask(self) -> np.ndarray:
        """Flat boolean mask of interior nodes"""
        mask = np.zeros(self.shape, dtype=bool)
        mask[1:-1, 1:-1] = True
        return mask.ravel()

    def boundary_mask(self) -> np.ndarray:
        """Flat boolean mask of B and B_c nodes"""
        return ~self.interior_mask()

    def corner_mask(self) -> np.ndarray:
        mask = np.zeros(self.shape, dtype=bool)
        mask[0, 0] = mask[0, -1] = mask[-1, 0] = mask[-1, -1] = True
        return mask.ravel()

    def side_nodes(self, side: Union[Side, str]) -> np.ndarray:
        """Flat positions of the nodes on one side, corners included, ordered along the side"""
        side = Side(side)
        positions = np.arange(self.n_nodes).reshape(self.shape)
        if side == Side.LEFT:
            return positions[0, :].copy()
        if side == Side.RIGHT:
            return positions[-1, :].copy()
        if side == Side.BOTTOM:
            return positions[:, 0].copy()
        return positions[:, -1].copy()

    def side_coordinate(self, side: Union[Side, str]) -> np.ndarray:
        """Arc parameter of side_nodes(side): x for bottom/top, y for left/right"""
        side = Side(side)
        return self.y if side in (Side.LEFT, Side.RIGHT) else self.x

    # ------------------------------------------------------------------
    # Nesting
    # ------------------------------------------------------------------

    def refinement_factor(self, fine: "Grid2D") -> int:
        """Integer r with fine spacing = coarse spacing / r; raises when not nested"""
        if not np.allclose(self.bounds, fine.bounds, rtol=0.0, atol=1e-12 * max(1.0, np.abs(self.bounds).max())):
            raise GridError(f"Grids cover different domains: {self.describe()} vs {fine.describe()}")
        rx, mx = divmod(fine.nx - 1, self.nx - 1)
        ry, my = divmod(fine.ny - 1, self.ny - 1)
        if mx or my or rx != ry or rx < 1:
            raise GridError(f"Grid {fine.describe()} is not a nested refinement of {self.describe()}")
        return rx

    def is_nested_in(self, fine: "Grid2D") -> bool:
        try:
            self.refinement_factor(fine)
        except GridError:
            return False
        return True


def build_grid(bounds: Sequence[float], nx: int, ny: int) -> Grid2D:
    """
    Build a staggered grid

    Args:
        bounds: (x_min, x_max, y_min, y_max)
        nx: Node count along x (>= 3)
        ny: Node count along y (>= 3)

    Returns:
        Grid2D
    """
    if len(bounds) != 4:
        raise GridError(f"Expected 4 bounds, got {len(bounds)}")
    x_min, x_max, y_min, y_max = (float(b) for b in bounds)
    return Grid2D(x_min, x_max, y_min, y_max, int(nx), int(ny))


def classify_node(g: Grid2D, i: int, j: int) -> NodeClass:
    """Class of the 1-based node (i, j)"""
    g._check_node(i, j)
    on_x = i in (1, g.nx)
    on_y = j in (1, g.ny)
    if on_x and on_y:
        return NodeClass.CORNER
    if on_x or on_y:
        return NodeClass.BOUNDARY
    return NodeClass.INTERIOR


def _readonly(values: np.ndarray) -> np.ndarray:
    values = np.array(values, dtype=float, copy=True)
    values.flags.writeable = False
    return values


@dataclass(frozen=True, eq=False)
class NodeField:
    """Real values at every node, stored flat in index order"""
    grid: Grid2D
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape == self.grid.shape:
            values = values.ravel()
        if values.shape != (self.grid.n_nodes,):
            raise GridError(
                f"Node field has shape {values.shape}, grid {self.grid.describe()} needs ({self.grid.n_nodes},)"
            )
        if not np.isfinite(values).all():
            raise GridError("Node field contains non-finite values")
        object.__setattr__(self, "values", _readonly(values))

    @classmethod
    def from_function(cls, grid: Grid2D, fn: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> "NodeField":
        X, Y = grid.node_coordinates()
        return cls(grid, np.broadcast_to(fn(X, Y), grid.shape))

    @classmethod
    def constant(cls, grid: Grid2D, value: float) -> "NodeField":
        return cls(grid, np.full(grid.n_nodes, float(value)))

    def as_array(self) -> np.ndarray:
        """Values as an (nx, ny) array"""
        return self.values.reshape(self.grid.shape)

    def at(self, i: int, j: int) -> float:
        return float(self.values[self.grid.flat(i, j)])

    def with_values(self, values: np.ndarray) -> "NodeField":
        return NodeField(self.grid, values)

    def interior_masked(self) -> "NodeField":
        """Copy with every boundary entry set to zero"""
        return NodeField(self.grid, np.where(self.grid.interior_mask(), self.values, 0.0))

    def save_txt(self, path: Union[str, Path]):
        """Header `Nx Ny x_min x_max y_min y_max`, then Ny rows of Nx values"""
        g = self.grid
        header = f"{g.nx} {g.ny} {g.x_min!r} {g.x_max!r} {g.y_min!r} {g.y_max!r}"
        np.savetxt(str(path), self.as_array().T, fmt="%.17g", header=header, comments="")

    @classmethod
    def load_txt(cls, path: Union[str, Path]) -> "NodeField":
        with open(path, "r") as handle:
            header = handle.readline().split()
        if len(header) != 6:
            raise GridError(f"Malformed field header in {path}: {' '.join(header)}")
        nx, ny = int(header[0]), int(header[1])
        grid = Grid2D(*(float(v) for v in header[2:]), nx, ny)
        rows = np.loadtxt(str(path), skiprows=1, ndmin=2)
        if rows.shape != (ny, nx):
            raise GridError(f"Field body in {path} has shape {rows.shape}, expected ({ny}, {nx})")
        return cls(grid, rows.T)


@dataclass(frozen=True, eq=False)
class EdgeField:
    """Values at the half-points; x_edges is (nx - 1, ny), y_edges is (nx, ny - 1)"""
    grid: Grid2D
    x_edges: np.ndarray
    y_edges: np.ndarray

    def __post_init__(self):
        g = self.grid
        xe = np.asarray(self.x_edges, dtype=float)
        ye = np.asarray(self.y_edges, dtype=float)
        if xe.shape != (g.nx - 1, g.ny) or ye.shape != (g.nx, g.ny - 1):
            raise GridError(
                f"Edge field shapes {xe.shape}, {ye.shape} do not match grid {g.describe()}"
            )
        if not (np.isfinite(xe).all() and np.isfinite(ye).all()):
            raise GridError("Edge field contains non-finite values")
        object.__setattr__(self, "x_edges", _readonly(xe))
        object.__setattr__(self, "y_edges", _readonly(ye))

    @classmethod
    def from_function(cls, grid: Grid2D, fn: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> "EdgeField":
        Xe, Ye = grid.x_edge_coordinates()
        Xn, Yn = grid.y_edge_coordinates()
        return cls(
            grid,
            np.broadcast_to(fn(Xe, Ye), Xe.shape),
            np.broadcast_to(fn(Xn, Yn), Xn.shape),
        )

    @classmethod
    def constant(cls, grid: Grid2D, value: float) -> "EdgeField":
        return cls(grid, np.full((grid.nx - 1, grid.ny), float(value)), np.full((grid.nx, grid.ny - 1), float(value)))

    @property
    def size(self) -> Tuple[int, int]:
        return self.x_edges.size, self.y_edges.size

    def min(self) -> float:
        return float(min(self.x_edges.min(), self.y_edges.min()))


def restrict_fine_to_coarse(f: NodeField, coarse: Grid2D) -> NodeField:
    """Injection of a fine-grid field onto the coinciding coarse nodes"""
    r = coarse.refinement_factor(f.grid)
    return NodeField(coarse, f.as_array()[::r, ::r])


def prolong_by_injection(f: NodeField, fine: Grid2D) -> NodeField:
    """Copy coarse values onto coinciding fine nodes, zero elsewhere"""
    r = f.grid.refinement_factor(fine)
    values = np.zeros(fine.shape)
    values[::r, ::r] = f.as_array()
    return NodeField(fine, values)


def gradient_squares(f: NodeField) -> Tuple[np.ndarray, np.ndarray]:
    """Squared forward differences on x- and y-edges"""
    g = f.grid
    u = f.as_array()
    return (np.diff(u, axis=0) / g.dx) ** 2, (np.diff(u, axis=1) / g.dy) ** 2


def discrete_norm(f: NodeField, kind: Union[NormKind, str] = NormKind.L2) -> float:
    """
    Discrete norm of a node field

    L2 uses the uniform weight dx*dy at every node; the H1 seminorm adds the
    squared forward differences on the half-points with the same weight.

    Args:
        f: Field to measure
        kind: L2, H1 or Linf

    Returns:
        Norm value
    """
    kind = NormKind(kind)
    g = f.grid
    if kind == NormKind.LINF:
        return float(np.abs(f.values).max())
    weight = g.dx * g.dy
    l2_sq = weight * float(np.sum(f.values ** 2))
    if kind == NormKind.L2:
        return float(np.sqrt(l2_sq))
    gx, gy = gradient_squares(f)
    return float(np.sqrt(l2_sq + weight * (float(gx.sum()) + float(gy.sum()))))
