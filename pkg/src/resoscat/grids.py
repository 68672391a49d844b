"""Regular cell grids over the reference shapes, and closed surface meshes.

The volume machinery is shared by the Newtonian-operator discretization and
the Lippmann-Schwinger reference solver: a shape is covered by a regular
grid of voxels/pixels, cells whose center lies inside the shape are kept,
and boundary-straddling cells carry a partial measure estimated on a fixed
subgrid. Piecewise-constant Galerkin matrices built on these cells use the
L2-orthonormalized basis 1_cell / sqrt(measure), so operator matrices are
plain symmetric eigenproblems.

Exact single-cell self-integrals of the Laplace kernels (used for matrix
diagonals):

    cube, side h:    int int 1/(4 pi |x-y|)      = CUBE_COULOMB h^5 / (4 pi)
    square, side h:  int int -(1/2pi) log|x-y|   = -(h^4/2pi) (SQUARE_LOG + log h)
    ball, radius R:  (8 pi / 15) R^5
    disc, radius R:  (pi R^4 / 2) (1/4 - log R)

Curved-shape boundary cells substitute the ball/disc of equal measure.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

__all__ = [
    "ShapeGrid",
    "build_grid",
    "SurfaceMesh",
    "sphere_mesh",
    "cube_surface_mesh",
    "CUBE_COULOMB",
    "SQUARE_LOG",
    "CUBE_MEAN_DIST",
]

# int_{[0,1]^3 x [0,1]^3} |x-y|^-1 dx dy  (Coulomb self-energy of the unit cube)
CUBE_COULOMB = 1.8823126443896601
# int_{[0,1]^2 x [0,1]^2} log|x-y| dx dy
SQUARE_LOG = -0.8050867219500977
# mean |x-y| over the unit cube pair (Robbins constant)
CUBE_MEAN_DIST = 0.6617071822671758
# mean |x-y| over a radius-R ball pair is (36/35) R
BALL_MEAN_DIST = 36.0 / 35.0

_SUBSAMPLE = 5  # per-axis subsamples for partial-cell measure estimation


def _inside(kind: str, half_extent: float, pts: np.ndarray) -> np.ndarray:
    if kind in ("ball3d", "disc2d"):
        return np.sum(pts * pts, axis=-1) < half_extent * half_extent
    return np.max(np.abs(pts), axis=-1) < half_extent


def _half_extent(kind: str, diameter: float) -> float:
    """Half-width of the shape along a coordinate axis (shapes are origin-centered)."""
    if kind in ("ball3d", "disc2d"):
        return 0.5 * diameter
    # cube/square: `diameter` is the Euclidean diameter (space diagonal)
    dim = 3 if kind.endswith("3d") else 2
    return 0.5 * diameter / np.sqrt(dim)


@dataclass(frozen=True)
class ShapeGrid:
    """Cells covering a reference shape.

    centers : (n_cells, dim) quadrature nodes: cell centers for interior
        cells, centroids of the inside part for boundary-straddling cells.
        Includes the shape's centroid offset when one is configured.
    measures : (n_cells,) cell measures; partial on boundary cells.
    spacing : side length of a full cell.
    full : (n_cells,) bool, True where the cell lies entirely inside.
    """

    kind: str
    diameter: float
    resolution: int
    dim: int
    centers: np.ndarray
    measures: np.ndarray
    spacing: float
    full: np.ndarray
    offset: tuple[float, ...] | None = None

    @property
    def n_cells(self) -> int:
        return self.centers.shape[0]

    @property
    def total_measure(self) -> float:
        return float(np.sum(self.measures))

    def scaled(self, delta: float) -> "ShapeGrid":
        """Grid of the shape shrunk by `delta`, cell-for-cell (exact scaling)."""
        return replace(
            self,
            diameter=self.diameter * delta,
            centers=self.centers * delta,
            measures=self.measures * delta**self.dim,
            spacing=self.spacing * delta,
            offset=None if self.offset is None else tuple(delta * c for c in self.offset),
        )

    def contains(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, float)
        if self.offset is not None:
            pts = pts - np.asarray(self.offset)
        return _inside(self.kind, _half_extent(self.kind, self.diameter), pts)

    def self_integral_laplace(self) -> np.ndarray:
        """Exact int_cell int_cell Phi_0 per cell (see module docstring)."""
        h = self.spacing
        out = np.empty(self.n_cells)
        if self.dim == 3:
            full_val = CUBE_COULOMB * h**5 / (4.0 * np.pi)
            r_eq = np.cbrt(3.0 * self.measures / (4.0 * np.pi))
            part_val = (8.0 * np.pi / 15.0) * r_eq**5
        else:
            full_val = -(h**4 / (2.0 * np.pi)) * (SQUARE_LOG + np.log(h))
            r_eq = np.sqrt(self.measures / np.pi)
            part_val = 0.5 * np.pi * r_eq**4 * (0.25 - np.log(r_eq))
        out[self.full] = full_val
        out[~self.full] = part_val[~self.full]
        return out

    def mean_cell_distance(self) -> np.ndarray:
        """Mean |x-y| over cell x cell, per cell (full cube vs equal-measure ball/disc)."""
        h = self.spacing
        out = np.empty(self.n_cells)
        if self.dim == 3:
            out[self.full] = CUBE_MEAN_DIST * h
            r_eq = np.cbrt(3.0 * self.measures / (4.0 * np.pi))
            out[~self.full] = BALL_MEAN_DIST * r_eq[~self.full]
        else:
            # mean distance in the unit square is ~0.5214h; the 2D solver only
            # uses this for diagnostics, an equal-measure disc (128R/45pi) does
            out[:] = (128.0 / (45.0 * np.pi)) * np.sqrt(self.measures / np.pi)
        return out


@lru_cache(maxsize=32)
def _build_grid_cached(
    kind: str, diameter: float, resolution: int, offset: tuple[float, ...] | None
) -> ShapeGrid:
    dim = 3 if kind.endswith("3d") else 2
    a = _half_extent(kind, diameter)
    h = 2.0 * a / resolution
    axis = -a + h * (np.arange(resolution) + 0.5)
    mesh = np.meshgrid(*([axis] * dim), indexing="ij")
    centers = np.stack([m.ravel() for m in mesh], axis=-1)

    measures = np.full(centers.shape[0], h**dim)
    full = np.ones(centers.shape[0], dtype=bool)
    if kind in ("ball3d", "disc2d"):
        # classify by nearest/farthest corner distance to the origin
        far_r = np.sqrt(np.sum((np.abs(centers) + 0.5 * h) ** 2, axis=-1))
        near_r = np.sqrt(np.sum(np.maximum(np.abs(centers) - 0.5 * h, 0.0) ** 2, axis=-1))
        full = far_r < a
        straddle = np.nonzero(~full & (near_r < a))[0]
        keep = full.copy()
        if straddle.size:
            # partial cells: measure fraction and quadrature node (centroid of
            # the inside part) from a fixed subgrid
            s = (np.arange(_SUBSAMPLE) + 0.5) / _SUBSAMPLE - 0.5
            sub = np.stack([m.ravel() for m in np.meshgrid(*([s] * dim), indexing="ij")], axis=-1)
            pts = centers[straddle, None, :] + h * sub[None, :, :]
            inside = _inside(kind, a, pts)
            counts = np.sum(inside, axis=1)
            occupied = counts > 0
            idx = straddle[occupied]
            keep[idx] = True
            frac = counts[occupied] / sub.shape[0]
            measures[idx] = h**dim * frac
            w = inside[occupied][..., None]
            centers[idx] = np.sum(pts[occupied] * w, axis=1) / counts[occupied][:, None]
        centers, measures, full = centers[keep], measures[keep], full[keep]
    n = centers.shape[0]
    if n < 8:
        raise ValueError(
            f"resolution {resolution} too coarse: only {n} cells intersect the shape (need >= 8)"
        )
    if offset is not None:
        centers = centers + np.asarray(offset)
    centers.setflags(write=False)
    measures.setflags(write=False)
    full.setflags(write=False)
    return ShapeGrid(
        kind=kind,
        diameter=diameter,
        resolution=resolution,
        dim=dim,
        centers=centers,
        measures=measures,
        spacing=h,
        full=full,
        offset=offset,
    )


def build_grid(
    kind: str, diameter: float, resolution: int, offset: tuple[float, ...] | None = None
) -> ShapeGrid:
    """Cell grid over the reference shape; cached on (kind, diameter, resolution, offset)."""
    if kind not in ("ball3d", "cube3d", "disc2d", "square2d"):
        raise ValueError(f"unknown shape kind {kind!r}")
    if resolution < 2:
        raise ValueError("resolution must be >= 2")
    if diameter <= 0:
        raise ValueError("diameter must be positive")
    if offset is not None:
        offset = tuple(float(c) for c in offset)
    return _build_grid_cached(kind, float(diameter), int(resolution), offset)


# ---------------------------------------------------------------------------
# Surface meshes (Minnaert geometry factor)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SurfaceMesh:
    """Flat-panel mesh of a closed surface: centroids, outward normals, areas."""

    centroids: np.ndarray
    normals: np.ndarray
    areas: np.ndarray

    @property
    def n_panels(self) -> int:
        return self.areas.shape[0]

    @property
    def total_area(self) -> float:
        return float(np.sum(self.areas))


def sphere_mesh(radius: float, level: int) -> SurfaceMesh:
    """Icosphere triangulation: `level` subdivisions of the icosahedron.

    Panel count is 20 * 4^level; vertices live on the sphere, panels are
    the flat triangles between them.
    """
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    verts = np.array(
        [
            [-1, phi, 0], [1, phi, 0], [-1, -phi, 0], [1, -phi, 0],
            [0, -1, phi], [0, 1, phi], [0, -1, -phi], [0, 1, -phi],
            [phi, 0, -1], [phi, 0, 1], [-phi, 0, -1], [-phi, 0, 1],
        ],
        dtype=float,
    )
    verts /= np.linalg.norm(verts, axis=1)[:, None]
    faces = np.array(
        [
            [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
            [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
            [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
            [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
        ]
    )
    for _ in range(level):
        verts_list = list(verts)
        midpoint_cache: dict[tuple[int, int], int] = {}

        def midpoint(i, j):
            key = (min(i, j), max(i, j))
            if key not in midpoint_cache:
                m = verts_list[i] + verts_list[j]
                m /= np.linalg.norm(m)
                midpoint_cache[key] = len(verts_list)
                verts_list.append(m)
            return midpoint_cache[key]

        new_faces = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_faces += [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
        verts = np.array(verts_list)
        faces = np.array(new_faces)

    verts = verts * radius
    p0, p1, p2 = verts[faces[:, 0]], verts[faces[:, 1]], verts[faces[:, 2]]
    centroids = (p0 + p1 + p2) / 3.0
    cross = np.cross(p1 - p0, p2 - p0)
    areas = 0.5 * np.linalg.norm(cross, axis=1)
    # quadrature nodes on the curved surface: project centroids radially, use
    # exact normals there, and renormalize panel areas to the exact total
    centroids *= (radius / np.linalg.norm(centroids, axis=1))[:, None]
    normals = centroids / radius
    areas *= 4.0 * np.pi * radius**2 / np.sum(areas)
    return SurfaceMesh(centroids=centroids, normals=normals, areas=areas)


def cube_surface_mesh(side: float, n_per_side: int) -> SurfaceMesh:
    """Axis-aligned cube of given side, n x n square panels per face."""
    h = side / n_per_side
    axis = -0.5 * side + h * (np.arange(n_per_side) + 0.5)
    u, v = np.meshgrid(axis, axis, indexing="ij")
    u, v = u.ravel(), v.ravel()
    half = 0.5 * side
    cents, norms = [], []
    for ax in range(3):
        for sign in (-1.0, 1.0):
            c = np.zeros((u.size, 3))
            c[:, ax] = sign * half
            c[:, (ax + 1) % 3] = u
            c[:, (ax + 2) % 3] = v
            nrm = np.zeros((u.size, 3))
            nrm[:, ax] = sign
            cents.append(c)
            norms.append(nrm)
    centroids = np.concatenate(cents)
    normals = np.concatenate(norms)
    areas = np.full(centroids.shape[0], h * h)
    return SurfaceMesh(centroids=centroids, normals=normals, areas=areas)
