"""Newtonian (volume potential) operator spectra and resonance formulas.

The Newtonian operator on a particle D is

    A0 u(x) = int_D Phi_0(x, y) u(y) dy,

with the Laplace kernel of the ambient dimension. It is discretized by
piecewise-constant Galerkin on a regular cell grid over the reference shape
B, in the L2-orthonormalized basis 1_cell/sqrt(measure): off-diagonal
entries by midpoint quadrature, diagonal by the exact single-cell
self-integral. The resulting dense symmetric matrix A~ has eigenpairs
(lambda~_n, e~_n) approximating the operator's.

Scaling to the physical particle delta*B is exact on these matrices:

    3D:  A_{delta B} = delta^2 A~
    2D:  A_{delta B} = delta^2 (A~ + (|log delta|/2pi) <., 1> 1)

so 3D spectra rescale analytically while 2D spectra come from the rank-one
perturbed matrix (solved in the reference eigenbasis, where the
perturbation is diag(lambda~) + kappa m m^T with m the moment vector).

Resonances:

    dielectric : k_n^2 = a0 / (gamma lambda_n), lambda_n of A0 on delta*B
    Minnaert   : k_M^2 = sqrt(8 pi a0 / (a1 Theta_dD)),
                 Theta_dD = (1/|dD|) intint (x-y).nu(x) / (4 pi |x-y|) = delta^2 Theta_dB
    plasmonic  : k_n^2 = (k_p^2/eps0)(eps0 - 1/2 - sigma_n), sigma_n supplied

Near a resonance the scattering function w solves (a0/(k^2 tau) I - A0) w = 1
on D; its spectral series, total integral C_m = int w, and L2 norm are

    <w, e_n> = m_n / (s - lambda_n),  s = a0/(k^2 tau),  m_n = <1, e_n>,
    C_m      = sum_n m_n^2 / (s - lambda_n),
    |w|^2    = sum_n m_n^2 / (s - lambda_n)^2.

The sign convention follows the generating resolvent
w = (k^2 tau/a0) [I - (k^2 tau/a0) A0]^{-1}(1): far below resonance
(s >> lambda_1) the coefficient C_m is positive.
"""

from __future__ import annotations

import hashlib
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.linalg import eigh, lu_factor, lu_solve
from scipy.spatial.distance import cdist

from .config import ClusterConfig, ContrastParams, ReferenceShape, derive_contrasts
from .grids import ShapeGrid, SurfaceMesh, build_grid, cube_surface_mesh, sphere_mesh

__all__ = [
    "NewtonianDiscretization",
    "SpectralData",
    "PhysicalSpectrum",
    "WResult",
    "ResonanceSet",
    "RealizedWave",
    "SingularShiftError",
    "EigensolverError",
    "assemble_newtonian",
    "eigensystem",
    "physical_spectrum",
    "scattering_function_w",
    "coefficient_by_dense_solve",
    "dielectric_resonances",
    "theta_geometry_factor",
    "minnaert_from_theta",
    "minnaert_resonance",
    "plasmonic_resonances",
    "realize_wavenumber",
    "save_cache",
    "load_cache",
]

MOMENT_FLOOR = 1e-8  # m_n^2 > MOMENT_FLOOR * |B| counts as an excitable mode
GAP_FLOOR = 1e-14  # resonance-gap guard: |s - lambda_n| >= GAP_FLOOR * lambda~_1 * delta^2


class SingularShiftError(ValueError):
    """Incident frequency sits on a discrete resonance (to within the gap guard)."""


class EigensolverError(RuntimeError):
    """Eigenpair residual exceeded tolerance."""


@dataclass(frozen=True)
class NewtonianDiscretization:
    """Dense symmetric Galerkin matrix of A0 on the reference shape."""

    grid: ShapeGrid
    matrix: np.ndarray

    @property
    def n_cells(self) -> int:
        return self.grid.n_cells


def _laplace_kernel(dim: int, r: np.ndarray) -> np.ndarray:
    if dim == 3:
        return 1.0 / (4.0 * np.pi * r)
    return -np.log(r) / (2.0 * np.pi)


def assemble_newtonian(shape: ReferenceShape, resolution: int) -> NewtonianDiscretization:
    """Galerkin matrix of the Newtonian operator on the reference shape.

    Off-diagonal entries are midpoint quadrature sqrt(V_i V_j) Phi_0(x_i, x_j);
    the diagonal is the exact cell self-integral divided by the cell measure.
    """
    grid = build_grid(shape.kind, shape.diameter, resolution, shape.offset)
    r = cdist(grid.centers, grid.centers)
    np.fill_diagonal(r, 1.0)  # placeholder, overwritten below
    s = np.sqrt(grid.measures)
    mat = _laplace_kernel(grid.dim, r)
    mat *= s[:, None]
    mat *= s[None, :]
    np.fill_diagonal(mat, grid.self_integral_laplace() / grid.measures)
    mat = 0.5 * (mat + mat.T)
    return NewtonianDiscretization(grid=grid, matrix=mat)


@dataclass(frozen=True, eq=False)
class SpectralData:
    """Eigensystem of the reference Newtonian matrix.

    eigenvalues  : lambda~_n, descending
    eigenvectors : columns e~_n, orthonormal in the discrete L2 inner
                   product, sign-fixed (first nonzero component positive)
    moments      : m_n = <1, e~_n> over B
    measure      : total discrete measure of B (Parseval: sum m_n^2 = measure
                   when the full spectrum is kept)
    n0           : resolved resonance index (position in the descending
                   order; first index with a nonvanishing moment)
    """

    dim: int
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    moments: np.ndarray
    measure: float
    n0: int
    grid: ShapeGrid | None = None
    complete: bool = True
    _phys_cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def count(self) -> int:
        return self.eigenvalues.shape[0]


def _fix_signs(vecs: np.ndarray) -> np.ndarray:
    """First nonzero component of each column made positive (determinism)."""
    mags = np.abs(vecs)
    first = np.argmax(mags > 1e-12 * mags.max(axis=0), axis=0)
    flip = vecs[first, np.arange(vecs.shape[1])] < 0
    return np.where(flip[None, :], -vecs, vecs)


def resolve_n0(moments: np.ndarray, measure: float, override: int | None = None) -> int:
    """First index (descending eigenvalue order) with m_n^2 > MOMENT_FLOOR |B|."""
    if override is not None:
        return override
    excitable = np.nonzero(moments**2 > MOMENT_FLOOR * measure)[0]
    if excitable.size == 0:
        raise ValueError("no excitable mode: all eigenfunction moments vanish")
    return int(excitable[0])


def eigensystem(disc: NewtonianDiscretization, count: int | None = None) -> SpectralData:
    """Top-`count` eigenpairs (descending) of the Newtonian matrix.

    `count = None` keeps the full spectrum, which makes the constant
    function's Parseval identity exact and the scattering-coefficient
    series equal to the dense resolvent route.
    """
    n = disc.n_cells
    if count is None:
        count = n
    if count > n:
        raise ValueError(f"count {count} exceeds {n} cells")
    vals, vecs = eigh(disc.matrix)
    scale = float(np.max(np.abs(vals)))
    vals, vecs = vals[::-1][:count], vecs[:, ::-1][:, :count]
    resid = np.linalg.norm(disc.matrix @ vecs - vecs * vals, axis=0)
    tol = 1e-10 * scale
    worst = float(np.max(resid))
    if worst > tol:
        raise EigensolverError(f"eigenpair residual {worst:.3e} exceeds {tol:.3e}")
    vecs = _fix_signs(vecs)
    moments = vecs.T @ np.sqrt(disc.grid.measures)
    measure = disc.grid.total_measure
    return SpectralData(
        dim=disc.grid.dim,
        eigenvalues=vals,
        eigenvectors=vecs,
        moments=moments,
        measure=measure,
        n0=resolve_n0(moments, measure),
        grid=disc.grid,
        complete=(count == n),
    )


@dataclass(frozen=True)
class PhysicalSpectrum:
    """Spectrum of A0 on the physical particle delta*B.

    lams : eigenvalues, descending; moms : moments of the L2-normalized
    eigenfunctions over delta*B; n0 : resolved resonance index.
    """

    delta: float
    lams: np.ndarray
    moms: np.ndarray
    measure: float
    n0: int


def physical_spectrum(spec: SpectralData, delta: float, n0_override: int | None = None) -> PhysicalSpectrum:
    """Eigenpairs on delta*B: exact delta^2 rescale (3D), rank-one update (2D)."""
    key = (float(delta), n0_override)
    if key in spec._phys_cache:
        return spec._phys_cache[key]
    if spec.dim == 3:
        lams = delta**2 * spec.eigenvalues
        moms = delta**1.5 * spec.moments
        meas = delta**3 * spec.measure
        n0 = resolve_n0(spec.moments, spec.measure, n0_override)
    else:
        if not spec.complete:
            raise ValueError("2D physical spectra need the complete reference eigensystem")
        kappa = abs(np.log(delta)) / (2.0 * np.pi)
        # A_{delta B}/delta^2 in the reference eigenbasis: diag(lam~) + kappa m m^T
        mat = np.diag(spec.eigenvalues) + kappa * np.outer(spec.moments, spec.moments)
        vals, vecs = eigh(mat)
        vals, vecs = vals[::-1], vecs[:, ::-1]
        moms_ref = vecs.T @ spec.moments
        lams = delta**2 * vals
        moms = delta * moms_ref
        meas = delta**2 * spec.measure
        n0 = resolve_n0(moms_ref, spec.measure, n0_override)
    out = PhysicalSpectrum(delta=float(delta), lams=lams, moms=moms, measure=meas, n0=n0)
    spec._phys_cache[key] = out
    return out


# ---------------------------------------------------------------------------
# Scattering function w and coefficient C
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WResult:
    """Scattering function of one particle at frequency k.

    coeff   : C = int_D w (the effective monopole strength)
    norm    : |w|_{L2(D)}
    w_modal : modal coefficients <w, e_n> on delta*B
    shift   : resolvent shift s = a0/(k^2 tau)
    gap     : min_n |s - lambda_n| (distance to the nearest resonance)
    """

    coeff: float
    norm: float
    w_modal: np.ndarray
    shift: float
    gap: float


def _resolvent_shift(a0: float, k: float, coupling: float) -> float:
    return a0 / (k * k * coupling)


def scattering_function_w(
    spec: SpectralData,
    contrasts: ContrastParams,
    k: float,
    delta: float,
    a0: float = 1.0,
    particle: int = 0,
    n0_override: int | None = None,
) -> WResult:
    """Spectral-series evaluation of w and C for one particle.

    The resolvent is applied through the eigendecomposition (no per-k
    factorization). Raises SingularShiftError when the shift lands within
    GAP_FLOOR * lambda~_1 * delta^2 of an eigenvalue.
    """
    phys = physical_spectrum(spec, delta, n0_override)
    coupling = contrasts.coupling(particle)
    if coupling == 0.0:
        zeros = np.zeros_like(phys.moms)
        return WResult(coeff=0.0, norm=0.0, w_modal=zeros, shift=math.inf, gap=math.inf)
    shift = _resolvent_shift(a0, k, coupling)
    denom = shift - phys.lams
    gaps = np.abs(denom)
    guard = GAP_FLOOR * spec.eigenvalues[0] * delta**2
    n_min = int(np.argmin(gaps))
    gap = float(gaps[n_min])
    if gap < guard:
        raise SingularShiftError(
            f"shift {shift:.6e} within {gap:.3e} of eigenvalue n={n_min} "
            f"(guard {guard:.3e}): exact-resonance singularity"
        )
    w_modal = phys.moms / denom
    coeff = float(phys.moms @ w_modal)
    norm = float(np.linalg.norm(w_modal))
    return WResult(coeff=coeff, norm=norm, w_modal=w_modal, shift=shift, gap=gap)


def coefficient_by_dense_solve(
    disc: NewtonianDiscretization,
    contrasts: ContrastParams,
    k: float,
    delta: float,
    a0: float = 1.0,
    particle: int = 0,
) -> float:
    """C by factorizing (I - (k^2 tau/a0) A0) on delta*B and integrating.

    Independent dense-resolvent route used to cross-check the spectral
    series (`scattering_function_w`).
    """
    grid = disc.grid.scaled(delta)
    if disc.grid.dim == 3:
        mat = delta**2 * disc.matrix
    else:
        s_ref = np.sqrt(disc.grid.measures)
        kappa = abs(np.log(delta)) / (2.0 * np.pi)
        mat = delta**2 * (disc.matrix + kappa * np.outer(s_ref, s_ref))
    c = k * k * contrasts.coupling(particle) / a0
    s_phys = np.sqrt(grid.measures)
    lhs = np.eye(grid.n_cells) - c * mat
    w_coef = lu_solve(lu_factor(lhs), c * s_phys)
    return float(s_phys @ w_coef)


# ---------------------------------------------------------------------------
# Resonances
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ResonanceSet:
    """Resonance frequencies of one particle family, plus the detuned incident k."""

    dielectric: tuple[float, ...] = ()
    dielectric_indices: tuple[int, ...] = ()
    minnaert: float | None = None
    plasmonic: tuple[float, ...] = ()
    plasmonic_skipped: tuple[int, ...] = ()
    incident_k: float | None = None


def dielectric_resonances(
    spec: SpectralData,
    contrasts: ContrastParams,
    delta: float,
    count: int = 5,
    a0: float = 1.0,
) -> ResonanceSet:
    """k_n = sqrt(a0 / (gamma lambda_n)) over excitable modes (m_n != 0).

    lambda_n is the spectrum on delta*B: delta^2 lambda~_n in 3D, the
    rank-one-corrected eigenvalue in 2D. gamma = tau since a1 = a0.
    """
    phys = physical_spectrum(spec, delta)
    gamma = contrasts.gammas[0]
    excitable = np.nonzero(phys.moms**2 > MOMENT_FLOOR * phys.measure)[0]
    if excitable.size == 0:
        raise ValueError("no excitable mode: all eigenfunction moments vanish")
    take = excitable[:count]
    ks = np.sqrt(a0 / (gamma * phys.lams[take]))
    return ResonanceSet(dielectric=tuple(float(v) for v in ks), dielectric_indices=tuple(int(i) for i in take))


def theta_geometry_factor(mesh: SurfaceMesh, chunk: int = 512) -> float:
    """Theta_dB = (1/|dB|) intint (x-y).nu(x) / (4 pi |x-y|) dsigma(x) dsigma(y).

    Double panel quadrature; the singular x = y panel pair is excluded
    (the integrand vanishes there on a smooth surface: (x-y).nu(x) is
    quadratic in |x-y|).
    """
    c, nu, a = mesh.centroids, mesh.normals, mesh.areas
    n = mesh.n_panels
    total = 0.0
    for lo in range(0, n, chunk):
        hi = min(lo + chunk, n)
        d = c[lo:hi, None, :] - c[None, :, :]
        r = np.sqrt(np.sum(d * d, axis=-1))
        num = np.sum(d * nu[lo:hi, None, :], axis=-1)
        block = np.where(r > 0, num / np.where(r > 0, r, 1.0), 0.0)
        idx = np.arange(lo, hi)
        block[idx - lo, idx] = 0.0
        total += float(a[lo:hi] @ block @ a)
    return total / (4.0 * np.pi * mesh.total_area)


def minnaert_from_theta(a0: float, a1: float, theta_dD: float) -> float:
    """k_M from the geometry factor: k_M^2 = sqrt(8 pi a0 / (a1 Theta_dD))."""
    if theta_dD <= 0 or a1 <= 0 or a0 <= 0:
        raise ValueError("Minnaert formula needs positive a0, a1, Theta")
    return (8.0 * np.pi * a0 / (a1 * theta_dD)) ** 0.25


def _surface_mesh(shape: ReferenceShape, level: int) -> SurfaceMesh:
    if shape.kind == "ball3d":
        return sphere_mesh(shape.radius, level)
    if shape.kind == "cube3d":
        return cube_surface_mesh(shape.side, 4 * 2**level)
    raise ValueError(f"Minnaert resonance needs a 3D shape, got {shape.kind!r}")


def minnaert_resonance(
    shape: ReferenceShape,
    delta: float,
    a0: float,
    a1: float,
    surface_resolution: int = 4,
    drift_tol: float = 0.01,
) -> tuple[float, float, float]:
    """Minnaert frequency of one particle: returns (k_M, Theta_dB, Theta_dD).

    Theta_dB is computed by double surface quadrature at the two finest
    mesh levels; more than `drift_tol` relative drift between them raises.
    Theta_dD = delta^2 Theta_dB exactly.
    """
    theta_coarse = theta_geometry_factor(_surface_mesh(shape, surface_resolution - 1))
    theta = theta_geometry_factor(_surface_mesh(shape, surface_resolution))
    drift = abs(theta - theta_coarse) / abs(theta)
    if drift > drift_tol:
        raise RuntimeError(
            f"surface quadrature not converged: levels {surface_resolution - 1}->"
            f"{surface_resolution} drift {drift:.2%} > {drift_tol:.0%}"
        )
    theta_dD = delta**2 * theta
    return minnaert_from_theta(a0, a1, theta_dD), theta, theta_dD


def plasmonic_resonances(eps0: float, k_p: float, sigmas) -> tuple[tuple[float, ...], tuple[int, ...], tuple[bool, ...]]:
    """k_n^2 = (k_p^2/eps0)(eps0 - 1/2 - sigma_n) over the supplied spectrum.

    Returns (k_n values, indices skipped for nonpositive radicand,
    admissibility flags k_n^2 < k_p^2/eps0 for the kept entries). Raises if
    nothing survives.
    """
    if eps0 <= 0 or k_p <= 0:
        raise ValueError("eps0 and k_p must be positive")
    ks, skipped, admissible = [], [], []
    for i, sig in enumerate(sigmas):
        if not -0.5 <= sig <= 0.5:
            raise ValueError(f"sigma_{i} = {sig} outside [-1/2, 1/2]")
        radicand = eps0 - 0.5 - sig
        if radicand <= 0:
            skipped.append(i)
            continue
        k2 = (k_p**2 / eps0) * radicand
        ks.append(float(np.sqrt(k2)))
        admissible.append(bool(k2 < k_p**2 / eps0))
    if not ks:
        raise ValueError("empty admissible set: every sigma_n gives a nonpositive radicand")
    return tuple(ks), tuple(skipped), tuple(admissible)


# ---------------------------------------------------------------------------
# Incident frequency realization
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RealizedWave:
    """Detuned incident frequency k^2 = k_n0^2 (1 + sign * eps)."""

    k: float
    k_res: float
    n0: int
    eps: float


def realize_wavenumber(cfg: ClusterConfig, spec: SpectralData) -> RealizedWave:
    """Resolve the incident wavenumber from the detuning spec and the spectrum."""
    contrasts = derive_contrasts(cfg)
    phys = physical_spectrum(spec, cfg.delta, cfg.incident.n0)
    n0 = phys.n0 if cfg.incident.n0 is None else cfg.incident.n0
    lam = phys.lams[n0]
    k_res2 = cfg.background.a0 / (contrasts.gammas[0] * lam)
    if cfg.dim == 3:
        eps = cfg.delta**cfg.incident.h
    else:
        eps = abs(np.log(cfg.delta)) ** (-cfg.incident.h)
    k2 = k_res2 * (1.0 + cfg.incident.sign * eps)
    return RealizedWave(k=float(np.sqrt(k2)), k_res=float(np.sqrt(k_res2)), n0=n0, eps=float(eps))


# ---------------------------------------------------------------------------
# Binary eigensystem cache
# ---------------------------------------------------------------------------

_CACHE_MAGIC = b"RSEIG\x00\x00\x01"


def cache_key(shape: ReferenceShape, resolution: int) -> str:
    off = "" if shape.offset is None else ":".join(f"{c:.17g}" for c in shape.offset)
    blob = f"{shape.kind}:{shape.diameter:.17g}:{off}:{resolution}:v1".encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def save_cache(path: Path, spec: SpectralData) -> None:
    """Little-endian IEEE-754 dump: header (magic, dim, n_cells, count) + arrays."""
    n_cells = spec.eigenvectors.shape[0]
    with open(path, "wb") as f:
        f.write(_CACHE_MAGIC)
        f.write(struct.pack("<IIIi", spec.dim, n_cells, spec.count, spec.n0))
        f.write(struct.pack("<d", spec.measure))
        for arr in (spec.eigenvalues, spec.moments, spec.eigenvectors):
            f.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_cache(path: Path) -> SpectralData:
    with open(path, "rb") as f:
        if f.read(8) != _CACHE_MAGIC:
            raise ValueError(f"{path}: not an eigensystem cache (bad magic)")
        dim, n_cells, count, n0 = struct.unpack("<IIIi", f.read(16))
        (measure,) = struct.unpack("<d", f.read(8))
        vals = np.frombuffer(f.read(8 * count), dtype="<f8").copy()
        moms = np.frombuffer(f.read(8 * count), dtype="<f8").copy()
        vecs = np.frombuffer(f.read(8 * count * n_cells), dtype="<f8").copy().reshape(n_cells, count)
    return SpectralData(
        dim=dim,
        eigenvalues=vals,
        eigenvectors=vecs,
        moments=moms,
        measure=measure,
        n0=n0,
        grid=None,
        complete=(count == n_cells),
    )
