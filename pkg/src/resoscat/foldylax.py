"""Foldy-Lax algebraic system: assembly, direct and Born solves, fields.

Each particle D_j = z_j + delta*B is replaced by a point scatterer at z_j
whose strength C_j is the integral of the scattering function w_j
(spectral module). The interaction amplitudes Q solve the M x M system
(I - B_k) Q = U with

    3D:  B_{k,ij} = C_j Phi_k(z_i, z_j) / (1 - i k C_i / 4pi) (1 - delta_ij),
         U_i      = u^i(z_i) / (1 - i k C_i / 4pi),
    2D:  B_{k,ij} = Phi_k(z_i, z_j) C*_j (1 - delta_ij),
         U_i      = u^i(z_i),       C*_j = (C_j^{-1} - E(k))^{-1},

where E(k) is the additive constant of the 2D kernel split. The monopole
self-interaction constant in 3D is the r -> 0 limit of Phi_k - Phi_0,
i.e. ik/(4 pi); in 2D it is E(k), absorbed into C*.

Approximate scattered fields away from the cluster:

    u^{s}(x)  ~ sum_j Phi_k(x, z_j) C*_j Q_j        (C*_j = C_j in 3D)
    u^{s,N}   : same with Q replaced by the truncated Born series
                Q^N = sum_{n<=N} B_k^n U.

The Born series converges geometrically when |B_k| < 1 in the max-row-sum
norm; `check_invertibility` compares that numeric norm against the
asymptotic predicate in the configured (h, t) detuning/dilution exponents.

The bridge between solver amplitudes and volume integrals of the total
field is Q_j = c_j int_{D_j} v / C*_j with c_j = k^2 tau_j / a0
(`q_from_volume_integral`); the reference solver reports int v directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .config import ClusterConfig, ContrastParams, derive_contrasts
from .kernels import constant_E, green2d, green3d, plane_wave
from .spectral import SpectralData, scattering_function_w

__all__ = [
    "FoldyLaxSystem",
    "BornSolution",
    "FieldSample",
    "InvertibilityReport",
    "IllConditionedError",
    "assemble",
    "solve_direct",
    "solve_born",
    "scattered_field",
    "interaction_ladder",
    "check_invertibility",
    "q_from_volume_integral",
]

COND_LIMIT = 1e12


class IllConditionedError(RuntimeError):
    """Direct solve refused: condition estimate beyond COND_LIMIT."""


@dataclass(frozen=True)
class FoldyLaxSystem:
    """Assembled M x M interaction system (immutable after assembly)."""

    dim: int
    k: float
    keff: float
    centers: np.ndarray
    Bk: np.ndarray
    U: np.ndarray
    C: np.ndarray
    Cstar: np.ndarray
    couplings: np.ndarray
    norm_Bk: float
    delta: float
    exclusion_radius: float
    E: complex | None = None

    @property
    def m_particles(self) -> int:
        return self.centers.shape[0]

    def kernel(self, x, y) -> complex:
        if self.dim == 3:
            return green3d(self.keff, x, y).value
        return green2d(self.keff, x, y).value


def _center_kernel_matrix(dim: int, keff: float, centers: np.ndarray) -> np.ndarray:
    m = centers.shape[0]
    phi = np.zeros((m, m), dtype=complex)
    for i in range(m):
        for j in range(i + 1, m):
            val = (green3d if dim == 3 else green2d)(keff, centers[i], centers[j]).value
            phi[i, j] = phi[j, i] = val  # reciprocity, exact
    return phi


def assemble(
    cfg: ClusterConfig,
    spec: SpectralData,
    k: float,
    contrasts: ContrastParams | None = None,
) -> FoldyLaxSystem:
    """Build B_k, U and the effective coefficients for the configured scene."""
    if contrasts is None:
        contrasts = derive_contrasts(cfg)
    m = cfg.m_particles
    a0 = cfg.background.a0
    keff = k * cfg.background.wavenumber_factor
    c_coeffs = np.array(
        [
            scattering_function_w(
                spec, contrasts, k, cfg.delta, a0=a0, particle=j, n0_override=cfg.incident.n0
            ).coeff
            for j in range(m)
        ]
    )
    couplings = np.array([k * k * contrasts.coupling(j) / a0 for j in range(m)])
    ui = np.array([plane_wave(keff, cfg.incident.theta, z) for z in cfg.centers])
    phi = _center_kernel_matrix(cfg.dim, keff, cfg.centers)

    e_const = None
    if cfg.dim == 3:
        denom = 1.0 - 1j * keff * c_coeffs / (4.0 * np.pi)
        if np.any(np.abs(denom) < 1e-14):
            bad = int(np.argmin(np.abs(denom)))
            raise ZeroDivisionError(f"monopole renormalization 1 - ikC/4pi vanishes at particle {bad}")
        cstar = c_coeffs.astype(complex)
        bk = (phi * cstar[None, :]) / denom[:, None]
        u_vec = ui / denom
    else:
        e_const = constant_E(keff)
        inv = 1.0 / c_coeffs - e_const
        if np.any(np.abs(inv) < 1e-14):
            bad = int(np.argmin(np.abs(inv)))
            raise ZeroDivisionError(f"effective coefficient (C^-1 - E) vanishes at particle {bad}")
        cstar = 1.0 / inv
        bk = phi * cstar[None, :]
        u_vec = ui.astype(complex)
    np.fill_diagonal(bk, 0.0)
    if not np.all(np.isfinite(bk)):
        raise FloatingPointError("non-finite entries in B_k")
    norm = float(np.max(np.sum(np.abs(bk), axis=1))) if m > 1 else 0.0
    return FoldyLaxSystem(
        dim=cfg.dim,
        k=k,
        keff=keff,
        centers=cfg.centers,
        Bk=bk,
        U=u_vec,
        C=c_coeffs,
        Cstar=cstar,
        couplings=couplings,
        norm_Bk=norm,
        delta=cfg.delta,
        exclusion_radius=cfg.exclusion_radius(),
        E=e_const,
    )


def solve_direct(sys: FoldyLaxSystem) -> np.ndarray:
    """Q from dense LU on (I - B_k); raises on condition estimate > 1e12."""
    a = np.eye(sys.m_particles, dtype=complex) - sys.Bk
    cond = np.linalg.cond(a, 1)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise IllConditionedError(f"I - B_k condition estimate {cond:.3e} exceeds {COND_LIMIT:.0e}")
    lu = lu_factor(a)
    q = lu_solve(lu, sys.U)
    resid = np.linalg.norm(a @ q - sys.U)
    if resid > 1e-10 * np.linalg.norm(sys.U):
        q = q + lu_solve(lu, sys.U - a @ q)
        resid = np.linalg.norm(a @ q - sys.U)
        if resid > 1e-10 * np.linalg.norm(sys.U):
            raise IllConditionedError(f"direct solve residual {resid:.3e} not at tolerance")
    return q


@dataclass(frozen=True)
class BornSolution:
    """Partial sums Q^0..Q^N of the Born (Neumann) series, with the geometric bound."""

    partial_sums: np.ndarray  # (N+1, M)
    terms: np.ndarray  # (N+1, M); terms[n] = B_k^n U
    norm_Bk: float
    converged: bool

    @property
    def n_max(self) -> int:
        return self.partial_sums.shape[0] - 1

    def q(self, n: int) -> np.ndarray:
        return self.partial_sums[n]

    def tail_bound(self, n: int, u_norm: float) -> float:
        """|Q^N - Q|_inf <= |B_k|^{N+1}/(1 - |B_k|) |U|_inf (valid when |B_k| < 1)."""
        if self.norm_Bk >= 1.0:
            return math.inf
        return self.norm_Bk ** (n + 1) / (1.0 - self.norm_Bk) * u_norm


def solve_born(sys: FoldyLaxSystem, n_max: int) -> BornSolution:
    """All partial sums by repeated mat-vecs; flagged non-convergent if |B_k| >= 1."""
    m = sys.m_particles
    terms = np.empty((n_max + 1, m), dtype=complex)
    sums = np.empty((n_max + 1, m), dtype=complex)
    term = sys.U.copy()
    acc = term.copy()
    terms[0], sums[0] = term, acc
    for n in range(1, n_max + 1):
        term = sys.Bk @ term
        acc = acc + term
        terms[n], sums[n] = term, acc
    return BornSolution(partial_sums=sums, terms=terms, norm_Bk=sys.norm_Bk, converged=sys.norm_Bk < 1.0)


@dataclass(frozen=True)
class FieldSample:
    """Scattered-field value at an exterior evaluation point."""

    x: tuple[float, ...]
    value: complex
    variant: str


def _check_exclusion(sys: FoldyLaxSystem, x: np.ndarray) -> None:
    dists = np.linalg.norm(sys.centers - x[None, :], axis=1)
    if np.min(dists) < sys.exclusion_radius:
        raise ValueError(
            f"evaluation point within exclusion radius {sys.exclusion_radius:.3g} "
            f"of a particle center (dist {np.min(dists):.3g})"
        )


def scattered_field(sys: FoldyLaxSystem, q: np.ndarray, x, variant: str = "fl_direct") -> FieldSample:
    """u^s(x) = sum_j Phi_k(x, z_j) C*_j Q_j, evaluated away from the cluster."""
    x = np.asarray(x, dtype=float)
    _check_exclusion(sys, x)
    val = complex(sum(sys.kernel(x, sys.centers[j]) * sys.Cstar[j] * q[j] for j in range(sys.m_particles)))
    return FieldSample(x=tuple(x.tolist()), value=val, variant=variant)


def interaction_ladder(sys: FoldyLaxSystem, x, n_max: int, born: BornSolution | None = None):
    """Fields u^{s,N}(x) for N = 0..n_max plus the increments between orders.

    The N-th increment <Phi_k(x,.) C*, B_k^N U> is the field contribution of
    exactly N inter-particle interactions.
    """
    x = np.asarray(x, dtype=float)
    _check_exclusion(sys, x)
    if born is None or born.n_max < n_max:
        born = solve_born(sys, n_max)
    weights = np.array([sys.kernel(x, z) for z in sys.centers]) * sys.Cstar
    fields = born.partial_sums[: n_max + 1] @ weights
    increments = born.terms[: n_max + 1] @ weights
    return fields, increments


@dataclass(frozen=True)
class InvertibilityReport:
    """Numeric vs asymptotic view of |B_k| < 1 for the configured (h, t)."""

    norm_Bk: float
    exponent: float  # 1 - h - t
    predicate: bool
    critical: bool
    critical_constant: float | None
    threshold_2d: float | None
    measured_d: float | None
    agrees: bool
    born_allowed: bool


def check_invertibility(sys: FoldyLaxSystem, cfg: ClusterConfig) -> InvertibilityReport:
    """Diagnostic: does the asymptotic invertibility predicate match |B_k|?

    3D: |B_k| = O(delta^{1-h-t}), so the predicate is 1-h-t > 0; in the
    critical case 1-h-t = 0 the limiting constant |C| S / |1 - ikC/4pi|
    (S = max_i sum 1/ (4 pi |z_i - z_j|)) must stay below 1.
    2D: |B_k| < 1 asymptotically iff d > exp(-|log delta|^{1-h}).
    """
    h, t = cfg.incident.h, cfg.spacing.t
    exponent = 1.0 - h - t
    d = cfg.min_support_distance()
    critical = abs(exponent) < 1e-12
    crit_const = None
    threshold = None
    if cfg.dim == 3:
        if sys.m_particles > 1:
            invdist = np.zeros(sys.m_particles)
            for i in range(sys.m_particles):
                r = np.linalg.norm(sys.centers - sys.centers[i], axis=1)
                r[i] = np.inf
                invdist[i] = np.sum(1.0 / (4.0 * np.pi * r))
            denom = np.abs(1.0 - 1j * sys.keff * sys.C / (4.0 * np.pi))
            crit_const = float(np.max(np.abs(sys.C) * invdist / denom))
        else:
            crit_const = 0.0
        predicate = exponent > 0 or (critical and crit_const < 1.0)
    else:
        threshold = math.exp(-abs(math.log(cfg.delta)) ** (1.0 - h)) if h < 1 else math.exp(-1.0)
        predicate = exponent > 0 or (d is None) or d > threshold
    numeric = sys.norm_Bk < 1.0
    return InvertibilityReport(
        norm_Bk=sys.norm_Bk,
        exponent=exponent,
        predicate=bool(predicate),
        critical=critical,
        critical_constant=crit_const,
        threshold_2d=threshold,
        measured_d=d,
        agrees=bool(predicate == numeric),
        born_allowed=bool(numeric),
    )


def q_from_volume_integral(sys: FoldyLaxSystem, volume_integrals: np.ndarray) -> np.ndarray:
    """Bridge from int_{D_j} v dx (reference solver) to solver amplitudes.

    Q_j = c_j int_{D_j} v / C*_j with c_j = k^2 tau_j / a0; the 2D C* folds
    the E-renormalization into the same formula.
    """
    return sys.couplings * np.asarray(volume_integrals) / sys.Cstar
