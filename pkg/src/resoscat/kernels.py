"""Helmholtz and Laplace fundamental solutions in 2D and 3D.

Conventions (outgoing, Sommerfeld radiation condition):

    3D:  Phi_k(x, y) = exp(ik|x-y|) / (4 pi |x-y|),   Phi_0 = 1 / (4 pi |x-y|)
    2D:  Phi_k(x, y) = (i/4) H_0^(1)(k|x-y|),         Phi_0 = -(1/2 pi) log|x-y|

`k` here is the wavenumber actually seen by the kernel; for a background
medium (a0, b0) that is k*sqrt(b0/a0), and the caller owns that factor.

Near-field behaviour of the 2D kernel (Colton & Kress, eq. 3.84):

    Phi_k = Phi_0 + E(k) + O(r^2 log r),  r = |x-y| -> 0,
    E(k)  = i/4 - (1/2 pi) [log(k/2) + gamma_Euler].

The additive constant E(k) enters the effective scattering coefficient of a
2D point scatterer, so it is exposed as its own function.

All functions are stateless and vectorize over trailing point axes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import hankel1

__all__ = [
    "KernelEval",
    "green3d",
    "green2d",
    "green0_2d",
    "constant_E",
    "plane_wave",
    "euler_gamma_by_limit",
]

EULER_GAMMA = float(np.euler_gamma)


@dataclass(frozen=True)
class KernelEval:
    """Kernel value and (optionally) its gradient with respect to y."""

    value: complex
    gradient: np.ndarray | None = None


def _separation(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    d = y - x
    r = np.sqrt(np.sum(d * d, axis=-1))
    if np.any(r == 0.0):
        raise ValueError("coincident points: kernel is singular at x == y")
    return d, r


def green3d(k: float, x, y, with_gradient: bool = False) -> KernelEval:
    """Outgoing 3D Helmholtz fundamental solution exp(ikr)/(4 pi r).

    `k = 0` gives the Laplace kernel. The gradient is taken with respect
    to y and is computed in closed form:

        grad_y Phi_k = (ik - 1/r) Phi_k * (y - x)/r.
    """
    if k < 0:
        raise ValueError("wavenumber must be nonnegative in 3D")
    d, r = _separation(x, y)
    val = np.exp(1j * k * r) / (4.0 * np.pi * r)
    grad = None
    if with_gradient:
        grad = ((1j * k - 1.0 / r) * val / r)[..., None] * d
    return KernelEval(value=val if val.ndim else complex(val), gradient=grad)


def green2d(k: float, x, y, with_gradient: bool = False) -> KernelEval:
    """Outgoing 2D Helmholtz fundamental solution (i/4) H_0^(1)(kr).

    Requires k > 0 (the 2D Laplace kernel is `green0_2d`). The y-gradient
    uses dH_0/dz = -H_1:

        grad_y Phi_k = -(ik/4) H_1^(1)(kr) * (y - x)/r.
    """
    if k <= 0:
        raise ValueError("wavenumber must be positive in 2D")
    d, r = _separation(x, y)
    val = 0.25j * hankel1(0, k * r)
    grad = None
    if with_gradient:
        grad = (-0.25j * k * hankel1(1, k * r) / r)[..., None] * d
    return KernelEval(value=val if val.ndim else complex(val), gradient=grad)


def green0_2d(x, y, with_gradient: bool = False) -> KernelEval:
    """2D Laplace fundamental solution -(1/2 pi) log|x-y|."""
    d, r = _separation(x, y)
    val = -np.log(r) / (2.0 * np.pi)
    grad = None
    if with_gradient:
        grad = (-1.0 / (2.0 * np.pi * r * r))[..., None] * d
    return KernelEval(value=val if val.ndim else float(val), gradient=grad)


def constant_E(k: float) -> complex:
    """Additive constant of the 2D near-field split Phi_k = Phi_0 + E + O(r^2 log r)."""
    if k <= 0:
        raise ValueError("wavenumber must be positive")
    return 0.25j - (np.log(0.5 * k) + EULER_GAMMA) / (2.0 * np.pi)


def euler_gamma_by_limit(p: int = 10**6) -> float:
    """Euler-Mascheroni constant via lim (sum_{m<=p} 1/m - log p).

    The partial sum converges like 1/(2p); the returned value applies the
    1/(2p) - 1/(12 p^2) correction so that p = 10^6 already gives ~1e-19
    truncation error (below double roundoff). Kept as an independent route
    for validating the hard-coded constant.
    """
    m = np.arange(1, p + 1, dtype=float)
    partial = np.sum(1.0 / m[::-1]) - np.log(p)
    return float(partial - 0.5 / p + 1.0 / (12.0 * p * p))


def plane_wave(k: float, theta, x) -> np.ndarray | complex:
    """Incident plane wave exp(i k theta . x) with |theta| = 1."""
    theta = np.asarray(theta, dtype=float)
    x = np.asarray(x, dtype=float)
    val = np.exp(1j * k * (x @ theta))
    return val if val.ndim else complex(val)
