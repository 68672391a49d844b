"""Delta-sweep harness: scaling experiments, records, and slope fits.

A sweep fixes a cluster template (arrangement of centers, reference shape,
contrast prefactor) and the exponents (h, t), then for each radius delta:

  * rescales the center constellation about its centroid so the measured
    minimum surface-to-surface distance equals the spacing law exactly,
  * realizes the detuned incident frequency from the discrete spectrum,
  * solves the point-scatterer system (direct + Born ladder) and the
    volume-integral reference problem on the same cells,
  * samples all fields at a fixed set of exterior points (recorded radius),
  * emits one record per (delta, N).

Slope fits are least squares of log y against log delta (3D laws) or
log |log delta| (2D laws); each row carries the interaction-order
admissibility predicate for its (h, t, N), and rows failing it are excluded
from the Born-ladder fits automatically.

Record fields are a fixed, versioned column set so CSV output is stable
and byte-reproducible for identical inputs.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .config import ClusterConfig, derive_contrasts, spacing_target
from .foldylax import (
    assemble,
    check_invertibility,
    interaction_ladder,
    solve_born,
    solve_direct,
)
from .oracle import apriori_diagnostics, oracle_field_many, solve_lse
from .spectral import (
    NewtonianDiscretization,
    assemble_newtonian,
    eigensystem,
    realize_wavenumber,
    scattering_function_w,
)

__all__ = [
    "SlopeFit",
    "SweepRecord",
    "SweepResult",
    "fit_slope",
    "interaction_condition",
    "rescaled_config",
    "default_eval_points",
    "run_sweep",
    "RECORD_COLUMNS",
]


@dataclass(frozen=True)
class SlopeFit:
    """Least-squares power-law fit log y = slope * x + intercept."""

    slope: float
    intercept: float
    r2: float
    abscissa: str  # "log_delta" or "log_log_delta"
    n_points: int

    def as_dict(self) -> dict:
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "r2": self.r2,
            "abscissa": self.abscissa,
            "n_points": self.n_points,
        }


def fit_slope(points, kind: str = "log_delta") -> SlopeFit:
    """Fit log y against log x or log |log x|.

    Requires at least 4 points with positive y (and x in (0, 1) for the
    log-log abscissa); rejects a degenerate (constant) abscissa.
    """
    pts = [(float(x), float(y)) for x, y in points]
    if len(pts) < 4:
        raise ValueError(f"slope fit needs >= 4 points, got {len(pts)}")
    xs = np.array([p[0] for p in pts])
    ys = np.array([p[1] for p in pts])
    if np.any(ys <= 0):
        raise ValueError("slope fit needs positive ordinates")
    if kind == "log_delta":
        if np.any(xs <= 0):
            raise ValueError("log_delta abscissa needs positive x")
        ax = np.log(xs)
    elif kind == "log_log_delta":
        if np.any((xs <= 0) | (xs >= 1)):
            raise ValueError("log_log_delta abscissa needs x in (0, 1)")
        ax = np.log(np.abs(np.log(xs)))
    else:
        raise ValueError(f"unknown abscissa kind {kind!r}")
    if np.max(ax) - np.min(ax) < 1e-12:
        raise ValueError("degenerate abscissa: all x equal")
    ay = np.log(ys)
    slope, intercept = np.polyfit(ax, ay, 1)
    resid = ay - (slope * ax + intercept)
    ss_tot = float(np.sum((ay - ay.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return SlopeFit(slope=float(slope), intercept=float(intercept), r2=r2, abscissa=kind, n_points=len(pts))


def interaction_condition(dim: int, h: float, t: float, n: int) -> bool:
    """Admissibility of the N-interaction expansion at exponents (h, t).

    3D: 0 <= 1-h-t <= min(1/(N+1), (1-t)/N); 2D: 1-t-h > 0.
    """
    gap = 1.0 - h - t
    if dim == 3:
        bound = 1.0 / (n + 1) if n == 0 else min(1.0 / (n + 1), (1.0 - t) / n)
        return -1e-12 <= gap <= bound + 1e-12
    return gap > 1e-12


def rescaled_config(base: ClusterConfig, delta: float, h: float, t: float) -> ClusterConfig:
    """Sweep instance at `delta`: constellation rescaled to the spacing law.

    Centers are scaled about their centroid so the minimum surface distance
    equals d0 * delta^t (3D) or d0 exp(-|log delta|^t) (2D) exactly; the
    incident detuning exponent is set to h.
    """
    incident = replace(base.incident, h=h, wavenumber=None)
    spacing = replace(base.spacing, t=t)
    centers = np.asarray(base.centers, dtype=float)
    if base.m_particles > 1:
        centroid = centers.mean(axis=0)
        gaps = [
            np.linalg.norm(centers[i] - centers[j])
            for i in range(len(centers))
            for j in range(i + 1, len(centers))
        ]
        g = min(gaps)
        target = spacing_target(base.dim, delta, t, base.spacing.d0)
        scale = (target + delta * base.shape.diameter) / g
        centers = centroid + scale * (centers - centroid)
    return replace(base, delta=delta, centers=centers, spacing=spacing, incident=incident)


def cluster_diameter(cfg: ClusterConfig) -> float:
    spread = 0.0
    for i in range(cfg.m_particles):
        for j in range(i + 1, cfg.m_particles):
            spread = max(spread, float(np.linalg.norm(cfg.centers[i] - cfg.centers[j])))
    return spread + cfg.delta * cfg.shape.diameter


def default_eval_points(cfg: ClusterConfig, radius: float | None = None, count: int = 8):
    """Exterior sample points: `count` directions at 5x the cluster diameter.

    The radius is a convention (the remainder statements hold on any bounded
    exterior region); it is returned alongside the points and recorded in
    sweep output. Pass `radius` to pin it across a sweep.
    """
    if radius is None:
        radius = 5.0 * cluster_diameter(cfg)
    centroid = np.asarray(cfg.centers, dtype=float).mean(axis=0)
    if cfg.dim == 3:
        dirs = np.array(
            [[sx, sy, sz] for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)],
            dtype=float,
        ) / math.sqrt(3.0)
        dirs = dirs[:count]
    else:
        ang = 2.0 * np.pi * np.arange(count) / count + 0.37
        dirs = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    return centroid[None, :] + radius * dirs, radius


RECORD_COLUMNS = (
    "delta",
    "h",
    "t",
    "N",
    "k",
    "predicate",
    "invertible_predicate",
    "norm_Bk",
    "C_abs",
    "C_real",
    "C_imag",
    "norm_w",
    "apriori_ratio",
    "eval_radius",
    "u_oracle_abs",
    "u_direct_abs",
    "err_direct",
    "err_born",
    "increment_abs",
    "provenance",
)


@dataclass(frozen=True)
class SweepRecord:
    """One (delta, N) grid point; `err_*` are |.| averaged over eval points."""

    delta: float
    h: float
    t: float
    n: int
    k: float
    predicate: bool
    invertible_predicate: bool
    norm_bk: float
    c_value: complex
    norm_w: float
    apriori_ratio: float
    eval_radius: float
    u_oracle_abs: float
    u_direct_abs: float
    err_direct: float
    err_born: float
    increment_abs: float
    provenance: str = "foldylax+oracle-lse"

    def as_row(self) -> tuple:
        return (
            self.delta,
            self.h,
            self.t,
            self.n,
            self.k,
            self.predicate,
            self.invertible_predicate,
            self.norm_bk,
            abs(self.c_value),
            self.c_value.real,
            self.c_value.imag,
            self.norm_w,
            self.apriori_ratio,
            self.eval_radius,
            self.u_oracle_abs,
            self.u_direct_abs,
            self.err_direct,
            self.err_born,
            self.increment_abs,
            self.provenance,
        )


@dataclass(frozen=True)
class SweepResult:
    records: tuple[SweepRecord, ...]
    fits: dict[str, dict]


def _sweep_point(base, spec, disc, delta, h, t, n_list, resolution, eval_pts, radius, with_oracle):
    cfg = rescaled_config(base, delta, h, t)
    rw = realize_wavenumber(cfg, spec)
    contrasts_w = scattering_function_w(
        spec,
        derive_contrasts(cfg),
        rw.k,
        delta,
        a0=cfg.background.a0,
        n0_override=cfg.incident.n0,
    )
    sys = assemble(cfg, spec, rw.k)
    report = check_invertibility(sys, cfg)
    q = solve_direct(sys)
    n_max = max(n_list) if n_list else 0
    born = solve_born(sys, n_max)

    u_direct = np.array([_field(sys, q, x) for x in eval_pts])
    ladders = [interaction_ladder(sys, x, n_max, born=born) for x in eval_pts]
    u_born = np.stack([lad[0] for lad in ladders], axis=1)  # (N+1, n_pts)
    incs = np.stack([lad[1] for lad in ladders], axis=1)

    if with_oracle:
        sol = solve_lse(cfg, rw.k, resolution, disc=disc)
        u_oracle = oracle_field_many(sol, eval_pts)
        apriori = float(np.max(apriori_diagnostics(sol)))
    else:
        u_oracle = np.full(len(eval_pts), np.nan, dtype=complex)
        apriori = math.nan

    err_direct = float(np.mean(np.abs(u_oracle - u_direct)))
    recs = []
    for n in n_list:
        recs.append(
            SweepRecord(
                delta=delta,
                h=h,
                t=t,
                n=n,
                k=rw.k,
                predicate=interaction_condition(cfg.dim, h, t, n),
                invertible_predicate=report.predicate,
                norm_bk=sys.norm_Bk,
                c_value=complex(contrasts_w.coeff),
                norm_w=contrasts_w.norm,
                apriori_ratio=apriori,
                eval_radius=radius,
                u_oracle_abs=float(np.mean(np.abs(u_oracle))),
                u_direct_abs=float(np.mean(np.abs(u_direct))),
                err_direct=err_direct,
                err_born=float(np.mean(np.abs(u_oracle - u_born[n]))),
                increment_abs=float(np.mean(np.abs(incs[n]))),
            )
        )
    return recs


def _field(sys, q, x):
    from .foldylax import scattered_field

    return scattered_field(sys, q, x).value


def run_sweep(
    base: ClusterConfig,
    deltas,
    h: float,
    t: float,
    n_list=(1, 2),
    resolution: int = 12,
    eval_radius: float | None = None,
    eval_count: int = 8,
    jobs: int = 1,
    with_oracle: bool = True,
    spec=None,
    disc: NewtonianDiscretization | None = None,
) -> SweepResult:
    """Run the sweep grid and fit every scaling law the records support."""
    deltas = sorted(float(d) for d in deltas)
    if len(deltas) < 4:
        raise ValueError("sweep needs >= 4 delta values")
    span = abs(math.log10(deltas[-1]) - math.log10(deltas[0]))
    if span < 0.5 - 1e-9:
        raise ValueError(f"delta grid spans {span:.2f} decades, need >= 0.5")
    n_list = sorted(set(int(n) for n in n_list))
    if disc is None:
        disc = assemble_newtonian(base.shape, resolution)
    if spec is None:
        spec = eigensystem(disc)
    # evaluation points frozen at the largest delta's geometry
    cfg_max = rescaled_config(base, deltas[-1], h, t)
    eval_pts, radius = default_eval_points(cfg_max, radius=eval_radius)

    args = [(base, spec, disc, d, h, t, n_list, resolution, eval_pts, radius, with_oracle) for d in deltas]
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(lambda a: _sweep_point(*a), args))
    else:
        chunks = [_sweep_point(*a) for a in args]
    records = tuple(rec for chunk in chunks for rec in chunk)

    per_delta = {r.delta: r for r in records}  # any N; delta-level quantities repeat
    fits: dict[str, dict] = {}

    def _try_fit(name, pts, kind):
        try:
            fits[name] = fit_slope(pts, kind).as_dict()
        except ValueError as exc:
            fits[name] = {"error": str(exc)}

    axis = "log_delta"
    log_axis = "log_log_delta"
    _try_fit("C_abs", [(d, abs(r.c_value)) for d, r in per_delta.items()], axis)
    _try_fit("norm_w", [(d, r.norm_w) for d, r in per_delta.items()], axis)
    if any(r.norm_bk > 0 for r in per_delta.values()):
        _try_fit("norm_Bk", [(d, r.norm_bk) for d, r in per_delta.items()], axis)
    if with_oracle:
        _try_fit("apriori_ratio", [(d, r.apriori_ratio) for d, r in per_delta.items()], axis)
        _try_fit("err_direct", [(d, r.err_direct) for d, r in per_delta.items()], axis)
    inc_axis = axis if base.dim == 3 else log_axis
    for n in n_list:
        ok = [r for r in records if r.n == n and r.predicate]
        if with_oracle:
            _try_fit(f"err_born_N{n}", [(r.delta, r.err_born) for r in ok], inc_axis)
        _try_fit(f"increment_N{n}", [(r.delta, r.increment_abs) for r in ok], inc_axis)
    return SweepResult(records=records, fits=fits)
