"""Scene description: cluster geometry, contrast regime, incident wave.

A scene is M inhomogeneities D_j = z_j + delta * B, all scaled copies of one
reference shape B (origin-centered, Euclidean diameter <= 1), embedded in a
homogeneous background (a0, b0). Coefficients inside the particles follow
one of three contrast regimes in the radius delta:

    first   : a1 ~ c_a delta^-2,  b1 ~ c_b delta^-2   (Minnaert, surface modes)
    second  : Drude dispersion eps = eps0 - kp^2/(k(k + i*gamma_dp))  (plasmonic)
    third   : a1 = a0,  b1 - b0 = tau with
              tau = c_b delta^-2            in 3D,
              tau = c_b delta^-2 |log d|^-1 in 2D   (dielectric, volume modes)

Only the third regime feeds the multi-particle solver; the first two are
configured for the resonance calculators.

The canonical interchange form is a JSON document; `parse_config` and
`serialize` round-trip it. Validation enforces pairwise-disjoint particle
supports and the spacing law

    d := min_{i != j} dist(D_i, D_j) >= d0 * delta^t           (3D)
    d >= d0 * exp(-|log delta|^t)                              (2D)

up to 1e-9 relative slack, skipped for single-particle scenes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

__all__ = [
    "ConfigError",
    "ReferenceShape",
    "SpacingLaw",
    "Background",
    "Regime",
    "IncidentWave",
    "ClusterConfig",
    "ContrastParams",
    "parse_config",
    "serialize",
    "derive_contrasts",
    "spacing_target",
]

SHAPE_KINDS_3D = ("ball3d", "cube3d")
SHAPE_KINDS_2D = ("disc2d", "square2d")


class ConfigError(ValueError):
    """Raised for malformed documents and violated scene invariants."""


@dataclass(frozen=True)
class ReferenceShape:
    """Reference shape containing the origin, with a given Euclidean diameter.

    `offset` displaces the shape's centroid from the origin (the origin is
    the point-scatterer expansion center, and need not be the centroid; a
    nonzero offset breaks centro-symmetry about the expansion center, which
    the first-order interaction remainders are sensitive to). The origin
    must stay strictly inside.
    """

    kind: str
    diameter: float = 1.0
    offset: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.kind not in SHAPE_KINDS_3D + SHAPE_KINDS_2D:
            raise ConfigError(f"unknown shape kind {self.kind!r}")
        if not 0.0 < self.diameter <= 1.0:
            raise ConfigError(
                f"shape diameter must lie in (0, 1], got {self.diameter} "
                "(the 2D log kernel must stay nonnegative on B x B)"
            )
        if self.offset is not None:
            off = tuple(float(c) for c in self.offset)
            if len(off) != self.dim:
                raise ConfigError("shape offset dimension mismatch")
            object.__setattr__(self, "offset", off)
            inside = (
                math.sqrt(sum(c * c for c in off)) < self.radius
                if self.kind in ("ball3d", "disc2d")
                else max(abs(c) for c in off) < 0.5 * self.side
            )
            if not inside:
                raise ConfigError("shape offset pushes the origin outside the shape")

    @property
    def dim(self) -> int:
        return 3 if self.kind in SHAPE_KINDS_3D else 2

    @property
    def radius(self) -> float:
        """Circumradius about the centroid (half the Euclidean diameter)."""
        return 0.5 * self.diameter

    @property
    def side(self) -> float:
        """Edge length for the box kinds."""
        if self.kind not in ("cube3d", "square2d"):
            raise ConfigError(f"shape {self.kind!r} has no side length")
        return self.diameter / math.sqrt(self.dim)

    @property
    def offset_vector(self) -> np.ndarray:
        return np.zeros(self.dim) if self.offset is None else np.asarray(self.offset)


@dataclass(frozen=True)
class SpacingLaw:
    t: float = 0.0
    d0: float = 1.0

    def __post_init__(self):
        if self.t < 0:
            raise ConfigError("spacing exponent t must be >= 0")
        if self.d0 <= 0:
            raise ConfigError("spacing prefactor d0 must be positive")


@dataclass(frozen=True)
class Background:
    a0: float = 1.0
    b0: float = 1.0

    def __post_init__(self):
        if self.a0 <= 0 or self.b0 <= 0:
            raise ConfigError("background coefficients must be positive")

    @property
    def wavenumber_factor(self) -> float:
        """sqrt(b0/a0): converts the nominal k to the kernel wavenumber."""
        return math.sqrt(self.b0 / self.a0)


@dataclass(frozen=True)
class Regime:
    """Contrast regime and its scaling prefactors.

    third  : c_b (scalar or per-particle tuple), optional use_total_b switch
             selecting b = b0 + tau instead of tau in the scattering
             coefficient resolvent (comparison variant, off by default).
    first  : c_a, c_b with a1 = c_a delta^-2, b1 = c_b delta^-2.
    second : k_p, gamma_dp, eps0 and the supplied Neumann-Poincare spectrum
             sigmas (computing that spectrum is out of scope).
    """

    kind: str
    c_b: float | tuple[float, ...] = 1.0
    c_a: float = 1.0
    k_p: float = 1.0
    gamma_dp: float = 0.0
    eps0: float = 1.0
    sigmas: tuple[float, ...] = ()
    use_total_b: bool = False

    def __post_init__(self):
        if self.kind not in ("first", "second", "third"):
            raise ConfigError(f"unknown regime kind {self.kind!r}")
        cb = self.c_b if isinstance(self.c_b, tuple) else (self.c_b,)
        if any(c <= 0 for c in cb):
            raise ConfigError("contrast prefactor c_b must be positive")


@dataclass(frozen=True)
class IncidentWave:
    """Plane wave exp(i k sqrt(b0/a0) theta.x) with near-resonance detuning.

    The frequency is specified relative to a resonance: k^2 = k_n0^2 (1 +-
    eps) with eps = delta^h in 3D and |log delta|^-h in 2D. `wavenumber`
    stores the realized k once the spectrum is known (None until then).
    """

    theta: tuple[float, ...]
    h: float = 0.5
    sign: int = 1
    n0: int | None = None
    wavenumber: float | None = None

    def __post_init__(self):
        norm = math.sqrt(sum(c * c for c in self.theta))
        if abs(norm - 1.0) > 1e-12:
            raise ConfigError(f"incident direction must be unit length, |theta| = {norm!r}")
        if not 0.0 <= self.h <= 1.0:
            raise ConfigError("detuning exponent h must lie in [0, 1]")
        if self.sign not in (-1, 1):
            raise ConfigError("detuning sign must be +1 or -1")


def spacing_target(dim: int, delta: float, t: float, d0: float) -> float:
    """Required minimum surface-to-surface distance for the spacing law."""
    if dim == 3:
        return d0 * delta**t
    return d0 * math.exp(-abs(math.log(delta)) ** t)


def _support_distance(shape: ReferenceShape, delta: float, zi: np.ndarray, zj: np.ndarray) -> float:
    """Exact distance between the supports z_i + delta*B and z_j + delta*B."""
    dz = np.abs(zj - zi)
    if shape.kind in ("ball3d", "disc2d"):
        return float(np.linalg.norm(dz) - delta * shape.diameter)
    gap = np.maximum(dz - delta * shape.side, 0.0)
    if np.all(dz <= delta * shape.side):
        return float(np.max(dz) - delta * shape.side)  # negative: boxes overlap
    return float(np.linalg.norm(gap))


@dataclass(frozen=True)
class ClusterConfig:
    """Validated scene: geometry, regime, background, incident wave."""

    dim: int
    shape: ReferenceShape
    delta: float
    centers: np.ndarray
    spacing: SpacingLaw = field(default_factory=SpacingLaw)
    background: Background = field(default_factory=Background)
    regime: Regime = field(default_factory=lambda: Regime(kind="third"))
    incident: IncidentWave = field(default_factory=lambda: IncidentWave(theta=(0.0, 0.0, 1.0)))

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise ConfigError("dim must be 2 or 3")
        if self.shape.dim != self.dim:
            raise ConfigError(f"shape {self.shape.kind!r} is not {self.dim}-dimensional")
        if not 0.0 < self.delta < 1.0:
            raise ConfigError("delta must lie in (0, 1)")
        centers = np.asarray(self.centers, dtype=float)
        if centers.ndim != 2 or centers.shape[1] != self.dim:
            raise ConfigError(f"centers must be an (M, {self.dim}) array")
        centers = centers.copy()
        centers.setflags(write=False)
        object.__setattr__(self, "centers", centers)
        if len(self.incident.theta) != self.dim:
            raise ConfigError("incident direction dimension mismatch")
        if isinstance(self.regime.c_b, tuple) and len(self.regime.c_b) != self.m_particles:
            raise ConfigError(
                f"per-particle c_b list has length {len(self.regime.c_b)}, "
                f"expected {self.m_particles}"
            )
        self._validate_spacing()

    @property
    def m_particles(self) -> int:
        return self.centers.shape[0]

    def min_support_distance(self) -> float | None:
        """Measured d = min_{i<j} dist(D_i, D_j); None for a single particle."""
        m = self.m_particles
        if m < 2:
            return None
        best = math.inf
        for i in range(m):
            for j in range(i + 1, m):
                best = min(best, _support_distance(self.shape, self.delta, self.centers[i], self.centers[j]))
        return best

    def _validate_spacing(self):
        d = self.min_support_distance()
        if d is None:
            return
        if d <= 0.0:
            bad = []
            for i in range(self.m_particles):
                for j in range(i + 1, self.m_particles):
                    if _support_distance(self.shape, self.delta, self.centers[i], self.centers[j]) <= 0:
                        bad.append((i, j))
            pairs = ",".join(f"{i},{j}" for i, j in bad)
            raise ConfigError(f"particles overlap: j={pairs}")
        target = spacing_target(self.dim, self.delta, self.spacing.t, self.spacing.d0)
        if d < target * (1.0 - 1e-9):
            raise ConfigError(
                f"spacing law violated: measured d = {d:.6g} < "
                f"d0*{'delta^t' if self.dim == 3 else 'exp(-|log delta|^t)'} = {target:.6g}"
            )

    def exclusion_radius(self) -> float:
        """Field evaluation must keep dist(x, z_j) >= 5 delta diam(B)."""
        return 5.0 * self.delta * self.shape.diameter

    def with_incident(self, incident: IncidentWave) -> "ClusterConfig":
        return replace(self, incident=incident)


# ---------------------------------------------------------------------------
# Contrasts
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ContrastParams:
    """Per-particle contrasts for the dielectric (third) regime.

    taus  : tuple of tau_j = b_j - b0 (one entry per particle)
    alpha : a1 - a0 (identically 0 here: the solver assumes a_j = a0)
    gamma : beta - alpha b1/a1, which collapses to tau when alpha = 0
    """

    taus: tuple[float, ...]
    alpha: float
    b0: float
    use_total_b: bool = False

    @property
    def tau(self) -> float:
        if len(set(self.taus)) != 1:
            raise ValueError("heterogeneous taus: use .taus")
        return self.taus[0]

    @property
    def gammas(self) -> tuple[float, ...]:
        return self.taus

    def coupling(self, j: int) -> float:
        """Value entering the resolvent: tau_j, or b_j = b0 + tau_j if requested."""
        t = self.taus[j]
        return t + self.b0 if self.use_total_b else t


def derive_contrasts(cfg: ClusterConfig) -> ContrastParams:
    """Third-regime contrasts tau_j = c_b delta^-2 (3D) or c_b delta^-2 |log d|^-1 (2D)."""
    if cfg.regime.kind != "third":
        raise ConfigError(
            f"contrast derivation requires the third regime, got {cfg.regime.kind!r}"
        )
    scale = cfg.delta**-2 if cfg.dim == 3 else cfg.delta**-2 / abs(math.log(cfg.delta))
    cb = cfg.regime.c_b
    cbs = cb if isinstance(cb, tuple) else (cb,) * cfg.m_particles
    taus = tuple(c * scale for c in cbs)
    return ContrastParams(taus=taus, alpha=0.0, b0=cfg.background.b0, use_total_b=cfg.regime.use_total_b)


# ---------------------------------------------------------------------------
# JSON interchange
# ---------------------------------------------------------------------------


def parse_config(text: str) -> ClusterConfig:
    """Parse and validate the canonical JSON form of a scene."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"syntax error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    try:
        shape_doc = doc["shape"]
        off = shape_doc.get("offset")
        shape = ReferenceShape(
            kind=shape_doc["kind"],
            diameter=float(shape_doc.get("diameter", 1.0)),
            offset=None if off is None else tuple(float(c) for c in off),
        )
        spacing_doc = doc.get("spacing", {})
        spacing = SpacingLaw(t=float(spacing_doc.get("t", 0.0)), d0=float(spacing_doc.get("d0", 1.0)))
        bg_doc = doc.get("background", {})
        background = Background(a0=float(bg_doc.get("a0", 1.0)), b0=float(bg_doc.get("b0", 1.0)))
        reg_doc = doc.get("regime", {"kind": "third"})
        c_b = reg_doc.get("c_b", 1.0)
        regime = Regime(
            kind=reg_doc.get("kind", "third"),
            c_b=tuple(float(c) for c in c_b) if isinstance(c_b, list) else float(c_b),
            c_a=float(reg_doc.get("c_a", 1.0)),
            k_p=float(reg_doc.get("k_p", 1.0)),
            gamma_dp=float(reg_doc.get("gamma_dp", 0.0)),
            eps0=float(reg_doc.get("eps0", 1.0)),
            sigmas=tuple(float(s) for s in reg_doc.get("sigmas", [])),
            use_total_b=bool(reg_doc.get("use_total_b", False)),
        )
        inc_doc = doc.get("incident", {})
        dim = int(doc["dim"])
        default_theta = (0.0, 0.0, 1.0) if dim == 3 else (0.0, 1.0)
        incident = IncidentWave(
            theta=tuple(float(c) for c in inc_doc.get("theta", default_theta)),
            h=float(inc_doc.get("h", 0.5)),
            sign=int(inc_doc.get("sign", 1)),
            n0=None if inc_doc.get("n0") is None else int(inc_doc["n0"]),
            wavenumber=None if inc_doc.get("wavenumber") is None else float(inc_doc["wavenumber"]),
        )
        return ClusterConfig(
            dim=dim,
            shape=shape,
            delta=float(doc["delta"]),
            centers=np.asarray(doc["centers"], dtype=float),
            spacing=spacing,
            background=background,
            regime=regime,
            incident=incident,
        )
    except KeyError as exc:
        raise ConfigError(f"missing required field {exc.args[0]!r}") from exc
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc


def serialize(cfg: ClusterConfig) -> str:
    """Canonical JSON rendering; parse_config(serialize(cfg)) == cfg."""
    reg = cfg.regime
    doc = {
        "dim": cfg.dim,
        "shape": {
            "kind": cfg.shape.kind,
            "diameter": cfg.shape.diameter,
            "offset": None if cfg.shape.offset is None else list(cfg.shape.offset),
        },
        "delta": cfg.delta,
        "centers": cfg.centers.tolist(),
        "spacing": {"t": cfg.spacing.t, "d0": cfg.spacing.d0},
        "background": {"a0": cfg.background.a0, "b0": cfg.background.b0},
        "regime": {
            "kind": reg.kind,
            "c_b": list(reg.c_b) if isinstance(reg.c_b, tuple) else reg.c_b,
            "c_a": reg.c_a,
            "k_p": reg.k_p,
            "gamma_dp": reg.gamma_dp,
            "eps0": reg.eps0,
            "sigmas": list(reg.sigmas),
            "use_total_b": reg.use_total_b,
        },
        "incident": {
            "theta": list(cfg.incident.theta),
            "h": cfg.incident.h,
            "sign": cfg.incident.sign,
            "n0": cfg.incident.n0,
            "wavenumber": cfg.incident.wavenumber,
        },
    }
    return json.dumps(doc, indent=2, sort_keys=True)
