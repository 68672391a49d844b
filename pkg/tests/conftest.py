"""Shared fixtures: reference-shape spectra are expensive, build them once."""

import numpy as np
import pytest

from resoscat.config import ClusterConfig, IncidentWave, ReferenceShape, Regime, SpacingLaw
from resoscat.spectral import assemble_newtonian, eigensystem

# standard shapes for the scaling experiments: the expansion center is offset
# from the centroid so first-order interaction remainders are not suppressed
# by centro-symmetry
BALL_OFFSET = (0.3, 0.0, 0.0)
DISC_OFFSET = (0.15, 0.0)


@pytest.fixture(scope="session")
def ball_shape():
    return ReferenceShape(kind="ball3d", diameter=1.0, offset=BALL_OFFSET)


@pytest.fixture(scope="session")
def disc_shape():
    return ReferenceShape(kind="disc2d", diameter=1.0, offset=DISC_OFFSET)


@pytest.fixture(scope="session")
def ball_disc8(ball_shape):
    return assemble_newtonian(ball_shape, 8)


@pytest.fixture(scope="session")
def ball_spec8(ball_disc8):
    return eigensystem(ball_disc8)


@pytest.fixture(scope="session")
def ball_disc12(ball_shape):
    return assemble_newtonian(ball_shape, 12)


@pytest.fixture(scope="session")
def ball_spec12(ball_disc12):
    return eigensystem(ball_disc12)


@pytest.fixture(scope="session")
def disc2d_disc16(disc_shape):
    return assemble_newtonian(disc_shape, 16)


@pytest.fixture(scope="session")
def disc2d_spec16(disc2d_disc16):
    return eigensystem(disc2d_disc16)


def triangle_centers(side: float, dim: int = 3) -> np.ndarray:
    c = np.zeros((3, dim))
    c[0, :2] = [0.0, side / np.sqrt(3.0)]
    c[1, :2] = [-side / 2.0, -side / (2.0 * np.sqrt(3.0))]
    c[2, :2] = [side / 2.0, -side / (2.0 * np.sqrt(3.0))]
    return c


def pair_centers(gap: float, dim: int = 3) -> np.ndarray:
    c = np.zeros((2, dim))
    c[0, 0], c[1, 0] = -gap / 2.0, gap / 2.0
    return c


def make_cluster(
    shape: ReferenceShape,
    delta: float,
    m: int = 1,
    h: float = 0.5,
    t: float = 0.0,
    c_b=1.0,
    d0: float = 1.0,
    sign: int = 1,
    surface_gap: float | None = None,
) -> ClusterConfig:
    """Cluster with M particles at exact surface distance d0*delta^t (3D law).

    `surface_gap` overrides the computed spacing-law distance.
    """
    dim = shape.dim
    if surface_gap is None:
        if dim == 3:
            surface_gap = d0 * delta**t
        else:
            surface_gap = d0 * np.exp(-abs(np.log(delta)) ** t)
    s = surface_gap + delta * shape.diameter
    if m == 1:
        centers = np.zeros((1, dim))
    elif m == 2:
        centers = pair_centers(s, dim)
    elif m == 3:
        centers = triangle_centers(s, dim)
    else:
        raise ValueError("helper supports m <= 3")
    theta = (0.0, 0.0, 1.0) if dim == 3 else (0.0, 1.0)
    return ClusterConfig(
        dim=dim,
        shape=shape,
        delta=delta,
        centers=centers,
        spacing=SpacingLaw(t=t, d0=d0 * (1.0 - 1e-9)),
        incident=IncidentWave(theta=theta, h=h, sign=sign),
        regime=Regime(kind="third", c_b=c_b),
    )


def eval_directions(dim: int) -> np.ndarray:
    if dim == 3:
        dirs = np.array(
            [[sx, sy, sz] for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)],
            dtype=float,
        )
        return dirs / np.sqrt(3.0)
    ang = 2.0 * np.pi * np.arange(8) / 8 + 0.37
    return np.stack([np.cos(ang), np.sin(ang)], axis=1)
