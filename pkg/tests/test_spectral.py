"""Newtonian spectra, scattering coefficients, resonance formulas, cache."""

import numpy as np
import pytest
from scipy.sparse.linalg import eigsh

from resoscat.config import ContrastParams, ReferenceShape, derive_contrasts
from resoscat.spectral import (
    SingularShiftError,
    SpectralData,
    assemble_newtonian,
    cache_key,
    coefficient_by_dense_solve,
    dielectric_resonances,
    eigensystem,
    load_cache,
    minnaert_from_theta,
    minnaert_resonance,
    physical_spectrum,
    plasmonic_resonances,
    realize_wavenumber,
    save_cache,
    scattering_function_w,
    theta_geometry_factor,
)
from resoscat.grids import sphere_mesh

from conftest import make_cluster


def _synthetic_spec(eigenvalues, moments, measure, dim=3):
    vals = np.asarray(eigenvalues, dtype=float)
    moms = np.asarray(moments, dtype=float)
    n = len(vals)
    return SpectralData(
        dim=dim,
        eigenvalues=vals,
        eigenvectors=np.eye(n),
        moments=moms,
        measure=measure,
        n0=0,
        grid=None,
        complete=True,
    )


# ---------------------------------------------------------------------------
# discretization and eigensystem
# ---------------------------------------------------------------------------


def test_matrix_symmetric_exactly(ball_disc8):
    assert np.array_equal(ball_disc8.matrix, ball_disc8.matrix.T)


def test_3d_matrix_positive_definite(ball_spec8):
    assert np.all(ball_spec8.eigenvalues > 0)


def test_2d_unit_diameter_disc_entries_nonnegative():
    disc = assemble_newtonian(ReferenceShape(kind="disc2d", diameter=1.0), 12)
    assert np.all(disc.matrix >= 0)


def test_ball_top_eigenvalue_analytic(ball_spec12):
    # radial Newtonian eigenfunctions of a radius-a ball give lam_1 = (2a/pi)^2
    assert ball_spec12.eigenvalues[0] == pytest.approx(1.0 / np.pi**2, rel=5e-3)


def test_top_eigenvalue_cauchy_convergence(ball_shape):
    lam16 = eigensystem(assemble_newtonian(ball_shape, 16)).eigenvalues[0]
    mat24 = assemble_newtonian(ball_shape, 24).matrix
    lam24 = eigsh(mat24, k=1, which="LA", return_eigenvectors=False)[0]
    assert abs(lam16 - lam24) / lam24 <= 0.01


def test_eigenpair_residuals(ball_disc8, ball_spec8):
    resid = ball_disc8.matrix @ ball_spec8.eigenvectors - ball_spec8.eigenvectors * ball_spec8.eigenvalues
    assert np.max(np.linalg.norm(resid, axis=0)) <= 1e-10 * ball_spec8.eigenvalues[0]


def test_parseval_for_constant_function(ball_spec8, disc2d_spec16):
    for spec in (ball_spec8, disc2d_spec16):
        assert np.sum(spec.moments**2) == pytest.approx(spec.measure, rel=1e-6)


def test_resonant_mode_has_monopole_weight(ball_spec8):
    assert ball_spec8.n0 == 0
    assert ball_spec8.moments[ball_spec8.n0] ** 2 > 1e-8 * ball_spec8.measure


def test_descending_order_and_sign_convention(ball_spec8):
    assert np.all(np.diff(ball_spec8.eigenvalues) <= 1e-14)
    for j in range(ball_spec8.count):
        col = ball_spec8.eigenvectors[:, j]
        nz = np.nonzero(np.abs(col) > 1e-12 * np.max(np.abs(col)))[0]
        assert col[nz[0]] > 0


def test_count_truncation(ball_disc8):
    spec = eigensystem(ball_disc8, count=5)
    assert spec.count == 5
    assert not spec.complete
    with pytest.raises(ValueError, match="exceeds"):
        eigensystem(ball_disc8, count=ball_disc8.n_cells + 1)


def test_3d_delta_square_scaling(ball_shape):
    full = eigensystem(assemble_newtonian(ball_shape, 8))
    delta = 0.07
    small_shape = ReferenceShape(
        kind="ball3d", diameter=delta, offset=tuple(delta * c for c in ball_shape.offset)
    )
    small = eigensystem(assemble_newtonian(small_shape, 8))
    ratio = small.eigenvalues[:20] / full.eigenvalues[:20]
    assert np.allclose(ratio, delta**2, rtol=1e-3)


def test_2d_rank_one_scaling_identity():
    shape = ReferenceShape(kind="disc2d", diameter=1.0)
    disc = assemble_newtonian(shape, 12)
    delta = 0.05
    small = assemble_newtonian(ReferenceShape(kind="disc2d", diameter=delta), 12)
    s = np.sqrt(disc.grid.measures)
    predicted = delta**2 * (disc.matrix + abs(np.log(delta)) / (2.0 * np.pi) * np.outer(s, s))
    err = np.max(np.abs(small.matrix - predicted)) / np.max(np.abs(predicted))
    assert err <= 1e-8


def test_galerkin_eigenvalue_interlacing_nested_cube():
    # nested piecewise-constant spaces on a cube: top eigenvalue nondecreasing
    shape = ReferenceShape(kind="cube3d", diameter=1.0)
    lam_coarse = eigensystem(assemble_newtonian(shape, 6)).eigenvalues[0]
    lam_fine = eigensystem(assemble_newtonian(shape, 12)).eigenvalues[0]
    assert lam_fine >= lam_coarse - 1e-8


def test_2d_top_eigenvalue_scaling_hypothesis(disc2d_spec16):
    # lam_1(delta B) ~ delta^2 |log delta|: unit slope in the scaled abscissa
    xs, ys = [], []
    for m in (3, 4, 5, 6):
        delta = float(np.exp(-m))
        phys = physical_spectrum(disc2d_spec16, delta)
        xs.append(delta**2 * m)
        ys.append(phys.lams[0])
    slope = np.polyfit(np.log(xs), np.log(ys), 1)[0]
    assert slope == pytest.approx(1.0, abs=0.05)


def test_2d_physical_spectrum_needs_complete_basis(disc2d_disc16):
    spec = eigensystem(disc2d_disc16, count=10)
    with pytest.raises(ValueError, match="complete"):
        physical_spectrum(spec, 0.05)


# ---------------------------------------------------------------------------
# scattering function w and coefficient C
# ---------------------------------------------------------------------------


def test_single_mode_series():
    # one mode, lam = 2, m^2 = 3, shift a0/(k^2 tau) = 1: the resolvent
    # convention w = c (I - c A0)^{-1} 1 gives C = 3/(1 - 2) = -3
    spec = _synthetic_spec([2.0], [np.sqrt(3.0)], measure=3.0)
    contrasts = ContrastParams(taus=(1.0,), alpha=0.0, b0=1.0)
    res = scattering_function_w(spec, contrasts, k=1.0, delta=1.0)
    assert res.shift == pytest.approx(1.0, rel=1e-15)
    assert res.coeff == pytest.approx(-3.0, rel=1e-14)


def test_far_below_resonance_coefficient_positive():
    # k^2 tau small: C ~ (k^2 tau / a0) |B| > 0
    spec = _synthetic_spec([0.3, 0.1], [0.7, 0.2], measure=0.53)
    contrasts = ContrastParams(taus=(1.0,), alpha=0.0, b0=1.0)
    res = scattering_function_w(spec, contrasts, k=0.01, delta=1.0)
    expected = 1e-4 * (0.7**2 + 0.2**2)
    assert res.coeff == pytest.approx(expected, rel=1e-3)


def test_series_equals_dense_resolvent_3d(ball_disc12, ball_spec12, ball_shape):
    cfg = make_cluster(ball_shape, 0.06)
    contrasts = derive_contrasts(cfg)
    rw = realize_wavenumber(cfg, ball_spec12)
    series = scattering_function_w(ball_spec12, contrasts, rw.k, cfg.delta).coeff
    dense = coefficient_by_dense_solve(ball_disc12, contrasts, rw.k, cfg.delta)
    assert series == pytest.approx(dense, rel=1e-8)


def test_series_equals_dense_resolvent_2d(disc2d_disc16, disc2d_spec16, disc_shape):
    cfg = make_cluster(disc_shape, 0.05, h=0.5)
    contrasts = derive_contrasts(cfg)
    rw = realize_wavenumber(cfg, disc2d_spec16)
    series = scattering_function_w(disc2d_spec16, contrasts, rw.k, cfg.delta).coeff
    dense = coefficient_by_dense_solve(disc2d_disc16, contrasts, rw.k, cfg.delta)
    assert series == pytest.approx(dense, rel=1e-8)


def test_exact_resonance_guard():
    spec = _synthetic_spec([2.0, 1.0], [1.0, 1.0], measure=2.0)
    contrasts = ContrastParams(taus=(0.5,), alpha=0.0, b0=1.0)
    # k^2 tau = 1/2 => shift = 2 = lam_1 exactly
    with pytest.raises(SingularShiftError, match="n=0"):
        scattering_function_w(spec, contrasts, k=1.0, delta=1.0)


def test_zero_coupling_returns_zero():
    spec = _synthetic_spec([2.0], [1.0], measure=1.0)
    contrasts = ContrastParams(taus=(0.0,), alpha=0.0, b0=1.0)
    res = scattering_function_w(spec, contrasts, k=1.0, delta=1.0)
    assert res.coeff == 0.0 and res.norm == 0.0


# ---------------------------------------------------------------------------
# resonances
# ---------------------------------------------------------------------------


def test_dielectric_formula_identity():
    # gamma * lam = 1  =>  k = 1
    spec = _synthetic_spec([1.0 / 0.07**2], [1.0], measure=1.0)
    contrasts = ContrastParams(taus=(1.0,), alpha=0.0, b0=1.0)
    rs = dielectric_resonances(spec, contrasts, delta=0.07, count=1)
    # physical lam = delta^2 lam~ = 1 and gamma = 1, so k = 1
    assert rs.dielectric[0] == pytest.approx(1.0, rel=1e-12)


def test_dielectric_3d_delta_free(ball_spec8, ball_shape):
    ks = []
    for delta in (0.08, 0.02):
        cfg = make_cluster(ball_shape, delta)
        rs = dielectric_resonances(ball_spec8, derive_contrasts(cfg), delta, count=3)
        ks.append(rs.dielectric)
    # tau = delta^-2 exactly cancels the delta^2 eigenvalue scaling
    assert np.allclose(ks[0], ks[1], rtol=1e-12)
    assert ks[0][0] == pytest.approx(1.0 / np.sqrt(ball_spec8.eigenvalues[0]), rel=1e-12)


def test_dielectric_2d_drift_bounded(disc2d_spec16, disc_shape):
    ks = []
    for m in (3, 4, 5):
        delta = float(np.exp(-m))
        cfg = make_cluster(disc_shape, delta)
        rs = dielectric_resonances(disc2d_spec16, derive_contrasts(cfg), delta, count=1)
        ks.append(rs.dielectric[0])
    assert max(ks) / min(ks) <= 1.2


def test_moment_free_spectrum_rejected():
    spec = _synthetic_spec([1.0, 0.5], [0.0, 0.0], measure=1.0)
    spec = SpectralData(
        dim=3,
        eigenvalues=spec.eigenvalues,
        eigenvectors=spec.eigenvectors,
        moments=spec.moments,
        measure=spec.measure,
        n0=0,
        grid=None,
        complete=True,
    )
    contrasts = ContrastParams(taus=(1.0,), alpha=0.0, b0=1.0)
    with pytest.raises(ValueError, match="moments vanish"):
        dielectric_resonances(spec, contrasts, delta=0.05)


def test_sphere_geometry_factor():
    theta = theta_geometry_factor(sphere_mesh(1.0, 3))
    assert theta == pytest.approx(2.0 / 3.0, abs=1e-3)


def test_theta_scales_with_radius_squared():
    t_half = theta_geometry_factor(sphere_mesh(0.5, 3))
    t_unit = theta_geometry_factor(sphere_mesh(1.0, 3))
    assert t_half == pytest.approx(0.25 * t_unit, rel=1e-10)


def test_minnaert_resonance_and_scaling():
    delta = 0.03
    k_m, theta_b, theta_d = minnaert_resonance(
        ReferenceShape(kind="ball3d", diameter=1.0), delta, a0=1.0, a1=2.0, surface_resolution=3
    )
    assert theta_d == delta**2 * theta_b  # exact by construction
    assert k_m == pytest.approx((8.0 * np.pi / (2.0 * theta_d)) ** 0.25, rel=1e-14)


def test_minnaert_quarter_on_a1_quadrupling():
    k1 = minnaert_from_theta(1.0, 1.0, 0.5)
    k4 = minnaert_from_theta(1.0, 4.0, 0.5)
    assert k4**2 == pytest.approx(k1**2 / 2.0, rel=1e-14)


def test_minnaert_rejects_2d_shapes():
    with pytest.raises(ValueError, match="3D shape"):
        minnaert_resonance(ReferenceShape(kind="disc2d", diameter=1.0), 0.05, 1.0, 1.0, 3)


def test_plasmonic_values_and_flags():
    ks, skipped, admissible = plasmonic_resonances(2.0, 1.0, [0.0])
    assert ks[0] ** 2 == pytest.approx(0.75, rel=1e-15)
    assert admissible == (False,)  # 3/4 > k_p^2/eps0 = 1/2
    ks, skipped, _ = plasmonic_resonances(1.0, 1.0, [0.5, 0.0])
    assert skipped == (0,)  # radicand 0 at the admissibility boundary
    assert len(ks) == 1
    with pytest.raises(ValueError, match="empty admissible set"):
        plasmonic_resonances(0.5, 1.0, [0.25, 0.4])
    with pytest.raises(ValueError, match="outside"):
        plasmonic_resonances(1.0, 1.0, [0.7])


def test_plasmonic_always_capped_for_unit_eps0():
    ks, _, admissible = plasmonic_resonances(1.0, 2.0, [-0.4, -0.1, 0.3, 0.45])
    assert all(admissible)
    assert all(k**2 < 4.0 for k in ks)


# ---------------------------------------------------------------------------
# incident frequency realization
# ---------------------------------------------------------------------------


def test_realized_detuning_3d(ball_spec8, ball_shape):
    cfg = make_cluster(ball_shape, 0.06, h=0.5, sign=1)
    rw = realize_wavenumber(cfg, ball_spec8)
    assert rw.k**2 == pytest.approx(rw.k_res**2 * (1.0 + 0.06**0.5), rel=1e-13)
    cfg = make_cluster(ball_shape, 0.06, h=0.5, sign=-1)
    rw = realize_wavenumber(cfg, ball_spec8)
    assert rw.k**2 == pytest.approx(rw.k_res**2 * (1.0 - 0.06**0.5), rel=1e-13)


def test_realized_detuning_2d(disc2d_spec16, disc_shape):
    delta = float(np.exp(-4))
    cfg = make_cluster(disc_shape, delta, h=0.7)
    rw = realize_wavenumber(cfg, disc2d_spec16)
    assert rw.k**2 == pytest.approx(rw.k_res**2 * (1.0 + 4.0**-0.7), rel=1e-13)


# ---------------------------------------------------------------------------
# cache
# ---------------------------------------------------------------------------


def test_cache_round_trip(tmp_path, ball_spec8):
    path = tmp_path / "ball.eig"
    save_cache(path, ball_spec8)
    back = load_cache(path)
    assert np.array_equal(back.eigenvalues, ball_spec8.eigenvalues)
    assert np.array_equal(back.moments, ball_spec8.moments)
    assert np.array_equal(back.eigenvectors, ball_spec8.eigenvectors)
    assert back.measure == ball_spec8.measure
    assert back.n0 == ball_spec8.n0
    assert back.dim == 3 and back.complete


def test_cache_rejects_foreign_files(tmp_path):
    bad = tmp_path / "bad.eig"
    bad.write_bytes(b"not an eigensystem")
    with pytest.raises(ValueError, match="bad magic"):
        load_cache(bad)


def test_cache_key_distinguishes_shapes():
    a = cache_key(ReferenceShape(kind="ball3d", diameter=1.0), 12)
    b = cache_key(ReferenceShape(kind="ball3d", diameter=1.0), 16)
    c = cache_key(ReferenceShape(kind="ball3d", diameter=1.0, offset=(0.3, 0.0, 0.0)), 12)
    assert len({a, b, c}) == 3
