import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from _support import point_cluster
from elastoscatter.errors import DomainError, ValidationError
from elastoscatter.fields import (convergence_sweep, farfield, fit_slope, n_level_field,
                                  predicted_slope, reciprocity_pairing, scattered_field,
                                  sphere_directions)
from elastoscatter.foldy import assemble_system, born_truncation, operator_norm_inf, solve
from elastoscatter.geometry import ClusterConfig, make_cluster
from elastoscatter.kernels import FOUR_PI, IncidentPlaneWave, Material, incident_field, kupradze_matrix
from elastoscatter.pipeline import prepare_cluster
from elastoscatter.spectra import scale_spectrum


def beat_free_omega(mat, R):
    """Frequency at which (kappa_s - kappa_p) R is a multiple of 2 pi."""
    return 2 * np.pi * 70 / (R * (1 / mat.cs - 1 / mat.cp))


def cube_points(n=2, spacing=0.5):
    g = (np.arange(n) - (n - 1) / 2) * spacing
    return np.stack(np.meshgrid(g, g, g, indexing="ij"), axis=-1).reshape(-1, 3)


@pytest.fixture
def solved(mat, wave):
    cl = point_cluster(cube_points())
    f = mat.frequency(1.0)
    sys_ = assemble_system(cl, mat, f, wave)
    return cl, f, sys_, solve(sys_)


def test_sphere_directions():
    d = sphere_directions(50)
    assert d.shape == (50, 3)
    assert np.allclose(np.linalg.norm(d, axis=1), 1)
    assert np.linalg.norm(d.mean(axis=0)) < 0.05
    assert np.array_equal(d, sphere_directions(50))
    with pytest.raises(ValidationError):
        sphere_directions(0)


def test_empty_cluster_field(mat):
    cl = make_cluster(np.zeros((0, 3)), 0.01, 1.0).with_coefficients(np.zeros((0, 3, 3)))
    u = scattered_field(cl, np.zeros(0, dtype=complex), mat, mat.frequency(1.0), np.array([[0, 0, 3.0]]))
    assert np.array_equal(u, np.zeros((1, 3)))


def test_single_inclusion_composition(mat, wave):
    z = np.array([[0.1, -0.2, 0.05]])
    C = np.array([[2.0, 0.1, 0.0], [0.1, 1.0, 0.0], [0.0, 0.0, 0.5]]) * 1e-5
    cl = point_cluster(z, C=C)
    f = mat.frequency(0.9)
    Q = solve(assemble_system(cl, mat, f, wave))
    x = np.array([1.5, 2.0, -1.0])
    expected = cl.alpha[0] * f.omega**2 * kupradze_matrix(mat, f, x, z[0]) @ (C @ incident_field(wave, f, z[0]))
    assert np.allclose(scattered_field(cl, Q, mat, f, x), expected, rtol=1e-14)


def test_field_linearity(mat, wave, solved):
    cl, f, _, Q = solved
    x = np.array([[0, 0, 3.0], [2.0, -1.0, 2.0]])
    Q2 = solve(assemble_system(cl, mat, f, wave.scaled(2.0)))
    assert np.allclose(scattered_field(cl, Q2, mat, f, x), 2 * scattered_field(cl, Q, mat, f, x), rtol=1e-13)


def test_observation_inside_safety_ball_rejected(mat, solved):
    cl, f, _, Q = solved
    with pytest.raises(DomainError):
        scattered_field(cl, Q, mat, f, cl.centers[0] + 1.5 * cl.a)


def test_farfield_projectors(mat, solved):
    cl, f, _, Q = solved
    ff = farfield(cl, Q, mat, f, sphere_directions(40))
    x = ff.directions
    along_s = np.abs(np.einsum("na,na->n", x, ff.us))
    assert np.all(along_s <= 1e-12 * np.linalg.norm(ff.us, axis=1))
    perp_p = ff.up - np.einsum("na,na->n", x, ff.up)[:, None] * x
    assert np.all(np.linalg.norm(perp_p, axis=1) <= 1e-12 * np.linalg.norm(ff.up, axis=1))


def test_farfield_rejects_non_unit(mat, solved):
    cl, f, _, Q = solved
    with pytest.raises(ValidationError):
        farfield(cl, Q, mat, f, np.array([[1.0, 1.0, 0.0]]))


def test_recomposition_remainder(mat, wave):
    cl = point_cluster(cube_points(2, 0.4))
    f = mat.frequency(beat_free_omega(mat, 1000.0))
    Q = solve(assemble_system(cl, mat, f, wave))
    xhat = np.array([[0.36, 0.48, 0.8], [-0.6, 0.0, 0.8], [0.0, -1.0, 0.0]])
    ff = farfield(cl, Q, mat, f, xhat)
    rem = []
    for R in (1000.0, 2000.0):
        u = scattered_field(cl, Q, mat, f, R * xhat)
        lead = (np.exp(1j * f.kappa_p * R) * ff.up + np.exp(1j * f.kappa_s * R) * ff.us) / R
        rem.append(np.linalg.norm(u - lead, axis=1))
    ratio = rem[0] / rem[1]
    assert np.all((2.5 <= ratio) & (ratio <= 6))


def test_reciprocity_pairing(mat, solved):
    cl, f, _, Q = solved
    xhat = np.array([0.6, 0.0, 0.8])
    tperp = np.array([0.0, 1.0, 0.0])
    b1, b2 = 0.7 - 0.2j, 1.3
    back = IncidentPlaneWave(-xhat, tperp, b1, b2)
    ff = farfield(cl, Q, mat, f, xhat[None])
    lhs = -b1 * (mat.lam + 2 * mat.mu) * (xhat @ ff.up[0]) + b2 * mat.mu * (tperp @ ff.us[0])
    rhs = reciprocity_pairing(cl, Q, mat, f, back, xhat)
    assert lhs == pytest.approx(rhs, rel=1e-13)
    # the pairing is the source sum projected with the incident polarizations
    src = f.omega**2 * cl.alpha[:, None] * Q.per_inclusion
    phase_p = np.exp(-1j * f.kappa_p * cl.centers @ xhat)
    assert xhat @ ff.up[0] * FOUR_PI * (mat.lam + 2 * mat.mu) == pytest.approx(xhat @ (phase_p @ src), rel=1e-13)


def test_born_fields(mat, solved):
    cl, f, sys_, Q = solved
    x = np.array([[0, 0, 3.0], [-2.0, 1.0, 1.5]])
    q = operator_norm_inf(sys_)
    assert q < 1
    full = scattered_field(cl, Q, mat, f, x)
    errs = [np.abs(n_level_field(cl, born_truncation(sys_, N), mat, f, x) - full).max() for N in range(5)]
    assert all(e2 < e1 for e1, e2 in zip(errs, errs[1:]))
    u0 = n_level_field(cl, born_truncation(sys_, 0), mat, f, x)
    u1 = n_level_field(cl, born_truncation(sys_, 1), mat, f, x)
    direct = scattered_field(cl, sys_.B @ sys_.UI, mat, f, x)
    assert np.allclose(u1 - u0, direct, rtol=0, atol=1e-14 * np.abs(u1).max())


def test_born_zero_is_uncoupled(mat, wave, solved):
    cl, f, sys_, _ = solved
    b0 = born_truncation(sys_, 0)
    assert np.array_equal(b0.Q, sys_.UI)


def test_fit_slope_exact():
    a = np.array([0.1, 0.05, 0.02])
    assert fit_slope(a, 3 * a**1.7) == pytest.approx(1.7, rel=1e-12)
    with pytest.raises(ValidationError):
        fit_slope([0.1], [1.0])
    with pytest.raises(ValidationError):
        fit_slope([0.1, 0.2], [1.0, 0.0])


def test_predicted_slopes():
    assert predicted_slope("norm", 0.6, 0.3) == pytest.approx(0.1)
    assert predicted_slope("born", 0.6, 0.3, 1) == pytest.approx(0.2)
    assert predicted_slope("amplitude", 0.5, 0.0) == 2.5
    with pytest.raises(ValidationError):
        predicted_slope("other", 0.5, 0.1)


def test_small_sweep_runs(mat, wave, ball8_spectrum, ball8):
    cfg = ClusterConfig(a=0.1, s=0.3, h=0.6, c=1e6, b=0.05, count_prefactor=4.0, skip_boundary=False)
    spec = scale_spectrum(ball8_spectrum, 1e-3)
    res = convergence_sweep(cfg, [0.1, 0.05, 0.025], "norm", mat, spec, 1e-3 * ball8.circumradius, wave)
    assert len(res.rows) == 3
    assert all(r["metric"] == r["normB"] for r in res.rows)
    with pytest.raises(ValidationError):
        convergence_sweep(cfg, [0.1, 0.05], "norm", mat, spec, 1e-3 * ball8.circumradius, wave)


def test_prepared_cluster_pipeline(mat, wave, ball8_spectrum, ball8, small_config):
    spec = scale_spectrum(ball8_spectrum, 5e-3)
    pc = prepare_cluster(mat, spec, small_config, 5e-3 * ball8.circumradius)
    assert pc.cluster.M == 8
    assert pc.selection.multiplicity == 3
    assert pc.freq.omega ** 2 == pytest.approx(pc.omega_n0**2 * (1 + 0.05 * 0.01**0.6), rel=1e-13)
    assert pc.coefficient.denominator.real < 0
    assert np.allclose(pc.cluster.coefficients[3], pc.coefficient.C)


@settings(max_examples=15, deadline=None)
@given(st.floats(0.1, 3.0), st.floats(-2, 2), st.floats(-2, 2))
def test_linearity_property(scale, b1, b2):
    mat = Material(1.0, 1.0, 1.0)
    w1 = IncidentPlaneWave(np.array([0, 0, 1.0]), np.array([1.0, 0, 0]), b1, b2)
    cl = point_cluster(cube_points())
    f = mat.frequency(0.7)
    x = np.array([[0.0, 0.0, 4.0]])
    u = scattered_field(cl, solve(assemble_system(cl, mat, f, w1)), mat, f, x)
    us = scattered_field(cl, solve(assemble_system(cl, mat, f, w1.scaled(scale))), mat, f, x)
    assert np.allclose(us, scale * u, rtol=1e-12, atol=1e-14 * np.abs(us).max())
