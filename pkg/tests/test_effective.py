import numpy as np
import pytest

from elastoscatter.effective import (EffectiveConfig, assemble_ls_system,
                                     compare_cluster_vs_effective, effective_farfield,
                                     effective_matrix, homogenized_density_sign, self_block,
                                     smooth_limit, solve_effective)
from elastoscatter.errors import IterationError, ValidationError
from elastoscatter.fields import FarFieldPattern, sphere_directions
from elastoscatter.geometry import Box
from elastoscatter.kernels import incident_field, kelvin_matrix, kupradze_series
from elastoscatter.pipeline import prepare_cluster
from elastoscatter.spectra import (assemble_navier_operator, cube_shape, resonance_frequency,
                                   scale_spectrum)

C_TEST = np.array([[0.30, 0.05, 0.0], [0.05, 0.20, 0.0], [0.0, 0.0, 0.25]])


def cfg(mat, n, C=C_TEST, omega=1.0, box=Box()):
    return EffectiveConfig(n, C, mat.frequency(omega), box)


def test_config_validation(mat):
    with pytest.raises(ValidationError):
        cfg(mat, 0)
    with pytest.raises(ValidationError):
        EffectiveConfig(4, np.eye(2), mat.frequency(1.0))
    c = cfg(mat, 4, box=Box(center=(1.0, 0, 0)))
    assert c.centers.shape == (64, 3)
    assert np.allclose(c.centers.mean(axis=0), [1.0, 0, 0])
    assert c.cell_volume == pytest.approx(1 / 64)


def test_zero_matrix_gives_incident_field(mat, wave):
    c = cfg(mat, 4, C=np.zeros((3, 3)))
    sol = solve_effective(assemble_ls_system(c, mat, wave))
    assert np.array_equal(sol.Y, incident_field(wave, c.freq, c.centers).reshape(-1))
    ff = effective_farfield(sol, mat, sphere_directions(10))
    assert np.array_equal(ff.up, np.zeros_like(ff.up)) and np.array_equal(ff.us, np.zeros_like(ff.us))


def test_smooth_limit(mat2):
    # the n = 1 series term is independent of r and equals the limit
    f = mat2.frequency(0.7)
    x, y = np.array([0.2, -0.1, 0.15]), np.zeros(3)
    term1 = kupradze_series(mat2, f, x, y, nmax=1) - kupradze_series(mat2, f, x, y, nmax=0)
    assert np.allclose(term1, smooth_limit(mat2, f), rtol=1e-13, atol=1e-16)
    x = np.array([1e-3, 0.0, 0.0])
    diff = kupradze_series(mat2, f, x, y) - kelvin_matrix(mat2, x, y)
    assert np.allclose(diff, smooth_limit(mat2, f), rtol=0, atol=1e-3 * np.abs(smooth_limit(mat2, f)).max())


def test_single_cell_against_hand_solve(mat, wave):
    c = cfg(mat, 1)
    sol = solve_effective(assemble_ls_system(c, mat, wave))
    w = c.freq.omega
    R = (3 / (4 * np.pi)) ** (1 / 3)
    G = ((mat.gamma1 / 2 + mat.gamma2 / 6) * R**2 * np.eye(3)
         + 1j * w / (12 * np.pi * mat.rho0) * (2 / mat.cs**3 + 1 / mat.cp**3) * np.eye(3))
    y = np.linalg.solve(np.eye(3) - w**2 * G @ C_TEST, incident_field(wave, c.freq, np.zeros(3)))
    assert np.allclose(sol.Y, y, rtol=1e-13)


def test_dense_residual(mat, wave):
    sol = solve_effective(assemble_ls_system(cfg(mat, 6), mat, wave))
    assert sol.residual <= 1e-10


def test_iterative_matches_dense(mat, wave):
    c = cfg(mat, 6)
    dense = solve_effective(assemble_ls_system(c, mat, wave, mode="dense"))
    it = solve_effective(assemble_ls_system(c, mat, wave, mode="iterative"), tol=1e-13)
    assert it.iterations > 1
    assert np.linalg.norm(it.Y - dense.Y) <= 1e-10 * np.linalg.norm(dense.Y)


def test_toeplitz_matvec_matches_dense(mat, wave):
    c = cfg(mat, 5, C=np.eye(3))
    A = assemble_ls_system(c, mat, wave, mode="dense").matrix
    op = assemble_ls_system(c, mat, wave, mode="iterative").operator
    v = np.random.default_rng(2).normal(size=3 * 125) + 0j
    w2 = c.freq.omega**2
    assert np.allclose(v - w2 * op(v), A @ v, rtol=1e-12, atol=1e-13)


def test_fixed_point_matches_neumann_series(mat, wave):
    c = cfg(mat, 4, C=0.05 * C_TEST)
    sysd = assemble_ls_system(c, mat, wave, mode="dense")
    K = np.eye(sysd.matrix.shape[0]) - sysd.matrix
    y = sysd.rhs.copy()
    term = sysd.rhs.copy()
    for _ in range(50):
        term = K @ term
        y = y + term
    sol = solve_effective(assemble_ls_system(c, mat, wave, mode="iterative"), tol=1e-14)
    assert np.linalg.norm(sol.Y - y) <= 1e-12 * np.linalg.norm(y)


def test_iteration_failure(mat, wave):
    c = cfg(mat, 4, C=80 * np.eye(3), omega=1.0)
    with pytest.raises(IterationError):
        solve_effective(assemble_ls_system(c, mat, wave, mode="iterative"), max_iter=50)


def test_dense_limit(mat, wave):
    with pytest.raises(ValidationError):
        assemble_ls_system(cfg(mat, 6), mat, wave, dense_limit=100, mode="dense")
    assert not assemble_ls_system(cfg(mat, 6), mat, wave, dense_limit=100).dense
    with pytest.raises(ValidationError):
        assemble_ls_system(cfg(mat, 4), mat, wave, mode="other")


def test_static_path_equals_volume_operator(mat, wave):
    n = 4
    c = cfg(mat, n)
    A = assemble_ls_system(c, mat, wave, static=True, mode="dense").matrix
    N0 = assemble_navier_operator(cube_shape(n, 1.0), mat)
    expected = np.eye(3 * n**3) - c.freq.omega**2 * N0 @ np.kron(np.eye(n**3), C_TEST)
    assert np.allclose(A, expected, rtol=1e-14, atol=1e-16)
    dyn = self_block(mat, c.freq, c.cell_volume)
    assert np.allclose(dyn - self_block(mat, c.freq, c.cell_volume, static=True),
                       smooth_limit(mat, c.freq) * c.cell_volume, rtol=1e-14)


def test_farfield_projectors(mat, wave):
    sol = solve_effective(assemble_ls_system(cfg(mat, 5), mat, wave))
    ff = effective_farfield(sol, mat, sphere_directions(20))
    x = ff.directions
    assert np.all(np.abs(np.einsum("na,na->n", x, ff.us)) <= 1e-12 * np.linalg.norm(ff.us, axis=1))
    perp = ff.up - np.einsum("na,na->n", x, ff.up)[:, None] * x
    assert np.all(np.linalg.norm(perp, axis=1) <= 1e-12 * np.linalg.norm(ff.up, axis=1))


def test_subcell_quadrature_converges_to_exact_cell_integral(mat, wave):
    # exact phase integral over a cube cell: V e^{-ik xhat.c} prod_k sinc(k xhat_k h / 2)
    c = cfg(mat, 4, omega=2.5)
    sol = solve_effective(assemble_ls_system(c, mat, wave))
    xhat = sphere_directions(6)
    h = c.cell_sizes
    src = c.freq.omega**2 * (sol.per_cell @ c.C.T)
    kp = c.freq.kappa_p
    weight = np.prod(np.sinc(kp * xhat[:, None, :] * h / (2 * np.pi)), axis=2)
    exact_sp = (weight * np.exp(-1j * kp * xhat @ c.centers.T)) @ src * c.cell_volume
    exact_up = np.einsum("na,na->n", xhat, exact_sp)[:, None] * xhat / (4 * np.pi * (mat.lam + 2 * mat.mu))
    errs = [np.abs(effective_farfield(sol, mat, xhat, subcells=m).up - exact_up).max() for m in (1, 2, 4, 8)]
    assert all(e2 < e1 / 3 for e1, e2 in zip(errs, errs[1:]))
    assert errs[-1] <= 2e-4 * np.abs(exact_up).max()


def test_grid_refinement_cauchy(mat, wave):
    x = sphere_directions(12)
    far = []
    for n in (8, 10, 12):
        mode = "dense" if n**3 <= 1000 else "iterative"
        sol = solve_effective(assemble_ls_system(cfg(mat, n, C=0.5 * C_TEST), mat, wave, mode=mode), tol=1e-12)
        ff = effective_farfield(sol, mat, x)
        far.append(np.concatenate([ff.up.ravel(), ff.us.ravel()]))
    d1 = np.abs(far[1] - far[0]).max()
    d2 = np.abs(far[2] - far[1]).max()
    assert d2 < d1


def test_compare_identical_is_zero(mat, wave):
    sol = solve_effective(assemble_ls_system(cfg(mat, 4), mat, wave))
    ff = effective_farfield(sol, mat, sphere_directions(8))
    d = compare_cluster_vs_effective(ff, ff, mat)
    assert d.max == 0.0 and d.mean == 0.0


def test_compare_weights_and_grid_check(mat):
    x = sphere_directions(3)
    z = np.zeros((3, 3), dtype=complex)
    a = FarFieldPattern(x, x * 1.0 / (4 * np.pi * 3), z)
    b = FarFieldPattern(x, z, z)
    d = compare_cluster_vs_effective(a, b, mat, beta1=2.0, beta2=1.0)
    assert np.allclose(d.dp, 1.0)
    assert np.allclose(d.diff, 2.0)
    with pytest.raises(ValidationError):
        compare_cluster_vs_effective(a, FarFieldPattern(sphere_directions(4), z, z), mat)


def test_effective_matrix_density(mat, ball8_spectrum, ball8, small_config):
    spec = scale_spectrum(ball8_spectrum, 5e-3)
    pc = prepare_cluster(mat, spec, small_config, 5e-3 * ball8.circumradius)
    Ce = effective_matrix(pc)
    a = small_config.a
    expected = pc.cluster.M * small_config.c / a**2 * pc.coefficient.C
    assert np.allclose(Ce, expected, rtol=1e-15)
    assert np.allclose(Ce, Ce.T)


def test_density_sign(mat):
    alpha, lam = 99.0, 4e-4
    thr = resonance_frequency(alpha, lam)
    assert thr == pytest.approx(np.sqrt(1 / (alpha * lam)))
    below = homogenized_density_sign(alpha, lam, mat.frequency(thr * (1 - 1e-12)))
    above = homogenized_density_sign(alpha, lam, mat.frequency(thr * (1 + 1e-12)))
    assert below["sign"] == 1 and above["sign"] == -1
    assert below["threshold"] == thr
    out = homogenized_density_sign(alpha, lam, mat.frequency(0.5 * thr), C_TEST)
    assert out["matrix_sign"] == 1
    assert homogenized_density_sign(alpha, lam, mat.frequency(0.5 * thr), np.zeros((3, 3)))["matrix_sign"] == 0
