"""Homogenized Lippmann-Schwinger problem on Omega.

Y = U^i + omega^2 int_Omega Gamma(., y) C Y(y) dy with a constant 3x3 matrix
C, discretized on a uniform voxel grid of the box Omega.  Small grids are
solved densely; larger ones by damped fixed-point iteration with an FFT
matrix-vector product (the Galerkin matrix is block Toeplitz).
"""
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import IterationError, ValidationError
from .fields import FarFieldPattern, project_farfield
from .geometry import Box
from .kernels import FOUR_PI, incident_field, kelvin_diff, kupradze_diff
from .spectra import galerkin_blocks, resonance_frequency, self_cell_integral

DENSE_LIMIT = 1000


@dataclass(frozen=True)
class EffectiveConfig:
    n: int
    C: np.ndarray
    freq: object
    box: Box = Box()

    def __post_init__(self):
        if int(self.n) < 1:
            raise ValidationError("effective grid needs at least one cell per axis")
        C = np.asarray(self.C, dtype=complex)
        if C.shape != (3, 3):
            raise ValidationError("effective matrix must be 3x3")
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "n", int(self.n))

    @property
    def shape(self):
        return (self.n,) * 3

    @property
    def cell_sizes(self):
        return np.array(self.box.sides) / self.n

    @property
    def cell_volume(self):
        return float(np.prod(self.cell_sizes))

    @property
    def centers(self):
        t = [(np.arange(self.n) + 0.5) * h for h in self.cell_sizes]
        g = np.stack(np.meshgrid(*t, indexing="ij"), axis=-1).reshape(-1, 3)
        return self.box.lower + g


def smooth_limit(mat, freq):
    """lim_{r->0} (Gamma^omega - Gamma^0), a multiple of the identity."""
    w = freq.omega
    return 1j * w / (12 * np.pi * mat.rho0) * (2 / mat.cs**3 + 1 / mat.cp**3) * np.eye(3)


def self_block(mat, freq, cell_volume, static=False):
    blk = self_cell_integral(mat, cell_volume).astype(complex)
    if not static:
        blk = blk + smooth_limit(mat, freq) * cell_volume
    return blk


def _kernel(mat, freq, static):
    if static:
        return lambda d: kelvin_diff(mat, d).astype(complex)
    return lambda d: kupradze_diff(mat, freq, d)


@dataclass
class LSSystem:
    cfg: EffectiveConfig
    rhs: np.ndarray
    matrix: np.ndarray = None
    operator: object = None

    @property
    def dense(self):
        return self.matrix is not None


class ToeplitzOperator:
    """Galerkin matrix G of the kernel on a regular grid, applied by FFT."""

    def __init__(self, mat, freq, cfg, static=False):
        n, h = cfg.n, cfg.cell_sizes
        off = np.arange(-(n - 1), n)
        O = np.stack(np.meshgrid(off, off, off, indexing="ij"), axis=-1) * h
        center = (n - 1,) * 3
        O[center] = 1.0  # placeholder, replaced by the self block
        K = _kernel(mat, freq, static)(O) * cfg.cell_volume
        K[center] = self_block(mat, freq, cfg.cell_volume, static)
        self.n = n
        self.m = 2 * n
        Kc = np.zeros((self.m,) * 3 + (3, 3), dtype=complex)
        idx = np.mod(off, self.m)
        Kc[np.ix_(idx, idx, idx)] = K
        self.khat = np.fft.fftn(Kc, axes=(0, 1, 2))

    def __call__(self, v):
        n, m = self.n, self.m
        x = np.zeros((m, m, m, 3), dtype=complex)
        x[:n, :n, :n] = v.reshape(n, n, n, 3)
        xh = np.fft.fftn(x, axes=(0, 1, 2))
        yh = np.einsum("...ab,...b->...a", self.khat, xh)
        y = np.fft.ifftn(yh, axes=(0, 1, 2))[:n, :n, :n]
        return y.reshape(-1)


def assemble_ls_system(cfg, mat, wave, dense_limit=DENSE_LIMIT, static=False, mode="auto"):
    """Discrete I - omega^2 G C together with the incident field on the grid.

    ``mode`` is ``dense``, ``iterative`` or ``auto`` (dense up to ``dense_limit`` cells).
    """
    freq = cfg.freq
    ncell = cfg.n**3
    if mode == "auto":
        mode = "dense" if ncell <= dense_limit else "iterative"
    rhs = incident_field(wave, freq, cfg.centers).reshape(-1)
    if mode == "dense":
        if ncell > dense_limit:
            raise ValidationError(f"{ncell} cells exceed the dense limit {dense_limit}; use iterative mode")
        K = galerkin_blocks(_kernel(mat, freq, static), cfg.centers, cfg.cell_volume,
                            self_block(mat, freq, cfg.cell_volume, static))
        KC = np.einsum("ijab,bc->ijac", K, cfg.C)
        A = np.eye(3 * ncell) - freq.omega**2 * KC.transpose(0, 2, 1, 3).reshape(3 * ncell, 3 * ncell)
        return LSSystem(cfg, rhs, matrix=A)
    if mode == "iterative":
        return LSSystem(cfg, rhs, operator=ToeplitzOperator(mat, freq, cfg, static))
    raise ValidationError(f"unknown solve mode {mode!r}")


@dataclass
class EffectiveSolution:
    Y: np.ndarray
    residual: float
    iterations: int
    cfg: EffectiveConfig

    @property
    def per_cell(self):
        return self.Y.reshape(-1, 3)


def _apply_C(cfg, y):
    return (y.reshape(-1, 3) @ cfg.C.T).reshape(-1)


def solve_effective(system, damping=0.5, max_iter=500, tol=1e-8):
    cfg = system.cfg
    w2 = cfg.freq.omega**2
    if system.dense:
        Y = sla.solve(system.matrix, system.rhs)
        res = np.linalg.norm(system.matrix @ Y - system.rhs) / max(np.linalg.norm(system.rhs), 1e-300)
        return EffectiveSolution(Y, float(res), 0, cfg)
    G = system.operator
    Y = system.rhs.copy()
    rnorm = max(np.linalg.norm(system.rhs), 1e-300)
    for it in range(1, max_iter + 1):
        update = system.rhs + w2 * G(_apply_C(cfg, Y))
        new = (1 - damping) * Y + damping * update
        step = np.linalg.norm(new - Y) / rnorm
        if not np.isfinite(step) or step > 1e8:
            raise IterationError(f"fixed-point iteration diverged at step {it}")
        Y = new
        if step < tol:
            res = np.linalg.norm(Y - system.rhs - w2 * G(_apply_C(cfg, Y))) / rnorm
            return EffectiveSolution(Y, float(res), it, cfg)
    raise IterationError(f"fixed-point iteration did not converge in {max_iter} steps")


def effective_farfield(sol, mat, xhat, subcells=1):
    """Far fields of omega^2 C Y chi_Omega; ``subcells`` > 1 refines the phase quadrature."""
    cfg = sol.cfg
    freq = cfg.freq
    xhat = np.atleast_2d(np.asarray(xhat, dtype=float))
    src = freq.omega**2 * (sol.per_cell @ cfg.C.T)
    h = cfg.cell_sizes
    t = (np.arange(subcells) + 0.5) / subcells - 0.5
    sub = np.stack(np.meshgrid(t, t, t, indexing="ij"), axis=-1).reshape(-1, 3) * h
    phase = xhat @ cfg.centers.T
    sub_phase = xhat @ sub.T
    out = []
    for kappa in (freq.kappa_p, freq.kappa_s):
        weight = np.exp(-1j * kappa * sub_phase).mean(axis=1)[:, None]
        out.append(weight * (np.exp(-1j * kappa * phase) @ src) * cfg.cell_volume)
    return project_farfield(xhat, out[0], out[1], mat, "effective")


@dataclass
class DifferenceTable:
    directions: np.ndarray
    dp: np.ndarray
    ds: np.ndarray
    diff: np.ndarray

    @property
    def max(self):
        return float(self.diff.max())

    @property
    def mean(self):
        return float(self.diff.mean())


def compare_cluster_vs_effective(cluster_far, eff_far, mat, beta1=1.0, beta2=1.0):
    """Per-direction far-field differences, normalized by 4pi(lam+2mu) and 4pi mu.

    ``dp`` is the scalar p-difference along xhat, ``ds`` the vector
    s-difference (perpendicular to xhat); ``diff`` combines them with the
    weights beta1, beta2.
    """
    if cluster_far.directions.shape != eff_far.directions.shape or \
            np.abs(cluster_far.directions - eff_far.directions).max() > 0:
        raise ValidationError("far-field patterns use different direction grids")
    x = cluster_far.directions
    dp = FOUR_PI * (mat.lam + 2 * mat.mu) * np.einsum("na,na->n", cluster_far.up - eff_far.up, x)
    ds = FOUR_PI * mat.mu * (cluster_far.us - eff_far.us)
    diff = np.sqrt(np.abs(beta1 * dp) ** 2 + np.sum(np.abs(beta2 * ds) ** 2, axis=1))
    return DifferenceTable(x, dp, ds, diff)


def effective_matrix(prepared, omega_volume=1.0):
    """Constant matrix of the homogenized medium for a prepared cluster.

    Uses the leading density term: alpha_tilde = c, C_tilde = C^(1) a^(h-3),
    weighted by the inclusion density M a^(1-h) / |Omega|.
    """
    cl = prepared.cluster
    c = cl.rho[0] * cl.a**2
    # M a^(1-h) * c * C^(1) a^(h-3) = M c C^(1) / a^2
    return cl.M * c / cl.a**2 * prepared.coefficient.C / omega_volume


def homogenized_density_sign(alpha1, lambda_n0, freq, C_tilde=None):
    """Sign of 1 - alpha1 omega^2 lambda_n0 and the frequency where it flips."""
    denom = 1.0 - alpha1 * freq.omega**2 * lambda_n0
    out = {"sign": 1 if denom > 0 else -1, "threshold": resonance_frequency(alpha1, lambda_n0),
           "denominator": denom}
    if C_tilde is not None:
        tr = np.trace(np.real(C_tilde))
        out["matrix_sign"] = 0 if tr == 0 else int(np.sign(tr))
    return out
