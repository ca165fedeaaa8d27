"""Fundamental matrices of the isotropic Navier operator.

Conventions: the Lamé operator is mu*Lap(u) + (lam+mu)*grad(div u), the
time dependence is exp(-i omega t), and all kernels are functions of the
difference r = x - y.  The batched ``*_diff`` helpers take ``d`` of shape
(..., 3) and return (..., 3, 3) arrays; the point-pair wrappers are what the
rest of the package calls in loops.
"""
from dataclasses import dataclass, replace
from math import factorial

import numpy as np

from .errors import DomainError, SingularEvaluationError, ValidationError

FOUR_PI = 4.0 * np.pi
_EYE = np.eye(3)


@dataclass(frozen=True)
class Material:
    """Isotropic background: Lamé constants and mass density."""

    lam: float
    mu: float
    rho0: float

    def __post_init__(self):
        if not self.mu > 0:
            raise ValidationError(f"shear modulus must be positive, got mu={self.mu}")
        if not 3 * self.lam + 2 * self.mu > 0:
            raise ValidationError("need 3*lambda + 2*mu > 0")
        if not self.rho0 > 0:
            raise ValidationError(f"density must be positive, got rho0={self.rho0}")

    @property
    def cs(self):
        return np.sqrt(self.mu / self.rho0)

    @property
    def cp(self):
        return np.sqrt((self.lam + 2 * self.mu) / self.rho0)

    @property
    def gamma1(self):
        return 0.5 * (1.0 / self.mu + 1.0 / (2 * self.mu + self.lam))

    @property
    def gamma2(self):
        return 0.5 * (1.0 / self.mu - 1.0 / (2 * self.mu + self.lam))

    def frequency(self, omega):
        return Frequency(float(omega), omega / self.cs, omega / self.cp)


@dataclass(frozen=True)
class Frequency:
    """Angular frequency with the shear and pressure wave numbers."""

    omega: float
    kappa_s: float
    kappa_p: float

    def __post_init__(self):
        if self.omega < 0:
            raise ValidationError("omega must be non-negative")

    @property
    def kappa_max(self):
        return max(self.kappa_s, self.kappa_p)


@dataclass(frozen=True)
class IncidentPlaneWave:
    theta: np.ndarray
    theta_perp: np.ndarray
    b1: complex = 1.0
    b2: complex = 0.0

    def __post_init__(self):
        th = np.asarray(self.theta, dtype=float)
        tp = np.asarray(self.theta_perp, dtype=float)
        if th.shape != (3,) or tp.shape != (3,):
            raise ValidationError("theta and theta_perp must be 3-vectors")
        if abs(np.linalg.norm(th) - 1) > 1e-12 or abs(np.linalg.norm(tp) - 1) > 1e-12:
            raise ValidationError("theta and theta_perp must be unit vectors")
        if abs(th @ tp) > 1e-12:
            raise ValidationError("theta_perp must be orthogonal to theta")
        object.__setattr__(self, "theta", th)
        object.__setattr__(self, "theta_perp", tp)

    def scaled(self, factor):
        return replace(self, b1=self.b1 * factor, b2=self.b2 * factor)


@dataclass(frozen=True)
class BoundConstants:
    H1: float
    H2: float
    H3: float
    H4: float
    H5: float
    H6: float
    diam_d: float
    diam_cluster: float
    diam_omega: float
    separation: float


def _diff(x, y):
    d = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    if np.any(np.linalg.norm(d, axis=-1) == 0):
        raise SingularEvaluationError("kernel evaluated at coincident points")
    return d


def kelvin_diff(mat, d):
    d = np.asarray(d, dtype=float)
    r = np.linalg.norm(d, axis=-1)[..., None, None]
    dd = d[..., :, None] * d[..., None, :]
    return mat.gamma1 / FOUR_PI * _EYE / r + mat.gamma2 / FOUR_PI * dd / r**3


def kelvin_matrix(mat, x, y):
    """Static (zero-frequency) fundamental matrix."""
    return kelvin_diff(mat, _diff(x, y))


def _radial_derivs(kappa, r, order):
    """e^{i k r}/r and its first ``order`` radial derivatives."""
    e = np.exp(1j * kappa * r)
    out = [e / r, e * (1j * kappa / r - 1 / r**2)]
    if order >= 2:
        out.append(e * (-kappa**2 / r - 2j * kappa / r**2 + 2 / r**3))
    if order >= 3:
        out.append(e * (-1j * kappa**3 / r + 3 * kappa**2 / r**2
                        + 6j * kappa / r**3 - 6 / r**4))
    return out


def _ab(mat, freq, r, order):
    """Coefficients of Gamma = A*I + B*rhat rhat^T, plus A' and B' if order > 0."""
    gs = _radial_derivs(freq.kappa_s, r, 3 if order else 2)
    gp = _radial_derivs(freq.kappa_p, r, 3 if order else 2)
    f = [s - p for s, p in zip(gs, gp)]
    cw = 1.0 / (FOUR_PI * freq.omega**2 * mat.rho0)
    cm = 1.0 / (FOUR_PI * mat.mu)
    A = cm * gs[0] + cw * f[1] / r
    B = cw * (f[2] - f[1] / r)
    if not order:
        return A, B
    dA = cm * gs[1] + cw * (f[2] / r - f[1] / r**2)
    dB = cw * (f[3] - f[2] / r + f[1] / r**2)
    return A, B, dA, dB


def kupradze_diff(mat, freq, d):
    d = np.asarray(d, dtype=float)
    if freq.omega == 0:
        return kelvin_diff(mat, d).astype(complex)
    r = np.linalg.norm(d, axis=-1)
    A, B = _ab(mat, freq, r, 0)
    u = d / r[..., None]
    uu = u[..., :, None] * u[..., None, :]
    return A[..., None, None] * _EYE + B[..., None, None] * uu


def kupradze_matrix(mat, freq, x, y):
    """Closed-form time-harmonic fundamental matrix.

    Loses relative accuracy like eps/(kappa_s*|x-y|)**2 for very small
    arguments because the 1/omega^2 term cancels against the static part;
    see ``kupradze_series`` for that range.
    """
    return kupradze_diff(mat, freq, _diff(x, y))


def kupradze_series(mat, freq, x, y, nmax=40):
    """Power-series form of the fundamental matrix summed over n = 0..nmax."""
    d = _diff(x, y)
    r = np.linalg.norm(d)
    dd = np.outer(d, d)
    cs, cp, w = mat.cs, mat.cp, freq.omega
    diag = 0j
    dyad = 0j
    for n in range(nmax + 1):
        c = (1j * w) ** n / ((n + 2) * factorial(n))
        diag += c * ((n + 1) / cs ** (n + 2) + 1 / cp ** (n + 2)) * r ** (n - 1)
        dyad -= c * (n - 1) * (1 / cs ** (n + 2) - 1 / cp ** (n + 2)) * r ** (n - 3)
    return (diag * _EYE + dyad * dd) / (FOUR_PI * mat.rho0)


def grad_kupradze_diff(mat, freq, d):
    """Gradient with respect to x of Gamma(x, y), indexed [..., i, j, m]."""
    d = np.asarray(d, dtype=float)
    r = np.linalg.norm(d, axis=-1)
    u = d / r[..., None]
    if freq.omega == 0:
        g1, g2 = mat.gamma1 / FOUR_PI, mat.gamma2 / FOUR_PI
        A, B = g1 / r, g2 / r
        dA, dB = -g1 / r**2, -g2 / r**2
    else:
        A, B, dA, dB = _ab(mat, freq, r, 1)
    P = _EYE - u[..., :, None] * u[..., None, :]
    ui = u[..., :, None, None]
    uj = u[..., None, :, None]
    um = u[..., None, None, :]
    out = dA[..., None, None, None] * _EYE[:, :, None] * um
    out = out + dB[..., None, None, None] * ui * uj * um
    # d(rhat_i)/dx_m = P_im / r
    out = out + (B / r)[..., None, None, None] * (P[..., :, None, :] * uj + ui * P[..., None, :, :])
    return out


def grad_kupradze(mat, freq, x, y):
    """Analytic gradient in the source variable: out[i, j, l] = d Gamma_ij / d y_l."""
    return -grad_kupradze_diff(mat, freq, _diff(x, y))


def _unit(xhat):
    xhat = np.asarray(xhat, dtype=float)
    n = np.linalg.norm(xhat, axis=-1)
    if np.any(np.abs(n - 1) > 1e-10):
        raise ValidationError("far-field direction must be a unit vector")
    return xhat


def farfield_kernel_p(mat, freq, xhat, y):
    xhat = _unit(xhat)
    phase = np.exp(-1j * freq.kappa_p * (xhat @ np.asarray(y, dtype=float)))
    return np.outer(xhat, xhat) * phase / (FOUR_PI * (mat.lam + 2 * mat.mu))


def farfield_kernel_s(mat, freq, xhat, y):
    xhat = _unit(xhat)
    phase = np.exp(-1j * freq.kappa_s * (xhat @ np.asarray(y, dtype=float)))
    return (_EYE - np.outer(xhat, xhat)) * phase / (FOUR_PI * mat.mu)


def incident_p(wave, freq, x):
    x = np.asarray(x, dtype=float)
    ph = np.exp(1j * freq.kappa_p * (x @ wave.theta))
    return wave.b1 * np.multiply.outer(ph, wave.theta)


def incident_s(wave, freq, x):
    x = np.asarray(x, dtype=float)
    ph = np.exp(1j * freq.kappa_s * (x @ wave.theta))
    return wave.b2 * np.multiply.outer(ph, wave.theta_perp)


def incident_field(wave, freq, x):
    """Superposed p and s plane waves; ``x`` may be a batch of points (..., 3)."""
    return incident_p(wave, freq, x) + incident_s(wave, freq, x)


def navier_residual(field, mat, freq, x, step):
    """Centered finite-difference value of mu*Lap(u) + (lam+mu)*grad div u + omega^2 rho0 u."""
    x = np.asarray(x, dtype=float)
    h = float(step)
    if not h > 0:
        raise ValidationError("step must be positive")
    e = np.eye(3) * h
    u0 = np.asarray(field(x), dtype=complex)
    hess = np.empty((3, 3, 3), dtype=complex)  # hess[m, n, :] = d_m d_n u
    for m in range(3):
        hess[m, m] = (field(x + e[m]) - 2 * u0 + field(x - e[m])) / h**2
        for n in range(m + 1, 3):
            v = (field(x + e[m] + e[n]) - field(x + e[m] - e[n])
                 - field(x - e[m] + e[n]) + field(x - e[m] - e[n])) / (4 * h**2)
            hess[m, n] = hess[n, m] = v
    lap = hess[0, 0] + hess[1, 1] + hess[2, 2]
    grad_div = np.einsum("kmm->k", hess)
    return mat.mu * lap + (mat.lam + mat.mu) * grad_div + freq.omega**2 * mat.rho0 * u0


def bound_constants(mat, freq, diam_d, diam_omega, separation, diam_cluster=None):
    """Appendix bound constants H1..H6.

    ``diam_d`` is the largest inclusion diameter (H1), ``diam_cluster`` the
    diameter of the union of inclusions (H4; defaults to ``diam_omega``,
    which is conservative), ``diam_omega`` enters H6 and ``separation`` is
    the distance between the observation set and the cluster (H2).
    """
    if diam_cluster is None:
        diam_cluster = diam_omega
    ks, kp, w = freq.kappa_s, freq.kappa_p, freq.omega
    for name, dia in (("diam(D_m)", diam_d), ("diam(D)", diam_cluster), ("diam(Omega)", diam_omega)):
        if not 0.5 * max(ks, kp) * dia < 1:
            raise DomainError(f"convergence condition 0.5*max(kappa_s, kappa_p)*{name} < 1 violated")
    if not separation > 0:
        raise DomainError("separation must be positive")
    if not w > 0:
        raise DomainError("bound constants need omega > 0")
    cs2, cp2 = mat.cs**2, mat.cp**2
    pre = 1.0 / (FOUR_PI * mat.rho0)

    def h14(dia):
        return pre * (2 * ks / cs2 / (1 - 0.5 * ks * dia) + kp / cs2 / (1 - 0.5 * kp * dia))

    sd = separation
    H2 = np.sqrt(3) * (
        (ks + 1 / sd) / sd / (FOUR_PI * mat.mu)
        + pre / w**2 * ((ks**3 + kp**3) / sd**2 + (ks**2 + kp**2) / sd * (3 + 6 / sd)
                        + 24 * (ks + kp) / sd**3 + 48 / sd**4))
    H3 = pre * (1 / cs2 + 1 / cp2)
    qs, qp = 0.5 * ks * diam_omega, 0.5 * kp * diam_omega
    H6 = pre / w**2 * (0.25 * (3 * ks**4 + 2 * kp**4)
                       + 2 * ks**4 * qs / (1 - qs) + kp**4 * qp / (1 - qp))
    return BoundConstants(H1=h14(diam_d), H2=H2, H3=H3, H4=h14(diam_cluster), H5=3 * H3, H6=H6,
                          diam_d=diam_d, diam_cluster=diam_cluster, diam_omega=diam_omega,
                          separation=separation)
