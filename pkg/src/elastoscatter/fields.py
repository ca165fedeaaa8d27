"""Scattered fields, far-field patterns and convergence sweeps."""
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DomainError, ValidationError
from .foldy import assemble_system, born_truncation, operator_norm_inf, solve
from .kernels import FOUR_PI, incident_field, kupradze_diff
from .pipeline import prepare_cluster


@dataclass
class FarFieldPattern:
    """p and s far-field amplitudes per direction, arrays of shape (n, 3)."""

    directions: np.ndarray
    up: np.ndarray
    us: np.ndarray
    source: str = ""


def sphere_directions(n):
    """Deterministic, nearly uniform unit vectors (Fibonacci lattice)."""
    if n < 1:
        raise ValidationError("need at least one direction")
    k = np.arange(n) + 0.5
    z = 1 - 2 * k / n
    phi = np.pi * (1 + 5**0.5) * k
    rxy = np.sqrt(1 - z**2)
    return np.stack([rxy * np.cos(phi), rxy * np.sin(phi), z], axis=1)


def _q_and_tag(Q):
    if hasattr(Q, "partial_sums"):
        return Q.per_inclusion, f"born(N={Q.N})"
    if hasattr(Q, "per_inclusion"):
        return Q.per_inclusion, "full"
    return np.asarray(Q).reshape(-1, 3), "vector"


def check_exterior(cluster, x, margin=2.0):
    """Reject points within circumradius + margin*a of any inclusion center."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if cluster.M == 0:
        return x
    r = np.linalg.norm(x[:, None, :] - cluster.centers[None], axis=2)
    if np.any(r <= cluster.radius + margin * cluster.a):
        raise DomainError("observation point inside an inclusion's safety ball")
    return x


def scattered_field(cluster, Q, mat, freq, x):
    """sum_j alpha_j omega^2 Gamma(x, z_j) Q_j at points ``x`` (shape (3,) or (n, 3))."""
    single = np.ndim(x) == 1
    x = check_exterior(cluster, x)
    q, _ = _q_and_tag(Q)
    if cluster.M == 0:
        vals = np.zeros((len(x), 3), dtype=complex)
    else:
        G = kupradze_diff(mat, freq, x[:, None, :] - cluster.centers[None])
        vals = np.einsum("pjab,jb->pa", G, (freq.omega**2 * cluster.alpha)[:, None] * q)
    return vals[0] if single else vals


def n_level_field(cluster, born, mat, freq, x):
    return scattered_field(cluster, born, mat, freq, x)


def farfield(cluster, Q, mat, freq, xhat):
    """p and s far fields of the cluster for directions ``xhat`` (n, 3)."""
    xhat = np.atleast_2d(np.asarray(xhat, dtype=float))
    if np.any(np.abs(np.linalg.norm(xhat, axis=1) - 1) > 1e-10):
        raise ValidationError("far-field directions must be unit vectors")
    q, tag = _q_and_tag(Q)
    src = (freq.omega**2 * cluster.alpha)[:, None] * q
    phase = xhat @ cluster.centers.T
    sp = np.exp(-1j * freq.kappa_p * phase) @ src
    ss = np.exp(-1j * freq.kappa_s * phase) @ src
    return project_farfield(xhat, sp, ss, mat, tag)


def project_farfield(xhat, sp, ss, mat, tag=""):
    """Apply the far-field projectors to the phased source sums."""
    along = np.einsum("na,na->n", xhat, sp)
    up = along[:, None] * xhat / (FOUR_PI * (mat.lam + 2 * mat.mu))
    us = (ss - np.einsum("na,na->n", xhat, ss)[:, None] * xhat) / (FOUR_PI * mat.mu)
    return FarFieldPattern(xhat, up, us, tag)


def reciprocity_pairing(cluster, Q, mat, freq, wave_at_minus_xhat, xhat):
    """Right-hand side sum_j (omega^2/4pi) alpha_j U^i(z_j, -xhat) . Q_j of the pairing identity."""
    q, _ = _q_and_tag(Q)
    ui = incident_field(wave_at_minus_xhat, freq, cluster.centers)
    return np.sum(freq.omega**2 / FOUR_PI * cluster.alpha * np.einsum("ja,ja->j", ui, q))


def fit_slope(a_values, metric):
    """Least-squares slope of log(metric) against log(a)."""
    a = np.asarray(a_values, dtype=float)
    m = np.asarray(metric, dtype=float)
    if len(a) < 2 or np.any(m <= 0):
        raise ValidationError("slope fit needs at least two positive metrics")
    return float(np.polyfit(np.log(a), np.log(m), 1)[0])


@dataclass
class SweepResult:
    mode: str
    predicted: float
    rows: list = field(default_factory=list)

    @property
    def a(self):
        return [r["a"] for r in self.rows]

    @property
    def metric(self):
        return [r["metric"] for r in self.rows]

    @property
    def slope(self):
        return fit_slope(self.a, self.metric)


SWEEP_MODES = ("norm", "born", "amplitude")


def predicted_slope(mode, h, s, N=0):
    if mode == "norm":
        return 1 - h - s
    if mode == "born":
        return (N + 1) * (1 - h - s)
    if mode == "amplitude":
        return 3 - h
    raise ValidationError(f"unknown sweep mode {mode!r}")


def convergence_sweep(template, a_values, mode, mat, spec_b, radius_b, wave, N=0, rel_tol=1e-4):
    """Metric per a-value and its fitted log-log slope.

    Modes: ``norm`` gives ||B||_inf, ``born`` gives ||Q - Q^N||_inf / ||Q||_inf and
    ``amplitude`` gives ||Q_1|| for the first inclusion.
    """
    if len(a_values) < 3:
        raise ValidationError("a sweep needs at least three a-values")
    res = SweepResult(mode, predicted_slope(mode, template.h, template.s, N))
    for a in a_values:
        pc = prepare_cluster(mat, spec_b, replace(template, a=float(a)), radius_b, rel_tol)
        system = assemble_system(pc.cluster, mat, pc.freq, wave)
        nb = operator_norm_inf(system)
        row = {"a": float(a), "M": pc.cluster.M, "omega": pc.freq.omega, "normB": nb}
        if mode == "norm":
            row["metric"] = nb
        elif mode == "born":
            q = solve(system).Q
            qn = born_truncation(system, N).Q
            row["metric"] = float(np.abs(q - qn).max() / np.abs(q).max())
        elif mode == "amplitude":
            q = solve(system).Q
            row["metric"] = float(np.linalg.norm(q[:3]))
        else:
            raise ValidationError(f"unknown sweep mode {mode!r}")
        res.rows.append(row)
    return res
