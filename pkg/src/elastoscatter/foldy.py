"""Foldy-Lax point-interaction system (I - B) Q = U^I.

Layout: row 3*j + l holds component l of inclusion j (0-based).
"""
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
from scipy.linalg import lapack

from .errors import GeometryError, NearResonanceError, ValidationError
from .kernels import incident_field, kupradze_diff

COND_LIMIT = 1e12


@dataclass
class FoldySystem:
    B: np.ndarray
    UI: np.ndarray

    @property
    def M(self):
        return self.UI.size // 3

    def block(self, j, k):
        return self.B[3 * j:3 * j + 3, 3 * k:3 * k + 3]


@dataclass
class FoldySolution:
    Q: np.ndarray
    residual: float
    condition: float

    @property
    def per_inclusion(self):
        return self.Q.reshape(-1, 3)


@dataclass
class BornSeries:
    partial_sums: list

    @property
    def N(self):
        return len(self.partial_sums) - 1

    @property
    def Q(self):
        return self.partial_sums[-1]

    @property
    def per_inclusion(self):
        return self.Q.reshape(-1, 3)


def interaction_blocks(cluster, mat, freq):
    """(M, M, 3, 3) blocks omega^2 alpha_k C_j Gamma(z_j, z_k), zero on the diagonal."""
    if cluster.coefficients is None:
        raise ValidationError("cluster has no scattering coefficients attached")
    z = cluster.centers
    M = len(z)
    d = z[:, None, :] - z[None, :, :]
    idx = np.arange(M)
    r = np.linalg.norm(d, axis=2)
    r[idx, idx] = 1.0
    if np.any(r == 0):
        raise GeometryError("coincident inclusion centers")
    d[idx, idx] = 1.0  # placeholder, zeroed below
    G = kupradze_diff(mat, freq, d)
    blocks = np.einsum("jab,jkbc->jkac", cluster.coefficients, G)
    blocks *= (freq.omega**2 * cluster.alpha)[None, :, None, None]
    blocks[idx, idx] = 0.0
    return blocks


def assemble_system(cluster, mat, freq, wave):
    blocks = interaction_blocks(cluster, mat, freq)
    M = cluster.M
    B = blocks.transpose(0, 2, 1, 3).reshape(3 * M, 3 * M)
    Ui = incident_field(wave, freq, cluster.centers).reshape(M, 3)
    UI = np.einsum("jab,jb->ja", cluster.coefficients, Ui).reshape(-1)
    return FoldySystem(B, UI)


def condition_estimate(lu, anorm):
    rcond, info = lapack.zgecon(lu, anorm, norm="1")
    return np.inf if rcond == 0 else 1.0 / rcond


def solve(system, cond_limit=COND_LIMIT):
    """Dense LU solve of (I - B) Q = U^I with a 1-norm condition check."""
    n = system.UI.size
    if n == 0:
        return FoldySolution(system.UI.copy(), 0.0, 1.0)
    A = np.eye(n) - system.B
    lu, piv = sla.lu_factor(A, check_finite=True)
    cond = condition_estimate(lu, np.abs(A).sum(axis=0).max())
    if not cond < cond_limit:
        raise NearResonanceError("Foldy-Lax matrix is numerically singular", cond)
    Q = sla.lu_solve((lu, piv), system.UI)
    res = float(np.linalg.norm(A @ Q - system.UI))
    return FoldySolution(Q, res, float(cond))


def born_truncation(system, N):
    """Partial sums Q^n = sum_{k<=n} B^k U^I for n = 0..N."""
    if N < 0:
        raise ValidationError("Born order must be non-negative")
    v = system.UI.copy()
    acc = v.copy()
    sums = [acc.copy()]
    for _ in range(N):
        v = system.B @ v
        acc = acc + v
        sums.append(acc.copy())
    return BornSeries(sums)


def operator_norm_inf(system):
    if system.B.size == 0:
        return 0.0
    return float(np.abs(system.B).sum(axis=1).max())


@dataclass(frozen=True)
class InvertibilityReport:
    born_safe: bool
    norm_inf: float
    condition: float


def invertibility_check(system):
    q = operator_norm_inf(system)
    n = system.UI.size
    if n == 0:
        return InvertibilityReport(True, 0.0, 1.0)
    A = np.eye(n) - system.B
    lu, _ = sla.lu_factor(A)
    return InvertibilityReport(q < 1, q, float(condition_estimate(lu, np.abs(A).sum(axis=0).max())))


def write_system(path, system):
    """Row-major dump of B then U^I, one ``re im`` pair per entry."""
    with open(path, "w") as fh:
        n = system.UI.size
        fh.write(f"# B {n} {n}\n")
        for row in system.B:
            fh.write(" ".join(f"{z.real:.16e} {z.imag:.16e}" for z in row) + "\n")
        fh.write(f"# UI {n}\n")
        fh.write(" ".join(f"{z.real:.16e} {z.imag:.16e}" for z in system.UI) + "\n")
