"""Voxel Galerkin discretization of the static Navier volume operator.

The operator N0(U)(x) = int_B Gamma0(x, y) U(y) dy is discretized with
piecewise-constant vector fields on the cells of a uniform grid.  With a
uniform cell volume V the matrix is symmetric, so its spectrum is real and
its eigenvectors are orthonormal.  Per-cell eigenfunction values are
v / sqrt(V), which makes them orthonormal in L2(B).
"""
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg as sla
import scipy.sparse.linalg as spla

from .errors import (DomainError, NoRealResonanceError, SingularCoefficientError,
                     ValidationError)
from .kernels import FOUR_PI, kelvin_diff


@dataclass(frozen=True)
class ReferenceShape:
    """Voxelized reference inclusion B.

    ``mask`` has shape ``resolution`` and marks the cells that belong to B.
    Cell (i, j, k) has center ``origin + (i + 0.5, j + 0.5, k + 0.5) * cell_size``.
    """

    mask: np.ndarray
    cell_size: float
    origin: np.ndarray
    name: str = "mask"

    def __post_init__(self):
        mask = np.asarray(self.mask, dtype=bool)
        if mask.ndim != 3:
            raise ValidationError("voxel mask must be three-dimensional")
        if not self.cell_size > 0:
            raise ValidationError("cell size must be positive")
        if not mask.any():
            raise ValidationError("voxel mask is empty")
        object.__setattr__(self, "mask", mask)
        object.__setattr__(self, "origin", np.asarray(self.origin, dtype=float))
        if not self._contains_origin():
            raise ValidationError("reference shape must contain the origin")

    def _contains_origin(self):
        # closed cells: the origin may sit on a cell face or corner
        idx = -self.origin / self.cell_size
        lo = np.floor(idx - 1e-9).astype(int)
        hi = np.floor(idx + 1e-9).astype(int)
        for i in range(lo[0], hi[0] + 1):
            for j in range(lo[1], hi[1] + 1):
                for k in range(lo[2], hi[2] + 1):
                    if all(0 <= q < s for q, s in zip((i, j, k), self.mask.shape)) and self.mask[i, j, k]:
                        return True
        return False

    @property
    def resolution(self):
        return self.mask.shape

    @property
    def ncells(self):
        return int(self.mask.sum())

    @property
    def cell_volume(self):
        return self.cell_size**3

    @property
    def volume(self):
        return self.ncells * self.cell_volume

    @property
    def centers(self):
        ijk = np.argwhere(self.mask)
        return self.origin + (ijk + 0.5) * self.cell_size

    @property
    def circumradius(self):
        """Largest distance from the origin to a corner of an included cell."""
        c = self.centers
        half = 0.5 * self.cell_size
        corners = np.abs(c) + half
        return float(np.sqrt((corners**2).sum(axis=1)).max())

    def scaled(self, a):
        return replace(self, cell_size=self.cell_size * a, origin=self.origin * a)


def ball_shape(n, radius=1.0):
    """Cells of an n^3 grid on [-radius, radius]^3 whose centers lie in the ball."""
    h = 2.0 * radius / n
    t = -radius + (np.arange(n) + 0.5) * h
    X, Y, Z = np.meshgrid(t, t, t, indexing="ij")
    mask = X**2 + Y**2 + Z**2 < radius**2
    return ReferenceShape(mask, h, np.full(3, -radius), name="ball")


def cube_shape(n, side=1.0):
    return ReferenceShape(np.ones((n, n, n), dtype=bool), side / n, np.full(3, -side / 2), name="cube")


def make_shape(name, n, size=1.0):
    if name == "ball":
        return ball_shape(n, size)
    if name == "cube":
        return cube_shape(n, size)
    raise ValidationError(f"unknown shape {name!r} (expected 'ball' or 'cube')")


def read_mask_file(path, cell_size, origin=None):
    """Read a voxel mask: header ``nx ny nz`` then nx*ny*nz 0/1 tokens, row-major."""
    try:
        with open(path) as fh:
            tokens = fh.read().split()
    except OSError as exc:
        raise ValidationError(f"cannot read voxel mask {path}: {exc}") from exc
    try:
        dims = tuple(int(t) for t in tokens[:3])
        vals = np.array([int(t) for t in tokens[3:]])
    except ValueError as exc:
        raise ValidationError(f"malformed voxel mask {path}: {exc}") from exc
    if len(dims) != 3 or min(dims) <= 0 or vals.size != np.prod(dims):
        raise ValidationError(f"voxel mask {path}: expected {dims} header and matching cell count")
    if not np.isin(vals, (0, 1)).all():
        raise ValidationError(f"voxel mask {path}: cells must be 0 or 1")
    if origin is None:
        origin = -0.5 * np.array(dims) * cell_size
    return ReferenceShape(vals.reshape(dims).astype(bool), cell_size, origin, name="mask")


def write_mask_file(path, shape):
    with open(path, "w") as fh:
        fh.write(" ".join(str(n) for n in shape.resolution) + "\n")
        for plane in shape.mask.astype(int).reshape(-1, shape.resolution[2]):
            fh.write(" ".join(str(v) for v in plane) + "\n")


def self_cell_integral(mat, cell_volume):
    """Static self-interaction of a cell, replaced by the equal-volume ball.

    int_{|y|<R} Gamma0(0, y) dy = (gamma1/2 + gamma2/6) R^2 I, R = (3V/4pi)^(1/3).
    """
    if not cell_volume > 0:
        raise ValidationError("cell volume must be positive")
    R = (3.0 * cell_volume / FOUR_PI) ** (1.0 / 3.0)
    return (mat.gamma1 / 2 + mat.gamma2 / 6) * R**2 * np.eye(3)


def _block_operator(blocks):
    n = blocks.shape[0]
    return blocks.transpose(0, 2, 1, 3).reshape(3 * n, 3 * n)


def galerkin_blocks(kernel_diff, centers, cell_volume, self_block):
    """(n, n, 3, 3) array of kernel(c_i - c_j) * V with ``self_block`` on the diagonal."""
    P = np.asarray(centers, dtype=float)
    n = len(P)
    d = P[:, None, :] - P[None, :, :]
    idx = np.arange(n)
    d[idx, idx] = 1.0  # placeholder, overwritten below
    K = kernel_diff(d) * cell_volume
    K[idx, idx] = self_block
    return K


def assemble_navier_operator(shape, mat):
    """Dense symmetric matrix of N0 on ``shape``, index 3*cell + component."""
    K = galerkin_blocks(lambda d: kelvin_diff(mat, d), shape.centers, shape.cell_volume,
                        self_cell_integral(mat, shape.cell_volume))
    return _block_operator(K)


@dataclass
class SpectralDecomposition:
    """Eigen-system of the discretized operator, eigenvalues descending.

    ``eigenfunctions[c, l, n]`` is component l of eigenfunction n on cell c,
    normalized as sum_c V |e_c|^2 = 1, and ``moments[n]`` is int_B e_n.
    """

    eigenvalues: np.ndarray
    eigenfunctions: np.ndarray
    moments: np.ndarray
    cell_volume: float
    scale: float = 1.0
    full: bool = True
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.eigenvalues)

    @property
    def negative_eigenvalues(self):
        return self.eigenvalues[self.eigenvalues <= 0]

    def clusters(self, rel_tol=1e-4):
        """Index groups of positive eigenvalues, each within rel_tol of its leading value."""
        groups = []
        for i, lam in enumerate(self.eigenvalues):
            if lam <= 0:
                break
            if groups and abs(lam - self.eigenvalues[groups[-1][0]]) < rel_tol * abs(self.eigenvalues[groups[-1][0]]):
                groups[-1].append(i)
            else:
                groups.append([i])
        return groups


def eigendecompose(A, cell_volume, top=None):
    """Symmetric eigendecomposition; ``top`` restricts to the largest eigenpairs."""
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] % 3:
        raise ValidationError("operator matrix must be square with 3 unknowns per cell")
    scale = np.abs(A).max()
    if np.abs(A - A.T).max() > 1e-14 * scale:
        raise ValidationError("operator matrix is not symmetric")
    n = A.shape[0]
    if top is None or top >= n:
        w, v = sla.eigh(A)
        full = True
    else:
        # Lanczos on the dense matrix: O(n^2) per iteration instead of O(n^3)
        w, v = spla.eigsh(A, k=top, which="LA", tol=0, v0=np.ones(n))
        full = False
    order = np.argsort(w, kind="stable")[::-1]
    w, v = w[order], v[:, order]
    ncell = n // 3
    efun = v.reshape(ncell, 3, -1) / np.sqrt(cell_volume)
    moments = cell_volume * efun.sum(axis=0).T
    return SpectralDecomposition(w, efun, moments, cell_volume, full=full)


def shape_spectrum(shape, mat, top=None):
    spec = eigendecompose(assemble_navier_operator(shape, mat), shape.cell_volume, top=top)
    spec.meta.update(shape=shape.name, resolution=shape.resolution, ncells=shape.ncells)
    return spec


def scale_spectrum(spec, a):
    """Spectrum of a*B from that of B: eigenvalues times a^2, moments times a^(3/2)."""
    if not a > 0:
        raise ValidationError("scale must be positive")
    return replace(spec, eigenvalues=spec.eigenvalues * a**2,
                   eigenfunctions=spec.eigenfunctions * a**-1.5,
                   moments=spec.moments * a**1.5,
                   cell_volume=spec.cell_volume * a**3,
                   scale=spec.scale * a, meta=dict(spec.meta))


@dataclass(frozen=True)
class ResonanceSelection:
    n0: int
    indices: tuple
    rel_tol: float
    eigenvalue: float

    @property
    def multiplicity(self):
        return len(self.indices)


def group_eigenvalue(spec, n0=0, rel_tol=1e-4):
    """Select the n0-th distinct cluster of positive eigenvalues (0-based, from the top)."""
    if len(spec) == 0:
        raise ValidationError("empty spectrum")
    if rel_tol < 0:
        raise ValidationError("grouping tolerance must be non-negative")
    groups = spec.clusters(rel_tol)
    if not groups:
        raise NoRealResonanceError("spectrum has no positive eigenvalue")
    if not 0 <= n0 < len(groups):
        raise ValidationError(f"n0={n0} out of range: {len(groups)} positive clusters")
    g = groups[n0]
    if not spec.full and g[-1] == len(spec) - 1:
        raise ValidationError("cluster touches the end of a partial spectrum; request more eigenpairs")
    return ResonanceSelection(n0, tuple(g), rel_tol, float(spec.eigenvalues[g[0]]))


def resonance_frequency(rho_j, lambda_n0):
    if not rho_j > 0:
        raise DomainError("inclusion density must be positive")
    if not lambda_n0 > 0:
        raise NoRealResonanceError(f"eigenvalue {lambda_n0} is not positive; no real resonance")
    return float(np.sqrt(1.0 / (rho_j * lambda_n0)))


def pick_frequency(mat, rho_j, lambda_n0, b, h, a, sign=1):
    """Frequency with omega^2 = (1 + sign*b*a^h) / (rho_j * lambda_n0)."""
    if not b > 0:
        raise DomainError("b must be positive")
    if not 0 < h < 1:
        raise DomainError("h must lie in (0, 1)")
    if not a > 0:
        raise DomainError("a must be positive")
    if sign not in (1, -1):
        raise DomainError("sign must be +1 or -1")
    w0 = resonance_frequency(rho_j, lambda_n0)
    rad = 1.0 + sign * b * a**h
    if rad <= 0:
        raise DomainError("negative radicand: b*a^h >= 1 on the lower branch")
    return mat.frequency(w0 * np.sqrt(rad))


@dataclass(frozen=True)
class ScatteringCoefficient:
    C: np.ndarray
    denominator: complex


def scattering_coefficient(spec, selection, alpha, freq):
    """C = (1 / (1 - alpha omega^2 lambda_n0)) sum over the group of m m^T."""
    lam = spec.eigenvalues[selection.indices[0]]
    denom = 1.0 - alpha * freq.omega**2 * lam
    if abs(denom) <= 1e-15 * (1.0 + abs(alpha * freq.omega**2 * lam)):
        raise SingularCoefficientError("frequency sits exactly on the resonance")
    m = spec.moments[list(selection.indices)]
    # moments are real for the symmetric discretization, so conj(m) = m
    return ScatteringCoefficient(m.T @ np.conj(m) / denom, denom)


def sigma_gap(spec, alpha, freq, selection):
    """min over eigenvalues outside the group of |1 - alpha omega^2 lambda_n|^2."""
    rest = np.setdiff1d(np.arange(len(spec)), selection.indices)
    if rest.size == 0:
        raise ValidationError("gap undefined: no eigenvalue outside the resonance group")
    return float(np.min(np.abs(1.0 - alpha * freq.omega**2 * spec.eigenvalues[rest]) ** 2))


def write_spectrum(path, spec, k=None):
    k = len(spec) if k is None else min(k, len(spec))
    with open(path, "w") as fh:
        fh.write("index,eigenvalue,m_x,m_y,m_z\n")
        for n in range(k):
            m = spec.moments[n]
            fh.write(f"{n},{spec.eigenvalues[n]:.16e},{m[0]:.16e},{m[1]:.16e},{m[2]:.16e}\n")


def read_spectrum(path):
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 1], data[:, 2:5]
