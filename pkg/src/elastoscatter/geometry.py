"""Periodic clusters of small inclusions and regime checks.

Omega is an axis-aligned box of unit volume split into ``count`` equal
cells; one inclusion sits at the center of each used cell.  When the count
is a perfect cube and Omega a cube, the cells are cubes of side count^(-1/3).
Otherwise ``lattice_shape`` picks the factorization with the most
cube-like cells.
"""
from dataclasses import dataclass, field, replace
from itertools import product

import numpy as np

from .errors import GeometryError, RegimeError, ValidationError

_TOL = 1e-12


@dataclass(frozen=True)
class Box:
    center: tuple = (0.0, 0.0, 0.0)
    sides: tuple = (1.0, 1.0, 1.0)

    def __post_init__(self):
        sides = tuple(float(v) for v in self.sides)
        if len(sides) != 3 or min(sides) <= 0:
            raise ValidationError("box sides must be three positive numbers")
        if abs(np.prod(sides) - 1.0) > 1e-9:
            raise ValidationError(f"Omega must have unit volume, got {np.prod(sides)}")
        object.__setattr__(self, "sides", sides)
        object.__setattr__(self, "center", tuple(float(v) for v in self.center))

    @property
    def lower(self):
        return np.array(self.center) - 0.5 * np.array(self.sides)

    @property
    def upper(self):
        return np.array(self.center) + 0.5 * np.array(self.sides)

    @property
    def volume(self):
        return float(np.prod(self.sides))

    @property
    def diameter(self):
        return float(np.linalg.norm(self.sides))


@dataclass(frozen=True)
class ClusterConfig:
    """Regime parameters of a cluster.

    ``count_prefactor`` K sets the number of cells to floor(K * a^-s); the
    asymptotic regime only fixes M up to a constant.
    """

    a: float
    s: float
    h: float
    t: float = None
    c: float = 1.0
    b: float = 1.0
    sign: int = 1
    n0: int = 0
    omega_box: Box = field(default_factory=Box)
    count_prefactor: float = 1.0
    skip_boundary: bool = True
    max_aspect: float = None

    def __post_init__(self):
        if self.t is None:
            object.__setattr__(self, "t", self.s / 3.0)

    @property
    def target_count(self):
        return self.count_prefactor * self.a ** (-self.s)

    @property
    def count(self):
        return int(np.floor(self.target_count * (1 + 1e-12)))

    def lattice(self):
        """Cells per axis: exact factorization of ``count``, or with ``max_aspect``
        the near-cubic lattice whose size is closest to ``target_count``."""
        if self.max_aspect is None:
            return lattice_shape(self.count, self.omega_box.sides)
        return nearest_lattice(self.target_count, self.omega_box.sides, self.max_aspect)


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str


@dataclass(frozen=True)
class RegimeReport:
    checks: tuple

    @property
    def ok(self):
        return all(c.passed for c in self.checks)

    def failures(self):
        return [c for c in self.checks if not c.passed]

    def __str__(self):
        return "\n".join(f"[{'ok' if c.passed else 'FAIL'}] {c.name}: {c.detail}" for c in self.checks)


def error_exponent(h, s):
    """Exponent of the remainder in the cluster scattered-field expansion."""
    return 1 - s + min(1 - h, min(0.0, 1 - 2 * h - s / 2))


def validate_regime(config, kappa_max=None, diam_cluster=None, born_N=None):
    a, s, t, h = config.a, config.s, config.t, config.h
    checks = [
        Check("0 < a < 1", 0 < a < 1, f"a = {a}"),
        Check("0 < h < 1", 0 < h < 1, f"h = {h}"),
        Check("s = 3t", abs(s - 3 * t) <= _TOL, f"s = {s}, 3t = {3 * t}"),
        Check("t <= 1/2", t <= 0.5 + _TOL, f"t = {t}"),
        Check("s/2 <= h <= 1-s", s / 2 - _TOL <= h <= 1 - s + _TOL, f"s/2 = {s / 2}, h = {h}, 1-s = {1 - s}"),
    ]
    if kappa_max is not None and diam_cluster is not None:
        q = 0.5 * kappa_max * diam_cluster
        checks.append(Check("0.5*max(kappa)*diam(D) < 1", q < 1, f"value = {q:.6g}"))
    if born_N is not None:
        gap = 1 - h - s
        bound = min(h / (born_N + 1), (s / 2) / born_N if born_N > 0 else np.inf)
        checks.append(Check(f"0 < 1-h-s <= min(h/(N+1), s/(2N)), N={born_N}",
                            0 < gap <= bound + _TOL, f"1-h-s = {gap:.6g}, bound = {bound:.6g}"))
    return RegimeReport(tuple(checks))


def require_regime(report):
    if not report.ok:
        raise RegimeError("regime violated: " + "; ".join(f"{c.name} ({c.detail})" for c in report.failures()))


def lattice_shape(count, sides=(1.0, 1.0, 1.0)):
    """Factorization n1*n2*n3 = count whose cells (sides/n) are closest to cubes."""
    if count < 1:
        raise ValidationError("cell count must be at least 1")
    best = None
    for n1 in range(1, count + 1):
        if count % n1:
            continue
        for n2 in range(1, count // n1 + 1):
            if (count // n1) % n2:
                continue
            n = (n1, n2, count // (n1 * n2))
            cell = np.array(sides) / np.array(n)
            key = (cell.max() / cell.min(), n)
            if best is None or key < best:
                best = key
    return best[1]


def nearest_lattice(target, sides=(1.0, 1.0, 1.0), max_aspect=1.25):
    """Lattice with cell aspect ratio <= max_aspect and n1*n2*n3 closest to target."""
    if not max_aspect >= 1:
        raise ValidationError("max_aspect must be at least 1")
    sides = np.array(sides, dtype=float)
    base = (target / np.prod(sides)) ** (1 / 3) * sides
    lo = np.maximum(1, np.floor(base / max_aspect)).astype(int)
    hi = np.ceil(base * max_aspect).astype(int) + 1
    best = None
    for n in product(*(range(l, h + 1) for l, h in zip(lo, hi))):
        cell = sides / np.array(n)
        aspect = cell.max() / cell.min()
        if aspect > max_aspect * (1 + 1e-12):
            continue
        key = (abs(np.prod(n) - target), aspect, n)
        if best is None or key < best:
            best = key
    if best is None:
        raise ValidationError("no lattice satisfies the aspect limit")
    return best[2]


@dataclass
class Cluster:
    """Inclusion centers with their densities; coefficients are attached later."""

    centers: np.ndarray
    a: float
    radius_b: float
    rho: np.ndarray
    alpha: np.ndarray
    lattice: tuple = None
    pitch: np.ndarray = None
    coefficients: np.ndarray = None
    denominators: np.ndarray = None

    @property
    def M(self):
        return len(self.centers)

    @property
    def radius(self):
        """Circumradius of every inclusion a*B."""
        return self.a * self.radius_b

    @property
    def diameter(self):
        if self.M == 0:
            return 0.0
        ext = self.centers.max(axis=0) - self.centers.min(axis=0)
        return float(np.linalg.norm(ext) + 2 * self.radius)

    def with_coefficients(self, C, denominators=None):
        C = np.asarray(C, dtype=complex)
        if C.shape == (3, 3):
            C = np.broadcast_to(C, (self.M, 3, 3)).copy()
        return replace(self, coefficients=C,
                       denominators=None if denominators is None else np.broadcast_to(denominators, (self.M,)).copy())


def make_cluster(centers, a, radius_b, c=1.0, rho0=1.0):
    centers = np.asarray(centers, dtype=float).reshape(-1, 3)
    rho = np.broadcast_to(np.asarray(c, dtype=float) / a**2, (len(centers),)).copy()
    return Cluster(centers, a, radius_b, rho, rho - rho0)


def build_periodic_cluster(config, radius_b, rho0=1.0):
    """One inclusion at the center of each cell of the Omega lattice.

    Cells touching the boundary of Omega are left empty unless
    ``config.skip_boundary`` is off.
    """
    require_regime(validate_regime(config))
    box = config.omega_box
    n = config.lattice()
    pitch = np.array(box.sides) / np.array(n)
    keep = []
    for ijk in product(*(range(k) for k in n)):
        if config.skip_boundary and any(i == 0 or i == k - 1 for i, k in zip(ijk, n)):
            continue
        keep.append(ijk)
    centers = box.lower + (np.array(keep, dtype=float).reshape(-1, 3) + 0.5) * pitch
    cl = make_cluster(centers, config.a, radius_b, config.c, rho0)
    cl.lattice, cl.pitch = n, pitch
    if cl.M and 0.5 * pitch.min() <= cl.radius:
        raise GeometryError("inclusions do not fit inside their cells")
    return cl


def min_distance(cluster):
    """Smallest gap dist(D_i, D_j) = |z_i - z_j| - 2 a circumradius(B)."""
    if cluster.M < 2:
        raise GeometryError("minimum distance needs at least two inclusions")
    d = np.linalg.norm(cluster.centers[:, None] - cluster.centers[None], axis=2)
    np.fill_diagonal(d, np.inf)
    gap = d.min() - 2 * cluster.radius
    if gap <= 0:
        raise GeometryError(f"inclusions overlap (gap {gap:.3e})")
    return float(gap)


@dataclass(frozen=True)
class DistanceSums:
    k: float
    values: np.ndarray
    max: float
    predicted: float
    branch: str


def distance_sums(cluster, k):
    """Per-inclusion sums over i != j of |z_i - z_j|^-k and the predicted order.

    The prediction uses the center spacing d: d^-k + d^-3 for k < 3,
    d^-3 |ln d| for k = 3 and d^-k for k > 3.
    """
    if cluster.M < 2:
        raise GeometryError("distance sums need at least two inclusions")
    r = np.linalg.norm(cluster.centers[:, None] - cluster.centers[None], axis=2)
    np.fill_diagonal(r, np.inf)
    vals = (r ** (-float(k))).sum(axis=1)
    d = r.min()
    if k < 3:
        pred, branch = d ** -k + d ** -3, "k<3"
    elif k == 3:
        pred, branch = d ** -3 * abs(np.log(d)), "k=3"
    else:
        pred, branch = d ** -k, "k>3"
    return DistanceSums(k, vals, float(vals.max()), float(pred), branch)
