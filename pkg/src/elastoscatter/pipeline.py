"""Glue from a reference spectrum and a regime to a ready-to-solve cluster."""
from dataclasses import dataclass

import numpy as np

from .geometry import build_periodic_cluster, require_regime, validate_regime
from .spectra import group_eigenvalue, pick_frequency, scale_spectrum, scattering_coefficient


@dataclass
class PreparedCluster:
    cluster: object
    freq: object
    selection: object
    coefficient: object
    lambda_n0: float
    omega_n0: float


def prepare_cluster(mat, spec_b, config, radius_b, rel_tol=1e-4):
    """Select the resonance, pick the frequency and attach C^(j) to a periodic cluster."""
    sel = group_eigenvalue(spec_b, config.n0, rel_tol)
    spec_a = scale_spectrum(spec_b, config.a)
    lam = float(spec_a.eigenvalues[sel.indices[0]])
    rho = config.c / config.a**2
    freq = pick_frequency(mat, rho, lam, config.b, config.h, config.a, config.sign)
    alpha = rho - mat.rho0
    coef = scattering_coefficient(spec_a, sel, alpha, freq)
    cl = build_periodic_cluster(config, radius_b, mat.rho0)
    require_regime(validate_regime(config, freq.kappa_max, cl.diameter))
    cl = cl.with_coefficients(coef.C, coef.denominator)
    return PreparedCluster(cl, freq, sel, coef, lam, float(np.sqrt(1.0 / (rho * lam))))
