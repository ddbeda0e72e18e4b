"""J function of the consistent Gaussian LLR model L ~ N(sigma^2/2, sigma^2).

J(sigma) is the mutual information between a uniform bit and such an LLR.
Both directions are read off one dense table computed by Gauss-Hermite
quadrature, so ``jinv(jfun(s)) == s`` up to float rounding. Beyond the table
the tail 1 - J decays like exp(-sigma^2 / 8) and is extended analytically.
"""
import numpy as np

_SIGMA_MAX = 12.0
_N_GRID = 8001


def j_quadrature(sigma, n_nodes=200):
    """Reference J(sigma) by Gauss-Hermite quadrature (slow, used for the table and tests)."""
    sigma = np.atleast_1d(np.asarray(sigma, dtype=float))
    x, w = np.polynomial.hermite_e.hermegauss(n_nodes)
    w = w / w.sum()
    L = sigma[:, None] ** 2 / 2 + sigma[:, None] * x[None, :]
    return 1.0 - (np.logaddexp(0.0, -L) / np.log(2)) @ w


_SIG = np.linspace(0.0, _SIGMA_MAX, _N_GRID)
_J = np.clip(j_quadrature(_SIG), 0.0, 1.0)
_J[0] = 0.0
_J = np.maximum.accumulate(_J)
_TAIL = 1.0 - _J[-1]
I_MAX = 1.0 - 1e-15


def jfun(sigma):
    s = np.abs(np.asarray(sigma, dtype=float))
    out = np.interp(s, _SIG, _J)
    big = s > _SIGMA_MAX
    if np.any(big):
        out = np.where(big, 1.0 - _TAIL * np.exp(-(s**2 - _SIGMA_MAX**2) / 8.0), out)
    return out


def jinv(mi):
    mi = np.asarray(mi, dtype=float)
    if np.any(mi < 0) or np.any(mi > 1) or np.any(np.isnan(mi)):
        raise ValueError("mutual information must lie in [0, 1]")
    mi = np.minimum(mi, I_MAX)
    out = np.interp(mi, _J, _SIG)
    big = mi > _J[-1]
    if np.any(big):
        with np.errstate(divide="ignore", invalid="ignore"):
            tail = np.sqrt(_SIGMA_MAX**2 + 8.0 * np.log(_TAIL / np.maximum(1.0 - mi, 1e-300)))
        out = np.where(big, tail, out)
    return out
