"""Special functions and distribution tails shared by every test.

Thin, checked wrappers over libm/scipy primitives plus log-space binomial
probabilities. Reported p-values are clamped to [1e-320, 1]; anything below
the floor is rendered as the symbol "eps" with a log10 upper bound.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import gammaincc, gammaln

PVALUE_FLOOR = 1e-320
EPS_LABEL = "eps"


def erfc(x: float) -> float:
    """Complementary error function."""
    if math.isnan(x):
        raise ValueError("erfc: NaN input")
    return math.erfc(x)


def igamc(a: float, x: float) -> float:
    """Regularized upper incomplete gamma Q(a, x)."""
    if math.isnan(a) or math.isnan(x):
        raise ValueError("igamc: NaN input")
    if a <= 0:
        raise ValueError(f"igamc: a must be > 0, got {a}")
    if x < 0:
        raise ValueError(f"igamc: x must be >= 0, got {x}")
    return float(gammaincc(a, x))


def chi2_sf(df: int, x: float) -> float:
    """Survival function of the chi-square distribution with df >= 1."""
    if df < 1:
        raise ValueError(f"chi2_sf: df must be >= 1, got {df}")
    return igamc(df / 2.0, x / 2.0)


def normal_sf(x: float) -> float:
    """P(Z > x) for standard normal Z."""
    if math.isnan(x):
        raise ValueError("normal_sf: NaN input")
    return 0.5 * math.erfc(x / math.sqrt(2.0))


def binom_logpmf(n: int, p: float, j: int) -> float:
    """Natural log of the binomial pmf, computed via log-gamma."""
    if n < 1:
        raise ValueError(f"binom_logpmf: n must be >= 1, got {n}")
    if not 0.0 < p < 1.0:
        raise ValueError(f"binom_logpmf: p must be in (0,1), got {p}")
    if not 0 <= j <= n:
        raise ValueError(f"binom_logpmf: j must be in [0,{n}], got {j}")
    return (
        math.lgamma(n + 1)
        - math.lgamma(j + 1)
        - math.lgamma(n - j + 1)
        + j * math.log(p)
        + (n - j) * math.log1p(-p)
    )


def binom_pmf_vector(n: int, p: float) -> np.ndarray:
    """pmf of B(n, p) at every j in 0..n (log-gamma based, then exponentiated)."""
    if n < 1:
        raise ValueError(f"binom_pmf_vector: n must be >= 1, got {n}")
    if not 0.0 < p < 1.0:
        raise ValueError(f"binom_pmf_vector: p must be in (0,1), got {p}")
    j = np.arange(n + 1, dtype=np.float64)
    logpmf = (
        gammaln(n + 1.0)
        - gammaln(j + 1.0)
        - gammaln(n - j + 1.0)
        + j * math.log(p)
        + (n - j) * math.log1p(-p)
    )
    return np.exp(logpmf)


def chi2_sf_log10_bound(df: int, x: float) -> float:
    """Upper bound on log10 of chi2_sf(df, x), usable after underflow.

    For z > a the tail series Q(a,z) = z^(a-1) e^-z / Gamma(a) * (1 + (a-1)/z + ...)
    is bounded by the geometric ratio z/(z-a+1).
    """
    a = df / 2.0
    z = x / 2.0
    if z <= a + 1.0:
        return 0.0
    # series factor: bounded by 1 when a <= 1 (alternating), else geometric
    factor = 0.0 if a <= 1.0 else math.log(z / (z - a + 1.0))
    ln_q = (a - 1.0) * math.log(z) - z - math.lgamma(a) + factor
    return ln_q / math.log(10.0)


def clamp_pvalue(p: float) -> float:
    """Clamp a p-value into [PVALUE_FLOOR, 1] for reporting."""
    if math.isnan(p):
        raise ValueError("p-value is NaN")
    return min(max(p, PVALUE_FLOOR), 1.0)


def pvalue_repr(p: float) -> str:
    """Render a p-value, using the eps symbol below the representable floor."""
    if p < PVALUE_FLOOR:
        return EPS_LABEL
    return repr(float(min(p, 1.0)))
