"""Radial power-law kernels and the 1D quadrature rules used throughout.

The kernel family is

    gamma(s) = c_gamma * |s|**(-alpha),   |s| < delta,   0 < alpha < 3,

with c_gamma = (3 - alpha) / (2 * delta**(3 - alpha)) chosen so that the
second moment  int_{-delta}^{delta} s^2 gamma(s) ds  equals one for every
horizon delta.  Quadrature rules come in three flavours: plain
Gauss-Legendre, Gauss-Lobatto (endpoints included, used for error
sampling), and power-weighted Gauss-Jacobi rules that integrate
s**beta * g(s) on (0, hi) exactly for polynomial g.  The weighted rules
absorb the |s|**(-alpha) singularity of the kernel near s = 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import legendre as npleg
from scipy.linalg import eigh_tridiagonal
from scipy.special import roots_jacobi

__all__ = [
    "KernelSpec",
    "QuadRule",
    "make_kernel",
    "kernel_moment",
    "gauss_legendre",
    "gauss_jacobi_weighted",
    "gauss_power_weight",
    "gauss_lobatto",
    "forcing_coefficient",
]

#: Relative term size at which the forcing-coefficient series is truncated.
SERIES_RTOL = 1e-15
#: Hard cap on the number of series terms (factorial decay makes this ample).
SERIES_MAX_TERMS = 60


@dataclass(frozen=True)
class KernelSpec:
    """Radial kernel gamma(s) = c_gamma * |s|**(-alpha) on (-delta, delta)."""

    alpha: float
    delta: float
    c_gamma: float


@dataclass(frozen=True)
class QuadRule:
    """A one-dimensional quadrature rule.

    ``weight_kind`` is "unit" for plain rules and "power" for rules whose
    weights absorb a factor s**beta, i.e. sum(w_i * g(s_i)) approximates
    int s**beta * g(s) ds.
    """

    nodes: np.ndarray
    weights: np.ndarray
    interval: tuple[float, float]
    weight_kind: str = "unit"
    beta: float = 0.0

    def apply(self, g) -> float:
        """Integrate a callable against the rule."""
        return float(np.dot(self.weights, g(self.nodes)))


def make_kernel(alpha: float, delta: float) -> KernelSpec:
    """Build a normalized power-law kernel.

    Parameters
    ----------
    alpha : float
        Singularity exponent, required to lie in (0, 3).
    delta : float
        Interaction horizon, required to be positive.
    """
    if not 0.0 < alpha < 3.0:
        raise ValueError(f"kernel exponent alpha={alpha} must lie in (0, 3)")
    if delta <= 0.0:
        raise ValueError(f"horizon delta={delta} must be positive")
    c_gamma = (3.0 - alpha) / (2.0 * delta ** (3.0 - alpha))
    return KernelSpec(alpha=alpha, delta=delta, c_gamma=c_gamma)


def kernel_moment(kernel: KernelSpec, p: int) -> float:
    """Even moment int_{-delta}^{delta} s**p * gamma(s) ds, closed form.

    Equals (3 - alpha) * delta**(p - 2) / (p + 1 - alpha).  The p = 2 value
    is one by construction of the normalization constant.
    """
    if p < 2 or p % 2 != 0:
        raise ValueError(f"moment order p={p} must be an even integer >= 2")
    a, d = kernel.alpha, kernel.delta
    return (3.0 - a) * d ** (p - 2) / (p + 1 - a)


def gauss_legendre(n: int, lo: float, hi: float) -> QuadRule:
    """Unit-weight Gauss rule on (lo, hi), exact for degree <= 2n - 1."""
    if n < 1:
        raise ValueError("gauss_legendre needs n >= 1")
    if not lo < hi:
        raise ValueError(f"empty interval ({lo}, {hi})")
    t, w = npleg.leggauss(n)
    half = 0.5 * (hi - lo)
    return QuadRule(
        nodes=lo + half * (t + 1.0),
        weights=half * w,
        interval=(lo, hi),
    )


def gauss_jacobi_weighted(n: int, beta: float, hi: float) -> QuadRule:
    """Gauss rule for the weight s**beta on (0, hi).

    sum(w_i * g(s_i)) equals int_0^hi s**beta * g(s) ds exactly whenever g
    is a polynomial of degree <= 2n - 1.  Nodes and weights come from the
    Jacobi weight (1 + t)**beta on (-1, 1) mapped affinely onto (0, hi).
    """
    if n < 1:
        raise ValueError("gauss_jacobi_weighted needs n >= 1")
    if beta <= -1.0:
        raise ValueError(f"weight exponent beta={beta} <= -1 is not integrable")
    if hi <= 0.0:
        raise ValueError(f"upper limit hi={hi} must be positive")
    t, w = roots_jacobi(n, 0.0, beta)
    half = 0.5 * hi
    return QuadRule(
        nodes=half * (t + 1.0),
        weights=half ** (beta + 1.0) * w,
        interval=(0.0, hi),
        weight_kind="power",
        beta=beta,
    )


def _modified_chebyshev(n: int, mom: np.ndarray, ref_a: np.ndarray,
                        ref_b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Recurrence coefficients of a weight from its modified moments.

    ``mom`` holds 2n moments of the weight against monic reference
    polynomials with recurrence p_{l+1} = (t - ref_a[l]) p_l - ref_b[l] p_{l-1}.
    Returns the monic three-term coefficients (alpha, beta) of the weight's
    own orthogonal polynomials (Gautschi's modified Chebyshev algorithm).
    """
    alpha = np.zeros(n)
    beta = np.zeros(n)
    sig_prev = np.zeros(2 * n)
    sig = mom.astype(float).copy()
    alpha[0] = ref_a[0] + mom[1] / mom[0]
    beta[0] = mom[0]
    for k in range(1, n):
        sig_new = np.zeros(2 * n)
        for ell in range(k, 2 * n - k):
            sig_new[ell] = (sig[ell + 1] if ell + 1 < 2 * n else 0.0) \
                - (alpha[k - 1] - ref_a[ell]) * sig[ell] \
                - beta[k - 1] * sig_prev[ell] \
                + ref_b[ell] * sig[ell - 1]
        alpha[k] = ref_a[k] + sig_new[k + 1] / sig_new[k] - sig[k] / sig[k - 1]
        beta[k] = sig_new[k] / sig[k - 1]
        sig_prev, sig = sig, sig_new
    return alpha, beta


def gauss_power_weight(n: int, beta: float, lo: float, hi: float) -> QuadRule:
    """Gauss rule for the weight s**beta on a general interval (lo, hi).

    With lo = 0 this is the Gauss-Jacobi rule; with lo > 0 the weight is
    smooth and the recurrence coefficients are recovered from Legendre
    modified moments by the modified Chebyshev algorithm, followed by the
    Golub-Welsch symmetric tridiagonal eigensolve.
    """
    if lo < 0.0 or hi <= lo:
        raise ValueError(f"invalid interval ({lo}, {hi})")
    if lo == 0.0:
        return gauss_jacobi_weighted(n, beta, hi)
    if n < 1:
        raise ValueError("gauss_power_weight needs n >= 1")

    # monic Legendre recurrence mapped onto (lo, hi)
    mid, half = 0.5 * (hi + lo), 0.5 * (hi - lo)
    ell = np.arange(2 * n, dtype=float)
    ref_a = np.full(2 * n, mid)
    ref_b = half**2 * ell**2 / (4.0 * ell**2 - 1.0)
    ref_b[0] = 0.0

    # modified moments int_lo^hi s**beta * ptilde_j(s) ds by a plain Gauss
    # rule; the integrand is analytic on the panel, so this is exact to
    # machine precision at modest node counts
    gl = gauss_legendre(max(4 * n, 48), lo, hi)
    vander = npleg.legvander((gl.nodes - mid) / half, 2 * n - 1)
    # monic scaling: ptilde_j = half**j * j!**2 2**j / (2j)! * P_j(xi)
    monic = np.array([half**j * 2.0**j / math.comb(2 * j, j) for j in range(2 * n)])
    mom = (gl.weights * gl.nodes**beta) @ vander * monic

    alpha_c, beta_c = _modified_chebyshev(n, mom, ref_a, ref_b)
    if n == 1:
        nodes = np.array([alpha_c[0]])
        weights = np.array([beta_c[0]])
    else:
        vals, vecs = eigh_tridiagonal(alpha_c, np.sqrt(beta_c[1:]))
        nodes = vals
        weights = beta_c[0] * vecs[0, :] ** 2
    order = np.argsort(nodes)
    return QuadRule(
        nodes=nodes[order],
        weights=weights[order],
        interval=(lo, hi),
        weight_kind="power",
        beta=beta,
    )


def gauss_lobatto(n: int, lo: float, hi: float) -> QuadRule:
    """Gauss-Lobatto rule on [lo, hi] with both endpoints as nodes.

    Exact for polynomials of degree <= 2n - 3.  Interior nodes are the
    roots of the derivative of the Legendre polynomial of degree n - 1 and
    the reference weights are 2 / (n * (n - 1) * P_{n-1}(x)**2).
    """
    if n < 2:
        raise ValueError("gauss_lobatto needs n >= 2")
    if not lo < hi:
        raise ValueError(f"empty interval ({lo}, {hi})")
    if n == 2:
        t = np.array([-1.0, 1.0])
    else:
        cp = np.zeros(n)
        cp[n - 1] = 1.0
        interior = npleg.legroots(npleg.legder(cp))
        t = np.concatenate(([-1.0], np.sort(interior), [1.0]))
    pvals = npleg.legval(t, np.eye(n)[n - 1])
    w = 2.0 / (n * (n - 1) * pvals**2)
    half = 0.5 * (hi - lo)
    return QuadRule(
        nodes=lo + half * (t + 1.0),
        weights=half * w,
        interval=(lo, hi),
    )


def forcing_coefficient(kernel: KernelSpec) -> float:
    """Coefficient c(delta, alpha) = 2 * int_{-delta}^{delta} gamma(s) * (cos(2 pi s) - 1) ds.

    Evaluated by the truncated power series

        c = 4 c_gamma * sum_{n>=1} (-1)^n (2 pi)^(2n) delta^(2n+1-alpha)
                         / ((2n)! * (2n + 1 - alpha)),

    summed until a term falls below SERIES_RTOL of the partial sum.  The
    integrand behaves like s**(2-alpha) near the origin, so the integral is
    finite for every alpha < 3, and c -> -4 pi^2 as delta -> 0.
    """
    a, d = kernel.alpha, kernel.delta
    two_pi_sq = (2.0 * math.pi) ** 2
    total = 0.0
    # term for n, divided by the common prefactor 4 * c_gamma
    term = -two_pi_sq * d ** (3.0 - a) / (2.0 * (3.0 - a))
    for n in range(1, SERIES_MAX_TERMS + 1):
        total += term
        if abs(term) <= SERIES_RTOL * abs(total):
            break
        # advance n -> n + 1
        m = 2 * n
        term *= -two_pi_sq * d * d / ((m + 1) * (m + 2))
        term *= (m + 1.0 - a) / (m + 3.0 - a)
    return 4.0 * kernel.c_gamma * total
