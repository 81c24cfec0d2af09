"""Special-function kernels.

Everything gamma-heavy is returned in log space. Gauss hypergeometric values
and the incomplete gamma/beta inverses are delegated to ``scipy.special``;
the generalized hypergeometric series at unit argument and the Tricomi
function with first parameter one half are computed here.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import special as sc

from gwishart.errors import ConvergenceError, DomainError

LOG_PI = math.log(math.pi)
SQRT_PI = math.sqrt(math.pi)


def log_gamma(a):
    """Natural log of the gamma function for positive arguments."""
    arr = np.asarray(a, dtype=float)
    if np.any(~(arr > 0)):
        raise DomainError(f"log_gamma needs a > 0, got {a!r}")
    out = sc.gammaln(arr)
    return float(out) if out.ndim == 0 else out


def log_multigamma(k: int, a: float) -> float:
    """Log of the multivariate gamma function Gamma_k(a).

    Gamma_k(a) = pi^{k(k-1)/4} prod_{mu=1..k} Gamma(a + (1 - mu)/2).
    ``k = 0`` gives 0, which is what empty separators contribute.
    """
    if k < 0 or int(k) != k:
        raise DomainError(f"k must be a non-negative integer, got {k!r}")
    k = int(k)
    if k == 0:
        return 0.0
    if not a > (k - 1) / 2:
        raise DomainError(f"log_multigamma needs a > {(k - 1) / 2}, got {a!r}")
    shifts = a - 0.5 * np.arange(k)
    return float(0.25 * k * (k - 1) * LOG_PI + np.sum(sc.gammaln(shifts)))


def hyp2f1(a: float, b: float, c: float, x):
    """Gauss hypergeometric function 2F1(a, b; c; x) for x in [0, 1)."""
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0) or np.any(arr >= 1):
        raise DomainError("hyp2f1 is only evaluated on [0, 1)")
    if c <= 0 and float(c).is_integer():
        raise DomainError(f"c = {c} is a non-positive integer")
    out = sc.hyp2f1(a, b, c, arr)
    if not np.all(np.isfinite(out)):
        raise ConvergenceError(f"2F1({a}, {b}; {c}; x) did not evaluate to a finite value")
    return float(out) if out.ndim == 0 else out


def hyp2f1_negative(a: float, b: float, c: float, z):
    """2F1(a, b; c; z) for z <= 0 through the Pfaff transformation.

    2F1(a, b; c; z) = (1 - z)^{-a} 2F1(a, c - b; c; z / (z - 1)).
    """
    z = np.asarray(z, dtype=float)
    if np.any(z > 0):
        raise DomainError("hyp2f1_negative needs z <= 0")
    y = z / (z - 1.0)
    return (1.0 - z) ** (-a) * hyp2f1(a, c - b, c, y)


def hyp3f2_unit(a1, a2, a3, b1, b2, tol: float = 1e-13) -> float:
    """3F2(a1, a2, a3; b1, b2; 1).

    The series converges when s = b1 + b2 - a1 - a2 - a3 > 0, but only
    algebraically (terms ~ k^{-1-s}). Partial sums at K = 2^j are pushed
    through Richardson extrapolation, using that the tail has an expansion
    in K^{-s}, K^{-s-1}, ...
    """
    s = b1 + b2 - a1 - a2 - a3
    if not s > 0:
        raise DomainError(f"3F2 at unity diverges for parameter excess {s}")
    for b in (b1, b2):
        if b <= 0 and float(b).is_integer():
            raise DomainError(f"lower parameter {b} is a non-positive integer")

    n_terms = 2**16
    k = np.arange(n_terms - 1, dtype=float)
    ratios = (a1 + k) * (a2 + k) * (a3 + k) / ((b1 + k) * (b2 + k) * (k + 1.0))
    terms = np.empty(n_terms)
    terms[0] = 1.0
    np.cumprod(ratios, out=terms[1:])
    partial = np.cumsum(terms)

    # Direct summation is enough when the tail bound K * |t_K| / s is tiny.
    for K in (64, 256, 1024, 4096):
        tail = abs(terms[K]) * K / s
        if tail < tol * abs(partial[K]) and abs(terms[K]) <= abs(terms[K - 1]):
            return float(partial[K])

    sizes = 2 ** np.arange(8, 17)
    table = [partial[sizes - 1].astype(float)]
    for m in range(1, len(sizes)):
        prev = table[-1]
        factor = 2.0 ** (s + m - 1)
        table.append((factor * prev[1:] - prev[:-1]) / (factor - 1.0))
    best = table[-1][-1]
    err = abs(table[-1][-1] - table[-2][-1])
    if not np.isfinite(best) or err > max(1e-9, 1e3 * tol) * abs(best):
        raise ConvergenceError(
            f"3F2({a1}, {a2}, {a3}; {b1}, {b2}; 1) extrapolation error {err:.3g}"
        )
    return float(best)


# Exp-sinh nodes on (0, inf): u = exp(pi/2 sinh(tau)).
_ES_H = 1.0 / 64.0
_ES_TAU = np.arange(-4.5, 4.0 + _ES_H / 2, _ES_H)
_ES_U = np.exp(0.5 * np.pi * np.sinh(_ES_TAU))
_ES_W = _ES_H * 0.5 * np.pi * np.cosh(_ES_TAU) * _ES_U
_U_ASYMPTOTIC_X = 60.0


def _tricomi_asymptotic(b: float, x: np.ndarray) -> np.ndarray:
    # U(1/2, b, x) ~ x^{-1/2} sum_n (1/2)_n (3/2 - b)_n / n! (-1/x)^n
    total = np.ones_like(x)
    term = np.ones_like(x)
    for n in range(60):
        nxt = term * (0.5 + n) * (1.5 - b + n) / (n + 1.0) * (-1.0 / x)
        if np.all(np.abs(nxt) >= np.abs(term)) and n > 0:
            break
        term = nxt
        total = total + term
        if np.all(np.abs(term) < 1e-17 * np.abs(total)):
            break
    return total / np.sqrt(x)


def tricomi_u_half(b: float, x, with_error: bool = False):
    """Tricomi confluent hypergeometric function U(1/2, b, x), x > 0.

    Uses sqrt(pi) U(1/2, b, x) = 2 int_0^inf exp(-x u^2) (1 + u^2)^{b - 3/2} du,
    integrated with an exp-sinh rule; large x switches to the asymptotic series.
    With ``with_error`` the estimated absolute error (half-step comparison) is
    returned as well.
    """
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(~(xs > 0)):
        raise DomainError("tricomi_u_half needs x > 0")
    value = np.empty_like(xs)
    error = np.zeros_like(xs)
    big = xs > _U_ASYMPTOTIC_X
    if np.any(big):
        value[big] = _tricomi_asymptotic(b, xs[big])
        error[big] = 1e-15 * np.abs(value[big])
    small = ~big
    if np.any(small):
        xv = xs[small][:, None]
        u2 = _ES_U[None, :] ** 2
        integrand = np.exp(-xv * u2 + (b - 1.5) * np.log1p(u2))
        fine = integrand @ _ES_W
        coarse = integrand[:, ::2] @ (2.0 * _ES_W[::2])
        value[small] = 2.0 * fine / SQRT_PI
        error[small] = 2.0 * np.abs(fine - coarse) / SQRT_PI
    if np.ndim(x) == 0:
        value, error = float(value[0]), float(error[0])
    return (value, error) if with_error else value


def chi2_quantile(nu: float, p):
    """Inverse CDF of the chi-squared distribution with nu degrees of freedom."""
    p = np.asarray(p, dtype=float)
    if not nu > 0 or np.any(~((p > 0) & (p < 1))):
        raise DomainError("chi2_quantile needs nu > 0 and p in (0, 1)")
    half = 0.5 * nu
    upper = p > 0.5
    out = np.where(
        upper,
        2.0 * sc.gammainccinv(half, np.where(upper, 1.0 - p, 0.5)),
        2.0 * sc.gammaincinv(half, np.where(upper, 0.5, p)),
    )
    return float(out) if out.ndim == 0 else out


def chi2_cdf(nu: float, x):
    return sc.gammainc(0.5 * nu, 0.5 * np.asarray(x, dtype=float))


def student_t_quantile(nu: float, p):
    """Inverse CDF of Student's t distribution with nu degrees of freedom."""
    p = np.asarray(p, dtype=float)
    if not nu > 0 or np.any(~((p > 0) & (p < 1))):
        raise DomainError("student_t_quantile needs nu > 0 and p in (0, 1)")
    # Evaluate on the lower half and reflect, so p near 1 keeps full precision.
    lower = np.minimum(p, 1.0 - p)
    q = sc.stdtrit(nu, lower)
    out = np.where(p > 0.5, -q, q)
    out = np.where(p == 0.5, 0.0, out)
    return float(out) if out.ndim == 0 else out


def student_t_cdf(nu: float, t):
    return sc.stdtr(nu, np.asarray(t, dtype=float))


def log_student_t_density(nu: float, t):
    """Log density of Student's t with nu degrees of freedom."""
    t = np.asarray(t, dtype=float)
    const = sc.gammaln(0.5 * (nu + 1)) - sc.gammaln(0.5 * nu) - 0.5 * math.log(nu * math.pi)
    return const - 0.5 * (nu + 1) * np.log1p(t * t / nu)
