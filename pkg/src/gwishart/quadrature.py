"""Deterministic adaptive quadrature.

All integrands are vectorised: they receive a 1D array of abscissae and
return values of the same length (or a leading batch axis followed by that
length for the nested multi-dimensional rule). Subdivision is global and
bisection-based with a 15-point Gauss-Kronrod rule on every interval.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from gwishart.errors import DimensionTooHigh, NonRealResult, ToleranceNotReached
from gwishart.special import log_student_t_density, student_t_quantile

_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
KRONROD_W = np.concatenate([_WGK[:-1], _WGK[::-1]])
GAUSS_W = np.zeros(15)
GAUSS_W[[1, 3, 5]] = _WG[:3]
GAUSS_W[7] = _WG[3]
GAUSS_W[[9, 11, 13]] = _WG[2::-1]

_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class QuadSpec:
    """Tolerances and endpoint information for adaptive integration.

    ``left_exponent`` / ``right_exponent`` declare algebraic endpoint
    behaviour t^a or (1 - t)^a with a in (-1, 0); a substitution removes it.
    With ``pass_complement`` the integrand is called as f(t, 1 - t), the
    complement computed without cancellation near t = 1.
    """

    rel_tol: float = 1e-10
    abs_tol: float = 1e-300
    max_subdivisions: int = 2000
    left_exponent: float | None = None
    right_exponent: float | None = None
    pass_complement: bool = False

    def __post_init__(self):
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be positive")
        if self.max_subdivisions < 1:
            raise ValueError("max_subdivisions must be at least 1")
        for a in (self.left_exponent, self.right_exponent):
            if a is not None and not a > -1:
                raise ValueError("singularity exponents must exceed -1")


def _rule(f, lo, hi):
    """Apply G7-K15 on each interval; returns (kronrod, error) with batch axes."""
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    x = (mid[:, None] + half[:, None] * NODES[None, :]).ravel()
    out = f(x)
    inner_err = None
    if isinstance(out, tuple):
        out, inner_err = out
    vals = np.asarray(out).reshape(out.shape[:-1] + (len(lo), 15))
    kron = (vals @ KRONROD_W) * half
    gauss = (vals @ GAUSS_W) * half
    mean = kron / np.where(half == 0, 1.0, 2.0 * half)
    resasc = (np.abs(vals - mean[..., None]) @ KRONROD_W) * half
    resabs = (np.abs(vals) @ KRONROD_W) * half
    diff = np.abs(kron - gauss)
    with np.errstate(divide="ignore", invalid="ignore"):
        scaled = np.where(
            resasc > 0,
            resasc * np.minimum(1.0, (200.0 * diff / np.where(resasc > 0, resasc, 1.0)) ** 1.5),
            diff,
        )
    err = np.maximum(scaled, 50.0 * _EPS * resabs)
    if inner_err is not None:
        ie = np.abs(np.asarray(inner_err)).reshape(vals.shape)
        err = err + (ie @ KRONROD_W) * np.abs(half)
    return kron, err


def _adaptive(f, a, b, rel_tol, abs_tol, max_sub, floor_fraction=0.0):
    """Global adaptive G7-K15 on [a, b] for a (possibly batched) integrand.

    Returns (value, error) with the batch shape of ``f``'s output. When
    ``floor_fraction`` is positive, components whose integral is tiny
    relative to the largest one in the batch are held to an absolute floor
    of ``floor_fraction * rel_tol * max|value|``.
    """
    lo = np.array([a], dtype=float)
    hi = np.array([b], dtype=float)
    kron, err = _rule(f, lo, hi)
    n_done = 1
    while True:
        total = kron.sum(axis=-1)
        total_err = err.sum(axis=-1)
        tol = np.maximum(abs_tol, rel_tol * np.abs(total))
        if floor_fraction > 0:
            tol = np.maximum(tol, floor_fraction * rel_tol * np.max(np.abs(total)))
        if np.all(total_err <= tol):
            return total, total_err
        # Per-interval badness: worst batch component, relative to its tolerance.
        share = err / np.asarray(tol)[..., None]
        badness = share.reshape(-1, len(lo)).max(axis=0)
        n_int = len(lo)
        split = badness > 1.0 / (2.0 * n_int)
        if not np.any(split):
            split[np.argmax(badness)] = True
        n_split = int(split.sum())
        if n_done + n_split > max_sub:
            raise ToleranceNotReached(
                f"adaptive quadrature exceeded {max_sub} subdivisions",
                value=total,
                error=total_err,
            )
        mid = 0.5 * (lo[split] + hi[split])
        new_lo = np.concatenate([lo[split], mid])
        new_hi = np.concatenate([mid, hi[split]])
        k_new, e_new = _rule(f, new_lo, new_hi)
        keep = ~split
        lo = np.concatenate([lo[keep], new_lo])
        hi = np.concatenate([hi[keep], new_hi])
        kron = np.concatenate([kron[..., keep], k_new], axis=-1)
        err = np.concatenate([err[..., keep], e_new], axis=-1)
        n_done += n_split


def _power_substitution(f, exponent, side):
    """Remove t^a (side='left') or (1-t)^a (side='right') via t = u^p.

    ``f`` takes (t, 1 - t).
    """
    p = 1.0 / (1.0 + exponent)

    if side == "left":
        def g(u):
            t = u**p
            return f(t, 1.0 - t) * (p * u ** (p - 1.0))
    else:
        def g(u):
            s = u**p
            return f(1.0 - s, s) * (p * u ** (p - 1.0))
    return g, 0.5**(1.0 / p)


def integrate_01(f, spec: QuadSpec = QuadSpec()):
    """Integrate f over (0, 1). Returns (value, error_estimate)."""
    if spec.pass_complement:
        f2 = f
    else:
        def f2(t, _s):
            return f(t)
    left = spec.left_exponent if spec.left_exponent is not None and spec.left_exponent < 0 else None
    right = spec.right_exponent if spec.right_exponent is not None and spec.right_exponent < 0 else None
    def plain(t):
        return f2(t, 1.0 - t)

    if left is None and right is None:
        return _scalar(_adaptive(plain, 0.0, 1.0, spec.rel_tol, spec.abs_tol, spec.max_subdivisions))
    pieces = []
    if left is not None:
        g, top = _power_substitution(f2, left, "left")
        pieces.append((g, 0.0, top))
    else:
        pieces.append((plain, 0.0, 0.5))
    if right is not None:
        g, top = _power_substitution(f2, right, "right")
        pieces.append((g, 0.0, top))
    else:
        def mirrored(u):
            # (0.5, 1) visited from the right end so 1 - t stays exact
            return f2(1.0 - u, u)
        pieces.append((mirrored, 0.0, 0.5))
    # Each half gets half the budget; tolerance is relative to the whole.
    vals, errs = [], []
    for g, lo, hi in pieces:
        v, e = _adaptive(g, lo, hi, spec.rel_tol / 2, spec.abs_tol, spec.max_subdivisions)
        vals.append(v)
        errs.append(e)
    return _scalar((vals[0] + vals[1], errs[0] + errs[1]))


def _scalar(pair):
    v, e = pair
    if np.ndim(v) == 0:
        v = v.item() if hasattr(v, "item") else v
        e = float(e)
    return v, e


def _folded_line(f, nu):
    """Map a line integrand onto (0, 1/2) through the Student-t quantile.

    x = Q_nu(u) / sqrt(nu) has density proportional to (1 + x^2)^{-(nu+1)/2};
    the two tails are folded together so abscissae never approach 1.
    """
    root = math.sqrt(nu)

    def g(u):
        q = student_t_quantile(nu, u)
        x = q / root
        jac = np.exp(-log_student_t_density(nu, q)) / root
        both = f(np.concatenate([x, -x]))
        inner_err = None
        if isinstance(both, tuple):
            both, inner_err = both
        m = len(u)
        val = (both[..., :m] + both[..., m:]) * jac
        if inner_err is None:
            return val
        return val, (np.abs(inner_err[..., :m]) + np.abs(inner_err[..., m:])) * jac

    return g


def integrate_line(f, spec: QuadSpec = QuadSpec(), nu: float = 1.0):
    """Integrate f over the real line. Returns (value, error_estimate).

    ``nu`` should match the integrand's decay |t|^{-(nu+1)} when known.
    """
    g = _folded_line(f, nu)
    return _scalar(_adaptive(g, 0.0, 0.5, spec.rel_tol, spec.abs_tol, spec.max_subdivisions))


def integrate_student(g, nu: float, spec: QuadSpec = QuadSpec()):
    """Integrate (1 + x^2)^{-(nu+1)/2} g(x) over the real line.

    After x = Q_nu(u) / sqrt(nu) the weight becomes the constant
    B(nu/2, 1/2), so only g is sampled. g may be complex.
    """
    root = math.sqrt(nu)

    def folded(u):
        x = student_t_quantile(nu, u) / root
        both = g(np.concatenate([x, -x]))
        m = len(u)
        return both[..., :m] + both[..., m:]

    value, error = _scalar(_adaptive(folded, 0.0, 0.5, spec.rel_tol, spec.abs_tol, spec.max_subdivisions))
    log_beta = math.lgamma(0.5 * nu) + math.lgamma(0.5) - math.lgamma(0.5 * (nu + 1))
    scale = math.exp(log_beta)
    return value * scale, error * scale


def integrate_sinh_trapezoid(f, spec: QuadSpec = QuadSpec(), scale: float = 1.0,
                             max_halvings: int = 12):
    """Integrate an analytic, algebraically decaying f over the real line.

    With t = scale * sinh(v) the tails decay exponentially in v, and the
    trapezoid rule converges geometrically as the step is halved. The
    error estimate is the change over the last halving.
    """
    def g(v):
        return f(scale * np.sinh(v)) * (scale * np.cosh(v))

    h = 0.5
    # Grow the window until its edges are negligible.
    reach = 4.0
    while True:
        edge_vals = np.abs(g(np.array([-reach, reach])))
        centre = abs(g(np.zeros(1))[0])
        if np.all(edge_vals <= 1e-3 * spec.rel_tol * centre) or reach >= 40.0:
            break
        reach += 2.0
    k = int(math.ceil(reach / h))
    nodes = h * np.arange(-k, k + 1)
    total = np.sum(g(nodes))
    estimate = h * total
    for _ in range(max_halvings):
        h *= 0.5
        total = total + np.sum(g(nodes + h))
        nodes = np.sort(np.concatenate([nodes, nodes + h]))
        new = h * total
        err = abs(new - estimate)
        estimate = new
        if err <= max(spec.abs_tol, spec.rel_tol * abs(estimate)):
            return _scalar((estimate, err))
    raise ToleranceNotReached("sinh trapezoid rule did not settle", value=estimate, error=err)


_CHUNK = 4096


def _level(f, k, j, outer, nus, rel_tol, max_sub):
    """Integrate over coordinate j given outer coordinates (each shape (B,))."""
    batch = outer[0].shape[0] if outer else 1

    if j == k - 1:
        def integrand(x):
            args = [o[:, None] for o in outer] + [x[None, :]]
            out = np.asarray(f(*args))
            return np.broadcast_to(out, (batch, x.shape[0])) if out.ndim < 2 else out
    else:
        def integrand(x):
            m = x.shape[0]
            rep = [np.repeat(o, m) for o in outer] + [np.tile(x, batch)]
            total = batch * m
            vals = np.empty(total, dtype=complex)
            errs = np.empty(total)
            for start in range(0, total, _CHUNK):
                stop = min(total, start + _CHUNK)
                v, e = _level(f, k, j + 1, [r[start:stop] for r in rep], nus, rel_tol / 4, max_sub)
                vals[start:stop] = v
                errs[start:stop] = e
            return vals.reshape(batch, m), errs.reshape(batch, m)

    g = _folded_line(integrand, nus[j])
    floor = 1e-3 if j > 0 else 0.0
    return _adaptive(g, 0.0, 0.5, rel_tol, 1e-300, max_sub, floor_fraction=floor)


def integrate_cube(f, k: int, spec: QuadSpec = QuadSpec(rel_tol=1e-8), nus=None):
    """Integrate a (complex) function of k <= 3 real variables over R^k.

    ``f(t_1, ..., t_k)`` receives broadcastable arrays. Each axis is
    compactified with its own Student-t map (``nus``). The imaginary part
    of the result must vanish within ten error estimates.
    """
    if k not in (1, 2, 3):
        raise DimensionTooHigh(f"integrate_cube supports up to 3 dimensions, got {k}")
    nus = tuple(nus) if nus is not None else (1.0,) * k
    value, error = _level(f, k, 0, [], nus, spec.rel_tol, spec.max_subdivisions)
    value = complex(np.ravel(value)[0])
    error = float(np.ravel(error)[0])
    if abs(value.imag) > 10.0 * error + 1e-14 * abs(value):
        raise NonRealResult(f"imaginary part {value.imag:.3g} exceeds 10x error {error:.3g}")
    return value, error


def with_tolerance(spec: QuadSpec, rel_tol: float) -> QuadSpec:
    return replace(spec, rel_tol=rel_tol)
