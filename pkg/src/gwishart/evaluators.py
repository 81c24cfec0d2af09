"""Evaluators for log I_G(beta, D) and the dispatcher that picks among them.

Every public evaluator returns a :class:`LogValue`. Closed forms are exact up
to rounding; one-dimensional reductions and low-dimensional quadrature carry
the quadrature error estimate, converted to an absolute error on the log.
"""

from __future__ import annotations

import itertools
import math
import time
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import optimize
from scipy.special import logsumexp

from gwishart import graph as gr
from gwishart.errors import (
    CholeskyFailure,
    DimensionTooHigh,
    DomainError,
    Intractable,
    NonRealResult,
)
from gwishart.graph import ChordalCompletion, CliqueSequence, Graph
from gwishart.montecarlo import McConfig, mc_log_constant
from gwishart.quadrature import QuadSpec, integrate_01, integrate_cube, integrate_sinh_trapezoid, integrate_student
from gwishart.special import (
    LOG_PI,
    chi2_quantile,
    hyp2f1,
    hyp3f2_unit,
    log_gamma,
    log_multigamma,
    tricomi_u_half,
)

LOG2 = math.log(2.0)
CLOSED_ERR = 1e-13


@dataclass(frozen=True)
class WishartSpec:
    """beta in I_G(beta, D) and the scale matrix D (None means identity)."""

    beta: float
    scale: np.ndarray | None = None

    def __post_init__(self):
        if not self.beta > -1:
            raise DomainError(f"beta must exceed -1, got {self.beta}")
        if self.scale is not None:
            d = np.array(self.scale, dtype=float)
            if d.ndim != 2 or d.shape[0] != d.shape[1]:
                raise DomainError("scale must be a square matrix")
            if not np.allclose(d, d.T, rtol=0, atol=1e-12 * max(1.0, np.abs(d).max())):
                raise DomainError("scale must be symmetric")
            try:
                np.linalg.cholesky(d)
            except np.linalg.LinAlgError as exc:
                raise CholeskyFailure("scale matrix is not positive definite") from exc
            object.__setattr__(self, "scale", 0.5 * (d + d.T))

    @classmethod
    def from_delta(cls, delta: float, scale=None) -> "WishartSpec":
        if not delta > 0:
            raise DomainError(f"delta must be positive, got {delta}")
        return cls((delta - 2.0) / 2.0, scale)

    @property
    def delta(self) -> float:
        return 2.0 * self.beta + 2.0

    def matrix(self, n: int) -> np.ndarray:
        if self.scale is None:
            return np.eye(n)
        if self.scale.shape != (n, n):
            raise DomainError(f"scale is {self.scale.shape}, graph has {n} vertices")
        return self.scale

    def is_identity(self) -> bool:
        return self.scale is None or np.array_equal(self.scale, np.eye(len(self.scale)))

    def is_diagonal(self) -> bool:
        return self.scale is None or np.count_nonzero(self.scale - np.diag(np.diag(self.scale))) == 0

    def restrict(self, vertices) -> "WishartSpec":
        if self.scale is None:
            return self
        idx = list(vertices)
        return WishartSpec(self.beta, self.scale[np.ix_(idx, idx)])


@dataclass(frozen=True)
class LogValue:
    log_value: float
    method: str
    err_log: float = 0.0

    def __post_init__(self):
        if not self.err_log >= 0:
            raise ValueError("err_log must be non-negative")


def log_c_from_i(log_i: float, g: Graph, delta: float) -> float:
    """log C_G(delta, D) from log I_G((delta - 2)/2, D)."""
    return (g.n * delta / 2.0 + g.num_edges) * LOG2 + log_i


def log_i_from_c(log_c: float, g: Graph, delta: float) -> float:
    return log_c - (g.n * delta / 2.0 + g.num_edges) * LOG2


def _rel_to_log_err(value, error) -> float:
    value = abs(value)
    if value == 0 or not np.isfinite(value):
        return float("inf")
    return float(error / value)


# ---------------------------------------------------------------------------
# Chordal building blocks


def _log_det(d: np.ndarray, idx) -> float:
    idx = sorted(idx)
    if not idx:
        return 0.0
    try:
        lower = np.linalg.cholesky(d[np.ix_(idx, idx)])
    except np.linalg.LinAlgError as exc:
        raise CholeskyFailure(f"D restricted to {idx} is not positive definite") from exc
    return 2.0 * float(np.sum(np.log(np.diag(lower))))


def _block_term(size: int, beta: float) -> float:
    return log_multigamma(size, beta + (size + 1) / 2.0)


def log_chordal_identity(cs: CliqueSequence, beta: float) -> float:
    """log I_{G*}(beta, I) for a chordal graph with the given clique sequence."""
    return (sum(_block_term(len(c), beta) for c in cs.cliques)
            - sum(_block_term(len(s), beta) for s in cs.separators))


def eval_chordal(cs: CliqueSequence, spec: WishartSpec, n: int | None = None) -> LogValue:
    """Clique/separator product formula, any positive-definite D."""
    beta = spec.beta
    if n is None:
        n = len(set().union(*cs.cliques)) if cs.cliques else 0
    total = log_chordal_identity(cs, beta)
    if not spec.is_identity():
        d = spec.matrix(n)
        for sign, blocks in ((1, cs.cliques), (-1, cs.separators)):
            for blk in blocks:
                total -= sign * (beta + (len(blk) + 1) / 2.0) * _log_det(d, blk)
    return LogValue(total, "chordal", CLOSED_ERR * max(1.0, abs(total)))


def _chordal_of(cc: ChordalCompletion, beta: float) -> float:
    return log_chordal_identity(gr.clique_sequence(cc.completed), beta)


# ---------------------------------------------------------------------------
# Closed forms


def _one_fill_factor(w: int, beta: float) -> float:
    return -0.5 * LOG_PI + log_gamma(beta + (w + 2) / 2.0) - log_gamma(beta + (w + 3) / 2.0)


def eval_fill1_identity(cc: ChordalCompletion, pattern: gr.FillIn1, beta: float) -> LogValue:
    total = _chordal_of(cc, beta) + _one_fill_factor(pattern.w, beta)
    return LogValue(total, "fill1-identity", CLOSED_ERR * max(1.0, abs(total)))


def eval_disjoint_fills(cc: ChordalCompletion, pattern: gr.DisjointFills, beta: float) -> LogValue:
    total = _chordal_of(cc, beta) + sum(_one_fill_factor(w, beta) for _, w in pattern.w)
    return LogValue(total, "disjoint-fills", CLOSED_ERR * max(1.0, abs(total)))


def eval_kpartite(sizes, beta: float) -> LogValue:
    """Complete multipartite graph with the given part sizes, D = I."""
    sizes = [int(s) for s in sizes]
    n = sum(sizes)
    top = beta + (n + 1) / 2.0
    total = log_multigamma(n, top)
    for s in sizes:
        total += s * log_gamma(beta + (n - s) / 2.0 + 1.0) - log_multigamma(s, top)
    return LogValue(total, "kpartite", CLOSED_ERR * max(1.0, abs(total)))


def eval_turan(k: int, beta: float) -> LogValue:
    """Complete graph on 2k vertices minus a perfect matching, D = I."""
    n = 2 * k
    total = (-0.5 * k * LOG_PI + log_multigamma(n, beta + (n + 1) / 2.0)
             + k * (log_gamma(beta + k) - log_gamma(beta + (n + 1) / 2.0)))
    return LogValue(total, "turan", CLOSED_ERR * max(1.0, abs(total)))


def eval_fill2_triangle(cc: ChordalCompletion, pattern: gr.TwoFillsTriangle, beta: float) -> LogValue:
    w, w1, w2 = pattern.w, pattern.w1, pattern.w2
    total = (_chordal_of(cc, beta) - LOG_PI
             + log_gamma(beta + (w1 + 3) / 2.0) + log_gamma(beta + (w2 + 3) / 2.0)
             - log_gamma(beta + (w1 + 4) / 2.0) - log_gamma(beta + (w2 + 4) / 2.0)
             + math.log(hyp3f2_unit(beta + (w + 4) / 2.0, 0.5, 0.5,
                                    beta + (w1 + 4) / 2.0, beta + (w2 + 4) / 2.0)))
    return LogValue(total, "fill2-3f2", 1e-11 * max(1.0, abs(total)))


def log_five_cycle(beta: float) -> float:
    """Gamma-only value of the five-cycle constant at D = I."""
    return (LOG_PI + log_multigamma(3, beta + 2.0) + 3 * log_gamma(beta + 2.0)
            + log_gamma((beta + 4) / 2.0) + log_gamma((beta + 2) / 2.0)
            - log_gamma(beta + 3.0) - 2 * log_gamma((beta + 3) / 2.0))


# ---------------------------------------------------------------------------
# One-dimensional reductions


def _radial_u_integral(gamma: float, rs, tol: float):
    """int_0^1 prod_mu U(1/2, 3/2 - r_mu, G_gamma^{-1}(u)) du, G_gamma the Gamma(gamma) CDF."""
    rs = [float(r) for r in rs]
    nu = 2.0 * gamma

    def f(u):
        s = 0.5 * chi2_quantile(nu, u)
        out = np.ones_like(u)
        for r in rs:
            out = out * tricomi_u_half(1.5 - r, s)
        return out

    # Near u = 0, U(1/2, b, s) ~ s^{1-b} for b > 1 and s ~ u^{1/gamma}.
    lead = sum(min(0.0, r - 0.5) for r in rs) / gamma
    spec = QuadSpec(rel_tol=tol, left_exponent=lead if -1 < lead < 0 else None)
    return integrate_01(f, spec)


def eval_gmk(pattern: gr.Gmk, beta: float, tol: float = 1e-10) -> LogValue:
    m, ks = pattern.m, pattern.ks
    ell = len(ks)
    if ell < 3:
        raise DomainError("the G(m; k) route needs at least three leaves")
    value, err = _radial_u_integral(beta + (m + 1) / 2.0, [k / 2.0 for k in ks], tol)
    total = ((sum(ks) - ell / 2.0) * LOG_PI + log_multigamma(m, beta + (m + 1) / 2.0)
             + sum(log_multigamma(k, beta + (k + 3) / 2.0) for k in ks) + math.log(value))
    return LogValue(total, "gmk-1d", _rel_to_log_err(value, err))


def eval_c6_complement(beta: float, tol: float = 1e-10) -> LogValue:
    c = beta + 3.0

    def f(t, s):
        return t ** (beta + 2.0) * hyp2f1(0.5, 0.5, c, t) ** 2 / np.sqrt(s)

    value, err = integrate_01(f, QuadSpec(rel_tol=tol, right_exponent=-0.5, pass_complement=True))
    total = (LOG_PI + log_multigamma(4, beta + 2.5) + 4 * log_gamma(beta + 2.5)
             - 2 * log_gamma(beta + 3.0) + math.log(value))
    return LogValue(total, "c6comp-1d", _rel_to_log_err(value, err))


def _log_beta_half(x: float) -> float:
    """log B(x, 1/2)."""
    return log_gamma(x) + 0.5 * LOG_PI - log_gamma(x + 0.5)


def _star_integral(centre_single: float, leaves, tol: float):
    """Integral over t_c and its leaves t_j of
    (1 + t_c^2)^{-a_c} prod_j (1 + t_j^2)^{-a_j} (1 + t_c^2 + t_j^2)^{-b_j}.

    Each leaf integrates to a Beta factor times a 2F1 in u = t_c^2/(1+t_c^2),
    which leaves a single integral over u. Returns (log value, relative error).
    """
    p = centre_single + sum(b for _, b in leaves)
    log_pref = sum(_log_beta_half(a + b - 0.5) for a, b in leaves)

    def f(u, v):
        out = u ** -0.5 * v ** (p - 1.5)
        for a, b in leaves:
            out = out * hyp2f1(b, 0.5, a + b, u)
        return out

    right = p - 1.5 + sum(min(0.0, a - 0.5) for a, _ in leaves)
    if not right > -1:
        raise DomainError("star reduction diverges at u = 1")
    spec = QuadSpec(rel_tol=tol, left_exponent=-0.5, right_exponent=right if right < 0 else None,
                    pass_complement=True)
    value, err = integrate_01(f, spec)
    return log_pref + math.log(value), _rel_to_log_err(value, err)


# ---------------------------------------------------------------------------
# Starry fill-ins


def _sinh_rule(h: float, tau_max: float = 5.5):
    """Half-line sinh-sinh nodes for even integrands over R, in log space."""
    tau = np.arange(0.0, tau_max + h / 2, h)
    x = 0.5 * np.pi * np.sinh(tau)
    with np.errstate(divide="ignore"):
        log_t = np.where(x > 20, x - LOG2 + np.log1p(-np.exp(-2 * x)), np.log(np.sinh(np.minimum(x, 20))))
    log_w = (math.log(h) + np.log(0.5 * np.pi * np.cosh(tau)) + x + np.log1p(np.exp(-2 * x)) - LOG2)
    log_w[1:] += LOG2
    return log_t, log_w


def _tree_integral_at(h, n_vars, singles, pairs):
    log_t, log_w = _sinh_rule(h)
    l1 = np.logaddexp(0.0, 2 * log_t)
    two = 2 * log_t
    l2 = np.logaddexp(0.0, np.logaddexp(two[:, None], two[None, :]))
    nbrs = {i: [] for i in range(n_vars)}
    for (i, j), b in pairs.items():
        nbrs[i].append((j, b))
        nbrs[j].append((i, b))

    def node_log(v, parent):
        acc = log_w - singles.get(v, 0.0) * l1
        for ch, b in nbrs[v]:
            if ch != parent:
                acc = acc + message(ch, v, b)
        return acc

    def message(v, parent, b):
        # log of int over t_v, as a function of the parent's node index
        acc = node_log(v, parent)
        return logsumexp(acc[None, :] - b * l2, axis=1)

    root = node_log(0, None)
    tail = float(root[-1] - logsumexp(root))
    return float(logsumexp(root)), tail


def _tree_integral(n_vars, singles, pairs):
    """Integral over R^n of a tree-structured product of (1 + t_i^2 [+ t_j^2]) powers.

    Returns (log value, absolute error estimate of the log).
    """
    fine, tail = _tree_integral_at(1.0 / 32, n_vars, singles, pairs)
    coarse, _ = _tree_integral_at(1.0 / 16, n_vars, singles, pairs)
    return fine, abs(fine - coarse) + math.exp(tail)


def _components(index_set, terms):
    parent = {i: i for i in index_set}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for J in terms:
        js = sorted(J)
        for a in js[1:]:
            parent[find(a)] = find(js[0])
    groups = {}
    for i in index_set:
        groups.setdefault(find(i), []).append(i)
    return [sorted(g) for g in groups.values()]


_COST = {"closed": 0, "1d": 1, "chain": 2, "cube": 3}


def _starry_component(comp, terms, tol):
    """Evaluate one inseparable block of the special-form integrand.

    terms: {J: gamma} with J subsets of comp. Returns (log value, err, cost label).
    """
    d = len(comp)
    local = {i: k for k, i in enumerate(comp)}
    singles = {}
    multi = {}
    for J, g in terms.items():
        if len(J) == 1:
            (i,) = J
            singles[local[i]] = singles.get(local[i], 0.0) + g
        else:
            multi[frozenset(local[i] for i in J)] = g

    if d == 1:
        g = singles.get(0, 0.0)
        if not g > 0.5:
            raise DomainError("one-dimensional factor is not integrable")
        return _log_beta_half(g - 0.5), CLOSED_ERR, "closed"

    full = frozenset(range(d))
    if set(multi) == {full}:
        g = multi[full]
        rs = [singles.get(i, 0.0) for i in range(d)]
        nonzero = [r for r in rs if r != 0.0]
        if not nonzero:
            if not g > d / 2.0:
                raise DomainError("radial factor is not integrable")
            return 0.5 * d * LOG_PI + log_gamma(g - d / 2.0) - log_gamma(g), CLOSED_ERR, "closed"
        if d == 2:
            r1, r2 = rs
            val = (_log_beta_half(g + r1 - 0.5) + _log_beta_half(g + r2 - 0.5)
                   + math.log(hyp3f2_unit(g, 0.5, 0.5, g + r1, g + r2)))
            return val, 1e-11, "closed"
        d0 = d - len(nonzero)
        g_eff = g - d0 / 2.0
        value, err = _radial_u_integral(g_eff, nonzero, tol)
        val = 0.5 * d * LOG_PI + log_gamma(g_eff) - log_gamma(g) + math.log(value)
        return val, _rel_to_log_err(value, err), "1d"

    if all(len(J) == 2 for J in multi):
        pairs = {tuple(sorted(J)): g for J, g in multi.items()}
        if len(pairs) == d - 1:  # connected with d - 1 edges: a tree
            degree = [0] * d
            for i, j in pairs:
                degree[i] += 1
                degree[j] += 1
            centre = max(range(d), key=lambda v: degree[v])
            if degree[centre] == d - 1:
                leaves = []
                for (i, j), b in sorted(pairs.items()):
                    leaf = j if i == centre else i
                    leaves.append((singles.get(leaf, 0.0), b))
                val, err = _star_integral(singles.get(centre, 0.0), leaves, tol)
                return val, err, "1d"
            val, err = _tree_integral(d, singles, pairs)
            return val, err, "chain"

    if d <= 3:
        all_terms = [(frozenset([i]), g) for i, g in singles.items()] + list(multi.items())

        def f(*ts):
            acc = 0.0
            for J, g in all_terms:
                s = 1.0
                for i in J:
                    s = s + ts[i] ** 2
                acc = acc - g * np.log(s)
            return np.exp(acc)

        value, err = integrate_cube(f, d, QuadSpec(rel_tol=max(tol, 1e-8)))
        return math.log(value.real), _rel_to_log_err(value.real, err), "cube"

    raise DimensionTooHigh(f"inseparable star group with {d} fill edges")


def starry_terms(cc: ChordalCompletion, beta: float):
    """{J: gamma_J} for the special-form integrand, or None if not starry."""
    ex = gr.fill_exponents(cc)
    if ex is None:
        return None
    return {J: a * beta + c for J, (a, c) in ex.items()}


def eval_starry(cc: ChordalCompletion, beta: float, tol: float = 1e-10) -> LogValue:
    """Integrand grouped by star families, split into independent blocks."""
    terms = starry_terms(cc, beta)
    if terms is None:
        raise DomainError("completion does not have starry fill-ins")
    total = _chordal_of(cc, beta) - cc.tau * LOG_PI
    err = CLOSED_ERR * max(1.0, abs(total))
    worst = "closed"
    for comp in _components(range(cc.tau), terms):
        cset = set(comp)
        sub = {J: g for J, g in terms.items() if J <= cset}
        val, e, label = _starry_component(comp, sub, tol)
        total += val
        err += e
        if _COST[label] > _COST[worst]:
            worst = label
    return LogValue(total, f"starry-{worst}", err)


def eval_triangle_fills(cc: ChordalCompletion, beta: float, tol: float = 1e-10) -> LogValue:
    """Three fill edges forming a triangle, reduced to one integral."""
    tri = gr.triangle_gammas(cc)
    if tri is None:
        raise DomainError("fill edges do not form a triangle with the required block structure")
    gamma, gs = tri
    mid = max(range(3), key=lambda i: (gs[i], -i))
    g2 = gs[mid]
    g1, g3 = [gs[i] for i in range(3) if i != mid]
    bt = beta + gamma / 2.0 - 2.0

    h1 = _triangle_h1(g1, g2, g3)
    h2 = _triangle_h2(g1, g2, g3)
    log_h1 = log_chordal_identity(gr.clique_sequence(h1), bt)
    log_h2 = log_chordal_identity(gr.clique_sequence(h2), bt)

    big_a = bt + (g2 + 3) / 2.0
    a1, a3 = g1 / 2.0, g3 / 2.0
    log_i_h = (log_h2 - (g2 + 2) * LOG_PI
               + _log_beta_half(a1 + big_a - 0.5) + _log_beta_half(a3 + big_a - 0.5))
    err = 0.0
    if g2 > 0:
        def f(u, v):
            return (u ** (g2 / 2.0 - 1.0) * v ** (bt + 1.0)
                    * hyp2f1(big_a, 0.5, a1 + big_a, u) * hyp2f1(big_a, 0.5, a3 + big_a, u))

        left = g2 / 2.0 - 1.0
        right = bt + 1.0 + min(0.0, a1 - 0.5) + min(0.0, a3 - 0.5)
        spec = QuadSpec(rel_tol=tol, left_exponent=left if left < 0 else None,
                        right_exponent=right if right < 0 else None, pass_complement=True)
        value, qerr = integrate_01(f, spec)
        log_i_h += (LOG2 + 0.5 * g2 * LOG_PI - log_gamma(g2 / 2.0)) - LOG2 + math.log(value)
        err = _rel_to_log_err(value, qerr)
    total = _chordal_of(cc, beta) + log_i_h - log_h1
    return LogValue(total, "triangle-1d", err + CLOSED_ERR * max(1.0, abs(total)))


def _triangle_blocks(g1, g2, g3):
    v1, v2, v3 = 0, 1, 2
    nxt = 3
    blocks = []
    for size, (a, b) in ((g1, (v1, v2)), (g2, (v2, v3)), (g3, (v3, v1))):
        extra = list(range(nxt, nxt + size))
        nxt += size
        blocks.append((extra, a, b))
    return nxt, blocks


def _triangle_h1(g1, g2, g3) -> Graph:
    n, blocks = _triangle_blocks(g1, g2, g3)
    edges = {(0, 1), (1, 2), (0, 2)}
    for extra, a, b in blocks:
        edges |= set(itertools.combinations(sorted(extra + [a, b]), 2))
    return Graph.from_edges(n, edges)


def _triangle_h2(g1, g2, g3) -> Graph:
    n, blocks = _triangle_blocks(g1, g2, g3)
    edges = set()
    for extra, a, b in blocks:
        edges |= set(itertools.combinations(sorted(extra + [a, b]), 2))
    edges -= {(0, 1), (1, 2), (0, 2)}
    w = blocks[1][0]
    edges |= {(0, 1), (0, 2)} | {(0, x) for x in w}
    return Graph.from_edges(n, edges)


def eval_gear(pattern: gr.Gear, g: Graph, beta: float, tol: float = 1e-10) -> LogValue:
    """Gear graph: chordal terms plus the 2m-cycle at beta + 1/2."""
    cc = gr.gear_completion(g, pattern)
    hub = pattern.hub
    rest = [v for v in range(g.n) if v != hub]
    h_star, _ = cc.completed.induced(rest)
    cycle = gr.cycle(2 * pattern.m)
    cyc_cc, _ = gr.classify_graph(cycle)
    cyc = eval_starry(cyc_cc, beta + 0.5, tol)
    total = (_chordal_of(cc, beta)
             - log_chordal_identity(gr.clique_sequence(h_star), beta + 0.5)
             + cyc.log_value)
    return LogValue(total, "gear", cyc.err_log + CLOSED_ERR * max(1.0, abs(total)))


# ---------------------------------------------------------------------------
# Low-dimensional quadrature of the transformed integrand


def _block_polynomials(cc: ChordalCompletion, d: np.ndarray, blocks):
    """Coefficient tensors of det((D + iT)[B]) in the fill variables.

    The determinant has degree at most two in each t_e, so values on
    {-1, 0, 1}^tau determine it.
    """
    tau = cc.tau
    grid = [-1.0, 0.0, 1.0]
    vinv = np.linalg.inv(np.array([[1.0, x, x * x] for x in grid]))
    polys = []
    for blk in blocks:
        idx = sorted(blk)
        pos = {v: k for k, v in enumerate(idx)}
        vals = np.empty((3,) * tau, dtype=complex)
        for point in itertools.product(range(3), repeat=tau):
            m = d[np.ix_(idx, idx)].astype(complex)
            for e, (a, b) in enumerate(cc.fill_edges):
                if a in pos and b in pos:
                    m[pos[a], pos[b]] += 1j * grid[point[e]]
                    m[pos[b], pos[a]] += 1j * grid[point[e]]
            vals[point] = np.linalg.det(m)
        coef = vals
        for axis in range(tau):
            coef = np.moveaxis(np.tensordot(vinv, coef, axes=([1], [axis])), 0, axis)
        polys.append(coef)
    return polys


def _poly_eval(coef, ts):
    """Evaluate a tensor of coefficients (degree <= 2 per axis) at broadcast points."""
    out = 0.0
    for k in itertools.product(range(3), repeat=coef.ndim):
        c = coef[k]
        if c == 0:
            continue
        term = c
        for axis, power in enumerate(k):
            if power:
                term = term * ts[axis] ** power
        out = out + term
    return out


def eval_fourier_generic(cc: ChordalCompletion, spec: WishartSpec, tol: float = 1e-8) -> LogValue:
    """Direct tau-dimensional quadrature of the transformed integrand (tau <= 3)."""
    tau = cc.tau
    if tau == 0:
        return eval_chordal(gr.clique_sequence(cc.completed), spec, cc.base.n)
    if tau > 3:
        raise DimensionTooHigh(f"direct quadrature supports up to 3 fill edges, got {tau}")
    beta = spec.beta
    d = spec.matrix(cc.base.n)
    cs = gr.clique_sequence(cc.completed)
    blocks = list(cs.cliques) + list(cs.separators)
    signs = [1] * len(cs.cliques) + [-1] * len(cs.separators)
    powers = [-s * (beta + (len(b) + 1) / 2.0) for s, b in zip(signs, blocks)]
    polys = _block_polynomials(cc, d, blocks)
    keep = [(p, c) for p, c in zip(powers, polys) if np.count_nonzero(np.abs(c) > 0) > 0]

    def f(*ts):
        acc = 0.0
        for power, coef in keep:
            acc = acc + power * np.log(_poly_eval(coef, ts))
        return np.exp(acc)

    # Cauchy maps on every axis: with nested integrals the inner scale grows
    # with the outer variables, and lighter-tailed maps then concentrate
    # the mass at the endpoints.
    value, err = integrate_cube(f, tau, QuadSpec(rel_tol=tol))
    total = log_chordal_identity(cs, beta) - tau * LOG_PI + math.log(value.real)
    return LogValue(total, "fourier-cube", _rel_to_log_err(value.real, err))


# ---------------------------------------------------------------------------
# Fill-in one with a general scale matrix


def eval_fill1_generalD(g: Graph, cc: ChordalCompletion, spec: WishartSpec,
                        tol: float = 1e-10, contour: str = "tilted") -> LogValue:
    """Fill-in one, any positive-definite D, as a single line integral.

    ``contour="student"`` integrates on the real axis through the Student-t
    map; it loses accuracy when the answer is tiny compared to the
    integrand (informative D). The default moves the line to a saddle point.
    """
    if cc.tau != 1:
        raise DomainError("the general-D route needs exactly one fill edge")
    beta = spec.beta
    n = g.n
    d = spec.matrix(n)
    diag = np.diag(d).copy()
    log_diag = sum((-g.degree(v) / 2.0 - beta - 1.0) * math.log(diag[v]) for v in range(n))
    dn = d / np.sqrt(np.outer(diag, diag))
    mask = np.eye(n, dtype=bool)
    for u, v in g.edges:
        mask[u, v] = mask[v, u] = True
    dn = np.where(mask, dn, 0.0)

    a, b = cc.fill_edges[0]
    cs = gr.clique_sequence(cc.completed)
    const = log_chordal_identity(cs, beta) - LOG_PI + log_diag
    xs, ys, rs = [], [], []
    for sign, blocks in ((1, cs.cliques), (-1, cs.separators)):
        for blk in blocks:
            r = -sign * (beta + (len(blk) + 1) / 2.0)
            if not (a in blk and b in blk):
                const += r * _log_det(dn, blk)
                continue
            rest = sorted(set(blk) - {a, b})
            x, y, logdet = 1.0, 0.0, 0.0
            if rest:
                try:
                    lower = np.linalg.cholesky(dn[np.ix_(rest, rest)])
                except np.linalg.LinAlgError as exc:
                    raise CholeskyFailure(f"D restricted to {rest} is not positive definite") from exc
                logdet = 2.0 * float(np.sum(np.log(np.diag(lower))))
                za = np.linalg.solve(lower, dn[rest, a])
                zb = np.linalg.solve(lower, dn[rest, b])
                p, q, s = za @ za, zb @ zb, za @ zb
                x = (1.0 - p) * (1.0 - q) - s * s
                y = s
            if not x > 0:
                raise CholeskyFailure("Schur complement is not positive definite")
            const += r * logdet
            xs.append(x)
            ys.append(y)
            rs.append(r)
    xs, ys, rs = np.array(xs), np.array(ys), np.array(rs)
    if contour == "student":
        log_value, err = _student_line_integral(xs, ys, rs, tol)
    elif contour == "tilted":
        log_value, err = _tilted_line_integral(xs, ys, rs, tol)
    else:
        raise ValueError(f"unknown contour {contour!r}")
    total = const + log_value
    return LogValue(total, "fill1-generalD", err)


def _student_line_integral(xs, ys, rs, tol):
    nu = -1.0 - 2.0 * rs.sum()

    def corr(t):
        one = 1.0 + t * t
        acc = 0.0
        for x, y, r in zip(xs, ys, rs):
            acc = acc + r * np.log1p((2j * y * t + (x - 1.0)) / one)
        return np.exp(acc)

    value, err = integrate_student(corr, nu, QuadSpec(rel_tol=tol))
    value = complex(value)
    if abs(value.imag) > 10 * err + 1e-14 * abs(value) or not value.real > 0:
        raise NonRealResult(f"fill-in-one integral {value:.3g} is not a positive real")
    return math.log(value.real), _rel_to_log_err(value.real, err)


def _tilted_line_integral(xs, ys, rs, tol):
    """log of the integral over the real line of prod_k (t^2 + 2i y_k t + x_k)^{r_k}.

    The roots of every quadratic are purely imaginary, so the line can be
    moved to Im t = eta anywhere inside the root-free strip around zero. On
    the imaginary axis the log integrand is convex (it is a log moment
    generating function); its minimiser is a saddle point, and there the
    integrand along the shifted line is almost free of oscillation. Without
    the shift, strongly informative D make the value exponentially small
    against the integrand and the quadrature cancels.
    """
    radius = np.sqrt(xs + ys * ys)
    clique = rs < 0
    lo = float(np.max(-ys[clique] - radius[clique]))
    hi = float(np.min(-ys[clique] + radius[clique]))

    def h(eta):
        return float(np.sum(rs * np.log(xs - 2.0 * ys * eta - eta * eta)))

    pad = 1e-9 * (hi - lo)
    eta = optimize.minimize_scalar(h, bounds=(lo + pad, hi - pad), method="bounded",
                                   options={"xatol": 1e-12 * (hi - lo)}).x
    base = xs - 2.0 * ys * eta - eta * eta
    # Curvature along the real direction sets the width of the peak.
    curv = float(np.sum(-rs * 2.0 * (base + 2.0 * (ys + eta) ** 2) / base**2))
    width = 1.0 / math.sqrt(curv) if curv > 0 else 1.0

    def f(s):
        t = s + 1j * eta
        q = t * t + 2j * ys[:, None] * t + xs[:, None]
        return np.exp(np.sum(rs[:, None] * (np.log(q) - np.log(base)[:, None]), axis=0))

    value, error = integrate_sinh_trapezoid(f, QuadSpec(rel_tol=tol), scale=width)
    value = complex(value)
    if abs(value.imag) > 10 * error + 1e-12 * abs(value):
        raise NonRealResult(f"imaginary part {value.imag:.3g} of the fill-in-one integral")
    if not value.real > 0:
        raise NonRealResult("fill-in-one integral is not positive")
    return h(eta) + math.log(value.real), _rel_to_log_err(value.real, error)


# ---------------------------------------------------------------------------
# Factorisation over groups of missing edges


def eval_theorem2(cc: ChordalCompletion, beta: float, tol: float = 1e-10) -> LogValue:
    """(1 - k) log I_{G*} + sum_xi log I_{G_xi}, G_xi = G* minus group xi."""
    groups = gr.partition_missing_edges(cc)
    k = len(groups)
    if k < 2:
        raise DomainError("missing edges do not split into separable groups")
    total = (1 - k) * _chordal_of(cc, beta)
    err = 0.0
    for grp in groups:
        sub = ChordalCompletion(cc.completed.without_edges(grp), tuple(sorted(grp)), cc.completed, "group")
        val = _eval_completion_exact(sub, beta, tol)
        total += val.log_value
        err += val.err_log
    return LogValue(total, "theorem2", err)


def _eval_completion_exact(cc: ChordalCompletion, beta: float, tol: float) -> LogValue:
    """Best exact route for a given completion, without graph-level shortcuts."""
    if cc.tau == 0:
        return LogValue(_chordal_of(cc, beta), "chordal", CLOSED_ERR)
    if cc.tau == 1:
        a, b = cc.fill_edges[0]
        w = len(cc.completed.adj[a] & cc.completed.adj[b])
        return eval_fill1_identity(cc, gr.FillIn1((a, b), w), beta)
    if starry_terms(cc, beta) is not None:
        try:
            return eval_starry(cc, beta, tol)
        except DimensionTooHigh:
            pass
    return eval_fourier_generic(cc, WishartSpec(beta), max(tol, 1e-8))


# ---------------------------------------------------------------------------
# Graph families used by recognisers and tests


def is_c6_complement(g: Graph) -> bool:
    if g.n != 6 or g.num_edges != 9 or any(g.degree(v) != 3 for v in range(6)):
        return False
    # The other cubic graph on six vertices is K_{3,3}, which has no triangles.
    return any(g.has_edge(u, w) for u, v, w in itertools.permutations(range(6), 3)
               if g.has_edge(u, v) and g.has_edge(v, w))


# ---------------------------------------------------------------------------
# Dispatcher


METHODS = (
    "chordal", "kpartite", "turan", "fill1-identity", "disjoint-fills", "fill2-3f2",
    "gmk-1d", "triangle-1d", "gear", "starry", "c6comp-1d", "fourier-cube",
    "theorem2", "fill1-generalD", "mc-fallback",
)


def _pattern_route(g: Graph, cc: ChordalCompletion, p: gr.FillPattern, beta: float, tol: float) -> LogValue:
    if isinstance(p, gr.Chordal):
        return LogValue(_chordal_of(cc, beta), "chordal", CLOSED_ERR)
    if isinstance(p, gr.KPartite):
        return eval_kpartite(p.sizes, beta)
    if isinstance(p, gr.Turan):
        return eval_turan(p.n, beta)
    if isinstance(p, gr.FillIn1):
        return eval_fill1_identity(cc, p, beta)
    if isinstance(p, gr.DisjointFills):
        return eval_disjoint_fills(cc, p, beta)
    if isinstance(p, gr.TwoFillsTriangle):
        return eval_fill2_triangle(cc, p, beta)
    if isinstance(p, gr.Gmk):
        return eval_gmk(p, beta, tol)
    if isinstance(p, gr.TriangleFills):
        return eval_triangle_fills(cc, beta, tol)
    if isinstance(p, gr.Gear):
        return eval_gear(p, g, beta, tol)
    if isinstance(p, gr.Starry):
        return eval_starry(cc, beta, tol)
    if isinstance(p, gr.GeneralSmallTau):
        if is_c6_complement(g):
            return eval_c6_complement(beta, tol)
        return eval_fourier_generic(cc, WishartSpec(beta), max(tol, 1e-8))
    groups = gr.partition_missing_edges(cc)
    if len(groups) >= 2:
        return eval_theorem2(cc, beta, tol)
    raise Intractable(f"no exact route for a completion with {cc.tau} fill edges")


_ROUTE_NAMES = {
    gr.Chordal: "chordal",
    gr.KPartite: "kpartite",
    gr.Turan: "turan",
    gr.FillIn1: "fill1-identity",
    gr.DisjointFills: "disjoint-fills",
    gr.TwoFillsTriangle: "fill2-3f2",
    gr.Gmk: "gmk-1d",
    gr.TriangleFills: "triangle-1d",
    gr.Gear: "gear",
    gr.Starry: "starry",
}


def planned_route(g: Graph, spec: WishartSpec) -> tuple[ChordalCompletion, gr.FillPattern, str]:
    """Completion, pattern and route name the dispatcher would use on a prime graph."""
    cc, p = gr.classify_graph(g)
    if g.is_complete():
        return cc, p, "chordal"
    if not spec.is_diagonal():
        return cc, p, "fill1-generalD" if isinstance(p, gr.FillIn1) else "mc-fallback"
    route = _ROUTE_NAMES.get(type(p))
    if route is not None:
        return cc, p, route
    if isinstance(p, gr.GeneralSmallTau):
        return cc, p, "c6comp-1d" if is_c6_complement(g) else "fourier-cube"
    if len(gr.partition_missing_edges(cc)) >= 2:
        return cc, p, "theorem2"
    return cc, p, "mc-fallback"


def _find_completion(g: Graph, want) -> tuple[ChordalCompletion, gr.FillPattern]:
    for cc in gr.candidate_completions(g):
        p = gr.classify(cc, graph_level=False)
        if want(cc, p):
            return cc, p
    raise DomainError("no completion of this graph supports the requested method")


def _forced_route(g: Graph, spec: WishartSpec, method: str, tol: float, mc: McConfig) -> LogValue:
    beta = spec.beta
    if method == "mc-fallback":
        return _mc_route(g, spec, mc)
    if method == "fill1-generalD":
        cc, _ = _find_completion(g, lambda cc, p: cc.tau == 1)
        return eval_fill1_generalD(g, cc, spec, tol)
    if method == "fourier-cube":
        cc, _ = _find_completion(g, lambda cc, p: cc.tau <= 3)
        return eval_fourier_generic(cc, spec, max(tol, 1e-8))
    if not spec.is_identity():
        raise DomainError(f"method {method!r} needs D = I")
    if method == "chordal":
        if not gr.is_chordal(g):
            raise DomainError("graph is not chordal")
        return eval_chordal(gr.clique_sequence(g), spec, g.n)
    if method == "kpartite":
        parts = gr.multipartite_parts(g)
        if parts is None:
            raise DomainError("graph is not complete multipartite")
        return eval_kpartite([len(p) for p in parts], beta)
    if method == "turan":
        parts = gr.multipartite_parts(g)
        if parts is None or any(len(p) != 2 for p in parts):
            raise DomainError("graph is not a Turan graph T(2k, k)")
        return eval_turan(len(parts), beta)
    if method == "gear":
        p = gr.gear_witness(g)
        if p is None:
            raise DomainError("graph is not a gear graph")
        return eval_gear(p, g, beta, tol)
    if method == "c6comp-1d":
        if not is_c6_complement(g):
            raise DomainError("graph is not the complement of a six-cycle")
        return eval_c6_complement(beta, tol)
    if method == "theorem2":
        cc, _ = _find_completion(g, lambda cc, p: len(gr.partition_missing_edges(cc)) >= 2)
        return eval_theorem2(cc, beta, tol)
    if method.startswith("starry"):
        cc, _ = _find_completion(g, lambda cc, p: cc.tau > 0 and gr.fill_exponents(cc) is not None)
        return eval_starry(cc, beta, tol)
    if method == "triangle-1d":
        cc, _ = _find_completion(g, lambda cc, p: gr.triangle_gammas(cc) is not None)
        return eval_triangle_fills(cc, beta, tol)
    kinds = {
        "fill1-identity": gr.FillIn1,
        "disjoint-fills": gr.DisjointFills,
        "fill2-3f2": gr.TwoFillsTriangle,
        "gmk-1d": gr.Gmk,
    }
    if method in kinds:
        cc, p = _find_completion(g, lambda cc, p: isinstance(p, kinds[method]))
        return _pattern_route(g, cc, p, beta, tol)
    raise DomainError(f"unknown method {method!r}")


def _mc_route(g: Graph, spec: WishartSpec, mc: McConfig) -> LogValue:
    delta = spec.delta
    est = mc_log_constant(g, delta, spec.matrix(g.n), mc)
    return LogValue(log_i_from_c(est.log_value, g, delta), "mc-fallback", est.se)


def _diagonal_shift(g: Graph, spec: WishartSpec) -> float:
    d = np.diag(spec.matrix(g.n))
    return float(sum((-spec.beta - 1.0 - g.degree(v) / 2.0) * math.log(d[v]) for v in range(g.n)))


def _eval_prime(g: Graph, spec: WishartSpec, tol: float, allow_mc: bool, mc: McConfig,
                force_method: str | None) -> LogValue:
    if g.is_complete():
        return eval_chordal(gr.clique_sequence(g), spec, g.n)
    if force_method is not None:
        return _forced_route(g, spec, force_method, tol, mc)
    beta = spec.beta
    cc, p = gr.classify_graph(g)
    if spec.is_diagonal():
        shift = 0.0 if spec.is_identity() else _diagonal_shift(g, spec)
        try:
            val = _pattern_route(g, cc, p, beta, tol)
        except (Intractable, DimensionTooHigh) as exc:
            if not allow_mc:
                raise Intractable(str(exc)) from exc
            warnings.warn(f"falling back to Monte Carlo: {exc}", RuntimeWarning, stacklevel=3)
            return _mc_route(g, spec, mc)
        return LogValue(val.log_value + shift, val.method, val.err_log)
    if isinstance(p, gr.FillIn1):
        return eval_fill1_generalD(g, cc, spec, tol)
    if not allow_mc:
        raise Intractable("general scale matrices are only exact for fill-in one")
    warnings.warn("general scale with fill-in above one: using Monte Carlo", RuntimeWarning, stacklevel=3)
    return _mc_route(g, spec, mc)


def eval_prime_factorized(g: Graph, spec: WishartSpec, leaf_eval, with_labels: bool = False) -> LogValue:
    """Product over prime components divided by the separator terms.

    ``leaf_eval(subgraph, subspec)`` evaluates one prime component; with
    ``with_labels`` it is also passed the component's original vertex labels.
    """
    cs = gr.prime_decomposition(g)
    beta = spec.beta
    d = spec.matrix(g.n)
    total, err = 0.0, 0.0
    methods = []
    for comp in cs.cliques:
        sub, labels = g.induced(comp)
        if with_labels:
            val = leaf_eval(sub, spec.restrict(labels), labels)
        else:
            val = leaf_eval(sub, spec.restrict(labels))
        total += val.log_value
        err += val.err_log
        methods.append(val.method)
    for sep in cs.separators:
        if not sep:
            continue
        total -= _block_term(len(sep), beta) - (beta + (len(sep) + 1) / 2.0) * _log_det(d, sep)
    distinct = sorted(set(methods))
    if len(distinct) == 1:
        method = distinct[0]
    else:
        method = "prime:" + "+".join(m for m in distinct if m != "chordal") if set(distinct) - {"chordal"} else "chordal"
    return LogValue(total, method, err)


def log_constant(g: Graph, spec: WishartSpec, *, tol: float = 1e-10, force_method: str | None = None,
                 allow_mc: bool = True, mc: McConfig | None = None, trace: list | None = None) -> LogValue:
    """log I_G(beta, D), choosing the cheapest applicable route.

    Chordal graphs use the clique formula. Otherwise the graph is split into
    prime components; with a diagonal D each component is classified and
    evaluated exactly, with a general D only fill-in one is exact and the
    rest falls back to Monte Carlo (unless ``allow_mc`` is False, in which
    case :class:`Intractable` is raised).

    If ``trace`` is a list, one ``(vertices, LogValue, seconds)`` entry per
    evaluated prime component is appended to it.
    """
    spec.matrix(g.n)
    mc = mc or McConfig(n_samples=20000, seed=0)
    if force_method is None and gr.is_chordal(g):
        start = time.perf_counter()
        val = eval_chordal(gr.clique_sequence(g), spec, g.n)
        if trace is not None:
            trace.append((list(range(g.n)), val, time.perf_counter() - start))
        return val
    if force_method == "mc-fallback":
        return _mc_route(g, spec, mc)

    def leaf(sub, sp, labels):
        start = time.perf_counter()
        val = _eval_prime(sub, sp, tol, allow_mc, mc, force_method)
        if trace is not None:
            trace.append((labels, val, time.perf_counter() - start))
        return val

    return eval_prime_factorized(g, spec, leaf, with_labels=True)


def log_normalising_constant(g: Graph, delta: float, scale=None, **kwargs) -> tuple[float, LogValue]:
    """(log C_G(delta, D), log I_G value) for the given delta."""
    val = log_constant(g, WishartSpec.from_delta(delta, scale), **kwargs)
    return log_c_from_i(val.log_value, g, delta), val


def log_marginal_likelihood(scatter, n_obs: int, g: Graph, delta: float, scale=None, **kwargs) -> float:
    """log p(Z | G) for n_obs observations with scatter matrix U."""
    n = g.n
    d = np.eye(n) if scale is None else np.asarray(scale, dtype=float)
    u = np.asarray(scatter, dtype=float)
    post, _ = log_normalising_constant(g, delta + n_obs, u + d, **kwargs)
    prior, _ = log_normalising_constant(g, delta, None if scale is None else d, **kwargs)
    return -math.comb(n, 2) * LOG2 - n * n_obs / 2.0 * math.log(2 * math.pi) + post - prior
