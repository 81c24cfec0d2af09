"""Importance-sampling estimate of C_G(delta, D) from a completed Cholesky factor.

K = Phi^T Phi with Phi upper triangular and D^{-1} = T^T T. Writing
Psi = Phi T^{-1}, the diagonal and edge entries of Psi are free (chi and
standard normal draws); every other entry is fixed by K having zeros at the
non-edges. The constant is a closed-form prefactor times
E[exp(-1/2 sum of squared non-free entries)].
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, logsumexp

from gwishart.errors import CholeskyFailure, DegenerateWeights, DomainError
from gwishart.graph import Graph

BLOCK = 4096


@dataclass(frozen=True)
class McConfig:
    n_samples: int = 1000
    seed: int = 0
    n_replicates: int = 200

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValueError("n_samples must be at least 1")
        if self.n_replicates < 1:
            raise ValueError("n_replicates must be at least 1")


@dataclass(frozen=True)
class McEstimate:
    log_value: float
    se: float
    ess: float
    n_samples: int


def _block_rng(seed: int, block: int) -> np.random.Generator:
    # One counter-based stream per (seed, block): results do not depend on
    # how blocks are scheduled.
    ss = np.random.SeedSequence(seed, spawn_key=(block,))
    return np.random.Generator(np.random.Philox(ss))


def _upper_factor_of_inverse(d: np.ndarray) -> np.ndarray:
    """Upper triangular T with T^T T = D^{-1}."""
    try:
        lower = np.linalg.cholesky(np.linalg.inv(d))
    except np.linalg.LinAlgError as exc:
        raise CholeskyFailure("scale matrix is not positive definite") from exc
    return lower.T


def _log_prefactor(g: Graph, delta: float, t: np.ndarray) -> float:
    n = g.n
    total = 0.5 * g.num_edges * math.log(2 * math.pi)
    for i in range(n):
        nu = sum(1 for j in g.adj[i] if j > i)
        b = sum(1 for j in g.adj[i] if j < i)
        k = delta + nu
        total += 0.5 * k * math.log(2.0) + gammaln(0.5 * k) + (k + b) * math.log(t[i, i])
    return total


def _block_log_weights(g: Graph, delta: float, t: np.ndarray, m: int,
                       rng: np.random.Generator) -> np.ndarray:
    n = g.n
    psi = np.zeros((n, n, m))
    phi = np.zeros((n, n, m))
    for i in range(n):
        nu = sum(1 for j in g.adj[i] if j > i)
        psi[i, i] = np.sqrt(rng.chisquare(delta + nu, size=m))
        for j in range(i + 1, n):
            if g.has_edge(i, j):
                psi[i, j] = rng.standard_normal(m)
    penalty = np.zeros(m)
    for i in range(n):
        phi[i, i] = psi[i, i] * t[i, i]
        for j in range(i + 1, n):
            if g.has_edge(i, j):
                phi[i, j] = np.einsum("lm,l->m", psi[i, i:j + 1], t[i:j + 1, j])
            else:
                if i > 0:
                    phi[i, j] = -np.einsum("lm,lm->m", phi[:i, i], phi[:i, j]) / phi[i, i]
                partial = np.einsum("lm,l->m", psi[i, i:j], t[i:j, j])
                psi[i, j] = (phi[i, j] - partial) / t[j, j]
                penalty += psi[i, j] ** 2
    return -0.5 * penalty


def _validate(g: Graph, delta: float, d: np.ndarray) -> np.ndarray:
    if not delta > 0:
        raise DomainError("delta must be positive")
    d = np.asarray(d, dtype=float)
    if d.shape != (g.n, g.n):
        raise DomainError(f"scale matrix must be {g.n}x{g.n}")
    return d


def _summarize(log_w: np.ndarray, log_pref: float) -> McEstimate:
    n = log_w.size
    log_mean = logsumexp(log_w) - math.log(n)
    w = np.exp(log_w - log_w.max())
    ess = float(w.sum() ** 2 / np.sum(w * w))
    rel = np.exp(log_w - log_mean)
    se = float(np.std(rel, ddof=1) / math.sqrt(n)) if n > 1 else float("inf")
    if ess < 10:
        warnings.warn(f"effective sample size {ess:.1f} is below 10", DegenerateWeights, stacklevel=3)
    return McEstimate(float(log_pref + log_mean), se, ess, n)


def mc_log_weights(g: Graph, delta: float, d, n_samples: int, seed: int):
    """Log importance weights and the log prefactor for C_G(delta, D)."""
    d = _validate(g, delta, d)
    t = _upper_factor_of_inverse(d)
    chunks = []
    for block, start in enumerate(range(0, n_samples, BLOCK)):
        m = min(BLOCK, n_samples - start)
        chunks.append(_block_log_weights(g, delta, t, m, _block_rng(seed, block)))
    return np.concatenate(chunks), _log_prefactor(g, delta, t)


def mc_log_constant(g: Graph, delta: float, d, cfg: McConfig = McConfig()) -> McEstimate:
    """Estimate log C_G(delta, D) with a delta-method standard error of the log."""
    log_w, log_pref = mc_log_weights(g, delta, d, cfg.n_samples, cfg.seed)
    return _summarize(log_w, log_pref)


@dataclass(frozen=True)
class ReplicateStudy:
    rows: list[tuple[int, float, float]]

    @property
    def estimates(self) -> np.ndarray:
        return np.array([r[1] for r in self.rows])

    def summary(self) -> dict:
        est = self.estimates
        return {
            "min": float(est.min()),
            "max": float(est.max()),
            "sd": float(est.std(ddof=1)) if len(est) > 1 else 0.0,
            "mean": float(est.mean()),
        }

    def pooled(self) -> tuple[float, float]:
        """Log of the averaged estimate of C and its standard error."""
        est = self.estimates
        k = len(est)
        log_mean = float(logsumexp(est) - math.log(k))
        if k == 1:
            return log_mean, self.rows[0][2]
        rel = np.exp(est - log_mean)
        return log_mean, float(np.std(rel, ddof=1) / math.sqrt(k))

    def to_csv(self, exact: float | None = None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["seed", "log_estimate", "se"])
        for seed, est, se in self.rows:
            w.writerow([seed, repr(est), repr(se)])
        buf.write("\n")
        s = self.summary()
        w.writerow(["min", "max", "sd", "mean"] + (["exact"] if exact is not None else []))
        w.writerow([repr(s["min"]), repr(s["max"]), repr(s["sd"]), repr(s["mean"])]
                   + ([repr(exact)] if exact is not None else []))
        return buf.getvalue()


def mc_replicate_study(g: Graph, delta: float, d, cfg: McConfig = McConfig()) -> ReplicateStudy:
    """One estimate per seed cfg.seed, cfg.seed + 1, ..."""
    rows = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateWeights)
        for k in range(cfg.n_replicates):
            seed = cfg.seed + k
            est = mc_log_constant(g, delta, d, McConfig(cfg.n_samples, seed, 1))
            rows.append((seed, est.log_value, est.se))
    return ReplicateStudy(rows)
