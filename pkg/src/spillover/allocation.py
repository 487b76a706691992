"""Hypothetical stochastic allocation policies with a fixed cluster-average propensity.

A policy is a coefficient vector gamma plus a target average alpha.  Unit
treatment probabilities follow logit(p_ij) = xi_i + gamma'X_ij where the
cluster intercept xi_i is solved so the within-cluster mean of p_ij equals
alpha.  The mean-propensity map is continuous and strictly increasing in xi
with limits 0 and 1, so the root exists and is unique for any finite inputs.

Intercepts are solved once per (cluster, policy) and cached in SolvedPolicy;
everything downstream reads the cache.  The solver is a safeguarded Newton
iteration with a bisection fallback inside a bracket that provably contains
the root.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit, log_expit, logit

from .data import ClusterData, Dataset

__all__ = [
    "AllocationPolicy",
    "SolvedPolicy",
    "solve_intercept",
    "solve_policy",
    "unit_propensities",
    "log_policy_prob",
    "log_policy_prob_loo",
]

DEFAULT_TOL = 1e-10


@dataclass(frozen=True)
class AllocationPolicy:
    """Target average propensity alpha and covariate tilt gamma (logit link)."""

    alpha: float
    gamma: np.ndarray

    def __post_init__(self):
        object.__setattr__(
            self, "gamma", np.atleast_1d(np.asarray(self.gamma, dtype=float))
        )
        if not (0.0 < self.alpha < 1.0):
            raise ValueError(f"alpha {self.alpha!r} not in (0, 1)")
        if not np.all(np.isfinite(self.gamma)):
            raise ValueError("gamma must be finite")

    @property
    def n_covariates(self) -> int:
        return self.gamma.shape[0]

    def key(self) -> tuple:
        return (self.alpha, tuple(self.gamma.tolist()))


@dataclass(frozen=True)
class SolvedPolicy:
    """A policy with per-cluster intercepts and propensities materialized.

    ``propensities[i]``, ``log_p[i]``, ``log_1mp[i]`` are aligned with
    ``dataset.clusters[i]``; lookups by cluster object go through the id map.
    """

    policy: AllocationPolicy
    cluster_ids: tuple
    xi: np.ndarray
    propensities: tuple
    log_p: tuple
    log_1mp: tuple

    def __post_init__(self):
        object.__setattr__(
            self, "_id_index", {cid: i for i, cid in enumerate(self.cluster_ids)}
        )

    def index_of(self, cluster_id) -> int:
        return self._id_index[cluster_id]


def _solve_xi_batch(eta: np.ndarray, alpha: float, tol: float) -> np.ndarray:
    """Solve mean(expit(xi + eta_row)) = alpha for each row of eta.

    Safeguarded Newton: every iterate stays inside a shrinking bracket that
    contains the root; out-of-bracket Newton steps fall back to bisection.
    The starting bracket [logit(alpha) - b - 1, logit(alpha) + b + 1] with
    b = max|eta_row| brackets the root because shifting xi by -+b pushes every
    unit propensity to the respective side of alpha.
    """
    center = float(logit(alpha))
    spread = np.max(np.abs(eta), axis=1)
    lo = center - spread - 1.0
    hi = center + spread + 1.0
    xi = np.full(eta.shape[0], center)
    for _ in range(200):
        p = expit(xi[:, None] + eta)
        g = p.mean(axis=1) - alpha
        settled = np.abs(g) <= tol
        if settled.all():
            break
        above = g > 0.0
        hi = np.where(above & ~settled, np.minimum(hi, xi), hi)
        lo = np.where(~above & ~settled, np.maximum(lo, xi), lo)
        slope = (p * (1.0 - p)).mean(axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            newton = xi - g / slope
        inside = (newton > lo) & (newton < hi) & np.isfinite(newton)
        xi = np.where(settled, xi, np.where(inside, newton, 0.5 * (lo + hi)))
    return xi


def solve_intercept(
    X: np.ndarray, gamma: np.ndarray, alpha: float, tol: float = DEFAULT_TOL
) -> float:
    """Cluster intercept xi with |mean_j expit(xi + gamma'X_j) - alpha| <= tol."""
    if not (0.0 < alpha < 1.0):
        raise ValueError(f"alpha {alpha!r} not in (0, 1)")
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    X = np.atleast_2d(np.asarray(X, dtype=float))
    gamma = np.atleast_1d(np.asarray(gamma, dtype=float))
    eta = X @ gamma
    if np.allclose(eta, 0.0):
        return float(logit(alpha))
    return float(_solve_xi_batch(eta[None, :], alpha, tol)[0])


def solve_policy(
    dataset: Dataset, policy: AllocationPolicy, tol: float = DEFAULT_TOL
) -> SolvedPolicy:
    """Solve intercepts for every cluster and cache propensities in log space.

    Clusters are grouped by size so the Newton iteration runs vectorized
    across same-sized clusters; the result is identical to per-cluster solves.
    """
    if policy.n_covariates != dataset.n_covariates:
        raise ValueError(
            f"policy has {policy.n_covariates} coefficients for "
            f"{dataset.n_covariates} covariates"
        )
    I = dataset.n_clusters
    xi = np.empty(I)
    etas = [c.X @ policy.gamma for c in dataset.clusters]
    by_size: dict[int, list[int]] = {}
    for i, c in enumerate(dataset.clusters):
        by_size.setdefault(c.n, []).append(i)
    for n, idx in by_size.items():
        eta = np.vstack([etas[i] for i in idx])
        xi[idx] = _solve_xi_batch(eta, policy.alpha, tol)

    props, log_p, log_1mp = [], [], []
    for i in range(I):
        z = xi[i] + etas[i]
        props.append(expit(z))
        log_p.append(log_expit(z))
        log_1mp.append(log_expit(-z))
    return SolvedPolicy(
        policy=policy,
        cluster_ids=tuple(c.cluster_id for c in dataset.clusters),
        xi=xi,
        propensities=tuple(props),
        log_p=tuple(log_p),
        log_1mp=tuple(log_1mp),
    )


def unit_propensities(cluster: ClusterData, policy: AllocationPolicy,
                      tol: float = DEFAULT_TOL) -> np.ndarray:
    """Per-unit treatment probabilities expit(xi + gamma'X_ij) for one cluster."""
    xi = solve_intercept(cluster.X, policy.gamma, policy.alpha, tol)
    return expit(xi + cluster.X @ policy.gamma)


def _cluster_slot(cluster: ClusterData, solved: SolvedPolicy) -> int:
    return solved.index_of(cluster.cluster_id)


def log_policy_prob(cluster: ClusterData, solved: SolvedPolicy, a: np.ndarray) -> float:
    """Log probability of treatment vector ``a`` under the solved policy."""
    a = np.asarray(a)
    if a.shape != (cluster.n,):
        raise ValueError(f"treatment vector has length {a.shape}, cluster has {cluster.n}")
    i = _cluster_slot(cluster, solved)
    return float(np.sum(np.where(a == 1, solved.log_p[i], solved.log_1mp[i])))


def log_policy_prob_loo(
    cluster: ClusterData, solved: SolvedPolicy, a: np.ndarray, j: int
) -> float:
    """Log probability of ``a`` excluding unit ``j`` (the leave-one-out marginal).

    Independence across units makes the marginal a log-subtraction of unit
    j's own Bernoulli term.  A single-unit cluster gives the empty product, 0.
    """
    if not (0 <= j < cluster.n):
        raise IndexError(f"unit index {j} out of range for cluster of size {cluster.n}")
    i = _cluster_slot(cluster, solved)
    a = np.asarray(a)
    own = solved.log_p[i][j] if a[j] == 1 else solved.log_1mp[i][j]
    return log_policy_prob(cluster, solved, a) - float(own)
