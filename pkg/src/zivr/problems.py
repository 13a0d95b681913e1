"""Composite finite-sum problems exposed through a function-value oracle.

A problem is h(x) = (1/n) * sum_i f_i(x) + psi(x) where each smooth f_i is
reachable only via ``component_eval(i, x)`` and psi comes with a closed-form
proximal operator.  Analytic gradients, when attached, exist purely for
tests and metrics; solvers never consume them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.special import expit, logsumexp

from .dataio import SparseDataset, SurvivalDataset
from .errors import EvaluationError, InputError, ParameterError, SchemaError
from .proximal import ProxSpec, l1_prox, prox, psi_value, zero_prox

# peak curvature of the logistic sigmoid, max |s''(z)| = 1/(6*sqrt(3))
SIGMOID_CURVATURE = 1.0 / (6.0 * math.sqrt(3.0))


@dataclass
class OracleCounter:
    """Running count of component-function evaluations."""

    calls: int = 0

    def add(self, k: int = 1) -> None:
        self.calls += k

    def reset(self) -> None:
        self.calls = 0


@dataclass(frozen=True)
class CompositeProblem:
    """A finite sum of n smooth components plus a prox-friendly psi.

    ``component_eval(i, x)`` is the only channel solvers may use.  The
    optional ``reference_gradient(i, x)``, ``full_gradient(x)`` and
    ``smooth_objective(x)`` callables are uncounted side channels used by
    tests, reference solves and trace metrics.  Instances are immutable and
    safe to share.
    """

    n: int
    d: int
    component_eval: Callable[[int, np.ndarray], float]
    prox_spec: ProxSpec
    smoothness_L: float
    strong_convexity_mu: float = 0.0
    reference_gradient: Optional[Callable[[int, np.ndarray], np.ndarray]] = None
    full_gradient: Optional[Callable[[np.ndarray], np.ndarray]] = None
    smooth_objective: Optional[Callable[[np.ndarray], float]] = None
    known_optimum: Optional[tuple[np.ndarray, float]] = None
    name: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.n < 1 or self.d < 1:
            raise ParameterError(f"need n, d >= 1, got n={self.n}, d={self.d}")
        if not self.smoothness_L > 0:
            raise ParameterError("smoothness constant must be positive")
        if self.strong_convexity_mu < 0:
            raise ParameterError("strong convexity constant must be >= 0")

    def eval_component(self, i: int, x: np.ndarray) -> float:
        """Uncounted f_i(x) with a finiteness check."""
        v = float(self.component_eval(i, x))
        if not math.isfinite(v):
            raise EvaluationError(f"component {i} returned non-finite value {v}")
        return v

    def psi(self, x: np.ndarray) -> float:
        return psi_value(self.prox_spec, x)

    def prox(self, x: np.ndarray, t: float) -> np.ndarray:
        return prox(self.prox_spec, x, t)

    def objective(self, x: np.ndarray) -> float:
        return objective_value(self, x)

    def grad_f(self, x: np.ndarray) -> np.ndarray:
        """Uncounted gradient of the smooth part (metric/test use only)."""
        if self.full_gradient is not None:
            return self.full_gradient(x)
        if self.reference_gradient is not None:
            g = np.zeros(self.d)
            for i in range(self.n):
                g += self.reference_gradient(i, x)
            return g / self.n
        from .errors import CapabilityError

        raise CapabilityError("problem carries no reference gradient")


class CountingOracle:
    """Callable (i, x) -> f_i(x) that bills every evaluation to a counter."""

    def __init__(self, problem: CompositeProblem, counter: OracleCounter | None = None):
        self.problem = problem
        self.counter = counter if counter is not None else OracleCounter()

    def __call__(self, i: int, x: np.ndarray) -> float:
        self.counter.calls += 1
        v = float(self.problem.component_eval(i, x))
        if not math.isfinite(v):
            raise EvaluationError(f"component {i} returned non-finite value {v}")
        return v

    @property
    def calls(self) -> int:
        return self.counter.calls


def objective_value(p: CompositeProblem, x: np.ndarray) -> float:
    """h(x) = (1/n) sum_i f_i(x) + psi(x), via the uncounted channel."""
    x = np.asarray(x, dtype=float)
    if p.smooth_objective is not None:
        f = float(p.smooth_objective(x))
        if not math.isfinite(f):
            raise EvaluationError("objective evaluated to a non-finite value")
    else:
        f = 0.0
        for i in range(p.n):
            f += p.eval_component(i, x)
        f /= p.n
    return f + p.psi(x)


# ---------------------------------------------------------------------------
# concrete problem families


def make_logistic_elastic_net(
    data: SparseDataset, mu: float = 0.0, lam: float = 0.0
) -> CompositeProblem:
    """Binary logistic loss with an L2 term folded into each component.

    f_i(x) = log(1 + exp(-b_i a_i.x)) + (mu/2)||x||^2 and psi = lam*||.||_1.
    The ridge term lives inside the smooth part so psi stays a plain L1.
    """
    if mu < 0 or lam < 0:
        raise ParameterError("regularization weights must be >= 0")
    if data.n < 1:
        raise InputError("empty dataset")
    if not np.all(np.isin(data.labels, (-1.0, 1.0))):
        raise SchemaError("labels must be -1 or +1")
    A = data.to_csr()
    b = data.labels
    n, d = data.n, data.d
    indptr, indices, values = data.indptr, data.indices, data.values
    row_sq = data.row_norms_sq()
    L = mu + float(row_sq.max()) / 4.0
    if L == 0.0:  # all-zero features: the smooth part is constant
        L = 1.0

    def component_eval(i, x):
        lo, hi = indptr[i], indptr[i + 1]
        s = values[lo:hi] @ x[indices[lo:hi]]
        reg = 0.5 * mu * (x @ x) if mu else 0.0
        return float(np.logaddexp(0.0, -b[i] * s)) + reg

    def reference_gradient(i, x):
        lo, hi = indptr[i], indptr[i + 1]
        idx = indices[lo:hi]
        s = values[lo:hi] @ x[idx]
        g = mu * x if mu else np.zeros(d)
        g[idx] += (-b[i] * expit(-b[i] * s)) * values[lo:hi]
        return g

    def smooth_objective(x):
        s = A @ x
        reg = 0.5 * mu * (x @ x) if mu else 0.0
        return float(np.mean(np.logaddexp(0.0, -b * s))) + reg

    def full_gradient(x):
        s = A @ x
        w = -b * expit(-b * s) / n
        return A.T @ w + (mu * x if mu else 0.0)

    return CompositeProblem(
        n=n,
        d=d,
        component_eval=component_eval,
        prox_spec=l1_prox(lam) if lam > 0 else zero_prox(),
        smoothness_L=L,
        strong_convexity_mu=mu,
        reference_gradient=reference_gradient,
        full_gradient=full_gradient,
        smooth_objective=smooth_objective,
        name="logistic_elastic_net",
        meta={"mu": mu, "lambda": lam},
    )


def make_cox_elastic_net(
    surv: SurvivalDataset, mu: float = 0.0, lam: float = 0.0
) -> CompositeProblem:
    """Regularized partial-likelihood loss for proportional hazards.

    f_i(x) = delta_i * (-a_i.x + log sum_{t_j >= t_i} exp(a_j.x))
             + (mu/2)||x||^2,  psi = lam*||.||_1.

    The log-sum-exp runs over the risk set of row i (ties included).  The
    smoothness constant uses the conservative bound mu + 2*max_i||a_i||^2;
    an over-estimate only shrinks preset step sizes.
    """
    if mu < 0 or lam < 0:
        raise ParameterError("regularization weights must be >= 0")
    A = surv.features
    n, d = surv.n, surv.d
    order = np.argsort(surv.times, kind="stable")
    ta = surv.times[order]
    Aa = A[order]
    # risk set of row i = rows with time >= t_i = suffix of the ascending sort
    pos = np.searchsorted(ta, surv.times, side="left")
    delta = surv.events.astype(float)
    L = mu + 2.0 * float(np.max(np.sum(A * A, axis=1)))
    if L == 0.0:  # all-zero features: the smooth part is constant
        L = 1.0

    def component_eval(i, x):
        reg = 0.5 * mu * (x @ x) if mu else 0.0
        if delta[i] == 0.0:
            return reg
        s = Aa[pos[i]:] @ x
        return float(-(A[i] @ x) + logsumexp(s)) + reg

    def reference_gradient(i, x):
        g = mu * x if mu else np.zeros(d)
        if delta[i] == 0.0:
            return g
        s = Aa[pos[i]:] @ x
        w = np.exp(s - s.max())
        w /= w.sum()
        g += -A[i] + w @ Aa[pos[i]:]
        return g

    def _suffix_stats(x):
        s = Aa @ x
        smax = s.max()
        w = np.exp(s - smax)
        s0 = np.cumsum(w[::-1])[::-1]  # suffix sums of exp
        return s, smax, w, s0

    def smooth_objective(x):
        s, smax, _, s0 = _suffix_stats(x)
        lse = smax + np.log(s0)
        sx = A @ x
        return float(np.mean(delta * (-sx + lse[pos]))) + (
            0.5 * mu * (x @ x) if mu else 0.0
        )

    def full_gradient(x):
        _, _, w, s0 = _suffix_stats(x)
        s1 = np.cumsum((w[:, None] * Aa)[::-1], axis=0)[::-1]
        g = np.zeros(d)
        ev = delta > 0
        g -= delta @ A
        g += np.sum(delta[ev, None] * s1[pos[ev]] / s0[pos[ev], None], axis=0)
        g /= n
        return g + (mu * x if mu else 0.0)

    return CompositeProblem(
        n=n,
        d=d,
        component_eval=component_eval,
        prox_spec=l1_prox(lam) if lam > 0 else zero_prox(),
        smoothness_L=L,
        strong_convexity_mu=mu,
        reference_gradient=reference_gradient,
        full_gradient=full_gradient,
        smooth_objective=smooth_objective,
        name="cox_elastic_net",
        meta={"mu": mu, "lambda": lam},
    )


def make_synthetic_quadratic(n: int, d: int, cond: float, seed: int) -> CompositeProblem:
    """Finite sum of rotated quadratics with a prescribed condition number.

    f_i(x) = 0.5*(x - c_i)' A_i (x - c_i) with SPD A_i whose eigenvalues
    span [1/cond, 1].  The optimum solves the aggregate linear system and
    is recorded in ``known_optimum``; psi = 0.
    """
    if n < 1 or d < 1:
        raise ParameterError(f"need n, d >= 1, got n={n}, d={d}")
    if cond < 1:
        raise ParameterError(f"condition number must be >= 1, got {cond}")
    rng = np.random.default_rng(seed)
    lo, hi = 1.0 / cond, 1.0
    mats = np.empty((n, d, d))
    centers = rng.standard_normal((n, d))
    for i in range(n):
        if d == 1:
            evals = np.array([hi])
        elif d == 2:
            evals = np.array([lo, hi])
        else:
            evals = np.concatenate([[lo, hi], lo + (hi - lo) * rng.random(d - 2)])
        z = rng.standard_normal((d, d))
        q, r = np.linalg.qr(z)
        q *= np.sign(np.diag(r))
        mats[i] = (q * evals) @ q.T
    mean_mat = mats.mean(axis=0)
    mean_vec = np.einsum("nij,nj->i", mats, centers) / n
    x_star = np.linalg.solve(mean_mat, mean_vec)
    mu = float(np.linalg.eigvalsh(mean_mat)[0])
    L = float(max(np.linalg.eigvalsh(mats[i])[-1] for i in range(n)))

    def component_eval(i, x):
        z = x - centers[i]
        return 0.5 * float(z @ (mats[i] @ z))

    def reference_gradient(i, x):
        return mats[i] @ (x - centers[i])

    def smooth_objective(x):
        z = x[np.newaxis, :] - centers
        return 0.5 * float(np.mean(np.einsum("ni,nij,nj->n", z, mats, z)))

    def full_gradient(x):
        return mean_mat @ x - mean_vec

    h_star = smooth_objective(x_star)
    return CompositeProblem(
        n=n,
        d=d,
        component_eval=component_eval,
        prox_spec=zero_prox(),
        smoothness_L=L,
        strong_convexity_mu=mu,
        reference_gradient=reference_gradient,
        full_gradient=full_gradient,
        smooth_objective=smooth_objective,
        known_optimum=(x_star, h_star),
        name="synthetic_quadratic",
        meta={"cond": cond, "seed": seed},
    )


def make_sigmoid_loss(
    features: np.ndarray, labels: np.ndarray, mu: float = 0.0
) -> CompositeProblem:
    """Non-convex sigmoid classification loss f_i(x) = s(-b_i a_i.x).

    Bounded in (0, 1), smooth, and non-convex; useful for exercising
    stationarity metrics.  psi = 0.
    """
    A = np.asarray(features, dtype=float)
    b = np.asarray(labels, dtype=float)
    if A.ndim != 2 or A.shape[0] < 1:
        raise InputError("features must be a nonempty 2-d array")
    if b.shape != (A.shape[0],) or not np.all(np.isin(b, (-1.0, 1.0))):
        raise SchemaError("labels must be -1 or +1, one per row")
    if mu < 0:
        raise ParameterError("mu must be >= 0")
    n, d = A.shape
    L = mu + SIGMOID_CURVATURE * float(np.max(np.sum(A * A, axis=1)))
    if L == 0.0:  # all-zero features: the smooth part is constant
        L = 1.0

    def component_eval(i, x):
        reg = 0.5 * mu * (x @ x) if mu else 0.0
        return float(expit(-b[i] * (A[i] @ x))) + reg

    def reference_gradient(i, x):
        p = expit(-b[i] * (A[i] @ x))
        g = (-b[i] * p * (1.0 - p)) * A[i]
        if mu:
            g = g + mu * x
        return g

    def smooth_objective(x):
        p = expit(-b * (A @ x))
        return float(np.mean(p)) + (0.5 * mu * (x @ x) if mu else 0.0)

    def full_gradient(x):
        p = expit(-b * (A @ x))
        w = -b * p * (1.0 - p) / n
        return A.T @ w + (mu * x if mu else 0.0)

    return CompositeProblem(
        n=n,
        d=d,
        component_eval=component_eval,
        prox_spec=zero_prox(),
        smoothness_L=L,
        strong_convexity_mu=0.0,
        reference_gradient=reference_gradient,
        full_gradient=full_gradient,
        smooth_objective=smooth_objective,
        name="sigmoid_loss",
        meta={"mu": mu},
    )
