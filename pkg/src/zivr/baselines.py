"""Comparison solvers: plain stochastic ZO, full-batch ZO, and epoch-SVRG ZO.

All three share the oracle-accounting and determinism contracts of the
main solver module and produce the same Trace format.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DivergenceError, ParameterError
from .estimators import SCHEME_COORDINATE, SCHEME_SPHERICAL, coord_full
from .problems import CompositeProblem, objective_value
from .solver import Trace, TraceRow, _prox_dispatch, _Recorder, grad_map_norm

BASELINE_KINDS = ("vanilla_zo", "full_batch_zo", "zpsvrg")


@dataclass(frozen=True)
class BaselineConfig:
    """Configuration for one baseline run.

    Defaults follow standard step-size theory and are recorded in trace
    metadata: vanilla uses alpha_k = alpha0/sqrt(k+1) with
    alpha0 = 1/(L sqrt(d)); full batch uses alpha = 1/(2L); the epoch
    method uses alpha = 1/(10 L d) with epoch length m = n.
    """

    kind: str
    beta: float = 1e-6
    alpha: Optional[float] = None  # constant step (full_batch, zpsvrg)
    alpha0: Optional[float] = None  # vanilla decaying-step scale
    m: Optional[int] = None  # zpsvrg epoch length; 0 degenerates to full batch
    inner_batch: int = 1
    direction_scheme: str = SCHEME_SPHERICAL
    seed: int = 0
    max_oracle_calls: int = 10_000
    metric_stride: int = 1000
    x0: Optional[np.ndarray] = None
    href: Optional[float] = None
    record_grad_map: bool = False
    divergence_limit: float = 1e12
    label: str = ""

    def __post_init__(self):
        if self.kind not in BASELINE_KINDS:
            raise ParameterError(f"unknown baseline kind {self.kind!r}")
        if self.beta <= 0:
            raise ParameterError(f"beta must be > 0, got {self.beta}")
        if self.alpha is not None and self.alpha <= 0:
            raise ParameterError("alpha must be > 0")
        if self.alpha0 is not None and self.alpha0 <= 0:
            raise ParameterError("alpha0 must be > 0")
        if self.m is not None and self.m < 0:
            raise ParameterError("epoch length m must be >= 0")
        if self.inner_batch < 1:
            raise ParameterError("inner_batch must be >= 1")
        if self.direction_scheme not in (SCHEME_COORDINATE, SCHEME_SPHERICAL):
            raise ParameterError(
                f"unknown direction scheme {self.direction_scheme!r}"
            )

    def step_size(self, problem: CompositeProblem, k: int) -> float:
        L, d = problem.smoothness_L, problem.d
        if self.kind == "vanilla_zo":
            a0 = self.alpha0 if self.alpha0 is not None else 1.0 / (L * math.sqrt(d))
            if self.alpha is not None:  # constant override
                return self.alpha
            return a0 / math.sqrt(k + 1.0)
        if self.kind == "full_batch_zo":
            return self.alpha if self.alpha is not None else 1.0 / (2.0 * L)
        return self.alpha if self.alpha is not None else 1.0 / (10.0 * L * d)

    def epoch_len(self, problem: CompositeProblem) -> int:
        return self.m if self.m is not None else problem.n


def _draw_direction(scheme, d, rng):
    if scheme == SCHEME_COORDINATE:
        return int(rng.integers(d))
    while True:
        g = rng.standard_normal(d)
        nrm = np.linalg.norm(g)
        if nrm > 0:
            return g / nrm


def _slope(ev, i, x, u, beta, base=None):
    fx = ev(i, x) if base is None else base
    if isinstance(u, (int, np.integer)):
        xp = x.copy()
        xp[int(u)] += beta
    else:
        xp = x + beta * u
    return (ev(i, xp) - fx) / beta


def _check_g(g, limit_sq):
    gg = float(g @ g)
    if not gg <= limit_sq:
        raise DivergenceError(f"gradient estimate blew up (|g|^2 = {gg!r})")


def vanilla_zo_step(x, problem, cfg: BaselineConfig, rng, k=0, ev=None):
    """One stochastic proximal step with a d-scaled two-point estimate.

    Samples one (component, direction) pair; the d factor makes the probe
    approximately unbiased for the smooth-part gradient.
    """
    ev = ev if ev is not None else lambda i, xx: problem.component_eval(i, xx)
    d = problem.d
    alpha = cfg.step_size(problem, k)
    g = np.zeros(d)
    for _ in range(cfg.inner_batch):
        i = int(rng.integers(problem.n))
        u = _draw_direction(cfg.direction_scheme, d, rng)
        sl = _slope(ev, i, x, u, cfg.beta)
        if isinstance(u, (int, np.integer)):
            g[u] += d * sl / cfg.inner_batch
        else:
            g += (d * sl / cfg.inner_batch) * u
    _check_g(g, cfg.divergence_limit**2)
    return _prox_dispatch(problem.prox_spec, alpha)(x - alpha * g)


def full_batch_zo_step(x, problem, cfg: BaselineConfig, ev=None):
    """One deterministic proximal step from coordinate sweeps of every
    component; costs exactly n*(d+1) oracle calls."""
    ev = ev if ev is not None else lambda i, xx: problem.component_eval(i, xx)
    g = np.zeros(problem.d)
    for i in range(problem.n):
        g += coord_full(ev, i, x, cfg.beta)
    g /= problem.n
    _check_g(g, cfg.divergence_limit**2)
    alpha = cfg.step_size(problem, 0)
    return _prox_dispatch(problem.prox_spec, alpha)(x - alpha * g)


def _baseline_recorder(problem, cfg, alpha_desc, trace, on_row, probe, t0):
    class _Cfg:  # minimal view the shared recorder needs
        href = cfg.href
        record_grad_map = cfg.record_grad_map
        divergence_limit = cfg.divergence_limit

    return _Recorder(problem, _Cfg, alpha_desc, trace, on_row, probe, t0)


def _make_trace(problem, cfg):
    return Trace(
        meta={
            "solver": cfg.kind,
            "label": cfg.label or cfg.kind,
            "seed": cfg.seed,
            "beta0": cfg.beta,
            "max_oracle_calls": cfg.max_oracle_calls,
        }
    )


def run_baseline(
    problem: CompositeProblem, cfg: BaselineConfig, on_row=None, probe=None
) -> Trace:
    """Drive a baseline to its oracle budget; same contracts as solver.run."""
    if cfg.kind == "zpsvrg":
        return zpsvrg_run(problem, cfg, on_row=on_row, probe=probe)
    rng = np.random.default_rng(cfg.seed)
    calls = [0]
    evalf = problem.component_eval

    def ev(i, xx):
        calls[0] += 1
        return evalf(i, xx)

    x = np.zeros(problem.d) if cfg.x0 is None else np.array(cfg.x0, dtype=float)
    t0 = time.perf_counter()
    trace = _make_trace(problem, cfg)
    # the recorder's alpha only feeds the optional stationarity metric
    metric_alpha = cfg.step_size(problem, 0)
    rec = _baseline_recorder(problem, cfg, metric_alpha, trace, on_row, probe, t0)
    budget, stride = cfg.max_oracle_calls, cfg.metric_stride
    k = 0
    try:
        stop = rec.record(0, calls[0], x)
        while calls[0] < budget and not stop:
            if cfg.kind == "vanilla_zo":
                x = vanilla_zo_step(x, problem, cfg, rng, k=k, ev=ev)
            else:
                x = full_batch_zo_step(x, problem, cfg, ev=ev)
            k += 1
            if k % stride == 0:
                stop = rec.record(k, calls[0], x)
        if trace.rows[-1].iteration != k:
            rec.record(k, calls[0], x)
    except DivergenceError as err:
        raise DivergenceError(str(err), state=x, trace=trace) from None
    return trace


def zpsvrg_run(problem: CompositeProblem, cfg: BaselineConfig, on_row=None, probe=None) -> Trace:
    """Epoch-based variance-reduced ZO proximal method.

    Each epoch takes a full coordinate-sweep estimate at a snapshot point,
    then runs m inner steps whose probes are corrected by matching probes
    at the snapshot.  With m = 0 each epoch reduces to one full-batch
    step (the inner correction at the snapshot cancels exactly).
    """
    if cfg.kind != "zpsvrg":
        raise ParameterError("zpsvrg_run requires kind='zpsvrg'")
    rng = np.random.default_rng(cfg.seed)
    calls = [0]
    evalf = problem.component_eval

    def ev(i, xx):
        calls[0] += 1
        return evalf(i, xx)

    n, d = problem.n, problem.d
    x = np.zeros(d) if cfg.x0 is None else np.array(cfg.x0, dtype=float)
    alpha = cfg.step_size(problem, 0)
    prox_fn = _prox_dispatch(problem.prox_spec, alpha)
    m = cfg.epoch_len(problem)
    beta = cfg.beta
    limit_sq = cfg.divergence_limit**2
    t0 = time.perf_counter()
    trace = _make_trace(problem, cfg)
    trace.meta["alpha"] = alpha
    trace.meta["epoch_len"] = m
    rec = _baseline_recorder(problem, cfg, alpha, trace, on_row, probe, t0)
    budget, stride = cfg.max_oracle_calls, cfg.metric_stride
    k = 0
    try:
        stop = rec.record(0, calls[0], x)
        while calls[0] < budget and not stop:
            snap = x.copy()
            ghat = np.zeros(d)
            for i in range(n):
                ghat += coord_full(ev, i, snap, beta)
            ghat /= n
            _check_g(ghat, limit_sq)
            if m == 0:
                x = prox_fn(x - alpha * ghat)
                k += 1
                if k % stride == 0:
                    stop = rec.record(k, calls[0], x)
                continue
            snap_base: dict[int, float] = {}
            for _ in range(m):
                if calls[0] >= budget or stop:
                    break
                g = ghat.copy()
                for _ in range(cfg.inner_batch):
                    i = int(rng.integers(n))
                    u = _draw_direction(cfg.direction_scheme, d, rng)
                    sl_cur = _slope(ev, i, x, u, beta)
                    if i not in snap_base:
                        snap_base[i] = ev(i, snap)
                    sl_snap = _slope(ev, i, snap, u, beta, base=snap_base[i])
                    coef = d * (sl_cur - sl_snap) / cfg.inner_batch
                    if isinstance(u, (int, np.integer)):
                        g[u] += coef
                    else:
                        g += coef * u
                _check_g(g, limit_sq)
                x = prox_fn(x - alpha * g)
                k += 1
                if k % stride == 0:
                    stop = rec.record(k, calls[0], x)
        if trace.rows[-1].iteration != k:
            rec.record(k, calls[0], x)
    except DivergenceError as err:
        raise DivergenceError(str(err), state=x, trace=trace) from None
    return trace
