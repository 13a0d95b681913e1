"""Incremental variance-reduced zeroth-order solver and its run driver.

Each iteration builds a gradient estimate from the tracked d x n memory
matrix J plus a handful of fresh two-point probes,

    g = (1/n) J 1 + (d/R) * sum_{(i,u) in Rset} (probe_iu - u u' J e_i),

takes a proximal step, and refreshes the part of J selected by the
iteration's update plan.  A block-snapshot variant avoids storing J
altogether.  ``run`` drives either loop to an oracle-call budget and
records a metrics trace; metric evaluations use an uncounted channel.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable, Optional

import numpy as np

from .errors import CapabilityError, DivergenceError, ParameterError
from .estimators import coord_full
from .problems import CompositeProblem, objective_value
from .proximal import KIND_BOX, KIND_L1, KIND_ZERO, prox
from .sampling import SamplerConfig, UpdatePlan, gen_plan, memeff_partition, sigma_nu

REGIMES = ("strongly_convex", "convex", "nonconvex")


# ---------------------------------------------------------------------------
# parameter presets


def preset_alpha(regime: str, R: int, d: int, L: float, sigma: float | None = None):
    """Recommended constant step size for the given convexity regime.

    strongly_convex: R / (2L(36d + R));  convex: R / (2L(40d + R));
    nonconvex: sqrt(R)*sigma / (5 sqrt(d) L), valid only for R <= d/sigma^2.
    """
    if L <= 0:
        raise ParameterError(f"L must be positive, got {L}")
    if regime == "strongly_convex":
        return R / (2.0 * L * (36.0 * d + R))
    if regime == "convex":
        return R / (2.0 * L * (40.0 * d + R))
    if regime == "nonconvex":
        if sigma is None:
            raise ParameterError("nonconvex preset needs the sketch fraction sigma")
        if R > d / sigma**2:
            raise ParameterError(
                f"nonconvex preset requires R <= d/sigma^2 "
                f"(= {d / sigma**2:g}), got R={R}"
            )
        return math.sqrt(R) * sigma / (5.0 * math.sqrt(d) * L)
    raise ParameterError(f"unknown regime {regime!r}")


def preset_kappa(R: int, d: int, L: float, mu: float, sigma: float) -> float:
    """Per-iteration contraction constant in the strongly convex regime."""
    if mu <= 0:
        raise ParameterError(f"strong convexity constant must be > 0, got {mu}")
    if L <= 0:
        raise ParameterError(f"L must be positive, got {L}")
    return min(mu * R / (4.0 * L * (36.0 * d + R)), sigma / 4.0)


def preset_beta_strongly_convex(eps, R, d, n, L, mu) -> float:
    """Constant smoothing radius keeping the accuracy floor below eps."""
    num = R * mu**2 * eps
    den = 2.0 * d**3 * mu * n**2 * (36.0 * L + mu * n) + 2.0 * d * L**2 * R
    return math.sqrt(num / den)


def preset_beta_nonconvex(eps, R, d, n, L) -> float:
    """Constant smoothing radius for the stationarity target eps."""
    return math.sqrt(eps * n) * R**0.25 / (5.0 * math.sqrt(d**1.5 * L * (n**2 + R**2)))


def grad_map_norm(p: CompositeProblem, x: np.ndarray, alpha: float) -> float:
    """Norm of the composite stationarity map (x - prox(x - a*grad f))/a.

    Metric-only: consumes the problem's reference gradient, never the
    counted oracle.
    """
    if alpha <= 0:
        raise ParameterError(f"alpha must be > 0, got {alpha}")
    gf = p.grad_f(x)  # raises CapabilityError when unavailable
    step = prox(p.prox_spec, x - alpha * gf, alpha)
    return float(np.linalg.norm((x - step) / alpha))


# ---------------------------------------------------------------------------
# configuration and state


@dataclass(frozen=True)
class BetaSchedule:
    """Smoothing radii: constant beta0 or geometric beta0 * ratio^k."""

    kind: str = "constant"
    beta0: float = 1e-6
    ratio: float | None = None

    def __post_init__(self):
        if self.kind not in ("constant", "geometric"):
            raise ParameterError(f"unknown beta schedule {self.kind!r}")
        if self.beta0 <= 0:
            raise ParameterError(f"beta0 must be > 0, got {self.beta0}")
        if self.kind == "geometric":
            if self.ratio is None or not 0.0 < self.ratio < 1.0:
                raise ParameterError(
                    "geometric schedule needs ratio in (0, 1) so the radii "
                    f"are summable, got {self.ratio}"
                )

    def value(self, k: int) -> float:
        if self.kind == "constant":
            return self.beta0
        return self.beta0 * self.ratio**k


@dataclass(frozen=True)
class RunConfig:
    """Everything one solver run needs besides the problem itself.

    ``alpha`` is either a positive number or a regime name resolved through
    ``preset_alpha``.  Metric rows are appended every ``metric_stride``
    iterations through the uncounted channel.
    """

    sampler: SamplerConfig
    alpha: float | str
    beta: BetaSchedule = BetaSchedule()
    max_oracle_calls: int = 10_000
    metric_stride: int = 1000
    seed: int = 0
    x0: Optional[np.ndarray] = None
    warm_start_jacobian: bool = False
    href: Optional[float] = None
    record_grad_map: bool = False
    divergence_limit: float = 1e12
    label: str = ""

    def __post_init__(self):
        if isinstance(self.alpha, str):
            if self.alpha not in REGIMES:
                raise ParameterError(
                    f"alpha must be a positive number or one of {REGIMES}, "
                    f"got {self.alpha!r}"
                )
        elif not self.alpha > 0:
            raise ParameterError(f"alpha must be > 0, got {self.alpha}")
        if self.max_oracle_calls < 0:
            raise ParameterError("max_oracle_calls must be >= 0")
        if self.metric_stride < 1:
            raise ParameterError("metric_stride must be >= 1")

    def resolved_alpha(self, problem: CompositeProblem) -> float:
        if isinstance(self.alpha, str):
            sn = sigma_nu(self.sampler)
            return preset_alpha(
                self.alpha,
                self.sampler.R,
                self.sampler.d,
                problem.smoothness_L,
                sigma=sn.sigma,
            )
        return float(self.alpha)


@dataclass
class SolverState:
    """Iterate, tracked Jacobian, and counters for the matrix-form solver.

    ``jsum`` caches J summed over components (the J*1 vector); it is
    maintained incrementally and always equals J @ ones.
    """

    x: np.ndarray
    J: np.ndarray
    k: int = 0
    oracle_calls: int = 0
    jsum: np.ndarray | None = None
    last_g: np.ndarray | None = None
    last_plan: UpdatePlan | None = None

    def __post_init__(self):
        if self.jsum is None:
            self.jsum = self.J.sum(axis=1)

    @classmethod
    def initial(cls, problem: CompositeProblem, x0: np.ndarray | None = None):
        x = np.zeros(problem.d) if x0 is None else np.array(x0, dtype=float)
        J = np.zeros((problem.d, problem.n))
        return cls(x=x, J=J)


@dataclass
class MemEffState:
    """State of the block-snapshot solver: no J matrix is stored.

    ``g_tilde`` tracks (1/n) J 1 for the implied Jacobian whose (j, i)
    entry is the coordinate probe of component i at the snapshot point of
    the block containing cell (i, j).
    """

    x: np.ndarray
    g_tilde: np.ndarray
    snapshots: np.ndarray  # (B, d)
    k: int = 0
    oracle_calls: int = 0
    last_g: np.ndarray | None = None
    last_plan: UpdatePlan | None = None


@dataclass
class TraceRow:
    oracle_calls: int
    iteration: int
    objective: float
    gap: Optional[float] = None
    grad_map_norm: Optional[float] = None
    wall_ms: float = 0.0


@dataclass
class Trace:
    """Per-run metric rows; oracle_calls strictly increase down the rows."""

    rows: list[TraceRow] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    CSV_HEADER = "oracle_calls,iter,objective,gap,grad_map_norm,wall_ms"

    def final(self) -> TraceRow:
        return self.rows[-1]

    def write_csv(self, fh) -> None:
        fh.write(self.CSV_HEADER + "\n")
        for r in self.rows:
            fh.write(format_trace_row(r) + "\n")


def format_trace_row(r: TraceRow) -> str:
    gap = "" if r.gap is None else repr(float(r.gap))
    gmn = "" if r.grad_map_norm is None else repr(float(r.grad_map_norm))
    return (
        f"{r.oracle_calls},{r.iteration},{float(r.objective)!r},{gap},{gmn},"
        f"{float(r.wall_ms)!r}"
    )


def parse_trace_csv(fh) -> Trace:
    header = fh.readline().strip()
    if header != Trace.CSV_HEADER:
        raise ParameterError(f"unexpected trace header {header!r}")
    rows = []
    for line in fh:
        line = line.strip()
        if not line:
            continue
        calls, it, obj, gap, gmn, wall = line.split(",")
        rows.append(
            TraceRow(
                oracle_calls=int(calls),
                iteration=int(it),
                objective=float(obj),
                gap=float(gap) if gap else None,
                grad_map_norm=float(gmn) if gmn else None,
                wall_ms=float(wall),
            )
        )
    return Trace(rows=rows)


# ---------------------------------------------------------------------------
# core step mechanics (shared by the functional steps and the run driver)


def _prox_dispatch(spec, alpha):
    if spec.kind == KIND_ZERO:
        return lambda v: v
    if spec.kind == KIND_L1:
        thr = alpha * spec.lam
        if thr == 0.0:
            return lambda v: v
        return lambda v: np.sign(v) * np.maximum(np.abs(v) - thr, 0.0)
    if spec.kind == KIND_BOX:
        lo, hi = spec.lo, spec.hi
        return lambda v: np.clip(v, lo, hi)
    raise ParameterError(f"unknown prox kind {spec.kind!r}")


class _Probes:
    """Per-iteration slope cache: one base call per component, one
    perturbed call per distinct (component, coordinate) pair."""

    __slots__ = ("ev", "x", "beta", "base", "pert")

    def __init__(self, ev, x, beta):
        self.ev = ev
        self.x = x
        self.beta = beta
        self.base = {}
        self.pert = {}

    def slope(self, i, u):
        base = self.base.get(i)
        if base is None:
            base = self.ev(i, self.x)
            self.base[i] = base
        if isinstance(u, (int, np.integer)):
            key = (i, int(u))
            sl = self.pert.get(key)
            if sl is None:
                x = self.x
                j = key[1]
                old = x[j]
                x[j] = old + self.beta
                sl = (self.ev(i, x) - base) / self.beta
                x[j] = old
                self.pert[key] = sl
            return sl
        xp = self.x + self.beta * u
        return (self.ev(i, xp) - base) / self.beta


def _apply_pair(J, jsum, i, u, slope):
    """One masked Jacobian cell/column-direction refresh, in place."""
    if isinstance(u, (int, np.integer)):
        j = int(u)
        delta = slope - J[j, i]
        J[j, i] = slope
        jsum[j] += delta
    else:
        coef = slope - float(u @ J[:, i])
        upd = coef * u
        J[:, i] += upd
        jsum += upd


def gradient_estimate(oracle, x, J, Rset, beta, jsum=None):
    """Variance-reduced estimate (1/n) J 1 + (d/R) sum (probe - u u' J e_i).

    ``oracle`` is a counted callable (i, x) -> value; base values are
    cached per component inside this call.
    """
    J = np.asarray(J, dtype=float)
    d, n = J.shape
    x = np.array(x, dtype=float)  # private copy: probes perturb in place
    if jsum is None:
        jsum = J.sum(axis=1)
    probes = _Probes(oracle, x, beta)
    g = jsum / n
    d_over_R = d / len(Rset)
    for i, u in Rset:
        sl = probes.slope(i, u)
        if isinstance(u, (int, np.integer)):
            g[int(u)] += d_over_R * (sl - J[int(u), i])
        else:
            g += (d_over_R * (sl - float(u @ J[:, i]))) * u
    return g


def _zivr_iteration(ev, x, J, jsum, plan, beta, alpha, prox_fn, n, limit_sq):
    """One matrix-form iteration; mutates J/jsum (and x transiently).

    Returns (g, x_next).  Raises DivergenceError on a non-finite or
    oversized estimate.
    """
    d = len(x)
    d_over_R = d / len(plan.Rset)
    inv_n = 1.0 / n
    probes = _Probes(ev, x, beta)
    g = jsum * inv_n
    r_slopes = []
    for i, u in plan.Rset:
        sl = probes.slope(i, u)
        r_slopes.append(sl)
        if isinstance(u, (int, np.integer)):
            j = int(u)
            g[j] += d_over_R * (sl - J[j, i])
        else:
            g += (d_over_R * (sl - float(u @ J[:, i]))) * u
    gg = float(g @ g)
    if not gg <= limit_sq:
        raise DivergenceError(
            f"gradient estimate blew up (|g|^2 = {gg!r}); last finite state attached"
        )
    x_next = prox_fn(x - alpha * g)
    if plan.omega:
        if plan.s_is_rset:
            for (i, u), sl in zip(plan.Rset, r_slopes):
                _apply_pair(J, jsum, i, u, sl)
        else:
            for i, u in plan.S:
                _apply_pair(J, jsum, i, u, probes.slope(i, u))
    return g, x_next


def zivr_step(
    state: SolverState, problem: CompositeProblem, cfg: RunConfig, rng
) -> SolverState:
    """One iteration of the matrix-form solver (functional; copies state)."""
    scfg = cfg.sampler
    if scfg.n != problem.n or scfg.d != problem.d:
        raise ParameterError("sampler dimensions do not match the problem")
    if scfg.variant == "memeff":
        raise ParameterError("use memeff_step for the block-snapshot variant")
    calls = [state.oracle_calls]
    evalf = problem.component_eval

    def ev(i, xx):
        calls[0] += 1
        return evalf(i, xx)

    beta = cfg.beta.value(state.k)
    alpha = cfg.resolved_alpha(problem)
    prox_fn = _prox_dispatch(problem.prox_spec, alpha)
    plan = gen_plan(scfg, rng)
    x = state.x.copy()
    J = state.J.copy()
    jsum = state.jsum.copy()
    g, x_next = _zivr_iteration(
        ev, x, J, jsum, plan, beta, alpha, prox_fn, problem.n,
        cfg.divergence_limit**2,
    )
    return SolverState(
        x=x_next,
        J=J,
        k=state.k + 1,
        oracle_calls=calls[0],
        jsum=jsum,
        last_g=g,
        last_plan=plan,
    )


# ---------------------------------------------------------------------------
# block-snapshot (memory-efficient) variant


@lru_cache(maxsize=32)
def _partition_cache(n, d, B):
    blocks = memeff_partition(n, d, B)
    block_of = np.empty((n, d), dtype=np.int64)
    for l, (bi, bj) in enumerate(blocks):
        block_of[bi, bj] = l
    return blocks, block_of


class _SnapshotProbes:
    """Slope caches for the current point and every snapshot point."""

    __slots__ = ("cur", "ev", "snapshots", "beta", "base", "pert")

    def __init__(self, ev, x, snapshots, beta):
        self.cur = _Probes(ev, x, beta)
        self.ev = ev
        self.snapshots = snapshots
        self.beta = beta
        self.base = {}
        self.pert = {}

    def slope_snap(self, l, i, j):
        key = (l, i, j)
        sl = self.pert.get(key)
        if sl is not None:
            return sl
        bkey = (l, i)
        base = self.base.get(bkey)
        x = self.snapshots[l]
        if base is None:
            base = self.ev(i, x)
            self.base[bkey] = base
        old = x[j]
        x[j] = old + self.beta
        sl = (self.ev(i, x) - base) / self.beta
        x[j] = old
        self.pert[key] = sl
        return sl


def memeff_init(
    problem: CompositeProblem,
    cfg: RunConfig,
    x0: np.ndarray | None = None,
    warm: bool = True,
) -> MemEffState:
    """Initial block-snapshot state at x0 (default zero).

    With ``warm`` the running average g_tilde is seeded by a full
    coordinate sweep over all components, costing n*(d+1) counted calls;
    this makes g_tilde consistent with the implied Jacobian at x0.
    """
    scfg = cfg.sampler
    if scfg.variant != "memeff":
        raise ParameterError("memeff_init requires a memeff sampler config")
    x = np.zeros(problem.d) if x0 is None else np.array(x0, dtype=float)
    snapshots = np.tile(x, (scfg.B, 1))
    calls = 0
    g_tilde = np.zeros(problem.d)
    if warm:
        beta = cfg.beta.value(0)
        counter = [0]
        evalf = problem.component_eval

        def ev(i, xx):
            counter[0] += 1
            return evalf(i, xx)

        for i in range(problem.n):
            g_tilde += coord_full(ev, i, x, beta)
        g_tilde /= problem.n
        calls = counter[0]
    return MemEffState(
        x=x, g_tilde=g_tilde, snapshots=snapshots, k=0, oracle_calls=calls
    )


def _memeff_iteration(
    ev, x, g_tilde, snapshots, plan, beta, alpha, prox_fn, n, blocks, limit_sq
):
    """One block-snapshot iteration; mutates g_tilde/snapshots in place."""
    d = len(x)
    d_over_R = d / len(plan.Rset)
    probes = _SnapshotProbes(ev, x, snapshots, beta)
    g = g_tilde.copy()
    for i, j in plan.Rset:
        l = blocks.block_of[i, j]
        diff = probes.cur.slope(i, j) - probes.slope_snap(l, i, j)
        g[j] += d_over_R * diff
    gg = float(g @ g)
    if not gg <= limit_sq:
        raise DivergenceError(
            f"gradient estimate blew up (|g|^2 = {gg!r}); last finite state attached"
        )
    if plan.omega:
        l = plan.block
        bi, bj = blocks.blocks[l]
        inv_n = 1.0 / n
        for i, j in zip(bi.tolist(), bj.tolist()):
            diff = probes.cur.slope(i, j) - probes.slope_snap(l, i, j)
            g_tilde[j] += diff * inv_n
        snapshots[l] = x
    return g, prox_fn(x - alpha * g)


class _Blocks:
    __slots__ = ("blocks", "block_of")

    def __init__(self, n, d, B):
        self.blocks, self.block_of = _partition_cache(n, d, B)


def memeff_step(
    state: MemEffState, problem: CompositeProblem, cfg: RunConfig, rng
) -> MemEffState:
    """One iteration of the block-snapshot solver (functional)."""
    scfg = cfg.sampler
    if scfg.variant != "memeff":
        raise ParameterError("memeff_step requires a memeff sampler config")
    if scfg.n != problem.n or scfg.d != problem.d:
        raise ParameterError("sampler dimensions do not match the problem")
    calls = [state.oracle_calls]
    evalf = problem.component_eval

    def ev(i, xx):
        calls[0] += 1
        return evalf(i, xx)

    beta = cfg.beta.value(state.k)
    alpha = cfg.resolved_alpha(problem)
    prox_fn = _prox_dispatch(problem.prox_spec, alpha)
    plan = gen_plan(scfg, rng)
    x = state.x.copy()
    g_tilde = state.g_tilde.copy()
    snapshots = state.snapshots.copy()
    blocks = _Blocks(scfg.n, scfg.d, scfg.B)
    g, x_next = _memeff_iteration(
        ev, x, g_tilde, snapshots, plan, beta, alpha, prox_fn, problem.n,
        blocks, cfg.divergence_limit**2,
    )
    return MemEffState(
        x=x_next,
        g_tilde=g_tilde,
        snapshots=snapshots,
        k=state.k + 1,
        oracle_calls=calls[0],
        last_g=g,
        last_plan=plan,
    )


# ---------------------------------------------------------------------------
# run driver


class _Recorder:
    def __init__(self, problem, cfg, alpha, trace, on_row, probe, t0):
        self.problem = problem
        self.cfg = cfg
        self.alpha = alpha
        self.trace = trace
        self.on_row = on_row
        self.probe = probe
        self.t0 = t0
        href = cfg.href
        if href is None and problem.known_optimum is not None:
            href = problem.known_optimum[1]
        self.href = href

    def record(self, k, calls, x) -> bool:
        """Append a metric row; returns True when the probe asks to stop."""
        obj = objective_value(self.problem, x)
        if not obj <= self.cfg.divergence_limit:
            raise DivergenceError(f"objective blew up ({obj!r})")
        gap = None if self.href is None else obj - self.href
        gmn = None
        if self.cfg.record_grad_map:
            gmn = grad_map_norm(self.problem, x, self.alpha)
        row = TraceRow(
            oracle_calls=calls,
            iteration=k,
            objective=obj,
            gap=gap,
            grad_map_norm=gmn,
            wall_ms=(time.perf_counter() - self.t0) * 1e3,
        )
        self.trace.rows.append(row)
        if self.on_row is not None:
            self.on_row(row)
        if self.probe is not None:
            return bool(self.probe(k, calls, x))
        return False


def run(
    problem: CompositeProblem,
    cfg: RunConfig,
    on_row: Callable[[TraceRow], None] | None = None,
    probe: Callable[[int, int, np.ndarray], bool] | None = None,
) -> Trace:
    """Drive one solver run to its oracle budget and collect the trace.

    Deterministic given (cfg, seed): the same configuration reproduces the
    same iterates, oracle counts and metric values exactly.  ``on_row``
    streams metric rows as they are produced; ``probe`` (internal/test
    hook) is called at every metric row and may stop the run early by
    returning True.  Raises DivergenceError with the partial trace attached
    if the run blows up.
    """
    scfg = cfg.sampler
    if scfg.n != problem.n or scfg.d != problem.d:
        raise ParameterError(
            f"sampler dims (n={scfg.n}, d={scfg.d}) do not match problem "
            f"(n={problem.n}, d={problem.d})"
        )
    rng = np.random.default_rng(cfg.seed)
    alpha = cfg.resolved_alpha(problem)
    sn = sigma_nu(scfg)
    t0 = time.perf_counter()
    trace = Trace(
        meta={
            "solver": f"zivr_{scfg.variant}",
            "label": cfg.label or f"zivr_{scfg.variant}_R{scfg.R}",
            "seed": cfg.seed,
            "alpha": alpha,
            "sigma": sn.sigma,
            "nu": sn.nu,
            "R": scfg.R,
            "beta0": cfg.beta.beta0,
            "beta_kind": cfg.beta.kind,
            "max_oracle_calls": cfg.max_oracle_calls,
        }
    )
    rec = _Recorder(problem, cfg, alpha, trace, on_row, probe, t0)
    try:
        if scfg.variant == "memeff":
            _drive_memeff(problem, cfg, rng, alpha, rec)
        else:
            _drive_zivr(problem, cfg, rng, alpha, rec)
    except DivergenceError as err:
        raise DivergenceError(str(err), state=err.state, trace=trace) from None
    return trace


def _drive_zivr(problem, cfg, rng, alpha, rec):
    scfg = cfg.sampler
    n = problem.n
    calls = [0]
    evalf = problem.component_eval

    def ev(i, xx):
        calls[0] += 1
        return evalf(i, xx)

    x = np.zeros(problem.d) if cfg.x0 is None else np.array(cfg.x0, dtype=float)
    J = np.zeros((problem.d, n))
    if cfg.warm_start_jacobian:
        beta0 = cfg.beta.value(0)
        for i in range(n):
            J[:, i] = coord_full(ev, i, x, beta0)
    jsum = J.sum(axis=1)
    prox_fn = _prox_dispatch(problem.prox_spec, alpha)
    limit_sq = cfg.divergence_limit**2
    budget = cfg.max_oracle_calls
    stride = cfg.metric_stride
    beta_sched = cfg.beta
    const_beta = beta_sched.beta0 if beta_sched.kind == "constant" else None
    k = 0
    stop = rec.record(0, calls[0], x)
    try:
        while calls[0] < budget and not stop:
            beta = const_beta if const_beta is not None else beta_sched.value(k)
            plan = gen_plan(scfg, rng)
            _, x = _zivr_iteration(
                ev, x, J, jsum, plan, beta, alpha, prox_fn, n, limit_sq
            )
            k += 1
            if k % stride == 0:
                stop = rec.record(k, calls[0], x)
    except DivergenceError as err:
        err.state = SolverState(x=x, J=J, k=k, oracle_calls=calls[0], jsum=jsum)
        raise
    if not rec.trace.rows or rec.trace.rows[-1].iteration != k:
        rec.record(k, calls[0], x)


def _drive_memeff(problem, cfg, rng, alpha, rec):
    scfg = cfg.sampler
    n = problem.n
    state = memeff_init(problem, cfg, x0=cfg.x0, warm=True)
    calls = [state.oracle_calls]
    evalf = problem.component_eval

    def ev(i, xx):
        calls[0] += 1
        return evalf(i, xx)

    x = state.x
    g_tilde = state.g_tilde
    snapshots = state.snapshots
    blocks = _Blocks(scfg.n, scfg.d, scfg.B)
    prox_fn = _prox_dispatch(problem.prox_spec, alpha)
    limit_sq = cfg.divergence_limit**2
    budget = cfg.max_oracle_calls
    stride = cfg.metric_stride
    k = 0
    stop = rec.record(0, calls[0], x)
    try:
        while calls[0] < budget and not stop:
            beta = cfg.beta.value(k)
            plan = gen_plan(scfg, rng)
            _, x = _memeff_iteration(
                ev, x, g_tilde, snapshots, plan, beta, alpha, prox_fn, n,
                blocks, limit_sq,
            )
            k += 1
            if k % stride == 0:
                stop = rec.record(k, calls[0], x)
    except DivergenceError as err:
        err.state = MemEffState(
            x=x, g_tilde=g_tilde, snapshots=snapshots, k=k, oracle_calls=calls[0]
        )
        raise
    if not rec.trace.rows or rec.trace.rows[-1].iteration != k:
        rec.record(k, calls[0], x)
