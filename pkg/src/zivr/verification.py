"""Independent numerical oracles: finite differences, Monte-Carlo
expectation checks with confidence intervals, brute-force enumerations on
tiny instances, a first-order reference solver, and the check battery
behind the ``verify`` CLI subcommand.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .errors import CapabilityError, EvaluationError, ParameterError
from .estimators import SCHEME_COORDINATE, SCHEME_SPHERICAL
from .problems import CompositeProblem
from .proximal import prox
from .sampling import SamplerConfig, apply_P, gen_plan, sigma_nu


@dataclass
class MCReport:
    """Outcome of a streaming Monte-Carlo expectation check.

    Passes when every component of |mean - target| lies within
    k_sigma standard errors; components with zero standard error must
    match the target exactly.  ``worst_z`` is the largest deviation in
    standard-error units (inf marks an exact-match failure).  With many
    components the per-component false-alarm rate is not corrected, so
    keep k_sigma generous (default 4, about 6e-5 per component).
    """

    mean: np.ndarray
    stderr: np.ndarray
    samples: int
    target: np.ndarray
    k_sigma: float
    passed: bool
    worst_z: float
    description: str = ""

    def summary(self) -> str:
        status = "pass" if self.passed else "FAIL"
        return (
            f"[{status}] {self.description or 'mc-check'}: "
            f"samples={self.samples}, k={self.k_sigma:g}, worst |z|={self.worst_z:.3g}"
        )


def mc_expectation(sampler, n_samples: int, target, k_sigma: float = 4.0,
                   description: str = "") -> MCReport:
    """Stream n_samples draws of ``sampler()`` and test their mean.

    Uses a running mean/variance so memory stays at one sample's size.
    """
    if n_samples < 100:
        raise ParameterError(f"need at least 100 samples, got {n_samples}")
    target = np.asarray(target, dtype=float)
    mean = np.zeros_like(target)
    m2 = np.zeros_like(target)
    for t in range(1, n_samples + 1):
        x = np.asarray(sampler(), dtype=float)
        delta = x - mean
        mean += delta / t
        m2 += delta * (x - mean)
    stderr = np.sqrt(m2 / (n_samples - 1) / n_samples)
    dev = np.abs(mean - target)
    exact = stderr == 0.0
    ok_exact = dev[exact] == 0.0 if exact.any() else np.array([], dtype=bool)
    with np.errstate(invalid="ignore", divide="ignore"):
        z = np.where(exact, np.where(dev == 0.0, 0.0, np.inf), dev / stderr)
    passed = bool(np.all(z <= k_sigma)) and bool(np.all(ok_exact))
    worst = float(np.max(z)) if z.size else 0.0
    return MCReport(
        mean=mean,
        stderr=stderr,
        samples=n_samples,
        target=target,
        k_sigma=k_sigma,
        passed=passed,
        worst_z=worst,
        description=description,
    )


def fd_gradient(oracle, i: int, x: np.ndarray, h: float) -> np.ndarray:
    """Central-difference gradient of f_i at x using only function values."""
    if h <= 0:
        raise ParameterError(f"step h must be > 0, got {h}")
    x = np.asarray(x, dtype=float)
    d = len(x)
    g = np.empty(d)
    xp = x.copy()
    for j in range(d):
        xp[j] = x[j] + h
        fp = oracle(i, xp)
        xp[j] = x[j] - h
        fm = oracle(i, xp)
        xp[j] = x[j]
        g[j] = (fp - fm) / (2.0 * h)
    if not np.all(np.isfinite(g)):
        raise EvaluationError(f"non-finite central difference for component {i}")
    return g


def enumerate_impl1(n: int, d: int, R: int, A: np.ndarray) -> np.ndarray:
    """Exact average of P(A) over every R-subset of the (i, j) grid with
    coordinate directions; equals (R/(n d)) * A.

    Refuses instances with more than 1e6 subsets.
    """
    A = np.asarray(A, dtype=float)
    if A.shape != (d, n):
        raise ParameterError(f"A must be d x n = {(d, n)}, got {A.shape}")
    total = math.comb(n * d, R)
    if total > 10**6:
        raise CapabilityError(
            f"enumeration over C({n * d},{R}) = {total} subsets is too large"
        )
    counts = np.zeros((d, n), dtype=np.int64)
    cells = range(n * d)
    for subset in combinations(cells, R):
        for cell in subset:
            i, j = divmod(cell, d)
            counts[j, i] += 1
    return (counts / total) * A


def project_identity_gap(S, A: np.ndarray) -> float:
    """|  ||P(A)||_F^2 - <P(A), A>  | for one plan; zero in exact arithmetic."""
    PA = apply_P(S, A)
    return abs(float(np.sum(PA * PA)) - float(np.sum(PA * A)))


# ---------------------------------------------------------------------------
# first-order reference solver (tests and metrics only)


def reference_minimize(
    problem: CompositeProblem,
    tol: float = 1e-10,
    max_iter: int = 200_000,
    x0: np.ndarray | None = None,
) -> tuple[np.ndarray, float]:
    """High-accuracy composite minimizer via accelerated proximal descent.

    Uses the problem's analytic full gradient (uncounted channel) with
    function-value restarts; stops when the stationarity map norm falls
    below tol * (1 + initial norm).  Returns (x, h(x)).
    """
    if problem.full_gradient is None and problem.reference_gradient is None:
        raise CapabilityError("reference solve needs an analytic gradient")
    grad = problem.grad_f
    L = problem.smoothness_L
    step = 1.0 / L
    x = np.zeros(problem.d) if x0 is None else np.array(x0, dtype=float)
    y = x.copy()
    t = 1.0
    spec = problem.prox_spec
    from .solver import grad_map_norm  # late import avoids a module cycle

    scale = 1.0 + grad_map_norm(problem, x, step)
    f_prev = problem.objective(x)
    check_every = 50
    for it in range(1, max_iter + 1):
        x_new = prox(spec, y - step * grad(y), step)
        t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        y = x_new + ((t - 1.0) / t_new) * (x_new - x)
        x, t = x_new, t_new
        if it % check_every == 0:
            f_cur = problem.objective(x)
            if f_cur > f_prev:  # momentum overshoot: restart
                y = x.copy()
                t = 1.0
            f_prev = f_cur
            if grad_map_norm(problem, x, step) <= tol * scale:
                break
    return x, problem.objective(x)


# ---------------------------------------------------------------------------
# the verify battery


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ""
    report: MCReport | None = None

    def line(self) -> str:
        status = "pass" if self.passed else "FAIL"
        return f"[{status}] {self.name}: {self.detail}"


def _check_projection_identity(rng, n_plans=1000) -> CheckResult:
    worst = 0.0
    variants = ("impl1", "impl2", "impl3", "memeff")
    for t in range(n_plans):
        n = int(rng.integers(2, 11))
        d = int(rng.integers(2, 11))
        variant = variants[t % 4]
        B = int(rng.integers(1, n)) if variant == "memeff" else None
        r_hi = n * d // B if variant == "memeff" else n * d
        R = int(rng.integers(1, max(r_hi, 1) + 1))
        cfg = SamplerConfig(
            variant=variant,
            n=n,
            d=d,
            R=R,
            B=B,
            direction_scheme_S=("coordinate", "fresh_orthogonal")[t % 2],
            direction_scheme_R=("coordinate", "spherical")[(t // 2) % 2],
        )
        A = rng.standard_normal((d, n))
        plan = gen_plan(cfg, rng)
        gap = project_identity_gap(plan.S, A)
        rel = gap / (1.0 + float(np.sum(A * A)))
        worst = max(worst, rel)
    passed = worst <= 1e-12
    return CheckResult(
        "projection_identity",
        passed,
        f"worst relative identity gap {worst:.3e} over {n_plans} plans (tol 1e-12)",
    )


def _sketch_configs(R_values=(1, 2, 6)):
    out = []
    for variant in ("impl1", "impl2", "impl3", "memeff"):
        for R in R_values:
            out.append(
                SamplerConfig(
                    variant=variant, n=3, d=4, R=R,
                    B=2 if variant == "memeff" else None,
                )
            )
    return out


def _check_sketch_unbiasedness(rng, samples=100_000, sigma_scale=1.0):
    results = []
    for cfg in _sketch_configs():
        A = rng.standard_normal((cfg.d, cfg.n))
        target = sigma_scale * sigma_nu(cfg).sigma * A

        def draw(cfg=cfg, A=A):
            plan = gen_plan(cfg, rng)
            if plan.omega == 0:
                return np.zeros_like(A)
            return apply_P(plan.S, A)

        rep = mc_expectation(
            draw, samples, target, k_sigma=4.0,
            description=f"sketch mean, {cfg.variant} R={cfg.R}",
        )
        results.append(
            CheckResult(
                f"sketch_unbiasedness[{cfg.variant},R={cfg.R}]",
                rep.passed,
                rep.summary(),
                report=rep,
            )
        )
    return results


def _check_workload(rng, samples=20_000):
    results = []
    for cfg in _sketch_configs():
        nu = sigma_nu(cfg).nu

        def draw(cfg=cfg):
            plan = gen_plan(cfg, rng)
            return np.array([plan.omega * len(plan.S)], dtype=float)

        rep = mc_expectation(
            draw, samples, np.array([nu]), k_sigma=4.0,
            description=f"update workload, {cfg.variant} R={cfg.R}",
        )
        results.append(
            CheckResult(
                f"workload[{cfg.variant},R={cfg.R}]", rep.passed, rep.summary(),
                report=rep,
            )
        )
    return results


def _check_two_point_bias(rng, trials=10_000) -> CheckResult:
    """On quadratics the probe error along u is exactly (beta/2) u'Hu and
    bounded by L*beta/2."""
    from .estimators import two_point

    worst_eq = 0.0
    ok_bound = True
    for _ in range(trials):
        d = int(rng.integers(1, 21))
        evals = 0.1 + 4.9 * rng.random(d)
        q, r = np.linalg.qr(rng.standard_normal((d, d)))
        q *= np.sign(np.diag(r))
        H = (q * evals) @ q.T
        L = float(evals.max())
        c = rng.standard_normal(d)
        x = rng.standard_normal(d)
        u = rng.standard_normal(d)
        u /= np.linalg.norm(u)
        beta = 10.0 ** rng.uniform(-3, 0)

        def oracle(i, z):
            w = z - c
            return 0.5 * float(w @ (H @ w))

        est = two_point(oracle, 0, x, u, beta)
        err = float(np.linalg.norm(est - u * float(u @ (H @ (x - c)))))
        expected = 0.5 * beta * abs(float(u @ (H @ u)))
        worst_eq = max(worst_eq, abs(err - expected) / (1.0 + expected))
        if err > 0.5 * L * beta * (1.0 + 1e-9):
            ok_bound = False
    passed = worst_eq <= 1e-10 and ok_bound
    return CheckResult(
        "two_point_bias",
        passed,
        f"worst identity gap {worst_eq:.3e} (tol 1e-10); bound "
        f"{'held' if ok_bound else 'VIOLATED'} over {trials} trials",
    )


def _check_estimator_bias(rng, samples=200_000) -> list[CheckResult]:
    """Mean of the variance-reduced estimate stays within sqrt(d)*L*beta/2
    of the true gradient, for both direction schemes."""
    from .problems import make_synthetic_quadratic
    from .solver import gradient_estimate
    from .sampling import sample_components

    problem = make_synthetic_quadratic(n=6, d=5, cond=10.0, seed=11)
    d, n = problem.d, problem.n
    x = rng.standard_normal(d)
    J = rng.standard_normal((d, n))
    jsum = J.sum(axis=1)
    grad = problem.grad_f(x)
    L = problem.smoothness_L
    beta = 1e-2
    results = []
    for scheme in (SCHEME_COORDINATE, SCHEME_SPHERICAL):
        acc = np.zeros(d)
        m2 = np.zeros(d)
        for t in range(1, samples + 1):
            comps = sample_components(rng, n, 1)
            if scheme == SCHEME_COORDINATE:
                u = int(rng.integers(d))
            else:
                u = rng.standard_normal(d)
                u /= np.linalg.norm(u)
            g = gradient_estimate(
                lambda i, z: problem.component_eval(i, z),
                x, J, [(int(comps[0]), u)], beta, jsum=jsum,
            )
            delta = g - acc
            acc += delta / t
            m2 += delta * (g - acc)
        stderr = np.sqrt(m2 / (samples - 1) / samples)
        bias = float(np.linalg.norm(acc - grad))
        bound = 0.5 * math.sqrt(d) * L * beta + 4.0 * float(np.linalg.norm(stderr))
        results.append(
            CheckResult(
                f"estimator_bias[{scheme}]",
                bias <= bound,
                f"|mean - grad| = {bias:.3e} vs bound {bound:.3e} "
                f"({samples} draws, beta={beta:g})",
            )
        )
    return results


def _check_block_coupling(rng, steps=200) -> CheckResult:
    """The block-snapshot estimate matches the matrix-form estimate built
    from an explicitly maintained snapshot Jacobian, step for step."""
    from .problems import make_synthetic_quadratic
    from .sampling import memeff_partition
    from .solver import BetaSchedule, MemEffState, RunConfig, memeff_init, memeff_step

    n, d, B, R = 12, 6, 3, 2
    problem = make_synthetic_quadratic(n=n, d=d, cond=5.0, seed=3)
    beta = 1e-3
    cfg = RunConfig(
        sampler=SamplerConfig(variant="memeff", n=n, d=d, R=R, B=B),
        alpha=0.05,
        beta=BetaSchedule("constant", beta),
        seed=0,
    )
    blocks = memeff_partition(n, d, B)
    block_of = np.empty((n, d), dtype=int)
    for l, (bi, bj) in enumerate(blocks):
        block_of[bi, bj] = l

    def probe(i, j, point):
        xp = point.copy()
        xp[j] += beta
        return (problem.component_eval(i, xp) - problem.component_eval(i, point)) / beta

    state = memeff_init(problem, cfg, warm=True)
    snap_points = [state.x.copy() for _ in range(B)]
    shadow = np.empty((d, n))
    for i in range(n):
        for j in range(d):
            shadow[j, i] = probe(i, j, snap_points[block_of[i, j]])
    worst = 0.0
    for _ in range(steps):
        x_before = state.x.copy()
        new_state = memeff_step(state, problem, cfg, rng)
        plan = new_state.last_plan
        g_ref = shadow.sum(axis=1) / n
        for i, j in plan.Rset:
            g_ref[j] += (d / R) * (probe(i, j, x_before) - shadow[j, i])
        rel = float(
            np.linalg.norm(new_state.last_g - g_ref)
            / (1.0 + np.linalg.norm(g_ref))
        )
        worst = max(worst, rel)
        if plan.omega:
            bi, bj = blocks[plan.block]
            snap_points[plan.block] = x_before
            for i, j in zip(bi.tolist(), bj.tolist()):
                shadow[j, i] = probe(i, j, x_before)
        state = new_state
    passed = worst <= 1e-10
    return CheckResult(
        "block_coupling",
        passed,
        f"worst relative estimate mismatch {worst:.3e} over {steps} steps (tol 1e-10)",
    )


def battery(seed: int = 0, samples_scale: float = 1.0, sigma_scale: float = 1.0):
    """Run the full verification battery; returns a list of CheckResults.

    ``sigma_scale`` is a fault-injection hook: values other than 1 shift
    the sketch-unbiasedness targets and must make the battery fail.
    """
    rng = np.random.default_rng(seed)
    scale = max(samples_scale, 0.01)
    results = [_check_projection_identity(rng, n_plans=max(100, int(1000 * scale)))]
    results += _check_sketch_unbiasedness(
        rng, samples=max(1000, int(100_000 * scale)), sigma_scale=sigma_scale
    )
    results += _check_workload(rng, samples=max(1000, int(20_000 * scale)))
    results.append(_check_two_point_bias(rng, trials=max(200, int(10_000 * scale))))
    results += _check_estimator_bias(rng, samples=max(2000, int(200_000 * scale)))
    results.append(_check_block_coupling(rng, steps=max(20, int(200 * scale))))
    return results
