"""Per-iteration randomness for the incremental Jacobian solvers.

Each iteration draws an update mask ``omega``, a set ``S`` of
(component, direction) pairs that decides which part of the tracked
Jacobian gets refreshed, and a set ``Rset`` of pairs feeding the gradient
estimate.  Four update strategies are shipped:

* ``impl1`` -- always update; the refreshed pairs coincide with the
  gradient-probe pairs, so one two-point probe serves both purposes and an
  iteration costs exactly two oracle calls per pair.
* ``impl2`` -- with probability min(R/d, 1) refresh a few whole columns
  along d orthogonal directions.
* ``impl3`` -- with probability R/(nd) refresh the entire matrix.
* ``memeff`` -- block form used by the memory-efficient solver: with
  probability B*R/(nd) refresh one of B fixed blocks partitioning the
  (component, coordinate) grid.

All four satisfy E[omega * P(A)] = sigma * A with the sigma reported by
``sigma_nu``, and keep the per-component direction sets orthonormal.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError
from .estimators import (
    SCHEME_COORDINATE,
    SCHEME_SPHERICAL,
    random_orthogonal,
    sample_direction,
)

VARIANTS = ("impl1", "impl2", "impl3", "memeff")

SCHEME_FRESH_ORTHOGONAL = "fresh_orthogonal"
S_SCHEMES = (SCHEME_COORDINATE, SCHEME_FRESH_ORTHOGONAL)
R_SCHEMES = (SCHEME_COORDINATE, SCHEME_SPHERICAL)


@dataclass(frozen=True)
class SamplerConfig:
    """Shape of one solver's per-iteration randomness.

    R is the probe batch size, 1 <= R <= n*d.  For ``memeff`` the block
    count B must satisfy B < n and R <= n*d/B, and probe directions are
    forced to coordinates.
    """

    variant: str
    n: int
    d: int
    R: int
    B: int | None = None
    direction_scheme_S: str = SCHEME_COORDINATE
    direction_scheme_R: str = SCHEME_COORDINATE
    seed: int = 0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ParameterError(f"unknown variant {self.variant!r}")
        if self.n < 1 or self.d < 1:
            raise ParameterError(f"need n, d >= 1, got n={self.n}, d={self.d}")
        if not 1 <= self.R <= self.n * self.d:
            raise ParameterError(
                f"R must lie in [1, n*d] = [1, {self.n * self.d}], got {self.R}"
            )
        if self.direction_scheme_S not in S_SCHEMES:
            raise ParameterError(
                f"direction_scheme_S must be one of {S_SCHEMES}, "
                f"got {self.direction_scheme_S!r}"
            )
        if self.direction_scheme_R not in R_SCHEMES:
            raise ParameterError(
                f"direction_scheme_R must be one of {R_SCHEMES}, "
                f"got {self.direction_scheme_R!r}"
            )
        if self.variant == "memeff":
            if self.B is None:
                raise ParameterError("memeff requires a block count B")
            if not 1 <= self.B < self.n:
                raise ParameterError(
                    f"memeff needs 1 <= B < n, got B={self.B}, n={self.n}"
                )
            if self.R * self.B > self.n * self.d:
                raise ParameterError(
                    f"memeff needs R <= n*d/B, got R={self.R}, bound "
                    f"{self.n * self.d / self.B:g}"
                )
            # block refreshes address fixed (component, coordinate) cells
            object.__setattr__(self, "direction_scheme_R", SCHEME_COORDINATE)

    @property
    def update_probability(self) -> float:
        """P(omega = 1) for this variant."""
        nd = self.n * self.d
        if self.variant == "impl1":
            return 1.0
        if self.variant == "impl2":
            return min(self.R / self.d, 1.0)
        if self.variant == "impl3":
            return self.R / nd
        return self.B * self.R / nd


@dataclass
class UpdatePlan:
    """One iteration's randomness.

    Directions are unit vectors; a coordinate direction e_j may be encoded
    as the bare integer j.  ``s_is_rset`` marks plans where S reuses the
    probe pairs, letting the solver recycle their oracle evaluations.
    ``block`` is the refreshed block index for the memeff variant.
    """

    omega: int
    S: list = field(default_factory=list)
    Rset: list = field(default_factory=list)
    block: int | None = None
    s_is_rset: bool = False


@dataclass(frozen=True)
class SigmaNu:
    """Sketch fraction sigma and expected per-iteration update workload nu.

    sigma is the constant with E[omega * P(A)] = sigma * A; nu equals
    E[omega * |S|] = n*d*sigma.
    """

    sigma: float
    nu: float

    def __post_init__(self):
        if not 0.0 < self.sigma <= 1.0:
            raise ParameterError(f"sigma must be in (0, 1], got {self.sigma}")
        if not self.nu > 0:
            raise ParameterError(f"nu must be positive, got {self.nu}")


def sigma_nu(cfg: SamplerConfig) -> SigmaNu:
    """Exact (sigma, nu) for a sampler configuration.

    nu = n*d*sigma always; it is computed from integers so the identity is
    exact (R, or d*ceil(R/d) for the whole-column variant with R >= d).
    """
    nd = cfg.n * cfg.d
    if cfg.variant == "impl2" and cfg.R >= cfg.d:
        m = -(-cfg.R // cfg.d)
        return SigmaNu(sigma=m / cfg.n, nu=float(cfg.d * m))
    return SigmaNu(sigma=cfg.R / nd, nu=float(cfg.R))


def sample_distinct(rng, n: int, k: int) -> np.ndarray:
    """k distinct integers from range(n), uniformly, in O(k) time.

    Partial Fisher-Yates over a lazily materialized range; reproducible
    under a fixed generator state.
    """
    if not 0 <= k <= n:
        raise ParameterError(f"need 0 <= k <= n, got k={k}, n={n}")
    swaps: dict[int, int] = {}
    out = np.empty(k, dtype=np.int64)
    for t in range(k):
        r = t + int(rng.integers(n - t))
        out[t] = swaps.get(r, r)
        swaps[r] = swaps.get(t, t)
    return out


def sample_components(rng, n: int, R: int) -> np.ndarray:
    """R component indices, drawn without replacement in rounds.

    For R <= n this is a plain without-replacement draw.  For R > n the
    draw proceeds in rounds, each exhausting [0, n): every index keeps a
    uniform marginal and appears floor(R/n) or ceil(R/n) times.
    """
    if R <= n:
        if R == 1:
            return np.array([rng.integers(n)], dtype=np.int64)
        return sample_distinct(rng, n, R)
    full, rem = divmod(R, n)
    parts = [rng.permutation(n) for _ in range(full)]
    if rem:
        parts.append(sample_distinct(rng, n, rem))
    return np.concatenate(parts).astype(np.int64)


def _draw_r_directions(cfg: SamplerConfig, rng, count: int) -> list:
    if cfg.direction_scheme_R == SCHEME_COORDINATE:
        return [int(j) for j in rng.integers(cfg.d, size=count)]
    return [sample_direction(SCHEME_SPHERICAL, cfg.d, rng) for _ in range(count)]


def _s_direction_source(cfg: SamplerConfig, rng):
    """Columns used to refresh whole components: identity or a fresh Q."""
    if cfg.direction_scheme_S == SCHEME_COORDINATE:
        return None  # integer-encoded e_j
    return random_orthogonal(cfg.d, rng)


def memeff_partition(n: int, d: int, B: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Split the (component, coordinate) grid into B near-equal blocks.

    Cells are laid out component-major; block sizes differ by at most one.
    Returns per-block arrays (component indices, coordinate indices).
    """
    if not 1 <= B <= n * d:
        raise ParameterError(f"need 1 <= B <= n*d, got B={B}")
    chunks = np.array_split(np.arange(n * d, dtype=np.int64), B)
    return [(chunk // d, chunk % d) for chunk in chunks]


def gen_plan(cfg: SamplerConfig, rng) -> UpdatePlan:
    """Draw one iteration's (omega, S, Rset) for the configured variant."""
    n, d, R = cfg.n, cfg.d, cfg.R
    if cfg.variant == "impl1":
        if R == 1:  # hot path: one probe pair, reused as the refresh set
            i = int(rng.integers(n))
            if cfg.direction_scheme_R == SCHEME_COORDINATE:
                u = int(rng.integers(d))
            else:
                u = sample_direction(SCHEME_SPHERICAL, d, rng)
            rset = [(i, u)]
            return UpdatePlan(omega=1, S=rset, Rset=rset, s_is_rset=True)
        comps = sample_components(rng, n, R)
        dirs = _draw_r_directions(cfg, rng, R)
        rset = list(zip(comps.tolist(), dirs))
        if R <= n:
            # distinct components: the probe pairs are a lawful refresh set
            # (one direction per component), so reuse them for S.
            return UpdatePlan(omega=1, S=rset, Rset=rset, s_is_rset=True)
        flat = sample_distinct(rng, n * d, R)
        q = _s_direction_source(cfg, rng)
        s_pairs = []
        for cell in flat:
            i, j = divmod(int(cell), d)
            s_pairs.append((i, j if q is None else q[:, j]))
        return UpdatePlan(omega=1, S=s_pairs, Rset=rset)

    if cfg.variant == "impl2":
        p = cfg.update_probability
        omega = 1 if rng.random() < p else 0
        s_pairs = []
        if omega:
            m = 1 if R < d else -(-R // d)
            comps = sample_distinct(rng, n, m)
            q = _s_direction_source(cfg, rng)
            for i in comps.tolist():
                for j in range(d):
                    s_pairs.append((i, j if q is None else q[:, j]))
        rset = list(
            zip(sample_components(rng, n, R).tolist(), _draw_r_directions(cfg, rng, R))
        )
        return UpdatePlan(omega=omega, S=s_pairs, Rset=rset)

    if cfg.variant == "impl3":
        omega = 1 if rng.random() < cfg.update_probability else 0
        s_pairs = []
        if omega:
            q = _s_direction_source(cfg, rng)
            for i in range(n):
                for j in range(d):
                    s_pairs.append((i, j if q is None else q[:, j]))
        rset = list(
            zip(sample_components(rng, n, R).tolist(), _draw_r_directions(cfg, rng, R))
        )
        return UpdatePlan(omega=omega, S=s_pairs, Rset=rset)

    # memeff
    omega = 1 if rng.random() < cfg.update_probability else 0
    block = None
    s_pairs = []
    if omega:
        block = int(rng.integers(cfg.B))
        bi, bj = memeff_partition(n, d, cfg.B)[block]
        s_pairs = list(zip(bi.tolist(), bj.tolist()))
    rset = list(
        zip(sample_components(rng, n, R).tolist(), _draw_r_directions(cfg, rng, R))
    )
    return UpdatePlan(omega=omega, S=s_pairs, Rset=rset, block=block)


def apply_P(S, A: np.ndarray) -> np.ndarray:
    """Combined left/right projection sum_{(i,u) in S} u u' A e_i e_i'."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2:
        raise ParameterError("A must be a d x n matrix")
    d, n = A.shape
    out = np.zeros_like(A)
    for i, u in S:
        if not 0 <= i < n:
            raise ParameterError(f"component index {i} outside [0, {n})")
        if isinstance(u, (int, np.integer)):
            j = int(u)
            if not 0 <= j < d:
                raise ParameterError(f"coordinate {j} outside [0, {d})")
            out[j, i] += A[j, i]
        else:
            u = np.asarray(u, dtype=float)
            if u.shape != (d,):
                raise ParameterError(
                    f"direction shape {u.shape} incompatible with d={d}"
                )
            out[:, i] += u * (u @ A[:, i])
    return out


def sketch_matrix(oracle, x: np.ndarray, S, beta: float, d: int, n: int) -> np.ndarray:
    """Two-point probe matrix G with G e_i = sum of probes for component i.

    Base values are cached per component within the call, so a component
    probed along m directions costs m+1 oracle calls.
    """
    from .estimators import directional_slope

    G = np.zeros((d, n))
    base: dict[int, float] = {}
    for i, u in S:
        if i not in base:
            base[i] = oracle(i, x)
        slope = directional_slope(oracle, i, x, u, beta, base=base[i])
        if isinstance(u, (int, np.integer)):
            G[int(u), i] += slope
        else:
            G[:, i] += slope * np.asarray(u, dtype=float)
    return G


def jacobian_update(J: np.ndarray, plan: UpdatePlan, zo_block: np.ndarray) -> np.ndarray:
    """Masked incremental update J + omega * (zo_block - P(J)).

    ``zo_block`` must be the probe matrix built from plan.S at the current
    point (see ``sketch_matrix``).  With omega = 0 the input is returned
    unchanged; otherwise a new matrix is produced.
    """
    J = np.asarray(J, dtype=float)
    zo_block = np.asarray(zo_block, dtype=float)
    if J.shape != zo_block.shape:
        raise ParameterError(
            f"shape mismatch: J {J.shape} vs probe block {zo_block.shape}"
        )
    if plan.omega == 0:
        return J
    return J + zo_block - apply_P(plan.S, J)
