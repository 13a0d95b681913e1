"""Function-value-only gradient estimators and direction sampling.

An *oracle* here is any callable ``oracle(i, x) -> float`` returning the
value of the i-th component function at x.  Estimators never touch
derivatives.

Perturbation directions are unit vectors.  A direction may be passed either
as a dense array or, for a coordinate direction e_j, as the plain integer
``j`` (0-based); the integer form lets hot loops avoid materializing basis
vectors.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import EvaluationError, ParameterError

SCHEME_COORDINATE = "coordinate"
SCHEME_SPHERICAL = "spherical"

DIRECTION_SCHEMES = (SCHEME_COORDINATE, SCHEME_SPHERICAL)


def direction_vector(u, d: int) -> np.ndarray:
    """Materialize a direction as a dense unit vector of length d."""
    if isinstance(u, (int, np.integer)):
        v = np.zeros(d)
        v[int(u)] = 1.0
        return v
    return np.asarray(u, dtype=float)


def directional_slope(oracle, i, x, u, beta, base=None):
    """Forward-difference slope (f_i(x + beta*u) - f_i(x)) / beta.

    ``base`` may carry a cached f_i(x), saving one oracle call.  Costs two
    calls without the cache, one with it.
    """
    if beta <= 0:
        raise ParameterError(f"smoothing radius beta must be > 0, got {beta}")
    fx = oracle(i, x) if base is None else base
    if isinstance(u, (int, np.integer)):
        xp = x.copy()
        xp[int(u)] += beta
    else:
        xp = x + beta * np.asarray(u, dtype=float)
    fp = oracle(i, xp)
    slope = (fp - fx) / beta
    if not math.isfinite(slope):
        raise EvaluationError(
            f"non-finite difference quotient for component {i} (beta={beta})"
        )
    return slope


def two_point(oracle, i, x, u, beta, base=None) -> np.ndarray:
    """Two-point directional estimate ((f_i(x+beta*u) - f_i(x))/beta) * u."""
    d = len(x)
    slope = directional_slope(oracle, i, x, u, beta, base=base)
    if isinstance(u, (int, np.integer)):
        g = np.zeros(d)
        g[int(u)] = slope
        return g
    return slope * np.asarray(u, dtype=float)


def coord_full(oracle, i, x, beta) -> np.ndarray:
    """Full coordinate-wise estimate of the gradient of f_i at x.

    Samples every coordinate direction around a shared base value, so it
    consumes exactly d+1 oracle calls.
    """
    if beta <= 0:
        raise ParameterError(f"smoothing radius beta must be > 0, got {beta}")
    x = np.asarray(x, dtype=float)
    d = len(x)
    base = oracle(i, x)
    g = np.empty(d)
    xp = x.copy()
    for j in range(d):
        xp[j] += beta
        g[j] = (oracle(i, xp) - base) / beta
        xp[j] = x[j]
    if not np.all(np.isfinite(g)):
        raise EvaluationError(f"non-finite coordinate estimate for component {i}")
    return g


def sample_direction(scheme: str, d: int, rng) -> np.ndarray:
    """Draw a unit direction: uniform over {e_1..e_d} or over the sphere.

    Spherical sampling normalizes a standard Gaussian draw, which is exactly
    uniform on the unit sphere.
    """
    if d < 1:
        raise ParameterError(f"dimension must be >= 1, got {d}")
    if scheme == SCHEME_COORDINATE:
        u = np.zeros(d)
        u[int(rng.integers(d))] = 1.0
        return u
    if scheme == SCHEME_SPHERICAL:
        while True:
            g = rng.standard_normal(d)
            nrm = np.linalg.norm(g)
            if nrm > 0:
                return g / nrm
    raise ParameterError(f"unknown direction scheme {scheme!r}")


def random_orthogonal(d: int, rng) -> np.ndarray:
    """Random d x d orthogonal matrix with uniformly distributed columns.

    QR of a Gaussian matrix, with column signs fixed so the triangular
    factor has a positive diagonal; this yields the rotation-invariant
    (Haar) distribution rather than a sign-biased one.
    """
    if d < 1:
        raise ParameterError(f"dimension must be >= 1, got {d}")
    z = rng.standard_normal((d, d))
    q, r = np.linalg.qr(z)
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return q * signs[np.newaxis, :]
