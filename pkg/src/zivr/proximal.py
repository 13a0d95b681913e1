"""Closed-form proximal operators for the supported non-smooth terms.

Three regularizers are shipped: the zero function, the scaled L1 norm
(soft-thresholding) and the indicator of a box (clamping).  All are
evaluated in closed form; no inner numerical solves.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError

KIND_ZERO = "zero"
KIND_L1 = "l1"
KIND_BOX = "box"


@dataclass(frozen=True)
class ProxSpec:
    """Description of a non-smooth term psi and its proximal operator.

    kind is one of "zero", "l1", "box".  For "l1" the weight ``lam`` must be
    nonnegative; for "box" the bounds ``lo <= hi`` must hold elementwise.
    """

    kind: str = KIND_ZERO
    lam: float = 0.0
    lo: np.ndarray | None = field(default=None, repr=False)
    hi: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in (KIND_ZERO, KIND_L1, KIND_BOX):
            raise ParameterError(f"unknown prox kind {self.kind!r}")
        if self.kind == KIND_L1 and self.lam < 0:
            raise ParameterError("l1 weight must be >= 0")
        if self.kind == KIND_BOX:
            if self.lo is None or self.hi is None:
                raise ParameterError("box prox needs lo and hi bounds")
            lo = np.asarray(self.lo, dtype=float)
            hi = np.asarray(self.hi, dtype=float)
            if lo.shape != hi.shape:
                raise ParameterError("box bounds must have equal shapes")
            if np.any(lo > hi):
                raise ParameterError("box bounds need lo <= hi elementwise")
            object.__setattr__(self, "lo", lo)
            object.__setattr__(self, "hi", hi)


def zero_prox() -> ProxSpec:
    return ProxSpec(KIND_ZERO)


def l1_prox(lam: float) -> ProxSpec:
    return ProxSpec(KIND_L1, lam=float(lam))


def box_prox(lo, hi) -> ProxSpec:
    return ProxSpec(KIND_BOX, lo=np.asarray(lo, float), hi=np.asarray(hi, float))


def psi_value(spec: ProxSpec, x: np.ndarray) -> float:
    """Value of the non-smooth term at x (+inf outside a box)."""
    if spec.kind == KIND_ZERO:
        return 0.0
    if spec.kind == KIND_L1:
        return spec.lam * float(np.sum(np.abs(x)))
    inside = np.all(x >= spec.lo) and np.all(x <= spec.hi)
    return 0.0 if inside else float("inf")


def prox(spec: ProxSpec, x: np.ndarray, t: float) -> np.ndarray:
    """Proximal map of t*psi at x, i.e. argmin_y 0.5||x-y||^2 + t*psi(y).

    Soft-thresholding ties (|x_j| == t*lam) map to exactly 0.
    """
    if t <= 0:
        raise ParameterError(f"prox step t must be > 0, got {t}")
    x = np.asarray(x, dtype=float)
    if spec.kind == KIND_ZERO:
        return x.copy()
    if spec.kind == KIND_L1:
        if spec.lam == 0.0:
            return x.copy()
        thr = t * spec.lam
        return np.sign(x) * np.maximum(np.abs(x) - thr, 0.0)
    return np.clip(x, spec.lo, spec.hi)
