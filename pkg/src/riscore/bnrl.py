"""Background-weighted hard-negative classification loss and its checks.

The loss has a positive (ground-truth) branch and a mirror branch that
penalizes confident wrong-class mass.  The module also carries the zero-sum
noise model used to verify numerically that the mirror penalty grows
monotonically with the noise scale.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import OutOfRange

_P_CLAMP = 1e-12


@dataclass(frozen=True)
class BnrlParams:
    beta: float = 0.2
    gamma: float = 4.0
    epsilon: float = 1.0
    omega_bg: float = 0.2
    bg_class: int = 0

    def __post_init__(self):
        if not (0.0 <= self.beta <= 1.0):
            raise ValueError("beta must lie in [0, 1]")
        if self.gamma < 0 or self.epsilon < 0 or self.omega_bg < 0:
            raise ValueError("gamma, epsilon, omega_bg must be >= 0")
        for v in (self.beta, self.gamma, self.epsilon, self.omega_bg):
            if not math.isfinite(v):
                raise ValueError("parameters must be finite")


@dataclass(frozen=True)
class ClassDistribution:
    probs: np.ndarray
    gt_class: int

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=np.float64)
        if probs.ndim != 1:
            raise ValueError("probs must be a vector")
        if probs.size and (probs.min() < 0.0 or probs.max() > 1.0):
            raise ValueError("probabilities must lie in [0, 1]")
        if abs(probs.sum() - 1.0) > 1e-6:
            raise ValueError("probabilities must sum to 1")
        if not (0 <= self.gt_class < probs.size):
            raise ValueError("gt_class out of range")
        probs = probs.copy()
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)

    @property
    def n_classes(self) -> int:
        return self.probs.size


def _clamp(p):
    return np.clip(p, _P_CLAMP, 1.0 - _P_CLAMP)


def bnrl_per_class(p: float, is_gt: bool, params: BnrlParams) -> float:
    """Single-class loss term: the positive branch when is_gt, else the
    mirror branch."""
    p = float(_clamp(p))
    if is_gt:
        return -params.beta * (1.0 - p) ** params.gamma * math.log(p)
    return -(1.0 - params.beta) * p ** params.epsilon * math.log(1.0 - p)


def bnrl_total(dist: ClassDistribution, params: BnrlParams) -> float:
    """Sum of per-class terms with the background term down-weighted."""
    return _total_free(dist.probs, dist.gt_class, params)


def _total_free(probs, gt_class: int, params: BnrlParams) -> float:
    """Loss on a free probability vector, skipping the sum-to-1 check.

    Finite-difference probes perturb one component at a time, so the vector
    no longer sums to 1; the loss itself treats components independently.
    """
    p = _clamp(np.asarray(probs, dtype=np.float64))
    one_hot = np.zeros(p.size)
    one_hot[gt_class] = 1.0
    pos = -params.beta * one_hot * (1.0 - p) ** params.gamma * np.log(p)
    neg = -(1.0 - params.beta) * (1.0 - one_hot) * p ** params.epsilon * np.log1p(-p)
    terms = pos + neg
    weights = np.ones(p.size)
    if 0 <= params.bg_class < p.size:
        weights[params.bg_class] = params.omega_bg
    return float((weights * terms).sum())


def bnrl_gradient(dist: ClassDistribution, params: BnrlParams) -> np.ndarray:
    """d(total loss)/d p(c) treating the probabilities as free variables."""
    p = _clamp(dist.probs)
    beta, g, e = params.beta, params.gamma, params.epsilon
    grad = np.empty(dist.n_classes)
    # mirror branch: d/dp [-(1-beta) p^e log(1-p)]
    grad[:] = -(1.0 - beta) * (e * p ** (e - 1.0) * np.log1p(-p) - p ** e / (1.0 - p))
    # positive branch: d/dp [-beta (1-p)^g log p]
    pg = p[dist.gt_class]
    grad[dist.gt_class] = -beta * (
        -g * (1.0 - pg) ** (g - 1.0) * math.log(pg) + (1.0 - pg) ** g / pg
    )
    if 0 <= params.bg_class < dist.n_classes:
        grad[params.bg_class] *= params.omega_bg
    return grad


def noise_distribution(n: int, noise, alpha: float) -> np.ndarray:
    """Hypothetical wrong-class distribution 1/n + alpha * noise.

    The noise must sum to zero, so the normalizer is the constant 1 and the
    components are returned directly.
    """
    noise = np.asarray(noise, dtype=np.float64)
    if noise.shape != (n,):
        raise ValueError(f"expected {n} noise components")
    if abs(noise.sum()) > 1e-9:
        raise ValueError("noise must sum to zero")
    p = 1.0 / n + alpha * noise
    if p.min() <= 0.0 or p.max() >= 1.0:
        raise OutOfRange(
            f"alpha={alpha} pushes a component outside (0, 1)"
        )
    return p


def mirror_sum(p) -> float:
    """Total mirror penalty -sum log(1 - p(c)) of a wrong-class distribution."""
    p = np.asarray(p, dtype=np.float64)
    if p.size and (p.min() <= 0.0 or p.max() >= 1.0):
        raise OutOfRange("components must lie strictly inside (0, 1)")
    return float(-np.log1p(-p).sum())


@dataclass(frozen=True)
class MonotonicityReport:
    alphas: tuple[float, ...]
    mirror_sums: tuple[float, ...]
    passed: bool


def verify_monotonicity(n: int, noise, alpha_grid) -> MonotonicityReport:
    """Evaluate the mirror penalty along an increasing alpha grid.

    Passes iff the sequence is non-decreasing within 1e-12 slack, which is
    the numerical counterpart of the Jensen-inequality argument behind the
    hard-negative ordering claim.
    """
    alphas = [float(a) for a in alpha_grid]
    if any(b <= a for a, b in zip(alphas, alphas[1:])):
        raise ValueError("alpha grid must be strictly increasing")
    sums = [mirror_sum(noise_distribution(n, noise, a)) for a in alphas]
    passed = all(b >= a - 1e-12 for a, b in zip(sums, sums[1:]))
    return MonotonicityReport(tuple(alphas), tuple(sums), passed)


def max_valid_alpha(n: int, noise) -> float:
    """Largest alpha keeping every component of 1/n + alpha*noise in (0, 1)."""
    noise = np.asarray(noise, dtype=np.float64)
    bound = math.inf
    for x in noise:
        if x > 0:
            bound = min(bound, (1.0 - 1.0 / n) / x)
        elif x < 0:
            bound = min(bound, (1.0 / n) / -x)
    return bound


def write_monotonicity_csv(report: MonotonicityReport, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("alpha,mirror_sum\n")
        for a, s in zip(report.alphas, report.mirror_sums):
            fh.write(f"{a:.17g},{s:.17g}\n")
