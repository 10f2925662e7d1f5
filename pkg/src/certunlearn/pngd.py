"""Projected noisy gradient descent: the learning and unlearning engine.

One step moves against the full-batch clipped gradient, adds isotropic
Gaussian noise of per-coordinate variance 2*eta*sigma^2, and projects back
onto the radius-R ball. Learning runs T steps from a fresh initialization;
unlearning runs K steps of the same update against the post-request
dataset, starting from the trained parameters.

Randomness: a Philox 4x64 counter-based generator with Gaussian variates
drawn by numpy's ziggurat implementation (`numpy.random.Generator` over
`numpy.random.Philox`). Identical seeds reproduce identical trajectories
bit for bit; independent trials use independent keys.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .constants import NoiseSchedule


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based generator (Philox 4x64) keyed by `seed`."""
    return np.random.Generator(np.random.Philox(key=int(seed) & (2 ** 64 - 1)))


def project_ball(v: np.ndarray, R: float) -> np.ndarray:
    """Orthogonal projection onto the Euclidean (Frobenius) ball of radius R."""
    if not R > 0:
        raise ValueError(f"R must be positive, got {R}")
    v = np.asarray(v, dtype=float)
    norm = float(np.sqrt(np.sum(v * v)))
    if norm <= R:
        return v
    return v * (R / norm)


def clip_to_norm(g: np.ndarray, M: float) -> np.ndarray:
    """Scale a gradient down to norm at most M (identity when already within)."""
    if not M > 0:
        raise ValueError(f"M must be positive, got {M}")
    return project_ball(g, M)


def pngd_step(params: np.ndarray, grad: Callable[[np.ndarray], np.ndarray],
              eta: float, sigma: float, R: float,
              rng: np.random.Generator) -> np.ndarray:
    """One noisy projected step; consumes exactly params.size Gaussian draws."""
    noise = rng.standard_normal(params.shape)
    moved = params - eta * grad(params) + math.sqrt(2.0 * eta * sigma ** 2) * noise
    return project_ball(moved, R)


@dataclass(frozen=True)
class InitSpec:
    """Gaussian initialization N(mean * 1, variance * I), projected onto the ball.

    The large default mean places the start far from any optimum of a
    normalized problem, mimicking a cold start.
    """

    mean: float = 1000.0
    variance: float = 1.0


def draw_init(spec: InitSpec, shape: tuple[int, ...], R: float,
              rng: np.random.Generator) -> np.ndarray:
    w0 = spec.mean + math.sqrt(spec.variance) * rng.standard_normal(shape)
    return project_ball(w0, R)


def train(objective, ns: NoiseSchedule, init, rng: np.random.Generator,
          R: float | None = None) -> np.ndarray:
    """Run ns.T noisy projected steps from `init`.

    `init` is either a parameter array or an InitSpec (drawn through `rng`
    before the first step). The projection radius defaults to the
    objective's certified R. T must be finite here; the accountant owns the
    converged-training limits.
    """
    if math.isinf(ns.T):
        raise ValueError("train needs a finite T; INFINITE is an accountant-only value")
    if R is None:
        R = objective.constants.R
    if isinstance(init, InitSpec):
        d, c = _objective_shape(objective)
        shape = (d,) if c is None else (d, c)
        w = draw_init(init, shape, R, rng)
    else:
        w = project_ball(np.array(init, dtype=float), R)
    for _ in range(int(ns.T)):
        w = pngd_step(w, objective.grad, ns.eta, ns.sigma, R, rng)
    return w


def unlearn(params: np.ndarray, objective, K: int, ns: NoiseSchedule,
            rng: np.random.Generator, R: float | None = None) -> np.ndarray:
    """Fine-tune trained parameters for K steps against the updated dataset.

    `objective` must be built on the post-request dataset; K = 0 returns the
    parameters unchanged.
    """
    if K < 0:
        raise ValueError(f"K must be >= 0, got {K}")
    if R is None:
        R = objective.constants.R
    w = np.array(params, dtype=float)
    for _ in range(K):
        w = pngd_step(w, objective.grad, ns.eta, ns.sigma, R, rng)
    return w


def _objective_shape(objective) -> tuple[int, int | None]:
    """Parameter shape implied by an objective bundle: (d, classes or None)."""
    data = getattr(objective, "data", None)
    if data is not None and data.is_multiclass:
        return data.d, data.n_classes
    if data is not None:
        return data.d, None
    return objective.constants.d, None
