"""Delete-to-Descent baseline: deterministic fine-tuning plus one Gaussian
output perturbation, with the two published noise calibrations.

Learning is plain projected gradient descent at step 2/(L + m) (no noise);
unlearning runs I more deterministic steps on the updated data and then
perturbs the result once. The calibration with an internal non-private
state (the server keeps the pre-noise iterate) needs less noise than the
stateless one, which must also lower-bound the per-request iteration count.
Both formulas are stated for add/remove dataset adjacency; outputs are
labelled accordingly by callers that mix adjacency conventions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleBudget
from .pngd import project_ball

ADJACENCY = "add/remove"


@dataclass(frozen=True)
class D2DConfig:
    """Contraction data of the deterministic fine-tuning map."""

    gamma: float
    step: float
    I: int
    internal_state: bool

    @staticmethod
    def from_constants(L: float, m: float, I: int, internal_state: bool) -> "D2DConfig":
        if not m > 0:
            raise ValueError("Delete-to-Descent requires strong convexity (m > 0)")
        if not m < L:
            raise ValueError(f"need m < L for a contraction, got m={m}, L={L}")
        return D2DConfig(gamma=(L - m) / (L + m), step=2.0 / (L + m), I=I,
                         internal_state=internal_state)


def d2d_train(objective, T: int, init: np.ndarray, R: float | None = None) -> np.ndarray:
    """Deterministic projected GD at step 2/(L + m); bit-identical across runs."""
    if T < 0:
        raise ValueError(f"T must be >= 0, got {T}")
    pc = objective.constants
    if R is None:
        R = pc.R
    step = 2.0 / (pc.L + pc.m)
    w = project_ball(np.array(init, dtype=float), R)
    for _ in range(int(T)):
        w = project_ball(w - step * objective.grad(w), R)
    return w


def d2d_unlearn(params: np.ndarray, objective, I: int, sigma: float,
                rng: np.random.Generator, R: float | None = None) -> np.ndarray:
    """I deterministic GD steps on the updated data, then one Gaussian
    perturbation N(0, sigma^2 I). Only the perturbed iterate is returned, so
    a stateless caller never sees the non-private intermediate."""
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    w = d2d_train(objective, I, params, R=R)
    if sigma == 0.0:
        return w
    return w + sigma * rng.standard_normal(w.shape)


def d2d_sigma_thm9(eps: float, delta: float, I: int, M: float, m: float,
                   n: int, L: float) -> float:
    """Output-perturbation scale when the pre-noise iterate is retained.

    sigma = 4*sqrt(2)*M*gamma^I / (m*n*(1 - gamma^I)*(sqrt(log(1/delta) + eps)
    - sqrt(log(1/delta)))).
    """
    _check_eps_delta(eps, delta)
    if I < 1:
        raise ValueError(f"I must be >= 1, got {I}")
    cfg = D2DConfig.from_constants(L, m, I, internal_state=True)
    gI = cfg.gamma ** I
    log_inv = math.log(1.0 / delta)
    denom = m * n * (1.0 - gI) * (math.sqrt(log_inv + eps) - math.sqrt(log_inv))
    return 4.0 * math.sqrt(2.0) * M * gI / denom


@dataclass(frozen=True)
class Thm28Calibration:
    """Stateless calibration: noise scale, base iteration count, and the
    per-request iteration rule (requests are 1-indexed)."""

    sigma: float
    I_min: int
    gamma: float
    d: int
    delta: float

    def iterations(self, i: int) -> int:
        """Total deterministic steps for the i-th sequential request."""
        if i < 1:
            raise ValueError(f"request index must be >= 1, got {i}")
        inner = math.log(4.0 * self.d * i / self.delta)
        if inner <= 0:
            raise InfeasibleBudget(f"log log argument non-positive at request {i}")
        extra = math.log(inner) / math.log(1.0 / self.gamma)
        return int(math.ceil(self.I_min + extra))


def d2d_sigma_thm28(eps: float, delta: float, M: float, m: float, n: int,
                    L: float, d: int) -> Thm28Calibration:
    """Output-perturbation scale without a non-private internal state.

    The iteration count must satisfy
      I >= log(sqrt(2d)/(1-gamma) / (sqrt(2 log(2/delta) + eps) - sqrt(2 log(2/delta))))
           / log(1/gamma)
    (rounded up), and the noise is
      sigma = 8*M*gamma^I / (m*n*(1 - gamma^I)
              * (sqrt(2 log(2/delta) + 3 eps) - sqrt(2 log(2/delta) + 2 eps))).
    The i-th sequential request runs I + log(log(4*d*i/delta))/log(1/gamma)
    steps before its perturbation.
    """
    _check_eps_delta(eps, delta)
    if d < 1:
        raise ValueError(f"d must be >= 1, got {d}")
    cfg = D2DConfig.from_constants(L, m, 1, internal_state=False)
    gamma = cfg.gamma
    b2 = 2.0 * math.log(2.0 / delta)
    gap = math.sqrt(b2 + eps) - math.sqrt(b2)
    arg = math.sqrt(2.0 * d) / (1.0 - gamma) / gap
    if arg <= 0:
        raise InfeasibleBudget("iteration lower bound has a non-positive log argument")
    I_min = int(math.ceil(math.log(arg) / math.log(1.0 / gamma)))
    if I_min < 1:
        I_min = 1
    gI = gamma ** I_min
    denom = m * n * (1.0 - gI) * (math.sqrt(b2 + 3.0 * eps) - math.sqrt(b2 + 2.0 * eps))
    sigma = 8.0 * M * gI / denom
    return Thm28Calibration(sigma=sigma, I_min=I_min, gamma=gamma, d=d, delta=delta)


def _check_eps_delta(eps: float, delta: float) -> None:
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must be in (0, 1), got {delta}")


# Reference noise table published with the original baseline, kept as data
# for the diagnostic comparison report (rows: dataset, unlearning steps I;
# columns: eps targets). The verbatim formulas above evaluate ~1.39x higher
# on the MNIST row; the report surfaces the per-cell ratio.
REFERENCE_EPS_GRID = (0.05, 0.1, 0.5, 1.0, 2.0, 5.0)
REFERENCE_SIGMAS_THM9 = {
    "cifar10-binary": {
        1: (59.5184, 29.7994, 6.0233, 3.0504, 1.5626, 0.6663),
        2: (28.1340, 14.0859, 2.8472, 1.4419, 0.7386, 0.3149),
        5: (9.4523, 4.7325, 0.9565, 0.4844, 0.2481, 0.1058),
    },
    "cifar10-multi": {
        1: (5.9612, 2.9840, 0.6022, 0.3044, 0.1554, 0.0657),
        2: (2.8386, 1.4209, 0.2867, 0.1449, 0.0740, 0.0313),
        5: (0.9764, 0.4887, 0.0986, 0.0498, 0.0254, 0.0107),
    },
    "mnist38": {
        1: (36.8573, 18.4620, 3.7310, 1.8890, 0.9673, 0.4120),
        2: (17.3030, 8.6229, 1.7507, 0.8864, 0.4538, 0.1933),
        5: (5.6774, 2.8424, 0.5744, 0.2908, 0.1489, 0.0634),
    },
}
