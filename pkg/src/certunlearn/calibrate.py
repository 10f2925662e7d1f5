"""Calibration searches on top of the accountant.

Answers the operational questions: how many fine-tuning steps does a given
noise level need to certify a target, what is the smallest noise level that
fits a step budget, and how do sequential removal requests compose.
"""
from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .accountant import (RenyiBound, learn_epsilon0, lsi_unlearn_trace, rdp_to_dp,
                         unlearn_epsilon, unlearn_rate)
from .constants import INFINITE, NoiseSchedule, ProblemConstants, Regime, default_c0
from .errors import BudgetUnreachable, NoFeasibleSigma

DEFAULT_K_MAX = 10 ** 6
DEFAULT_SIGMA_LO = 1e-6
DEFAULT_SIGMA_HI = 100.0
DEFAULT_SIGMA_REL_TOL = 1e-4


def converted_epsilon(pc: ProblemConstants, ns: NoiseSchedule, regime: Regime,
                      S: int, K: int, delta: float,
                      C0: float | None = None) -> float:
    """(eps, delta) certificate after training to convergence and K
    fine-tuning steps: the full accountant chain at one (sigma, K)."""
    eps0 = learn_epsilon0(pc, ns, regime, S=S, C0=C0)
    bound = unlearn_epsilon(eps0, pc, ns, regime, C0=C0, K=K)
    eps, _ = rdp_to_dp(bound, delta)
    return eps


def find_min_k(eps_hat: float, delta: float, pc: ProblemConstants, ns: NoiseSchedule,
               regime: Regime, S: int = 1, k_max: int = DEFAULT_K_MAX,
               C0: float | None = None) -> int:
    """Smallest K whose certificate meets eps_hat.

    Galloping doubling followed by bisection on the (non-increasing in K)
    converted epsilon; raises BudgetUnreachable past k_max.
    """
    if not eps_hat > 0:
        raise ValueError(f"eps_hat must be positive, got {eps_hat}")
    if k_max < 1:
        raise ValueError(f"k_max must be >= 1, got {k_max}")

    def ok(k: int) -> bool:
        return converted_epsilon(pc, ns, regime, S, k, delta, C0=C0) <= eps_hat

    if ok(0):
        return 0
    lo, hi = 0, 1
    while not ok(hi):
        if hi >= k_max:
            raise BudgetUnreachable(eps_hat, k_max,
                                    best=converted_epsilon(pc, ns, regime, S, k_max,
                                                           delta, C0=C0))
        lo, hi = hi, min(2 * hi, k_max)
    while hi - lo > 1:  # lo fails, hi passes
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


def binary_search_sigma(eps_hat: float, delta: float, k_hat: int,
                        pc: ProblemConstants, regime: Regime, S: int = 1,
                        sigma_lo: float = DEFAULT_SIGMA_LO,
                        sigma_hi: float = DEFAULT_SIGMA_HI,
                        rel_tol: float = DEFAULT_SIGMA_REL_TOL,
                        eta: float | None = None) -> float:
    """Smallest noise level whose least step count fits the budget k_hat.

    Bisects sigma until the bracket's relative width drops below rel_tol and
    returns the feasible endpoint. Feasibility of a sigma is probed as
    "certificate at exactly k_hat steps <= eps_hat", which equals
    find_min_k(sigma) <= k_hat because the certificate is non-increasing in
    K; this keeps each probe O(1). The step size defaults to 1/L.
    """
    if not (sigma_lo > 0 and sigma_lo < sigma_hi):
        raise ValueError(f"need 0 < sigma_lo < sigma_hi, got {sigma_lo}, {sigma_hi}")
    if rel_tol <= 0:
        raise ValueError(f"rel_tol must be positive, got {rel_tol}")
    if k_hat < 0:
        raise ValueError(f"k_hat must be >= 0, got {k_hat}")
    if eta is None:
        eta = 1.0 / pc.L

    def feasible(sigma: float) -> bool:
        ns = NoiseSchedule(eta=eta, sigma=sigma, T=INFINITE, K=k_hat)
        return converted_epsilon(pc, ns, regime, S, k_hat, delta) <= eps_hat

    # the reported upper endpoint must be checked with the budget semantics
    ns_hi = NoiseSchedule(eta=eta, sigma=sigma_hi, T=INFINITE, K=k_hat)
    k_at_hi = find_min_k(eps_hat, delta, pc, ns_hi, regime, S=S)
    if k_at_hi > k_hat:
        raise NoFeasibleSigma(sigma_hi, k_hat, k_at_hi)

    lo, hi = sigma_lo, sigma_hi
    if feasible(lo):
        return lo
    while (hi - lo) / lo >= rel_tol:
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            hi = mid
        else:
            lo = mid
    return hi


def sequential_epsilon(alpha, sigma: float, b: int, i: int, K_list: Sequence[int],
                       pc: ProblemConstants, regime: Regime,
                       eta: float | None = None, C0: float | None = None,
                       batch_sizes: Sequence[int] | None = None):
    """Renyi unlearning loss after the i-th batched removal request.

    The first request decays the learning loss at group size b; each later
    request chains the previous one through the weak triangle inequality at
    doubled order. Recursion depth equals i; the function is pure. Accepts
    scalar or ndarray alpha.

    For convex/non-convex regimes the LSI trace continues across requests
    (request s starts from the final constant of request s-1); strongly
    convex traces are constant so this coincides with the single-request
    decay rate.
    """
    if i < 1:
        raise ValueError(f"request index i must be >= 1, got {i}")
    if len(K_list) < i:
        raise ValueError(f"K_list has {len(K_list)} entries, need at least {i}")
    if eta is None:
        eta = 1.0 / pc.L
    sizes = list(batch_sizes) if batch_sizes is not None else [b] * i
    if len(sizes) < i:
        raise ValueError("batch_sizes must cover every request")

    ns0 = NoiseSchedule(eta=eta, sigma=sigma, T=INFINITE, K=0)
    if C0 is None:
        C0 = default_c0(pc, ns0, regime)

    # per-request decay sums, with the LSI trace threaded through requests
    decays = []
    c_start = C0
    for j in range(i):
        k_j = int(K_list[j])
        ns_j = NoiseSchedule(eta=eta, sigma=sigma, T=INFINITE, K=k_j)
        if regime is Regime.STRONGLY_CONVEX:
            decays.append(k_j * unlearn_rate(pc, ns_j, regime, c_start))
        else:
            trace = lsi_unlearn_trace(pc, ns_j, regime, c_start, k_j)
            decays.append(math.fsum(unlearn_rate(pc, ns_j, regime, c)
                                    for c in trace.values[:k_j]))
            c_start = float(trace.values[-1])

    def slope_for(size: int) -> float:
        return learn_epsilon0(pc, ns0, regime, S=size, C0=C0).meta["slope"]

    def evaluate(a, j):
        """Loss curve for request j (1-based) at order a."""
        decay = np.exp(-decays[j - 1] / a)
        if j == 1:
            return decay * slope_for(sizes[0]) * a
        weight = (a - 0.5) / (a - 1.0)
        prev = evaluate(2.0 * a, j - 1)
        return decay * weight * (slope_for(sizes[j - 1]) * 2.0 * a + prev)

    arr = np.asarray(alpha, dtype=float)
    if np.any(arr <= 1.0):
        raise ValueError("alpha must be > 1")
    out = evaluate(arr, i)
    if np.ndim(alpha) == 0:
        return float(out)
    return out


def sequential_k_schedule(eps_hat: float, delta: float, sigma: float, s_total: int,
                          b: int, pc: ProblemConstants, regime: Regime,
                          k_max: int = DEFAULT_K_MAX, eta: float | None = None,
                          C0: float | None = None) -> list[int]:
    """Least fine-tuning steps per removal request in a batched stream.

    Requests remove b samples each (a smaller final batch is allowed and
    uses its actual size as the group size); each request's K is the least
    count certifying eps_hat, with earlier entries frozen.
    """
    if s_total < 1 or b < 1:
        raise ValueError("s_total and b must be >= 1")
    full, rem = divmod(s_total, b)
    sizes = [b] * full + ([rem] if rem else [])

    schedule: list[int] = []
    for idx, _size in enumerate(sizes, start=1):
        schedule.append(0)

        def ok(k: int) -> bool:
            schedule[idx - 1] = k
            bound = RenyiBound(
                lambda a: sequential_epsilon(a, sigma, b, idx, schedule, pc, regime,
                                             eta=eta, C0=C0, batch_sizes=sizes),
                description=f"sequential request {idx}")
            eps, _ = rdp_to_dp(bound, delta)
            return eps <= eps_hat

        if ok(0):
            continue
        lo, hi = 0, 1
        while not ok(hi):
            if hi >= k_max:
                raise BudgetUnreachable(eps_hat, k_max)
            lo, hi = hi, min(2 * hi, k_max)
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if ok(mid):
                hi = mid
            else:
                lo = mid
        schedule[idx - 1] = hi
    return schedule
