"""Renyi privacy accountant for projected noisy gradient descent.

Pure, deterministic formulas. Three ingredients compose:

  * `learn_epsilon0` - the Renyi privacy loss of the training chain run on
    two datasets differing in at most S samples (a curve eps0(alpha)).
  * `unlearn_epsilon` - the exponential decay of that loss under K
    fine-tuning iterations on the updated dataset, driven by a per-step
    log-Sobolev (LSI) constant recursion.
  * `rdp_to_dp` - conversion of a Renyi curve into a single (eps, delta)
    guarantee by optimizing the Renyi order alpha.

All curves are represented as `RenyiBound` objects: total functions of
alpha > 1 that also accept numpy arrays, so the alpha optimization can be
vectorized. Everything here is a pure function of its arguments; there is
no shared mutable state.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from .constants import (NoiseSchedule, ProblemConstants, Regime, default_c0,
                        validate_schedule)
from .errors import CapOverflow

ArrayLike = Union[float, np.ndarray]

# exp() overflows float64 just above this exponent
_EXP_OVERFLOW = 709.0

# alpha-optimization design: dense log grid, then golden-section refinement
_ALPHA_GRID_POINTS = 2000
_ALPHA_MIN_OFFSET = 1e-6        # grid starts at alpha = 1 + 1e-6
_ALPHA_MAX = 1e6
_REFINE_REL_TOL = 1e-10

# fixed-point iteration guard for converged-training bounds
_MAX_FIXED_POINT_ITERS = 2_000_000


class RenyiBound:
    """A privacy-loss curve eps(alpha) defined for every alpha > 1.

    Wraps a closed-form parameterization so the curve can be evaluated at
    any order, scalar or ndarray. `meta` carries the parameters that built
    the curve (slope, decay sum, ...), for introspection and tests.
    """

    def __init__(self, fn: Callable[[ArrayLike], ArrayLike], description: str = "",
                 **meta):
        self._fn = fn
        self.description = description
        self.meta = meta

    def __call__(self, alpha: ArrayLike) -> ArrayLike:
        arr = np.asarray(alpha, dtype=float)
        if np.any(arr <= 1.0):
            raise ValueError("Renyi order alpha must be > 1")
        out = self._fn(arr)
        if np.ndim(alpha) == 0:
            return float(out)
        return out

    def __repr__(self):
        return f"RenyiBound({self.description or 'custom'})"

    @staticmethod
    def linear(slope: float, description: str = "") -> "RenyiBound":
        """Curve eps(alpha) = slope * alpha (every learning bound has this shape)."""
        if slope < 0:
            raise ValueError(f"slope must be non-negative, got {slope}")
        return RenyiBound(lambda a: slope * a, description or f"linear slope={slope:.6g}",
                          slope=slope)

    @staticmethod
    def zero() -> "RenyiBound":
        return RenyiBound.linear(0.0, "zero")


@dataclass(frozen=True)
class LsiTrace:
    """Per-iteration LSI constants of the fine-tuning chain, plus their cap.

    `values[k]` bounds the LSI constant of the chain's law after k steps.
    `cap` is the ball-geometry bound; +inf when the constant recursion never
    consults it (strongly convex traces are constant).
    """

    values: np.ndarray
    cap: float
    regime: Regime


def lsi_cap(R: float, M: float, eta: float, xi: float) -> float:
    """Ball-geometry LSI cap: 6*(4*(R + eta*M)^2 + xi) * exp(4*(R + eta*M)^2 / xi).

    Applies to any law supported on the radius-R ball, pushed through an
    M-bounded drift of step eta and smoothed by Gaussian noise of variance
    xi. Raises CapOverflow instead of returning a non-finite value.
    """
    if not (R > 0 and M >= 0 and eta >= 0 and xi > 0):
        raise ValueError("lsi_cap needs R > 0, M >= 0, eta >= 0, xi > 0")
    reach2 = 4.0 * (R + eta * M) ** 2
    exponent = reach2 / xi
    if exponent > _EXP_OVERFLOW:
        raise CapOverflow(exponent)
    value = 6.0 * (reach2 + xi) * math.exp(exponent)
    if not math.isfinite(value):
        raise CapOverflow(exponent)
    return value


def lsi_unlearn_trace(pc: ProblemConstants, ns: NoiseSchedule, regime: Regime,
                      C0: float, K: int) -> LsiTrace:
    """LSI-constant trajectory over K fine-tuning steps, starting from C0.

    Strongly convex chains keep a constant C0 (for a valid step size).
    Convex chains grow by 2*eta*sigma^2 per step and non-convex ones by the
    factor (1 + eta*L)^2 plus the same noise term; both are capped by the
    ball-geometry bound, whose overflow is surfaced as CapOverflow as soon
    as a growing recursion actually needs it (K >= 1).
    """
    if not C0 > 0:
        raise ValueError(f"C0 must be positive, got {C0}")
    if K < 0:
        raise ValueError(f"K must be >= 0, got {K}")
    validate_schedule(pc, ns, regime, c_lsi=C0 if regime is Regime.STRONGLY_CONVEX else None)
    noise = 2.0 * ns.eta * ns.sigma ** 2

    if regime is Regime.STRONGLY_CONVEX:
        return LsiTrace(values=np.full(K + 1, C0, dtype=float), cap=math.inf, regime=regime)

    if K == 0:
        return LsiTrace(values=np.array([C0]), cap=math.inf, regime=regime)

    cap = lsi_cap(pc.R, pc.M, ns.eta, noise)  # CapOverflow propagates
    growth = (1.0 + ns.eta * pc.L) ** 2 if regime is Regime.NONCONVEX else 1.0
    values = np.empty(K + 1, dtype=float)
    values[0] = C0
    c = C0
    for k in range(K):
        c = min(growth * c + noise, cap)
        values[k + 1] = c
    return LsiTrace(values=values, cap=cap, regime=regime)


def unlearn_rate(pc: ProblemConstants, ns: NoiseSchedule, regime: Regime,
                 C_k: float) -> float:
    """Per-step privacy-recovery rate R_k of the fine-tuning chain."""
    if not C_k > 0:
        raise ValueError(f"C_k must be positive, got {C_k}")
    noise = 2.0 * ns.eta * ns.sigma ** 2
    if regime is Regime.STRONGLY_CONVEX:
        return noise / C_k
    if regime is Regime.CONVEX:
        return math.log1p(noise / C_k)
    return math.log1p(noise / ((1.0 + ns.eta * pc.L) ** 2 * C_k))


def unlearn_epsilon(eps0: RenyiBound, pc: ProblemConstants, ns: NoiseSchedule,
                    regime: Regime, C0: float | None = None,
                    K: int | None = None) -> RenyiBound:
    """Privacy loss after K fine-tuning steps: alpha -> exp(-sum R_k / alpha) * eps0(alpha).

    C0 defaults to the regime's standard initialization constant and K to
    the schedule's K. The rate sum is alpha-independent, so the returned
    curve is the input curve scaled by exp(-decay/alpha).
    """
    if C0 is None:
        C0 = default_c0(pc, ns, regime)
    if K is None:
        K = ns.K
    trace = lsi_unlearn_trace(pc, ns, regime, C0, K)
    if regime is Regime.STRONGLY_CONVEX:
        decay = K * unlearn_rate(pc, ns, regime, C0)
    else:
        decay = math.fsum(unlearn_rate(pc, ns, regime, c) for c in trace.values[:K])
    return RenyiBound(lambda a: np.exp(-decay / a) * eps0(a),
                      description=f"unlearned K={K} from [{eps0.description}]",
                      decay_sum=decay, K=K, C0=C0, base=eps0)


def _learning_caps(pc: ProblemConstants, ns: NoiseSchedule) -> float:
    """Ball-geometry cap for the learning chain's half-noise decomposition."""
    return lsi_cap(pc.R, pc.M, ns.eta, ns.eta * ns.sigma ** 2)


def _sum_product_finite(pc: ProblemConstants, ns: NoiseSchedule, regime: Regime,
                        C0: float, T: int) -> float:
    """sum_{t<T} prod_{t'=t..T-1} (1 + eta sigma^2 / C_{t',1})^{-1}, compensated."""
    if T == 0:
        return 0.0
    cap = _learning_caps(pc, ns)
    half = ns.eta * ns.sigma ** 2
    growth = (1.0 + ns.eta * pc.L) ** 2 if regime is Regime.NONCONVEX else 1.0
    r = np.empty(T, dtype=float)
    c = C0
    for t in range(T):
        c_half = min(growth * c + half, cap)
        r[t] = 1.0 / (1.0 + half / c_half)
        c = min(c_half + half, cap)
    # backward running products, then a compensated sum
    products = np.multiply.accumulate(r[::-1])[::-1]
    return math.fsum(products.tolist())


def _sum_product_converged(pc: ProblemConstants, ns: NoiseSchedule, regime: Regime,
                           C0: float) -> float:
    """Limit of the sum-product as T grows.

    The forward recursion is Q <- r_t * (Q + 1) with r_t rising toward
    rbar = (1 + half/cap)^-1: the LSI constants grow by at least `half` per
    step, so they always saturate at the cap, after which the recursion is a
    contraction whose fixed point rbar/(1 - rbar) = cap/half forgets every
    pre-saturation term. Iterate with a per-step 1e-15 relative stopping
    rule until saturation; if saturation lies beyond the iteration budget,
    the limit is the fixed point regardless.
    """
    cap = _learning_caps(pc, ns)
    half = ns.eta * ns.sigma ** 2
    growth = (1.0 + ns.eta * pc.L) ** 2 if regime is Regime.NONCONVEX else 1.0
    q = 0.0
    c = C0
    for _ in range(_MAX_FIXED_POINT_ITERS):
        c_half = min(growth * c + half, cap)
        if c_half >= cap:
            return cap / half
        r = 1.0 / (1.0 + half / c_half)
        q_next = r * (q + 1.0)
        if abs(q_next - q) < 1e-15 * q_next:
            return q_next
        q = q_next
        c = min(c_half + half, cap)
    return cap / half


def learn_epsilon0(pc: ProblemConstants, ns: NoiseSchedule, regime: Regime,
                   S: int = 1, T: float | None = None,
                   C0: float | None = None) -> RenyiBound:
    """Renyi privacy-loss curve of T training iterations at group size S.

    The curve is linear in alpha. Strongly convex chains admit the closed
    form 4*alpha*S^2*M^2/(m*sigma^2*n^2) * (1 - exp(-m*eta*T)); the other
    regimes use the sum-product of per-step noise gains driven by the LSI
    recursion (capped by the ball geometry, so the T = INFINITE limit is
    finite). T = INFINITE selects the converged-training bound.
    """
    if S < 1:
        raise ValueError(f"group size S must be >= 1, got {S}")
    if T is None:
        T = ns.T
    if not math.isinf(T):
        if T < 0 or not float(T).is_integer():
            raise ValueError(f"T must be a non-negative integer or INFINITE, got {T}")
        T = int(T)
    if C0 is None:
        C0 = default_c0(pc, ns, regime)
    validate_schedule(pc, ns, regime, c_lsi=C0 if regime is Regime.STRONGLY_CONVEX else None)

    if regime is Regime.STRONGLY_CONVEX:
        base = 4.0 * S * S * pc.M ** 2 / (pc.m * ns.sigma ** 2 * pc.n ** 2)
        factor = 1.0 if math.isinf(T) else -math.expm1(-pc.m * ns.eta * T)
        slope = base * factor
    else:
        if math.isinf(T):
            q = _sum_product_converged(pc, ns, regime, C0)
        else:
            q = _sum_product_finite(pc, ns, regime, C0, T)
        slope = 2.0 * ns.eta * S * S * pc.M ** 2 / (ns.sigma ** 2 * pc.n ** 2) * q

    return RenyiBound.linear(slope, description=f"learning S={S} T={T}")


def rdp_to_dp(bound: RenyiBound, delta: float) -> tuple[float, float]:
    """Convert a Renyi curve to an (eps, delta) guarantee.

    Minimizes eps(alpha) + log(1/delta)/(alpha - 1) over alpha > 1: a dense
    log grid followed by golden-section refinement of the bracketing
    interval. Returns (eps, minimizing alpha); the result never exceeds the
    objective at any probed alpha.
    """
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must be in (0, 1), got {delta}")
    log_inv_delta = math.log(1.0 / delta)

    grid = 1.0 + np.logspace(math.log10(_ALPHA_MIN_OFFSET),
                             math.log10(_ALPHA_MAX - 1.0), _ALPHA_GRID_POINTS)
    obj = np.asarray(bound(grid)) + log_inv_delta / (grid - 1.0)
    i = int(np.argmin(obj))
    best_eps, best_alpha = float(obj[i]), float(grid[i])

    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, _ALPHA_GRID_POINTS - 1)]

    probes = []

    def f(a: float) -> float:
        v = bound(a) + log_inv_delta / (a - 1.0)
        probes.append((v, a))
        return v

    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    x1 = b - inv_phi * (b - a)
    x2 = a + inv_phi * (b - a)
    f1, f2 = f(x1), f(x2)
    while (b - a) > _REFINE_REL_TOL * a:
        if f1 < f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - inv_phi * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + inv_phi * (b - a)
            f2 = f(x2)
    f(0.5 * (a + b))
    refined_eps, refined_alpha = min(probes)
    if refined_eps < best_eps:
        best_eps, best_alpha = refined_eps, refined_alpha
    return best_eps, best_alpha


def weak_triangle(alpha: float, d1_at_2alpha: float, d2_at_2alpha: float) -> float:
    """Chain two Renyi differences evaluated at 2*alpha into one at alpha."""
    if not alpha > 1:
        raise ValueError(f"alpha must be > 1, got {alpha}")
    if d1_at_2alpha < 0 or d2_at_2alpha < 0:
        raise ValueError("Renyi differences must be non-negative")
    return (alpha - 0.5) / (alpha - 1.0) * (d1_at_2alpha + d2_at_2alpha)


def adjacency_bound_unbiased(F: float, n: int) -> float:
    """Order-free Renyi difference of the small-step-limit laws on adjacent
    datasets, when per-sample losses differ by at most F: 2*F/n."""
    if F < 0:
        raise ValueError(f"F must be >= 0, got {F}")
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return 2.0 * F / n


def retrain_saving_lower_bound(pc: ProblemConstants, ns: NoiseSchedule,
                               alpha: float) -> tuple[float, bool]:
    """Lower bound on iterations saved by fine-tuning instead of retraining.

    Returns (saving, vacuous). The bound (alpha/(m*eta)) * log(m^2 n^2 / (16 M^2))
    is only meaningful for strongly convex problems with m*n > 4*M; otherwise
    it is reported as 0 with vacuous=True.
    """
    if not alpha > 1:
        raise ValueError(f"alpha must be > 1, got {alpha}")
    if pc.m <= 0:
        raise ValueError("retraining-saving bound requires strong convexity (m > 0)")
    arg = pc.m ** 2 * pc.n ** 2 / (16.0 * pc.M ** 2)
    if arg <= 1.0:
        return 0.0, True
    return alpha / (pc.m * ns.eta) * math.log(arg), False
