import math

import mpmath as mp
import numpy as np
import pytest

from certunlearn import (BudgetUnreachable, INFINITE, NoFeasibleSigma, NoiseSchedule,
                         RenyiBound, binary_search_sigma, converted_epsilon,
                         find_min_k, learn_epsilon0, rdp_to_dp, sequential_epsilon,
                         sequential_k_schedule, unlearn_epsilon)

mp.mp.dps = 40

# frozen by the independent high-precision oracle (20k-point alpha grid +
# golden refinement, cross-checked in mpmath) before this package was built
ORACLE_SIGMA = {
    "mnist38": (0.18780331288, 0.0940213657285, 0.0189925297516,
                0.00961075875781, 0.00491652049967, 0.00208958398495),
    "cifar10-binary": (0.243116422679, 0.121713683414, 0.0245923860723,
                       0.0124486848788, 0.00637161887569, 0.00271170745857),
    "cifar10-multi": (0.0471750956357, 0.0236133797916, 0.00476341106993,
                      0.00240679245069, 0.00122783121527, 0.000518349685025),
}
EPS_GRID = (0.05, 0.1, 0.5, 1.0, 2.0, 5.0)

ORACLE_SEQ_TOTALS = {5: 26726, 10: 11847, 20: 6858}
ORACLE_SEQ_HEADS = {5: [359, 721, 796], 10: [785, 1053, 1093], 20: [1172, 1397, 1416]}
ORACLE_FIND_K_S100 = 2012          # sigma=0.03, eps=1, S=100, mnist38
ORACLE_SEQ_EPS_I3_A2 = 5.468127728167355e-09   # b=5 schedule, alpha=2


def _ns(preset, sigma, k=0):
    return NoiseSchedule(eta=preset.eta, sigma=sigma, T=INFINITE, K=k)


class TestFindMinK:
    def test_zero_when_target_already_met(self, mnist):
        ns = _ns(mnist, 0.03)
        base = converted_epsilon(mnist.pc, ns, mnist.regime, 1, 0, mnist.delta)
        k = find_min_k(2.0 * base, mnist.delta, mnist.pc, ns, mnist.regime, S=1)
        assert k == 0

    def test_calibrated_sigma_needs_exactly_one_step(self, mnist):
        sigma = binary_search_sigma(1.0, mnist.delta, 1, mnist.pc, mnist.regime,
                                    S=1, eta=mnist.eta)
        ns = _ns(mnist, sigma)
        assert find_min_k(1.0, mnist.delta, mnist.pc, ns, mnist.regime, S=1) == 1

    def test_batch_100_at_sigma_003(self, mnist):
        ns = _ns(mnist, 0.03)
        k = find_min_k(1.0, mnist.delta, mnist.pc, ns, mnist.regime, S=100)
        assert k == ORACLE_FIND_K_S100
        ok = converted_epsilon(mnist.pc, ns, mnist.regime, 100, k, mnist.delta)
        bad = converted_epsilon(mnist.pc, ns, mnist.regime, 100, k - 1, mnist.delta)
        assert ok <= 1.0 < bad

    def test_unreachable_target_raises(self, mnist):
        ns = _ns(mnist, 0.03)
        with pytest.raises(BudgetUnreachable):
            find_min_k(1e-9, mnist.delta, mnist.pc, ns, mnist.regime, S=1,
                       k_max=10 ** 4)

    def test_k_max_boundary_not_skipped_by_galloping(self, mnist):
        # answers just under a non-power-of-two cap must still be found
        ns = _ns(mnist, 0.03)
        args = (1.0, mnist.delta, mnist.pc, ns, mnist.regime)
        assert find_min_k(*args, S=100, k_max=2013) == ORACLE_FIND_K_S100
        assert find_min_k(*args, S=100, k_max=2012) == ORACLE_FIND_K_S100
        with pytest.raises(BudgetUnreachable):
            find_min_k(*args, S=100, k_max=2011)


class TestBinarySearchSigma:
    @pytest.mark.parametrize("preset_name", sorted(ORACLE_SIGMA))
    def test_matches_frozen_oracle(self, preset_name, request):
        preset = {"mnist38": "mnist", "cifar10-binary": "cifar_bin",
                  "cifar10-multi": "cifar_multi"}[preset_name]
        preset = request.getfixturevalue(preset)
        got = [binary_search_sigma(e, preset.delta, 1, preset.pc, preset.regime,
                                   S=1, eta=preset.eta) for e in EPS_GRID]
        assert got == pytest.approx(ORACLE_SIGMA[preset_name], rel=1e-9)

    def test_minimality(self, mnist):
        sigma = binary_search_sigma(0.5, mnist.delta, 1, mnist.pc, mnist.regime,
                                    S=1, eta=mnist.eta)
        shrunk = sigma * (1.0 - 2e-4)
        ns = _ns(mnist, shrunk)
        assert find_min_k(0.5, mnist.delta, mnist.pc, ns, mnist.regime, S=1) > 1

    def test_no_feasible_sigma(self, mnist):
        with pytest.raises(NoFeasibleSigma):
            binary_search_sigma(1.0, mnist.delta, 1, mnist.pc, mnist.regime,
                                S=1, sigma_lo=1e-6, sigma_hi=2e-6, eta=mnist.eta)


class TestSequential:
    def test_single_request_matches_unlearn_chain(self, mnist):
        sigma, b, k = 0.03, 5, 37
        ns = _ns(mnist, sigma, k)
        direct = unlearn_epsilon(learn_epsilon0(mnist.pc, ns, mnist.regime, S=b),
                                 mnist.pc, ns, mnist.regime, K=k)
        for a in (1.5, 2.0, 30.0):
            got = sequential_epsilon(a, sigma, b, 1, [k], mnist.pc, mnist.regime,
                                     eta=mnist.eta)
            assert got == pytest.approx(direct(a), rel=1e-13)

    def test_second_request_with_no_steps_has_no_decay(self, mnist):
        sigma, b = 0.03, 5
        slope = learn_epsilon0(mnist.pc, _ns(mnist, sigma), mnist.regime,
                               S=b).meta["slope"]

        def eps1(a):
            return math.exp(-mnist.eta * mnist.pc.m * 4 / a) * slope * a

        a = 3.0
        got = sequential_epsilon(a, sigma, b, 2, [4, 0], mnist.pc, mnist.regime,
                                 eta=mnist.eta)
        expect = (a - 0.5) / (a - 1.0) * (slope * 2 * a + eps1(2 * a))
        assert got == pytest.approx(expect, rel=1e-13)

    def test_frozen_third_request_value(self, mnist):
        heads = [359, 721, 796]
        got = sequential_epsilon(2.0, 0.03, 5, 3, heads, mnist.pc, mnist.regime,
                                 eta=mnist.eta)
        assert got == pytest.approx(ORACLE_SEQ_EPS_I3_A2, rel=1e-9)

    def test_third_request_against_mpmath(self, mnist):
        # independent arbitrary-precision recursion
        heads = [359, 721, 796]
        m, n, M = mp.mpf("0.0119"), 11982, 1
        eta = 1 / (mp.mpf("0.25") + m)
        sig = mp.mpf("0.03")

        def eps0(a, s):
            return 4 * a * s * s * M * M / (m * sig ** 2 * n ** 2)

        def rec(a, i):
            decay = mp.e ** (-eta * m * heads[i - 1] / a)
            if i == 1:
                return decay * eps0(a, 5)
            w = (a - mp.mpf("0.5")) / (a - 1)
            return decay * w * (eps0(2 * a, 5) + rec(2 * a, i - 1))

        expect = float(rec(mp.mpf(2), 3))
        got = sequential_epsilon(2.0, 0.03, 5, 3, heads, mnist.pc, mnist.regime,
                                 eta=mnist.eta)
        assert got == pytest.approx(expect, rel=1e-12)

    def test_schedule_collapses_to_find_min_k(self, mnist):
        sigma = 0.02
        ks = sequential_k_schedule(1.0, mnist.delta, sigma, 5, 5, mnist.pc,
                                   mnist.regime, eta=mnist.eta)
        ns = _ns(mnist, sigma)
        assert ks == [find_min_k(1.0, mnist.delta, mnist.pc, ns, mnist.regime, S=5)]

    @pytest.mark.slow
    @pytest.mark.parametrize("b", [5, 10, 20])
    def test_schedule_matches_frozen_oracle(self, mnist, b):
        ks = sequential_k_schedule(1.0, mnist.delta, 0.03, 100, b, mnist.pc,
                                   mnist.regime, eta=mnist.eta)
        assert ks[:3] == ORACLE_SEQ_HEADS[b]
        assert sum(ks) == ORACLE_SEQ_TOTALS[b]
        assert all(k2 >= k1 for k1, k2 in zip(ks, ks[1:]))

    def test_uneven_final_batch_uses_actual_size(self, mnist):
        ks = sequential_k_schedule(1.0, mnist.delta, 0.02, 7, 5, mnist.pc,
                                   mnist.regime, eta=mnist.eta)
        assert len(ks) == 2
        # a same-size second batch can only need more steps than the smaller one
        ks_full = sequential_k_schedule(1.0, mnist.delta, 0.02, 10, 5, mnist.pc,
                                        mnist.regime, eta=mnist.eta)
        assert ks_full[0] == ks[0]
        assert ks[1] <= ks_full[1]

    def test_rejects_bad_indices(self, mnist):
        with pytest.raises(ValueError):
            sequential_epsilon(2.0, 0.03, 5, 0, [], mnist.pc, mnist.regime)
        with pytest.raises(ValueError):
            sequential_epsilon(2.0, 0.03, 5, 2, [3], mnist.pc, mnist.regime)
        with pytest.raises(ValueError):
            sequential_epsilon(1.0, 0.03, 5, 1, [3], mnist.pc, mnist.regime)


class TestConvertedEpsilonChain:
    def test_certificate_reverifiable_from_row(self, mnist):
        # the emitted (sigma, K) pair alone re-derives the certificate
        sigma = binary_search_sigma(2.0, mnist.delta, 1, mnist.pc, mnist.regime,
                                    S=1, eta=mnist.eta)
        ns = _ns(mnist, sigma, 1)
        bound = unlearn_epsilon(learn_epsilon0(mnist.pc, ns, mnist.regime, S=1),
                                mnist.pc, ns, mnist.regime, K=1)
        eps, _ = rdp_to_dp(bound, mnist.delta)
        assert eps <= 2.0
        assert eps == converted_epsilon(mnist.pc, ns, mnist.regime, 1, 1, mnist.delta)
