import math
import warnings

import numpy as np
import pytest

from beurlinglab.errors import CapacityError, DomainError
from beurlinglab.steps import SignedMeasure, StepFunction, adaptive_simpson
from beurlinglab.systems import (Perturbation, Reference,
                                 alternating_block_system,
                                 block_coinflip_system,
                                 check_multiplicative_freeness, jitter_atoms,
                                 minus_system, perturb_bounded,
                                 perturbation_of, plus_system,
                                 random_sign_system, sign_sequence,
                                 system_from_json, tau, tau_density,
                                 usual_primes)
from beurlinglab.transfer import diamond_integral


def sieve_oracle(n):
    return [p for p in range(2, n + 1)
            if all(p % d for d in range(2, int(p**0.5) + 1))]


class TestUsualPrimes:
    def test_small(self):
        sys10 = usual_primes(10.0)
        assert list(sys10.counting.locs) == [2, 3, 5, 7]
        assert sys10.free

    def test_edge(self):
        assert list(usual_primes(2.0).counting.locs) == [2]

    def test_count_100(self):
        assert usual_primes(100.0).counting.locs.size == 25

    def test_matches_trial_division(self):
        assert list(usual_primes(500.0).counting.locs) == sieve_oracle(500)

    def test_capacity(self):
        with pytest.raises(CapacityError):
            usual_primes(2e9)

    def test_domain(self):
        with pytest.raises(DomainError):
            usual_primes(1.5)


class TestTau:
    def test_zero_at_one(self):
        assert tau(1.0) == 0.0

    def test_adaptive_simpson_vs_gauss_legendre(self):
        y = math.e
        simpson, _ = adaptive_simpson(tau_density, 1.0, y, 1e-12)
        nodes, wts = np.polynomial.legendre.leggauss(60)
        ys = 0.5 * (y - 1.0) * nodes + 0.5 * (y + 1.0)
        gl = 0.5 * (y - 1.0) * float(np.sum(wts * tau_density(ys)))
        assert simpson == pytest.approx(gl, abs=1e-8)
        assert tau(y) == pytest.approx(simpson, abs=1e-8)

    def test_strictly_increasing(self):
        assert tau(10.0) > tau(5.0)
        y = np.geomspace(1.0001, 1e6, 200)
        assert np.all(np.diff(tau(y)) > 0)

    def test_integrand_extension_at_one(self):
        assert tau_density(1.0) == 1.0
        assert tau(1.0 + 1e-9) == pytest.approx(1e-9, rel=1e-6)


class TestRandomSignSystem:
    def test_weight_formula(self):
        a = random_sign_system(1.0, 5, seed=0)
        assert abs(a.weights[1]) == pytest.approx(math.exp(2) / 2, rel=1e-15)
        assert abs(a.weights[1]) == pytest.approx(3.694528, abs=1e-6)

    def test_determinism(self):
        a = random_sign_system(0.8, 50, seed=42)
        b = random_sign_system(0.8, 50, seed=42)
        assert np.array_equal(a.weights, b.weights)

    def test_sign_balance(self):
        signs = sign_sequence(7, 10_000)
        frac = float(np.mean(signs > 0))
        assert abs(frac - 0.5) <= 0.02

    def test_alpha_outside_regime_warns(self):
        with warnings.catch_warnings(record=True) as rec:
            warnings.simplefilter("always")
            a = random_sign_system(1.4, 5, seed=0)
        assert any("alpha" in str(w.message) for w in rec)
        assert a.meta.get("alpha_outside_regime")

    def test_per_block_divergence_floor(self):
        # |a(y)| > (1/10) e^n n^-alpha on (e^n, e^{n+1}) once n is large
        for seed in range(10):
            a = random_sign_system(1.0, 40, seed)
            for n in range(8, 40):
                y = math.exp(n) * 1.3
                assert abs(a.a(y)) > 0.1 * math.exp(n) / n

    def test_reference_is_tau(self):
        assert random_sign_system(1.0, 3, 0).reference is Reference.TAU


class TestBlockCoinflip:
    def test_all_heads_doubles(self):
        Y = math.exp(6.0)
        sys_d = block_coinflip_system(Y, seed=0, coins=[True] * 7)
        P1 = usual_primes(Y)
        grid = np.geomspace(2, Y, 300)
        assert np.allclose(sys_d.counting(grid), 2 * P1.counting(grid))

    def test_all_tails_suppresses(self):
        sys_s = block_coinflip_system(math.exp(6.0), seed=0, coins=[False] * 7)
        assert sys_s.counting.locs.size == 0

    def test_block_increments(self):
        Y = math.exp(8.0)
        seed = 3
        sys_c = block_coinflip_system(Y, seed)
        coins = sys_c.meta["coins"]
        primes = np.asarray(sieve_oracle(int(Y)), dtype=float)
        for n in range(7):
            in_block = (primes >= math.exp(n)) & (primes < math.exp(n + 1))
            lo, hi = math.exp(n) * (1 - 1e-12), math.exp(n + 1) * (1 - 1e-12)
            jump = sys_c.counting(hi) - sys_c.counting(lo)
            expect = 2.0 * in_block.sum() if coins[n] else 0.0
            # the block's left endpoint atom belongs to the previous evaluation
            if primes[in_block].size and primes[in_block][0] == math.exp(n):
                pass
            assert jump in (0.0, 2.0 * in_block.sum())
            assert jump == expect

    def test_determinism_and_truncation_flag(self):
        a = block_coinflip_system(1000.0, seed=9)
        b = block_coinflip_system(1000.0, seed=9)
        assert np.array_equal(a.counting.locs, b.counting.locs)
        assert a.meta["final_block_truncated"]


class TestPlusMinus:
    def test_equal_systems(self):
        P1 = usual_primes(100.0)
        assert np.array_equal(plus_system(P1, P1).counting.locs,
                              P1.counting.locs)
        assert np.array_equal(minus_system(P1, P1).counting.locs,
                              P1.counting.locs)

    def test_ordered_case(self):
        Y = 100.0
        P = block_coinflip_system(Y, 0, coins=[True] * 6)
        P1 = usual_primes(Y)
        grid = np.geomspace(2, Y, 200)
        assert np.allclose(plus_system(P, P1).counting(grid), P.counting(grid))
        assert np.allclose(minus_system(P, P1).counting(grid), P1.counting(grid))

    def test_grid_brute_force(self):
        Y = math.exp(6.0)
        P = block_coinflip_system(Y, seed=5)
        P1 = usual_primes(Y)
        Pp = plus_system(P, P1)
        grid = np.geomspace(2, Y, 500)
        assert np.allclose(Pp.counting(grid),
                           np.maximum(P.counting(grid), P1.counting(grid)))

    def test_positive_part_identity(self):
        Y = math.exp(7.0)
        P = block_coinflip_system(Y, seed=11)
        P1 = usual_primes(Y)
        Pp = plus_system(P, P1)
        bp = np.concatenate([P.counting.locs, P1.counting.locs])
        lhs = Pp.counting(bp) - P1.counting(bp)
        rhs = np.maximum(P.counting(bp) - P1.counting(bp), 0.0)
        assert np.abs(lhs - rhs).max() < 1e-9

    def test_rule2_domination(self):
        Y = math.exp(7.0)
        P = block_coinflip_system(Y, seed=2)
        P1 = usual_primes(Y)
        grid = np.geomspace(2, Y, 300)
        for swapped in (plus_system(P, P1), minus_system(P, P1)):
            lhs = np.abs(swapped.counting(grid) - P1.counting(grid))
            rhs = np.abs(P.counting(grid) - P1.counting(grid))
            assert np.all(lhs <= rhs + 1e-9)

    def test_horizon_mismatch(self):
        with pytest.raises(DomainError):
            plus_system(usual_primes(100.0), usual_primes(200.0))


class TestPerturbBounded:
    def test_zero_shift(self):
        P = usual_primes(50.0)
        Q = perturb_bounded(P, 0.0)
        grid = np.linspace(1, 50, 100)
        assert np.array_equal(Q.counting(grid), P.counting(grid))

    def test_unit_shift(self):
        P = usual_primes(50.0)
        Q = perturb_bounded(P, 1.0)
        grid = np.linspace(1, 50, 100)
        assert np.allclose(Q.counting(grid), P.counting(grid) + 1.0)
        assert Q.meta["sup_g"] == 1.0

    def test_monotonicity_violation_named(self):
        P = usual_primes(50.0)
        g = SignedMeasure([10.0], [-5.0])
        with pytest.raises(DomainError, match="10"):
            perturb_bounded(P, g)

    def test_diamond_shift_bound(self):
        # closeness integrals of P and P + g differ at most by sup|g|
        Y = math.exp(9.0)
        P = usual_primes(Y, reference=Reference.PI)
        g = 3.0
        Q = perturb_bounded(P, g)
        grid = np.exp(np.arange(1.0, 9.0))
        dP = diamond_integral(perturbation_of(P), grid)
        dQ = diamond_integral(perturbation_of(Q), grid)
        assert np.abs(dQ.I - dP.I).max() <= g


class TestGenericity:
    def test_jitter_preserves_order(self):
        locs = np.asarray(sieve_oracle(10_000), dtype=float)
        jit = jitter_atoms(locs, seed=4)
        assert np.all(np.diff(jit) > 0)
        assert np.abs(jit / locs - 1.0).max() <= 1e-6

    def test_freeness_check(self):
        assert check_multiplicative_freeness([2.0, 3.0, 5.0])
        assert not check_multiplicative_freeness([2.0, 4.0])
        jit = jitter_atoms(np.asarray([2., 3., 5., 7., 11.]), seed=1)
        assert check_multiplicative_freeness(jit)


class TestLoader:
    def test_usual(self):
        sys_u = system_from_json({"kind": "usual", "params": {"Y": 100}})
        assert sys_u.counting.locs.size == 25

    def test_random_sign(self):
        a = system_from_json({"kind": "random_sign",
                              "params": {"alpha": 1.0, "n_max": 4}, "seed": 2})
        assert isinstance(a, Perturbation)
        assert np.array_equal(a.weights,
                              random_sign_system(1.0, 4, 2).weights)

    def test_plus_of_coinflip(self):
        doc = {"kind": "plus", "params": {
            "P": {"kind": "block_coinflip", "params": {"Y": 1000.0}, "seed": 3},
            "P1": {"kind": "usual", "params": {"Y": 1000.0}}}}
        sys_p = system_from_json(doc)
        assert sys_p.meta["kind"] == "plus"

    def test_custom_round_trip(self):
        F = StepFunction([2.0, 3.5], [1.0, 2.0], horizon=10.0)
        doc = {"kind": "custom", "params": {"counting": F.to_json(), "Y": 10.0}}
        sys_c = system_from_json(doc)
        assert np.array_equal(sys_c.counting.locs, F.locs)

    def test_unknown_kind(self):
        with pytest.raises(DomainError):
            system_from_json({"kind": "nope"})


class TestHypothesisChecks:
    def test_o_y_warning(self):
        dense = StepFunction(np.linspace(1.5, 10, 30), np.ones(30), horizon=10.0)
        with warnings.catch_warnings(record=True) as rec:
            warnings.simplefilter("always")
            from beurlinglab.systems import GenPrimeSystem
            GenPrimeSystem(dense, 10.0)
        assert any("o(y)" in str(w.message) for w in rec)

    def test_perturbation_small_at_horizon(self):
        a = random_sign_system(1.0, 20, 0)
        assert a.check_small_at_horizon()


class TestAlternatingBlocks:
    def test_weights_pattern(self):
        sys_a = alternating_block_system(math.exp(9.5), block_len=3.0,
                                         start_doubled=True)
        locs, w = sys_a.counting.locs, sys_a.counting.weights
        k = np.floor(np.log(locs) / 3.0).astype(int)
        assert np.all(w[k == 0] == 1.0)
        assert np.all(w[k == 1] == 2.0)
        assert not np.any(k == 2)  # suppressed block has no atoms
        assert np.all(w[k == 3] == 2.0)
