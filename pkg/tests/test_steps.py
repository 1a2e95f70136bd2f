import json
import math

import numpy as np
import pytest

from beurlinglab.errors import DomainError, EvaluationError, UnsupportedError
from beurlinglab.steps import (PiecewiseLinear, SignedMeasure, StepFunction,
                               adaptive_simpson, combine_max, combine_min,
                               eval_step, stieltjes)


def sieve_oracle(n):
    # independent trial-division sieve for small n
    return [p for p in range(2, n + 1)
            if all(p % d for d in range(2, int(p**0.5) + 1))]


class TestEvalStep:
    def test_below_first_atom(self):
        F = StepFunction([2.0], [1.0])
        assert F(1.5) == 0.0

    def test_right_continuous_at_atom(self):
        F = StepFunction([2.0], [1.0])
        assert F(2.0) == 1.0

    def test_prime_staircase_matches_sieve(self):
        primes = sieve_oracle(10)
        F = StepFunction(primes, np.ones(len(primes)))
        assert F(10.0) == len(primes) == 4

    def test_base_value_at_one(self):
        F = StepFunction([3.0], [2.0], base=1.0)
        assert F(1.0) == 1.0

    def test_domain_error_below_one(self):
        F = StepFunction([2.0], [1.0])
        with pytest.raises(DomainError):
            F(0.5)

    def test_monotone_on_random_instances(self):
        rng = np.random.default_rng(0)
        for _ in range(25):
            k = int(rng.integers(1, 10))
            F = StepFunction(np.sort(rng.uniform(1.01, 50, k)),
                             rng.uniform(0.1, 2.0, k),
                             smooth=PiecewiseLinear([1.0], [rng.uniform(0, 1)]))
            x = np.sort(rng.uniform(1.0, 60.0, 30))
            assert np.all(np.diff(F(x)) >= 0)

    def test_equal_locations_merge(self):
        F = StepFunction([2.0, 2.0, 3.0], [1.0, 0.5, 1.0])
        assert F.locs.size == 2
        assert F(2.0) == 1.5

    def test_functional_alias(self):
        F = StepFunction([2.0], [1.0])
        assert eval_step(F, 2.0) == F(2.0)


class TestStieltjes:
    def test_single_atom(self):
        m = SignedMeasure([math.e], [1.0])
        assert stieltjes(lambda y: 1 / y, m, 1.0, 10.0) == pytest.approx(
            math.exp(-1), abs=1e-15)

    def test_two_unit_atoms(self):
        m = SignedMeasure([2.0, 3.0], [1.0, 1.0])
        assert stieltjes(lambda y: 1.0, m, 1.0, 10.0) == 2.0

    def test_prime_measure_inverse_squares(self):
        primes = sieve_oracle(10)
        m = SignedMeasure(primes, np.ones(len(primes)))
        want = sum(1.0 / p**2 for p in primes)
        assert stieltjes(lambda y: y**-2, m, 1.0, 10.0) == pytest.approx(
            want, rel=1e-15)
        assert want == pytest.approx(0.416984, abs=1e-6)

    def test_half_open_interval(self):
        m = SignedMeasure([2.0, 5.0], [1.0, 1.0])
        assert stieltjes(lambda y: 1.0, m, 2.0, 5.0) == 1.0  # excludes y0

    def test_smooth_density_part(self):
        m = SignedMeasure([], [], smooth_density=lambda y: 1.0 / y)
        got = stieltjes(lambda y: 1.0, m, 1.0, math.e)
        assert got == pytest.approx(1.0, abs=1e-9)

    def test_nonfinite_integrand_at_atom(self):
        m = SignedMeasure([2.0], [1.0])
        with pytest.raises(EvaluationError):
            stieltjes(lambda y: 1.0 / (y - 2.0), m, 1.0, 3.0)

    def test_linear_in_measure(self):
        rng = np.random.default_rng(1)
        locs = np.sort(rng.uniform(1.5, 20, 6))
        w1, w2 = rng.standard_normal(6), rng.standard_normal(6)
        a, b = 0.7, -1.3
        f = lambda y: math.log(y)
        lhs = stieltjes(f, SignedMeasure(locs, a * w1 + b * w2), 1, 25)
        rhs = (a * stieltjes(f, SignedMeasure(locs, w1), 1, 25)
               + b * stieltjes(f, SignedMeasure(locs, w2), 1, 25))
        assert lhs == pytest.approx(rhs, rel=1e-12)


class TestCombine:
    def test_idempotent(self):
        P = StepFunction([2.0, 3.0], [1.0, 1.0])
        for comb in (combine_max, combine_min):
            Q = comb(P, P)
            x = np.linspace(1, 5, 50)
            assert np.array_equal(Q(x), P(x))

    def test_spec_grid_example(self):
        P = StepFunction([2.0, 3.0], [1.0, 1.0])
        G = StepFunction([2.5], [1.0])
        mx = combine_max(P, G)
        assert mx(2.7) == 1.0
        assert mx(3.0) == 2.0

    def test_pointwise_against_brute_force(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            F = StepFunction(np.sort(rng.uniform(1.1, 20, 5)),
                             rng.uniform(0.5, 2, 5))
            G = StepFunction(np.sort(rng.uniform(1.1, 20, 7)),
                             rng.uniform(0.5, 2, 7))
            mx, mn = combine_max(F, G), combine_min(F, G)
            grid = np.linspace(1.0, 25.0, 500)
            assert np.allclose(mx(grid), np.maximum(F(grid), G(grid)))
            assert np.allclose(mn(grid), np.minimum(F(grid), G(grid)))

    def test_sandwich(self):
        F = StepFunction([2.0, 4.0], [1.0, 2.0])
        G = StepFunction([3.0], [2.5])
        grid = np.linspace(1, 6, 100)
        mn, mx = combine_min(F, G), combine_max(F, G)
        assert np.all(mn(grid) <= F(grid))
        assert np.all(F(grid) <= mx(grid))

    def test_mismatched_horizons(self):
        F = StepFunction([2.0], [1.0], horizon=10.0)
        G = StepFunction([3.0], [1.0], horizon=20.0)
        with pytest.raises(DomainError):
            combine_max(F, G)

    def test_smooth_part_unsupported(self):
        F = StepFunction([2.0], [1.0], smooth=PiecewiseLinear([1.0], [1.0]))
        with pytest.raises(UnsupportedError):
            combine_max(F, F)


class TestPartsIdentity:
    def test_atomic_measure_by_parts(self):
        # int y^-s da over (1, Y] = a(Y) Y^-s + s int_1^Y y^{-s-1} a(y) dy
        rng = np.random.default_rng(3)
        for _ in range(5):
            k = int(rng.integers(1, 6))
            locs = np.sort(rng.uniform(1.5, 30, k))
            w = rng.standard_normal(k)
            s = complex(rng.uniform(1, 2.5), rng.uniform(-2, 2))
            Y = 40.0
            lhs = np.sum(w * locs ** (-s))
            cum = np.concatenate([[0.0], np.cumsum(w)])
            edges = np.concatenate([[1.0], locs, [Y]])
            integral = 0.0 + 0.0j
            for i, (lo, hi) in enumerate(zip(edges[:-1], edges[1:])):
                piece, _ = adaptive_simpson(
                    lambda y, c=cum[i]: c * y ** (-s - 1), lo, hi, 1e-12)
                integral += piece
            rhs = cum[-1] * Y ** (-s) + s * integral
            assert abs(lhs - rhs) < 1e-9


class TestSerialization:
    def test_round_trip_bit_stable(self):
        F = StepFunction([2.0, math.pi, 10.0 / 3.0], [1.0, 0.25, 2.0],
                         base=1.0, smooth=PiecewiseLinear([1.0, 5.0], [0.5, 1.5]),
                         horizon=100.0)
        G = StepFunction.loads(F.dumps())
        assert np.array_equal(F.locs, G.locs)
        assert np.array_equal(F.weights, G.weights)
        assert F.base == G.base and F.horizon == G.horizon
        assert np.array_equal(F.smooth.breaks, G.smooth.breaks)
        assert F.dumps() == G.dumps()

    def test_document_shape(self):
        F = StepFunction([2.0], [1.0])
        doc = json.loads(F.dumps())
        assert set(doc) == {"base", "atoms", "smooth"}
        assert isinstance(doc["atoms"][0][0], str)  # 17-digit location string
