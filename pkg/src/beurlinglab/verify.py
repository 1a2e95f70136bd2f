"""Cross-module invariant suite behind the VERIFY experiment.

Each check is a small deterministic property test; the suite either collects
all outcomes or fails fast with the first violated property named.  The
pytest suite reuses these checks, so VERIFY and CI observe the same
properties.
"""

from __future__ import annotations

import math

import numpy as np

from . import reference, smoothing, systems, transfer
from .lattice import density_estimate, euler_density, generate
from .steps import SignedMeasure, StepFunction, adaptive_simpson, combine_max, combine_min, stieltjes


def _rng(seed=0):
    return np.random.default_rng(seed)


def check_eval_monotone():
    rng = _rng(1)
    for _ in range(20):
        k = rng.integers(1, 12)
        locs = np.sort(rng.uniform(1.01, 100.0, k))
        F = StepFunction(locs, rng.uniform(0.1, 3.0, k))
        x = np.sort(rng.uniform(1.0, 120.0, 40))
        v = F(x)
        assert np.all(np.diff(v) >= 0), "eval_step not nondecreasing"


def check_stieltjes_linear():
    rng = _rng(2)
    for _ in range(10):
        k = rng.integers(1, 8)
        locs = np.sort(rng.uniform(1.5, 50.0, k))
        m = SignedMeasure(locs, rng.standard_normal(k))
        f = lambda y: 1.0 / y
        g = lambda y: math.log(y)
        a, b = rng.standard_normal(2)
        lhs = stieltjes(lambda y: a * f(y) + b * g(y), m, 1.0, 60.0)
        rhs = a * stieltjes(f, m, 1.0, 60.0) + b * stieltjes(g, m, 1.0, 60.0)
        assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(rhs)), "stieltjes not linear"


def check_parts_identity():
    # int y^{-s} da = a(Y) Y^{-s} + s int_1^Y y^{-s-1} a(y) dy on random atoms
    rng = _rng(3)
    for _ in range(6):
        k = int(rng.integers(1, 7))
        locs = np.sort(rng.uniform(1.5, 40.0, k))
        w = rng.standard_normal(k)
        pert = systems.Perturbation(locs, w, systems.Reference.TAU, horizon=50.0)
        s = complex(rng.uniform(1.0, 2.5), rng.uniform(-3, 3))
        lhs = complex(np.sum(w * locs ** (-s)))
        Y = 50.0
        val = 0.0 + 0.0j
        edges = np.concatenate([[1.0], locs, [Y]])
        for lo, hi in zip(edges[:-1], edges[1:]):
            if hi <= lo:
                continue
            av = pert.a(0.5 * (lo + hi))
            if av == 0.0:
                continue
            piece, _ = adaptive_simpson(lambda y: av * y ** (-s - 1), lo, hi, 1e-12)
            val += piece
        rhs = pert.a(Y) * Y ** (-s) + s * val
        assert abs(lhs - rhs) <= 1e-9 * max(1.0, abs(lhs)), (
            f"integration-by-parts identity violated: {lhs} vs {rhs}")


def check_combine_sandwich():
    rng = _rng(4)
    for _ in range(10):
        F = StepFunction(np.sort(rng.uniform(1.1, 30, 5)), rng.uniform(0.2, 2, 5))
        G = StepFunction(np.sort(rng.uniform(1.1, 30, 4)), rng.uniform(0.2, 2, 4))
        mx, mn = combine_max(F, G), combine_min(F, G)
        grid = np.linspace(1.0, 35.0, 200)
        assert np.all(mn(grid) <= F(grid) + 1e-12), "min exceeds F"
        assert np.all(F(grid) <= mx(grid) + 1e-12), "F exceeds max"
        assert np.all(mx(grid) + 1e-12 >= G(grid)), "max below G"


def check_tau_quadrature():
    for y in (math.e, 5.0, 40.0):
        simpson, _ = adaptive_simpson(systems.tau_density, 1.0, y, 1e-11)
        nodes, wts = np.polynomial.legendre.leggauss(80)
        ys = 0.5 * (y - 1.0) * nodes + 0.5 * (y + 1.0)
        gl = 0.5 * (y - 1.0) * float(np.sum(wts * systems.tau_density(ys)))
        cf = systems.tau(y)
        assert abs(simpson - gl) <= 1e-8, "quadrature oracles disagree"
        assert abs(cf - simpson) <= 1e-8, "closed form vs quadrature"


def check_random_sign_block_bound():
    # per-block divergence floor |a(y)| > 0.1 e^n n^-alpha from n0 on
    for seed in range(6):
        a = systems.random_sign_system(1.0, 40, seed)
        for n in range(8, 40):
            y = math.exp(n) * 1.5
            floor = 0.1 * math.exp(n) / n
            assert abs(a.a(y)) > floor, f"block floor fails at n={n} seed={seed}"


def check_plus_positive_part():
    P = systems.block_coinflip_system(math.exp(8.0), seed=5)
    P1 = systems.usual_primes(math.exp(8.0))
    Pp = systems.plus_system(P, P1)
    grid = np.unique(np.concatenate([P.counting.locs[:2000],
                                     P1.counting.locs[:2000]]))
    lhs = Pp.counting(grid) - P1.counting(grid)
    rhs = np.maximum(P.counting(grid) - P1.counting(grid), 0.0)
    assert np.abs(lhs - rhs).max() <= 1e-9, "plus system is not the positive part"


def check_rule2_domination():
    P = systems.block_coinflip_system(math.exp(8.0), seed=9)
    P1 = systems.usual_primes(math.exp(8.0))
    for sysd in (systems.plus_system(P, P1), systems.minus_system(P, P1)):
        grid = np.geomspace(2.0, math.exp(8.0), 400)
        lhs = np.abs(sysd.counting(grid) - P1.counting(grid))
        rhs = np.abs(P.counting(grid) - P1.counting(grid))
        assert np.all(lhs <= rhs + 1e-9), "swap construction violates domination"


def check_naturals_enumeration():
    N = generate(systems.usual_primes(10_000.0), 10_000.0)
    vals = N.values
    assert N.total() == 10_000, "wrong count of naturals"
    assert np.abs(vals - np.arange(1, 10_001)).max() < 1e-6, "values drift"
    assert np.all(N.multiplicities == 1), "spurious multiplicities"


def check_recurrence():
    # N_{P u {q}}(x) = sum_k N_P(x / q^k), exactly, on small free systems
    rng = _rng(7)
    for trial in range(8):
        k = int(rng.integers(1, 4))
        gens = np.sort(rng.uniform(1.6, 9.0, k))
        q = float(rng.uniform(1.6, 9.0))
        X = float(rng.uniform(300.0, 3000.0))
        P = StepFunction(gens, np.ones(k))
        Pq = StepFunction(np.sort(np.append(gens, q)), np.ones(k + 1))
        NP = generate(P, X)
        NPq = generate(Pq, X)
        direct = NPq.count(X)
        total = 0.0
        x = X
        while x >= 1.0:
            total += NP.count(x)
            x /= q
        assert direct == total, f"recurrence fails: {direct} vs {total}"


def check_merge_tol_halving():
    P = StepFunction([2.0, 4.0, 5.0], [1, 1, 1])
    n1 = generate(P, 500.0, merge_tol=1e-9).total()
    n2 = generate(P, 500.0, merge_tol=5e-10).total()
    assert n1 == n2, "count changes when halving merge_tol"


def check_euler_inverse():
    rng = _rng(8)
    for _ in range(10):
        S = rng.uniform(1.2, 90.0, rng.integers(1, 12))
        prod = euler_density(removed=S) * euler_density(added=S)
        assert abs(prod - 1.0) <= 1e-14, "euler density inverse identity"


def check_density_euler_match():
    P = systems.usual_primes(100_000.0)
    keep = ~np.isin(P.counting.locs, [2.0, 3.0])
    P2 = StepFunction(P.counting.locs[keep], P.counting.weights[keep],
                      horizon=100_000.0)
    rep = density_estimate(generate(P2, 100_000.0))
    ref = euler_density(removed=[2, 3])
    assert rep.trend == "CONVERGENT", "removed-primes system not convergent"
    assert abs(rep.estimate - ref) <= 0.02 * ref, "density vs euler product"


def check_conjugate_symmetry():
    a = systems.random_sign_system(1.0, 30, 12)
    for which in ("A", "B", "C"):
        L = transfer.sample_line(a, which, 1.0, 5.0, 0.01)
        assert L.conjugate_defect() <= 1e-12, f"conjugate symmetry of {which}"


def check_closed_form_euler_log():
    for p in (1.7, math.e, 31.0):
        pert = systems.Perturbation([p], [1.0], systems.Reference.TAU, horizon=1e6)
        for s in (1.0, 2.0, 1.0 + 2.3j):
            got = transfer.B_of(pert, s, tol=1e-12)
            want = -np.log(1.0 - p ** (-np.asarray(s, complex)))
            assert abs(got - want) <= 1e-10, "single-atom Euler-log closed form"


def check_chain_identities():
    rng = _rng(9)
    a = systems.random_sign_system(0.9, 15, 4)
    s = rng.uniform(1.0, 3.0, 20) + 1j * rng.uniform(-4, 4, 20)
    B = transfer.B_of(a, s)
    C = transfer.C_of(a, s)
    Z = transfer.Z_of(a, s)
    assert np.abs(np.exp(B) - C).max() <= 1e-10, "exp(B) = C"
    assert np.abs((s - 1.0) / s * Z - C).max() <= 1e-10, "(s-1)/s Z = C"
    assert np.all(np.abs(C) > 0), "C vanished"


def check_diamond_monotone():
    a = systems.random_sign_system(1.0, 25, 3)
    d = transfer.diamond_integral(a, np.exp(np.linspace(1.0, 25.0, 60)))
    assert np.all(np.diff(d.I) >= -1e-15), "partial integrals decrease"


def check_smoothed_reference():
    N0 = reference.reference_step()
    u = np.array([0.25, 0.5, 1.0, 3.0])
    s = smoothing.smooth_counting(N0, 0.1, u, tilt_sigma=1.0)
    oracle = smoothing.smoothed_reference_ratio(0.1, u)
    assert np.abs(s.ratios() - oracle).max() <= 1e-12, "reference smoothing"


def check_side_agreement():
    eps, sigma = 0.1, 1.5
    u = np.linspace(2.0, 6.0, 5)
    Ne = reference.integers_with_generators([math.e], math.exp(7.0))
    ae = systems.Perturbation([math.e], [1.0], systems.Reference.TAU, horizon=1e9)
    conv = smoothing.smooth_counting(Ne, eps, u, tilt_sigma=sigma)
    four = smoothing.fourier_counting(ae, sigma, eps, np.exp(u))
    rel = np.abs(conv.values - four.values) / np.abs(conv.values)
    assert rel.max() <= 1e-6, f"side agreement off: {rel.max():.2e}"


def check_mass_identity():
    a0 = systems.Perturbation([], [], systems.Reference.TAU)
    u = np.arange(-1.5, 1.5001, 0.01)
    _, mass = smoothing.fourier_derivative(a0, 0.1, u)
    assert abs(mass - 1.0) <= 1e-8, f"mass identity: {mass}"


def check_monotone_smoothing():
    N = reference.naturals_staircase(2000.0)
    u = np.linspace(1.0, 6.0, 40)
    for tilt in (0.0, 1.0):
        s = smoothing.smooth_counting(N, 0.15, u, tilt_sigma=tilt)
        assert np.all(np.diff(s.values) >= -1e-10), "smoothing not monotone in u"


def check_lemma_convergent():
    tgt = reference.block_slope_target([0.0], [0.5])
    M = reference.staircase_from_target(tgt, 21.0)
    rep = smoothing.lemma_check(M, [0.05, 0.2])
    assert rep.base_trend == "CONVERGENT", "base trend"
    assert rep.all_match, "smoothed trend deviates for small eps"
    for _, _, est in rep.eps_trends:
        assert abs(est - 0.5) <= 0.02, "smoothed density off"


ALL_CHECKS = [
    ("counting.eval_monotone", check_eval_monotone),
    ("counting.stieltjes_linear", check_stieltjes_linear),
    ("counting.parts_identity", check_parts_identity),
    ("counting.combine_sandwich", check_combine_sandwich),
    ("systems.tau_quadrature", check_tau_quadrature),
    ("systems.random_sign_block_bound", check_random_sign_block_bound),
    ("systems.plus_positive_part", check_plus_positive_part),
    ("systems.rule2_domination", check_rule2_domination),
    ("lattice.naturals_enumeration", check_naturals_enumeration),
    ("lattice.recurrence", check_recurrence),
    ("lattice.merge_tol_halving", check_merge_tol_halving),
    ("lattice.euler_inverse", check_euler_inverse),
    ("lattice.density_euler_match", check_density_euler_match),
    ("transfer.conjugate_symmetry", check_conjugate_symmetry),
    ("transfer.closed_form_euler_log", check_closed_form_euler_log),
    ("transfer.chain_identities", check_chain_identities),
    ("transfer.diamond_monotone", check_diamond_monotone),
    ("smoothing.reference_closed_form", check_smoothed_reference),
    ("smoothing.side_agreement", check_side_agreement),
    ("smoothing.mass_identity", check_mass_identity),
    ("smoothing.monotone", check_monotone_smoothing),
    ("smoothing.lemma_convergent", check_lemma_convergent),
]


def run_suite(fail_fast=True):
    """Run every invariant; returns [(name, ok, detail)], raising on the first
    failure when fail_fast is set."""
    results = []
    for name, fn in ALL_CHECKS:
        try:
            fn()
            results.append((name, True, ""))
        except AssertionError as exc:
            results.append((name, False, str(exc)))
            if fail_fast:
                raise AssertionError(f"{name}: {exc}") from exc
    return results
