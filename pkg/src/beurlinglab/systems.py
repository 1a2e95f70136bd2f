"""Constructors for generalized prime systems and their perturbations.

A system is a nondecreasing counting function on (1, Y] plus metadata; a
perturbation is the signed difference to a declared reference, either the
smooth logarithmic-integral reference (TAU) or the usual primes (PI).  All
randomized constructors draw from the counter-based Philox generator keyed by
a 64-bit seed, so every experiment is reproducible across platforms.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from numpy.random import Generator, Philox
from scipy import special as sp

from .errors import CapacityError, DomainError, UnsupportedError
from .sieve import primes_upto
from .steps import PiecewiseLinear, SignedMeasure, StepFunction, combine_max, combine_min

EULER_GAMMA = float(np.euler_gamma)
O_Y_RATIO_BOUND = 0.5  # finite-horizon surrogate for the P(y) = o(y) hypothesis


class Reference(enum.Enum):
    TAU = "tau"
    PI = "pi"


# ---------------------------------------------------------------------------
# the smooth reference tau(y) = integral_1^y (1 - 1/xi) / log(xi) d xi
# ---------------------------------------------------------------------------

def tau(y):
    """Smooth reference counting function, strictly increasing, tau(1) = 0.

    Evaluated through the exponential integral: with w = log y,
    tau = Ei(w) - gamma - log w, with a power series below w = 0.7 where the
    three terms cancel.  Matches adaptive quadrature of the defining integrand
    (which extends continuously to 1 at y = 1) to full precision.
    """
    y_arr = np.atleast_1d(np.asarray(y, dtype=float))
    if np.any(y_arr < 1.0):
        raise DomainError("tau is defined on [1, infinity)")
    w = np.log(y_arr)
    small = w < 0.7
    out = np.empty_like(w)
    if np.any(small):
        ws = w[small]
        k = np.arange(1, 24)
        coeff = 1.0 / (k * sp.factorial(k))
        out[small] = ws[:, None] ** k @ coeff
    if np.any(~small):
        wl = w[~small]
        out[~small] = sp.expi(wl) - EULER_GAMMA - np.log(wl)
    return out.reshape(np.shape(y)) if np.ndim(y) else float(out[0])


def tau_density(y):
    """d tau / dy, continuously extended to 1 at y = 1."""
    y_arr = np.asarray(y, dtype=float)
    w = np.log(y_arr)
    with np.errstate(invalid="ignore", divide="ignore"):
        v = (1.0 - 1.0 / y_arr) / w
    v = np.where(w < 1e-12, 1.0, v)
    return v if np.ndim(y) else float(v)


class NegTauPart:
    """Smooth part ``-d tau`` of a perturbation, truncated at a horizon.

    Provides the density, the cumulative integral and the closed-form
    truncated Mellin transform ``-int_1^Y y^{-s} d tau(y)`` used by the
    analytic transfer chain.
    """

    __slots__ = ("horizon", "W")

    def __init__(self, horizon: float):
        if horizon <= 1.0:
            raise DomainError("horizon must exceed 1")
        self.horizon = float(horizon)
        self.W = math.log(horizon)

    def density(self, y):
        return -tau_density(y)

    def cumulative(self, y):
        return -tau(np.minimum(y, self.horizon))

    def mellin(self, s):
        """-T(s, W) with T(s, W) = int_0^W (e^{-(s-1)w} - e^{-sw}) / w dw."""
        s = np.asarray(s, dtype=complex)
        out = np.empty(s.shape, dtype=complex)
        at_one = s == 1.0
        if np.any(at_one):
            out[at_one] = EULER_GAMMA + math.log(self.W) + sp.exp1(self.W)
        rest = ~at_one
        if np.any(rest):
            sr = s[rest]
            out[rest] = (
                np.log(sr / (sr - 1.0))
                - sp.exp1((sr - 1.0) * self.W)
                + sp.exp1(sr * self.W)
            )
        out = -out
        return out if s.ndim else complex(out)

    def to_json(self):
        return {"kind": "neg_tau", "params": {"horizon": format(self.horizon, ".17g")}}


# ---------------------------------------------------------------------------
# core containers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GenPrimeSystem:
    """A prime counting function with horizon, freeness flag and reference."""

    counting: StepFunction
    truncation_Y: float
    free: bool = True
    reference: Reference = Reference.PI
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        ratio = self.counting(self.truncation_Y) / self.truncation_Y
        if ratio > O_Y_RATIO_BOUND:
            warnings.warn(
                f"counting(Y)/Y = {ratio:.3g} exceeds {O_Y_RATIO_BOUND}; "
                "the o(y) hypothesis looks violated at this horizon",
                stacklevel=3,
            )

    def perturbation(self) -> "Perturbation":
        return perturbation_of(self)


@dataclass(frozen=True)
class Perturbation:
    """Signed difference a(y) = P(y) - P0(y) against the declared reference.

    ``locs``/``weights`` hold the atomic part of ``da``; ``smooth`` is either
    None or a :class:`NegTauPart` carrying the absolutely continuous part.
    """

    locs: np.ndarray
    weights: np.ndarray
    reference: Reference
    smooth: NegTauPart | None = None
    horizon: float = math.inf
    meta: dict = field(default_factory=dict)

    def __init__(self, locs, weights, reference, smooth=None, horizon=math.inf, meta=None):
        measure = SignedMeasure(locs, weights)
        object.__setattr__(self, "locs", measure.locs)
        object.__setattr__(self, "weights", measure.weights)
        object.__setattr__(self, "reference", reference)
        object.__setattr__(self, "smooth", smooth)
        object.__setattr__(self, "horizon", float(horizon))
        object.__setattr__(self, "meta", dict(meta or {}))
        cum = np.concatenate([[0.0], np.cumsum(measure.weights)])
        cum.setflags(write=False)
        object.__setattr__(self, "_cum", cum)

    @property
    def log_locs(self):
        return np.log(self.locs)

    @property
    def measure(self) -> SignedMeasure:
        return SignedMeasure(self.locs, self.weights, smooth_density=self.smooth)

    def a(self, y):
        """Induced a(y): cumulative signed mass on (1, y]."""
        y_arr = np.asarray(y, dtype=float)
        v = self._cum[np.searchsorted(self.locs, y_arr, side="right")]
        if self.smooth is not None:
            v = v + self.smooth.cumulative(y_arr)
        return v if np.ndim(y) else float(v)

    def abs_mass(self) -> float:
        return float(np.abs(self.weights).sum())

    def check_small_at_horizon(self, bound=O_Y_RATIO_BOUND) -> bool:
        if not math.isfinite(self.horizon):
            return True
        return abs(self.a(self.horizon)) / self.horizon <= bound


def perturbation_of(system: GenPrimeSystem) -> Perturbation:
    """da = dP - dP0 for a system, relative to its declared reference."""
    P = system.counting
    if P.smooth is not None:
        raise UnsupportedError("perturbations are derived for atomic systems only")
    Y = system.truncation_Y
    if system.reference is Reference.TAU:
        return Perturbation(
            P.locs, P.weights, Reference.TAU, smooth=NegTauPart(Y), horizon=Y,
            meta={"system": system.meta.get("kind", "custom")},
        )
    primes = primes_upto(Y).astype(float)
    locs = np.concatenate([P.locs, primes])
    weights = np.concatenate([P.weights, -np.ones_like(primes)])
    return Perturbation(
        locs, weights, Reference.PI, horizon=Y,
        meta={"system": system.meta.get("kind", "custom")},
    )


# ---------------------------------------------------------------------------
# seeded randomness
# ---------------------------------------------------------------------------

def sign_sequence(seed: int, n: int) -> np.ndarray:
    """+-1 signs: bit 0 of the first n raw 64-bit Philox outputs under ``seed``."""
    bits = Philox(key=int(seed)).random_raw(int(n)) & 1
    return 1.0 - 2.0 * bits.astype(float)


def _uniforms(seed: int, n: int, stream: int = 0) -> np.ndarray:
    return Generator(Philox(key=(int(seed) << 8) ^ stream)).uniform(size=int(n))


# ---------------------------------------------------------------------------
# constructors
# ---------------------------------------------------------------------------

def usual_primes(Y: float, reference: Reference = Reference.PI) -> GenPrimeSystem:
    """The usual primes up to Y as a generalized prime system."""
    if Y < 2:
        raise DomainError("need Y >= 2 to contain any prime")
    primes = primes_upto(Y).astype(float)
    counting = StepFunction(primes, np.ones_like(primes), horizon=Y, validate=False)
    return GenPrimeSystem(counting, float(Y), free=True, reference=reference,
                          meta={"kind": "usual", "Y": float(Y)})


def random_sign_system(alpha: float, n_max: int, seed: int) -> Perturbation:
    """Signed atoms +-(e^n n^-alpha) at e^n for n = 1..n_max, reference TAU.

    Signs are a fair coin from the seeded generator.  alpha outside (1/2, 1]
    is allowed for exploration but flagged in the metadata.
    """
    if n_max < 1:
        raise DomainError("n_max must be at least 1")
    meta = {"kind": "random_sign", "alpha": float(alpha), "n_max": int(n_max),
            "seed": int(seed)}
    if not (0.5 < alpha <= 1.0):
        warnings.warn(f"alpha={alpha} outside (1/2, 1]; flagged for exploration")
        meta["alpha_outside_regime"] = True
    n = np.arange(1, n_max + 1, dtype=float)
    signs = sign_sequence(seed, n_max)
    weights = signs * np.exp(n) * n ** (-float(alpha))
    return Perturbation(np.exp(n), weights, Reference.TAU,
                        horizon=float(np.exp(n_max + 1)), meta=meta)


def block_coins(seed: int, n_blocks: int) -> np.ndarray:
    """True = double the block, False = suppress it."""
    return (Philox(key=int(seed)).random_raw(int(n_blocks)) & 1).astype(bool)


def block_coinflip_system(Y: float, seed: int, coins=None) -> GenPrimeSystem:
    """Per block [e^n, e^{n+1}) a coin either suppresses every usual prime in
    the block or counts it twice; reference PI.

    ``coins`` overrides the seeded sequence (test hook); the final partial
    block before Y is truncated at Y and recorded in the metadata.
    """
    if Y < math.e:
        raise DomainError("need Y >= e for at least one full block")
    primes = primes_upto(Y).astype(float)
    n_blocks = int(math.floor(math.log(Y))) + 1  # blocks n = 0 .. n_blocks-1
    if coins is None:
        coins = block_coins(seed, n_blocks)
    else:
        coins = np.asarray(coins, dtype=bool)
        if coins.size < n_blocks:
            raise DomainError(f"need {n_blocks} coins, got {coins.size}")
    block_of = np.floor(np.log(primes)).astype(np.int64)
    doubled = coins[block_of]
    locs = primes[doubled]
    counting = StepFunction(locs, np.full(locs.size, 2.0), horizon=Y, validate=False)
    meta = {
        "kind": "block_coinflip", "Y": float(Y), "seed": int(seed),
        "coins": [bool(c) for c in coins[:n_blocks]],
        "final_block_truncated": bool(math.log(Y) != n_blocks - 1),
    }
    return GenPrimeSystem(counting, float(Y), free=True, reference=Reference.PI,
                          meta=meta)


def alternating_block_system(Y: float, block_len: float = 3.0,
                             start_doubled: bool = True) -> GenPrimeSystem:
    """Deterministic double/suppress pattern alternating on the log-blocks
    [e^{k L}, e^{(k+1) L}).

    Each phase multiplies the equilibrium density by the partial Euler factor
    of its primes, so N(x)/x swings between distinct limit points and the
    density trend comes out oscillating already at desk scale.
    """
    if Y < math.e:
        raise DomainError("need Y >= e")
    primes = primes_upto(Y).astype(float)
    k = np.floor(np.log(primes) / float(block_len)).astype(np.int64)
    # block 0 stays neutral: doubling small primes buries the swing under
    # polylogarithmic multiplicity growth until far beyond desk horizons
    weights = np.ones(primes.size)
    phase = (k + (1 if start_doubled else 0)) % 2
    weights[(k > 0) & (phase == 0)] = 2.0
    weights[(k > 0) & (phase == 1)] = 0.0
    keep = weights > 0
    counting = StepFunction(primes[keep], weights[keep], horizon=Y, validate=False)
    meta = {"kind": "alternating_blocks", "block_len": float(block_len),
            "start_doubled": bool(start_doubled), "Y": float(Y)}
    return GenPrimeSystem(counting, float(Y), free=True, reference=Reference.PI,
                          meta=meta)


def plus_system(P: GenPrimeSystem, P1: GenPrimeSystem) -> GenPrimeSystem:
    """Counting max(P, P1): coincides with P where P > P1 and with P1 below."""
    return _combined_system(P, P1, combine_max, "plus")


def minus_system(P: GenPrimeSystem, P1: GenPrimeSystem) -> GenPrimeSystem:
    """Counting min(P, P1)."""
    return _combined_system(P, P1, combine_min, "minus")


def _combined_system(P, P1, op, kind):
    if P.truncation_Y != P1.truncation_Y:
        raise DomainError("systems must share a truncation horizon")
    counting = op(P.counting, P1.counting)
    meta = {"kind": kind,
            "of": [P.meta.get("kind", "custom"), P1.meta.get("kind", "custom")]}
    return GenPrimeSystem(counting, P.truncation_Y, free=P.free and P1.free,
                          reference=P1.reference, meta=meta)


def perturb_bounded(P: GenPrimeSystem, g) -> GenPrimeSystem:
    """New system with counting P + g for bounded g, if still nondecreasing.

    ``g`` may be a constant, a :class:`SignedMeasure` of step adjustments or a
    :class:`PiecewiseLinear`.  Monotonicity is checked exactly on the merged
    breakpoint set; the first offending breakpoint is reported.
    """
    C = P.counting
    if isinstance(g, (int, float)):
        counting = StepFunction(C.locs, C.weights, base=C.base + float(g),
                                smooth=C.smooth, horizon=C.horizon)
        sup_g = abs(float(g))
    elif isinstance(g, SignedMeasure):
        if g.smooth_density is not None:
            raise UnsupportedError("step adjustments must be atomic")
        locs = np.concatenate([C.locs, g.locs])
        weights = np.concatenate([C.weights, g.weights])
        order = np.argsort(locs, kind="stable")
        locs, weights = locs[order], weights[order]
        keep = np.concatenate([[True], np.diff(locs) > 0])
        idx = np.flatnonzero(keep)
        weights = np.add.reduceat(weights, idx)
        locs = locs[idx]
        bad = np.flatnonzero(weights < 0)
        if bad.size:
            raise DomainError(
                f"P + g decreases at breakpoint {locs[bad[0]]!r}"
            )
        nz = weights > 0
        counting = StepFunction(locs[nz], weights[nz], base=C.base,
                                smooth=C.smooth, horizon=C.horizon)
        sup_g = float(np.abs(np.cumsum(g.weights)).max(initial=0.0))
    elif isinstance(g, PiecewiseLinear):
        if C.smooth is not None:
            raise UnsupportedError("cannot stack two smooth parts")
        counting = StepFunction(C.locs, C.weights, base=C.base, smooth=g,
                                horizon=C.horizon)
        sup_g = float(g.value(min(C.horizon, P.truncation_Y)))
    else:
        raise UnsupportedError(f"unsupported bounded adjustment {type(g)!r}")
    meta = dict(P.meta)
    meta.update({"kind": "perturb_bounded", "sup_g": sup_g,
                 "of": P.meta.get("kind", "custom")})
    return GenPrimeSystem(counting, P.truncation_Y, free=P.free,
                          reference=P.reference, meta=meta)


# ---------------------------------------------------------------------------
# multiplicative genericity helpers
# ---------------------------------------------------------------------------

def jitter_atoms(locs: np.ndarray, seed: int, rel: float = 1e-6) -> np.ndarray:
    """Deterministically nudge atom locations into multiplicatively generic
    position.

    Relative offsets stay below ``rel`` and below a quarter of the local gap,
    so the ordering is preserved.
    """
    locs = np.asarray(locs, dtype=float)
    if locs.size == 0:
        return locs.copy()
    u = 2.0 * _uniforms(seed, locs.size, stream=0x6A) - 1.0
    gaps = np.diff(locs)
    left = np.concatenate([[np.inf], gaps])
    right = np.concatenate([gaps, [np.inf]])
    amp = np.minimum(rel * locs, 0.25 * np.minimum(left, right))
    return locs + u * amp


def check_multiplicative_freeness(locs, max_exp: int = 3, tol: float = 1e-9) -> bool:
    """Bounded numeric freeness check: all products with exponents in
    [0, max_exp] have distinct logarithms (within ``tol`` log-units).

    Only feasible for small systems; exact certification over the reals is out
    of scope.
    """
    logs = np.log(np.asarray(locs, dtype=float))
    k = logs.size
    if k == 0:
        return True
    if (max_exp + 1) ** k > 4_000_000:
        raise CapacityError("bounded freeness check limited to small systems")
    grids = np.meshgrid(*([np.arange(max_exp + 1)] * k), indexing="ij")
    exps = np.stack([g.ravel() for g in grids], axis=1)
    vals = np.sort(exps @ logs)
    return bool(np.all(np.diff(vals) > tol))


# ---------------------------------------------------------------------------
# JSON loading
# ---------------------------------------------------------------------------

def system_from_json(doc: dict):
    """Instantiate a system or perturbation from its JSON description."""
    kind = doc.get("kind")
    params = dict(doc.get("params", {}))
    seed = doc.get("seed", params.pop("seed", 0))
    if kind == "usual":
        return usual_primes(params["Y"], reference=Reference(params.get("reference", "pi")))
    if kind == "random_sign":
        return random_sign_system(params["alpha"], params["n_max"], seed)
    if kind == "block_coinflip":
        return block_coinflip_system(params["Y"], seed)
    if kind == "alternating":
        return alternating_block_system(params["Y"], params.get("block_len", 3.0),
                                        params.get("start_doubled", True))
    if kind in ("plus", "minus"):
        P = system_from_json(params["P"])
        P1 = system_from_json(params["P1"])
        return (plus_system if kind == "plus" else minus_system)(P, P1)
    if kind == "custom":
        counting = StepFunction.from_json(params["counting"])
        Y = float(params.get("Y", counting.horizon))
        return GenPrimeSystem(counting, Y, free=bool(params.get("free", True)),
                              reference=Reference(params.get("reference", "pi")),
                              meta={"kind": "custom"})
    raise DomainError(f"unknown system kind {kind!r}")
