"""Reference counting functions and explicit block constructions.

These builders supply exactly representable N's: the continuous reference
N(x) = x, unit staircases, geometric-grid staircases tracking a target, and
the multiplicative enrichment of the reference by a few free generators.
"""

from __future__ import annotations

import heapq
import math

import numpy as np

from .errors import CapacityError, DomainError
from .steps import PiecewiseLinear, StepFunction


def reference_step(horizon: float = math.inf) -> StepFunction:
    """N(x) = x on [1, horizon): base 1 plus a unit-slope linear part."""
    return StepFunction([], [], base=1.0, smooth=PiecewiseLinear([1.0], [1.0]),
                        horizon=horizon)


def naturals_staircase(X: float) -> StepFunction:
    """floor(x) as a step function: atoms at 2..X, base 1."""
    if X > 2e7:
        raise CapacityError("unit staircase capped at 2e7 atoms")
    locs = np.arange(2, int(X) + 1, dtype=float)
    return StepFunction(locs, np.ones_like(locs), base=1.0, horizon=float(X))


def integers_with_generators(gens, horizon: float) -> StepFunction:
    """Reference integers enriched by free generators: N(x) = sum over
    products q of the generators of max(x/q, 0 outside), i.e. the reference
    staircase multiplicatively convolved with each generator's geometric
    progression.

    Exact: atoms of weight 1 at every product q <= horizon and a
    piecewise-linear part with slope sum_{q <= x} 1/q.
    """
    gens = sorted(float(g) for g in gens)
    if any(g <= 1.0 for g in gens):
        raise DomainError("generators must exceed 1")
    log_h = math.log(horizon)
    logs = [0.0]
    heap = [(math.log(g), i) for i, g in enumerate(gens)]
    heapq.heapify(heap)
    log_gens = [math.log(g) for g in gens]
    while heap:
        lv, i = heapq.heappop(heap)
        if lv > log_h + 1e-12:
            break
        logs.append(lv)
        if len(logs) > 2_000_000:
            raise CapacityError("too many generator products below the horizon")
        for j in range(i, len(gens)):
            nl = lv + log_gens[j]
            if nl <= log_h + 1e-12:
                heapq.heappush(heap, (nl, j))
    q = np.exp(np.sort(np.asarray(logs)))
    slopes = np.cumsum(1.0 / q)
    smooth = PiecewiseLinear(q, slopes)
    return StepFunction(q[1:], np.ones(q.size - 1), base=1.0, smooth=smooth,
                        horizon=float(horizon))


def staircase_from_target(target, u_max: float, du: float = 0.005,
                          base: float = 1.0) -> StepFunction:
    """Geometric-grid staircase tracking a cumulative target M(x).

    Atoms at e^{k du} carry the target increments, so M is reproduced at the
    grid points and the relative wiggle between them stays below ~du.
    """
    u = np.arange(du, u_max + du, du)
    x = np.exp(u)
    vals = np.asarray(target(x), dtype=float)
    weights = np.diff(np.concatenate([[base], vals]))
    if np.any(weights < -1e-12):
        raise DomainError("target must be nondecreasing")
    keep = weights > 0
    return StepFunction(x[keep], weights[keep], base=base,
                        horizon=float(np.exp(u_max)))


def block_slope_target(u_breaks, slopes, base: float = 1.0):
    """Cumulative target with slope ``slopes[i]`` (in x) on the log-block
    x in [e^{u_breaks[i]}, e^{u_breaks[i+1]}); the last block extends upward.

    Alternating slopes make M(x)/x swing between the slope values, giving
    explicit liminf < limsup constructions.
    """
    u_breaks = np.asarray(u_breaks, dtype=float)
    slopes = np.asarray(slopes, dtype=float)
    if u_breaks.size != slopes.size:
        raise DomainError("need one slope per block")
    xb = np.exp(u_breaks)
    offsets = base + np.concatenate([[0.0], np.cumsum(slopes[:-1] * np.diff(xb))])

    def target(x):
        x = np.asarray(x, dtype=float)
        i = np.clip(np.searchsorted(xb, x, side="right") - 1, 0, None)
        return offsets[i] + slopes[i] * (x - xb[i])

    return target


def doubling_block_target(u_max: float, low: float, high: float,
                          block_base: float = 2.0, base: float = 1.0):
    """Alternating low/high slopes on blocks [e^{b^k}, e^{b^{k+1}})."""
    ks = int(math.ceil(math.log(max(u_max, 1.0)) / math.log(block_base))) + 1
    breaks = [0.0] + [block_base**k for k in range(ks + 1)]
    slopes = [low if i % 2 else high for i in range(len(breaks))]
    return block_slope_target(breaks, slopes, base=base)


def lemma_corpus(u_max: float = 22.0):
    """Named corpus: five convergent and three oscillating step functions."""
    horizon = math.exp(u_max)
    corpus = {}
    corpus["reference_linear"] = ("CONVERGENT", reference_step(horizon))
    for name, dens in (("density_one", 1.0), ("density_half", 0.5),
                       ("density_two", 2.0)):
        tgt = block_slope_target([0.0], [dens])
        corpus[name] = ("CONVERGENT", staircase_from_target(tgt, u_max))
    transient = block_slope_target([0.0, 3.0], [2.0, 1.0])
    corpus["transient_then_one"] = ("CONVERGENT",
                                    staircase_from_target(transient, u_max))
    corpus["swing_half_threehalves"] = (
        "OSCILLATING",
        staircase_from_target(doubling_block_target(u_max, 0.5, 1.5), u_max))
    corpus["swing_quarter"] = (
        "OSCILLATING",
        staircase_from_target(doubling_block_target(u_max, 0.25, 1.75,
                                                    block_base=1.7), u_max))
    corpus["swing_wide"] = (
        "OSCILLATING",
        staircase_from_target(doubling_block_target(u_max, 0.2, 2.0,
                                                    block_base=1.8), u_max))
    return corpus
