"""Nondecreasing step functions, signed atomic measures and Stieltjes integration.

Counting functions are right-continuous: an atom at ``y`` is included in the
value at ``y``.  All containers are immutable after construction and safe to
share between threads.  Adaptive quadrature subdivides recursively and reduces
in a fixed order, so results are reproducible bit for bit.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, EvaluationError, ToleranceError, UnsupportedError

TOL_QUAD = 1e-10  # default absolute quadrature tolerance


def _as_sorted_atoms(locs, weights, min_loc=1.0, allow_sign=False):
    """Sort, validate and merge equal-location atoms; returns read-only arrays."""
    locs = np.asarray(locs, dtype=float).ravel()
    weights = np.asarray(weights, dtype=float).ravel()
    if locs.shape != weights.shape:
        raise DomainError("atom locations and weights must have equal length")
    if locs.size:
        gaps = np.diff(locs)
        if np.any(gaps < 0.0):
            order = np.argsort(locs, kind="stable")
            locs, weights = locs[order].copy(), weights[order].copy()
            gaps = np.diff(locs)
        if locs[0] <= min_loc:
            raise DomainError(f"atom locations must exceed {min_loc}")
        if not np.all(np.isfinite(locs)) or not np.all(np.isfinite(weights)):
            raise DomainError("atoms must be finite")
        # merge exactly coincident locations; canonical form for comparisons
        if np.any(gaps == 0.0):
            idx = np.flatnonzero(np.concatenate([[True], gaps > 0.0]))
            weights = np.add.reduceat(weights, idx)
            locs = locs[idx]
        nz = weights != 0.0
        if allow_sign:
            locs, weights = locs[nz], weights[nz]
        else:
            if not np.all(weights[nz] > 0.0):
                raise DomainError("step function weights must be positive")
            locs, weights = locs[nz], weights[nz]
    locs.setflags(write=False)
    weights.setflags(write=False)
    return locs, weights


class PiecewiseLinear:
    """Continuous nondecreasing piecewise-linear function, zero at its start.

    ``breaks`` ascending with ``breaks[0]`` the left end of the domain,
    ``slopes[i]`` the slope on ``[breaks[i], breaks[i+1])``; the last slope
    extends to infinity.  Used for the absolutely continuous part of counting
    functions; every piece integrates against a Gaussian kernel in closed form.
    """

    __slots__ = ("breaks", "slopes", "offsets")

    def __init__(self, breaks, slopes):
        breaks = np.asarray(breaks, dtype=float).ravel()
        slopes = np.asarray(slopes, dtype=float).ravel()
        if breaks.size == 0 or breaks.size != slopes.size:
            raise DomainError("need one slope per break")
        if np.any(np.diff(breaks) <= 0):
            raise DomainError("breaks must be strictly increasing")
        if np.any(slopes < 0):
            raise DomainError("slopes must be nonnegative")
        offsets = np.concatenate([[0.0], np.cumsum(slopes[:-1] * np.diff(breaks))])
        for a in (breaks, slopes, offsets):
            a.setflags(write=False)
        self.breaks, self.slopes, self.offsets = breaks, slopes, offsets

    def value(self, x):
        x = np.asarray(x, dtype=float)
        i = np.clip(np.searchsorted(self.breaks, x, side="right") - 1, 0, None)
        v = self.offsets[i] + self.slopes[i] * (x - self.breaks[i])
        return np.where(x <= self.breaks[0], 0.0, v)

    def total_on(self, x):
        return self.value(x)

    def to_json(self):
        return {
            "kind": "piecewise_linear",
            "params": {
                "breaks": [format(b, ".17g") for b in self.breaks],
                "slopes": list(map(float, self.slopes)),
            },
        }

    @classmethod
    def from_json(cls, doc):
        p = doc["params"]
        return cls([float(b) for b in p["breaks"]], p["slopes"])


@dataclass(frozen=True)
class StepFunction:
    """Right-continuous nondecreasing function on [1, horizon].

    ``base`` is the value at 1; atoms live strictly above 1; ``smooth`` is an
    optional :class:`PiecewiseLinear` part added on top of the jumps.
    """

    locs: np.ndarray
    weights: np.ndarray
    base: float = 0.0
    smooth: PiecewiseLinear | None = None
    horizon: float = math.inf

    def __init__(self, locs=(), weights=(), base=0.0, smooth=None, horizon=math.inf,
                 validate=True):
        if validate:
            locs, weights = _as_sorted_atoms(locs, weights)
        else:
            # trusted path for large internally built systems: caller
            # guarantees sorted distinct locations > 1 and positive weights
            locs = np.asarray(locs, dtype=float)
            weights = np.asarray(weights, dtype=float)
            locs.setflags(write=False)
            weights.setflags(write=False)
        cum = np.concatenate([[0.0], np.cumsum(weights)])
        cum.setflags(write=False)
        object.__setattr__(self, "locs", locs)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "base", float(base))
        object.__setattr__(self, "smooth", smooth)
        object.__setattr__(self, "horizon", float(horizon))
        object.__setattr__(self, "_cum", cum)

    def __call__(self, x):
        x_arr = np.asarray(x, dtype=float)
        if np.any(x_arr < 1.0):
            raise DomainError("step functions are defined on [1, infinity)")
        v = self.base + self._cum[np.searchsorted(self.locs, x_arr, side="right")]
        if self.smooth is not None:
            v = v + self.smooth.value(x_arr)
        return v if np.ndim(x) else float(v)

    @property
    def is_atomic(self) -> bool:
        return self.smooth is None

    @property
    def log_locs(self):
        return np.log(self.locs)

    def total_mass(self) -> float:
        return float(self._cum[-1])

    def to_json(self):
        doc = {
            "base": self.base,
            "atoms": [[format(l, ".17g"), float(w)] for l, w in zip(self.locs, self.weights)],
            "smooth": None if self.smooth is None else self.smooth.to_json(),
        }
        if math.isfinite(self.horizon):
            doc["horizon"] = format(self.horizon, ".17g")
        return doc

    @classmethod
    def from_json(cls, doc):
        atoms = doc.get("atoms", [])
        locs = [float(l) for l, _ in atoms]
        weights = [w for _, w in atoms]
        smooth = doc.get("smooth")
        return cls(
            locs,
            weights,
            base=doc.get("base", 0.0),
            smooth=None if smooth is None else PiecewiseLinear.from_json(smooth),
            horizon=float(doc.get("horizon", math.inf)),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)

    @classmethod
    def loads(cls, s: str) -> "StepFunction":
        return cls.from_json(json.loads(s))


@dataclass(frozen=True)
class SignedMeasure:
    """Signed atomic measure on (1, infinity) plus an optional smooth density.

    ``smooth_density`` is any callable density g(y); the induced cumulative is
    obtained by quadrature unless the object also provides ``cumulative``.
    """

    locs: np.ndarray
    weights: np.ndarray
    smooth_density: object = None

    def __init__(self, locs=(), weights=(), smooth_density=None):
        locs, weights = _as_sorted_atoms(locs, weights, allow_sign=True)
        object.__setattr__(self, "locs", locs)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "smooth_density", smooth_density)

    def variation_on(self, y0: float, y1: float) -> float:
        i0, i1 = np.searchsorted(self.locs, [y0, y1], side="right")
        tv = float(np.abs(self.weights[i0:i1]).sum())
        if self.smooth_density is not None:
            val, _ = adaptive_simpson(lambda y: abs(self._density(y)), y0, y1, TOL_QUAD)
            tv += val
        return tv

    def _density(self, y):
        g = self.smooth_density
        return g(y) if callable(g) else g.density(y)

    def to_json(self):
        smooth = None
        if self.smooth_density is not None and hasattr(self.smooth_density, "to_json"):
            smooth = self.smooth_density.to_json()
        return {
            "base": 0.0,
            "atoms": [[format(l, ".17g"), float(w)] for l, w in zip(self.locs, self.weights)],
            "smooth": smooth,
        }


def eval_step(F: StepFunction, x):
    """Functional form of right-continuous evaluation; ``x >= 1`` required."""
    return F(x)


def adaptive_simpson(f, a, b, tol=TOL_QUAD, max_depth=48):
    """Adaptive Simpson quadrature; returns (value, error_estimate).

    Sequential recursion with left-before-right reduction order, hence
    deterministic.  Works for complex-valued integrands.
    """
    if a == b:
        return 0.0, 0.0

    fa, fm, fb = f(a), f(0.5 * (a + b)), f(b)

    def rec(x0, x2, f0, f1, f2, whole, depth, tol_loc):
        x1 = 0.5 * (x0 + x2)
        lm, rm = 0.5 * (x0 + x1), 0.5 * (x1 + x2)
        flm, frm = f(lm), f(rm)
        left = (x1 - x0) / 6.0 * (f0 + 4.0 * flm + f1)
        right = (x2 - x1) / 6.0 * (f1 + 4.0 * frm + f2)
        err = (left + right - whole) / 15.0
        if depth <= 0 or abs(err) <= tol_loc:
            return left + right + err, abs(err)
        lv, le = rec(x0, x1, f0, flm, f1, left, depth - 1, tol_loc / 2.0)
        rv, re_ = rec(x1, x2, f1, frm, f2, right, depth - 1, tol_loc / 2.0)
        return lv + rv, le + re_

    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    return rec(a, b, fa, fm, fb, whole, max_depth, tol)


def stieltjes(f, m: SignedMeasure, y0: float, y1: float, tol=TOL_QUAD):
    """Stieltjes integral of ``f`` against ``dm`` over the half-open (y0, y1].

    Atoms are summed exactly; the smooth density part is integrated by
    adaptive Simpson to absolute tolerance ``tol``.
    """
    if y1 < y0:
        raise DomainError("interval must be ordered")
    i0, i1 = np.searchsorted(m.locs, [y0, y1], side="right")
    total = 0.0
    if i1 > i0:
        vals = np.asarray([f(y) for y in m.locs[i0:i1]])
        if not np.all(np.isfinite(np.abs(vals))):
            bad = m.locs[i0:i1][~np.isfinite(np.abs(vals))][0]
            raise EvaluationError(f"integrand not finite at atom {bad!r}")
        total = complex(np.sum(vals * m.weights[i0:i1]))
    if m.smooth_density is not None:
        val, err = adaptive_simpson(lambda y: f(y) * m._density(y), y0, y1, tol)
        if err > 10.0 * tol:
            raise ToleranceError(
                f"quadrature reached {err:.3e}, requested {tol:.3e}", achieved=err
            )
        total = total + val
    if isinstance(total, complex) and total.imag == 0.0:
        return total.real
    return total


def _combine(F: StepFunction, G: StepFunction, op) -> StepFunction:
    if F.smooth is not None or G.smooth is not None:
        raise UnsupportedError("combine is defined for purely atomic step functions")
    if F.horizon != G.horizon:
        raise DomainError(
            f"mismatched truncation horizons: {F.horizon!r} vs {G.horizon!r}"
        )
    base = float(op(F.base, G.base))
    if F.locs.size == 0 and G.locs.size == 0:
        return StepFunction([], [], base=base, horizon=F.horizon)
    # linear-time merge of the two sorted breakpoint sets
    a, b = (F.locs, G.locs) if F.locs.size >= G.locs.size else (G.locs, F.locs)
    locs = np.insert(a, np.searchsorted(a, b), b)
    # between breakpoints both inputs are constant, so the pointwise extremum
    # at the breakpoints determines the combination exactly; duplicate
    # locations yield zero-weight jumps and are dropped
    vals = op(F(locs), G(locs))
    weights = np.diff(np.concatenate([[base], vals]))
    keep = weights > 0.0
    return StepFunction(locs[keep], weights[keep], base=base, horizon=F.horizon,
                        validate=False)


def combine_max(F: StepFunction, G: StepFunction) -> StepFunction:
    """Pointwise maximum of two atomic step functions on a common horizon."""
    return _combine(F, G, np.maximum)


def combine_min(F: StepFunction, G: StepFunction) -> StepFunction:
    """Pointwise minimum of two atomic step functions on a common horizon."""
    return _combine(F, G, np.minimum)


def step_from_cumulative(locs, cumulative_values, base=0.0, horizon=math.inf) -> StepFunction:
    """Build a step function from cumulative values at its jump locations."""
    weights = np.diff(np.concatenate([[base], np.asarray(cumulative_values, float)]))
    keep = weights > 0
    locs = np.asarray(locs, float)[keep]
    return StepFunction(locs, weights[keep], base=base, horizon=horizon)
