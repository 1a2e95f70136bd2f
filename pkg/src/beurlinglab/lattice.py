"""Generalized integer enumeration, counting and density estimation.

Integers are all products of the atomic generators, counted with
multiplicity.  Representations are unordered exponent vectors; an atom of
weight m acts as m identical generators, so exponent e on it contributes a
binomial factor C(e+m-1, e).  Values live in the log domain; products that
collide within ``merge_tol`` log-units are merged and their multiplicities
added, which separates genuine multiplicative relations from float noise at
desk scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import CapacityError, DomainError, UnsupportedError
from .steps import StepFunction

MERGE_TOL = 1e-9
MEMORY_BUDGET = 200_000_000
SPREAD_TOL = 0.02
SLOPE_TOL = 0.02

TRENDS = ("CONVERGENT", "DIVERGENT", "VANISHING", "OSCILLATING", "UNDECIDED")


# ---------------------------------------------------------------------------
# enumeration kernel: k-way merge over generator streams with a binary heap
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def _enumerate_heap(log_gens, gen_weights, log_x, budget):  # pragma: no cover
    cap = 1024
    hkey = np.empty(cap, dtype=np.float64)
    hidx = np.empty(cap, dtype=np.int64)
    hexp = np.empty(cap, dtype=np.int64)
    hmul = np.empty(cap, dtype=np.int64)
    nheap = 0

    ocap = 1024
    out_log = np.empty(ocap, dtype=np.float64)
    out_mul = np.empty(ocap, dtype=np.int64)
    nout = 0

    k = log_gens.size
    tol = log_x + 1e-12
    ok = True
    reached = 0.0

    # seed with the empty product
    hkey[0] = 0.0
    hidx[0] = 0
    hexp[0] = 0
    hmul[0] = 1
    nheap = 1

    while nheap > 0:
        lv = hkey[0]
        gi = hidx[0]
        ge = hexp[0]
        gm = hmul[0]
        # pop root
        nheap -= 1
        hkey[0] = hkey[nheap]
        hidx[0] = hidx[nheap]
        hexp[0] = hexp[nheap]
        hmul[0] = hmul[nheap]
        pos = 0
        while True:
            child = 2 * pos + 1
            if child >= nheap:
                break
            if child + 1 < nheap and hkey[child + 1] < hkey[child]:
                child += 1
            if hkey[child] < hkey[pos]:
                hkey[pos], hkey[child] = hkey[child], hkey[pos]
                hidx[pos], hidx[child] = hidx[child], hidx[pos]
                hexp[pos], hexp[child] = hexp[child], hexp[pos]
                hmul[pos], hmul[child] = hmul[child], hmul[pos]
                pos = child
            else:
                break

        if nout >= budget:
            ok = False
            reached = lv
            break
        if nout == ocap:
            ocap *= 2
            nl = np.empty(ocap, dtype=np.float64)
            nm = np.empty(ocap, dtype=np.int64)
            nl[:nout] = out_log[:nout]
            nm[:nout] = out_mul[:nout]
            out_log, out_mul = nl, nm
        out_log[nout] = lv
        out_mul[nout] = gm
        nout += 1
        reached = lv

        for j in range(gi, k):
            nlv = lv + log_gens[j]
            if nlv > tol:
                break
            if j == gi:
                nexp = ge + 1
                nmul = gm * (ge + gen_weights[j]) // (ge + 1)
            else:
                nexp = 1
                nmul = gm * gen_weights[j]
            if nheap == cap:
                cap *= 2
                ak = np.empty(cap, dtype=np.float64)
                ai = np.empty(cap, dtype=np.int64)
                ae = np.empty(cap, dtype=np.int64)
                am = np.empty(cap, dtype=np.int64)
                ak[:nheap] = hkey[:nheap]
                ai[:nheap] = hidx[:nheap]
                ae[:nheap] = hexp[:nheap]
                am[:nheap] = hmul[:nheap]
                hkey, hidx, hexp, hmul = ak, ai, ae, am
            if nheap >= budget:
                ok = False
                reached = lv
                nheap = 0
                break
            pos = nheap
            hkey[pos] = nlv
            hidx[pos] = j
            hexp[pos] = nexp
            hmul[pos] = nmul
            nheap += 1
            while pos > 0:
                parent = (pos - 1) // 2
                if hkey[pos] < hkey[parent]:
                    hkey[pos], hkey[parent] = hkey[parent], hkey[pos]
                    hidx[pos], hidx[parent] = hidx[parent], hidx[pos]
                    hexp[pos], hexp[parent] = hexp[parent], hexp[pos]
                    hmul[pos], hmul[parent] = hmul[parent], hmul[pos]
                    pos = parent
                else:
                    break
        if not ok:
            break

    return out_log[:nout], out_mul[:nout], ok, reached


@dataclass(frozen=True)
class IntegerMultiset:
    """Sorted generalized integers <= horizon_X with multiplicities."""

    log_values: np.ndarray
    multiplicities: np.ndarray
    horizon_X: float
    merge_tol: float = MERGE_TOL
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        for a in (self.log_values, self.multiplicities):
            a.setflags(write=False)
        cum = np.concatenate([[0], np.cumsum(self.multiplicities)])
        cum.setflags(write=False)
        object.__setattr__(self, "_cum", cum)
        if self.log_values.size == 0 or self.log_values[0] != 0.0:
            raise DomainError("first entry must be the empty product (1, 1)")

    @property
    def values(self) -> np.ndarray:
        return np.exp(self.log_values)

    def total(self) -> int:
        return int(self._cum[-1])

    def count(self, x) -> float:
        """N(x): multiplicities of values <= x (log-tolerant at the boundary)."""
        x_arr = np.asarray(x, dtype=float)
        if np.any(x_arr > self.horizon_X * (1 + 1e-12)):
            raise DomainError(f"count beyond horizon {self.horizon_X!r}")
        if np.any(x_arr < 1.0):
            raise DomainError("count is defined on [1, horizon]")
        idx = np.searchsorted(self.log_values, np.log(x_arr) + self.merge_tol / 2,
                              side="right")
        out = self._cum[idx].astype(float)
        return out if np.ndim(x) else float(out)

    def induced_step(self) -> StepFunction:
        return StepFunction(
            np.exp(self.log_values[1:]), self.multiplicities[1:].astype(float),
            base=float(self.multiplicities[0]), horizon=self.horizon_X,
        )

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            fh.write("value,multiplicity\n")
            for lv, m in zip(self.log_values, self.multiplicities):
                fh.write(f"{math.exp(lv):.17g},{int(m)}\n")


def generate(P, X: float, merge_tol: float = MERGE_TOL,
             budget: int = MEMORY_BUDGET) -> IntegerMultiset:
    """All products of P's generators up to X, counted with multiplicity.

    ``P`` is a :class:`GenPrimeSystem` or a bare atomic :class:`StepFunction`
    with integer weights.  Raises :class:`CapacityError` with the partial
    horizon reached when the entry budget would be exceeded.
    """
    counting = getattr(P, "counting", P)
    if counting.smooth is not None:
        raise UnsupportedError(
            "enumeration needs a purely atomic system; use the analytic side"
        )
    if X < 1:
        raise DomainError("X must be at least 1")
    weights = counting.weights
    int_w = np.rint(weights).astype(np.int64)
    if np.any(np.abs(weights - int_w) > 1e-9) or np.any(int_w < 1):
        raise UnsupportedError("generator weights must be positive integers")
    in_range = counting.locs <= X
    log_gens = np.log(counting.locs[in_range])
    gw = int_w[in_range]
    if log_gens.size and log_gens[0] <= 10 * merge_tol:
        raise UnsupportedError(
            "generator indistinguishable from 1 at the merge tolerance"
        )
    logs, mults, ok, reached = _enumerate_heap(
        np.ascontiguousarray(log_gens), np.ascontiguousarray(gw),
        math.log(X), int(budget),
    )
    if not ok:
        raise CapacityError(
            f"budget of {budget} entries exceeded; partial horizon x ~ "
            f"{math.exp(reached):.6g}", partial=math.exp(reached),
        )
    # merge log-collisions: genuine multiplicative relations and float noise
    if logs.size:
        starts = np.concatenate([[0], np.flatnonzero(np.diff(logs) > merge_tol) + 1])
        logs = logs[starts]
        mults = np.add.reduceat(mults, starts)
    return IntegerMultiset(logs, mults, float(X), merge_tol,
                           meta={"n_generators": int(log_gens.size)})


def count(Nset: IntegerMultiset, x) -> float:
    return Nset.count(x)


# ---------------------------------------------------------------------------
# density estimation and trend classification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DensityReport:
    estimate: float
    window: tuple
    trend: str
    residuals: list  # (decade center x, mean ratio)
    spread_rel: float
    slope: float
    meta: dict = field(default_factory=dict)

    def to_json(self):
        def safe(v):
            return None if not math.isfinite(v) else v

        return {
            "estimate": safe(self.estimate),
            "window": list(self.window),
            "trend": self.trend,
            "residuals": [[x, r] for x, r in self.residuals],
            "spread_rel": safe(self.spread_rel),
            "slope": safe(self.slope),
            "meta": self.meta,
        }


def classify_ratio_trend(u, ratios, spread_tol=SPREAD_TOL, slope_tol=SLOPE_TOL,
                         min_decades=3.0):
    """Classify the trend of ratios r(u) = M(e^u)/e^u sampled on a u-grid.

    Decades are powers of ten in x = e^u.  CONVERGENT needs the residual
    spread over the last two decades below ``spread_tol`` (relative); two or
    more deadbanded direction changes in the per-decade means flag
    OSCILLATING; otherwise a persistent log-log slope decides DIVERGENT or
    VANISHING.
    """
    u = np.asarray(u, dtype=float)
    ratios = np.asarray(ratios, dtype=float)
    ln10 = math.log(10.0)
    span = (u[-1] - u[0]) / ln10
    dec = np.floor(u / ln10).astype(int)
    groups = np.unique(dec)
    means = np.array([ratios[dec == d].mean() for d in groups])
    centers = (groups + 0.5) * ln10
    residuals = [(float(math.exp(c)), float(m)) for c, m in zip(centers, means)]

    estimate = float(means[-1])
    last2 = dec >= groups[-1] - 1
    r2 = ratios[last2]
    scale = max(abs(estimate), 1e-300)
    spread_rel = float((r2.max() - r2.min()) / scale)

    pos = means > 0
    if pos.sum() >= 2:
        slope = float(np.polyfit(centers[pos], np.log(means[pos]), 1)[0])
    else:
        slope = 0.0

    if span < min_decades:
        trend = "UNDECIDED"
    elif spread_rel <= spread_tol:
        trend = "CONVERGENT"
    else:
        diffs = np.diff(means)
        dead = 0.25 * spread_tol * scale
        signs = np.sign(np.where(np.abs(diffs) < dead, 0.0, diffs))
        signs = signs[signs != 0]
        changes = int(np.sum(signs[1:] != signs[:-1])) if signs.size else 0
        if changes >= 2:
            trend = "OSCILLATING"
        elif slope < -slope_tol:
            trend = "VANISHING"
        elif slope > slope_tol:
            trend = "DIVERGENT"
        else:
            trend = "UNDECIDED"

    window = (float(math.exp(max(u[0], (groups[-1] - 1) * ln10))), float(math.exp(u[-1])))
    return DensityReport(estimate, window, trend, residuals, spread_rel, slope,
                         meta={"liminf": float(means.min()), "limsup": float(means.max()),
                               "decades": float(span)})


def density_estimate(Nset: IntegerMultiset, points_per_decade: int = 32,
                     spread_tol=SPREAD_TOL, slope_tol=SLOPE_TOL) -> DensityReport:
    """Per-decade means of N(x)/x on a geometric grid; estimate is the
    last-decade mean."""
    X = Nset.horizon_X
    n_dec = math.log10(X)
    if n_dec < 3:
        return DensityReport(float("nan"), (1.0, X), "UNDECIDED", [], float("inf"),
                             0.0, meta={"reason": "horizon spans fewer than 3 decades"})
    n_pts = int(n_dec * points_per_decade) + 1
    u = np.linspace(0.0, math.log(X), n_pts)
    x = np.exp(u)
    ratios = Nset.count(x) / x
    return classify_ratio_trend(u, ratios, spread_tol, slope_tol)


# ---------------------------------------------------------------------------
# Euler products
# ---------------------------------------------------------------------------

def euler_density(removed=(), added=()) -> float:
    """prod over removed (1 - 1/p) times prod over added (1 - 1/p)^{-1},
    relative to base density 1.  Added generators must be multiplicatively
    free of the remaining ones (caller's assertion)."""
    removed = np.asarray(removed, dtype=float)
    added = np.asarray(added, dtype=float)
    for arr in (removed, added):
        if arr.size and np.any(arr <= 1.0):
            raise DomainError("all generators must exceed 1")
    out = 1.0
    if removed.size:
        out *= float(np.prod(1.0 - 1.0 / removed))
    if added.size:
        out /= float(np.prod(1.0 - 1.0 / added))
    return out


@dataclass(frozen=True)
class PartialProducts:
    Y: np.ndarray
    product: np.ndarray     # prod (1-1/p+)^-w+ * prod (1-1/p1)
    recip_gap: np.ndarray   # sum w+/p+ - sum 1/p1

    def rows(self):
        return zip(self.Y, self.product, self.recip_gap)


def partial_density_product(Pplus, P1, Y_grid) -> PartialProducts:
    """Partial Euler products of the swap construction at each horizon Y.

    For each Y: removed all reference primes <= Y, added all of Pplus's atoms
    <= Y (with their weights).  Also returns the reciprocal-sum gap whose
    divergence witnesses the blowup of the product.
    """
    cp = getattr(Pplus, "counting", Pplus)
    c1 = getattr(P1, "counting", P1)
    if cp.smooth is not None or c1.smooth is not None:
        raise UnsupportedError("partial products need atomic systems")
    Y = np.asarray(Y_grid, dtype=float)

    def cums(c):
        log_add = -c.weights * np.log1p(-1.0 / c.locs)
        recip = c.weights / c.locs
        return (np.concatenate([[0.0], np.cumsum(log_add)]),
                np.concatenate([[0.0], np.cumsum(recip)]), c.locs)

    lp, rp, locp = cums(cp)
    l1, r1, loc1 = cums(c1)
    ip = np.searchsorted(locp, Y, side="right")
    i1 = np.searchsorted(loc1, Y, side="right")
    product = np.exp(lp[ip] - l1[i1])
    recip_gap = rp[ip] - r1[i1]
    return PartialProducts(Y, product, recip_gap)
