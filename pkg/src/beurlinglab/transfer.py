"""The analytic transfer chain A -> B -> C -> Z and line diagnostics.

A(s) is the Mellin-Stieltjes transform of the perturbation; B applies the
Euler logarithm, C = exp(B), and Z multiplies by the reference zeta factor
(s/(s-1) for the smooth reference, the Riemann zeta line for the usual
primes).  The absolutely continuous part of a perturbation cancels reference
mass and therefore enters B linearly, not through the Euler-log series; this
keeps the reference triple exact (the usual primes get C(1) -> 1).

Everything accepts scalar or array ``s`` with Re s >= 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special as sp

from .errors import (ConditioningError, DomainError, PoleError, ResolutionError)
from .systems import Perturbation, Reference

B_TOL = 1e-12
EPS_LOC = 1e-6
_K_CAP = 20_000


# ---------------------------------------------------------------------------
# Riemann zeta on vertical lines (Euler-Maclaurin, vectorized)
# ---------------------------------------------------------------------------

def zeta_line(s, terms: int | None = None, correction_order: int = 12):
    """zeta(s) for Re s > 1, scalar or array; accurate to ~1e-13 for |t|<=5e3."""
    scalar = np.ndim(s) == 0
    s = np.atleast_1d(np.asarray(s, dtype=complex))
    if np.any(s.real <= 1.0):
        raise DomainError("zeta_line needs Re s > 1 (the line s = 1 has a pole)")
    out = _zeta_em(s, terms, correction_order) + 1.0 / (s - 1.0)
    return complex(out[0]) if scalar else out


def zeta_minus_pole_line(t, terms: int | None = None, correction_order: int = 12):
    """zeta(1+it) - 1/(it), regular across t = 0 (value Euler gamma there)."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    return _zeta_em(1.0 + 1j * t, terms, correction_order)


def _zeta_em(s, terms, J):
    tmax = float(np.abs(s.imag).max(initial=0.0))
    N = int(terms or max(64, 1.3 * tmax + 32))
    n = np.arange(1, N, dtype=float)
    out = np.exp(-np.log(n)[:, None] * s[None, :]).sum(axis=0)
    lnN = math.log(N)
    sN = np.exp(-lnN * s)
    # (N^{1-s} - 1)/(s - 1) = -lnN * phi((1-s) lnN), pole-free across s = 1
    z = (1.0 - s) * lnN
    out = out - lnN * _phi(z)
    out = out + sN / 2.0
    bern = sp.bernoulli(2 * J)
    rising = np.ones_like(s)
    fac = 1.0
    for j in range(1, J + 1):
        rising = rising * s if j == 1 else rising * (s + (2 * j - 3)) * (s + (2 * j - 2))
        fac *= (2 * j) * (2 * j - 1)
        out = out + bern[2 * j] / fac * rising * sN * N ** (-(2 * j - 1))
    return out


def _phi(z):
    """(e^z - 1)/z, stable near 0."""
    z = np.asarray(z, dtype=complex)
    small = np.abs(z) < 0.01
    out = np.empty_like(z)
    zs = z[small]
    acc = np.zeros_like(zs)
    for c in (720.0, 120.0, 24.0, 6.0, 2.0, 1.0):
        acc = acc * zs + 1.0 / c
    out[small] = acc
    zl = z[~small]
    out[~small] = (np.exp(zl) - 1.0) / zl
    return out


# ---------------------------------------------------------------------------
# the chain
# ---------------------------------------------------------------------------

def _check_halfplane(s):
    s = np.atleast_1d(np.asarray(s, dtype=complex))
    if np.any(s.real < 1.0 - 1e-12):
        raise DomainError("the transfer chain lives on Re s >= 1")
    return s


def _atomic_transform(a: Perturbation, s, min_term=0.0):
    """sum_j w_j y_j^{-s}, vectorized over an s-array, chunked over atoms."""
    s = np.atleast_1d(s)
    out = np.zeros(s.shape, dtype=complex)
    logs = a.log_locs
    w = a.weights
    if min_term > 0.0:
        sigma = float(s.real.min())
        keep = np.abs(w) * np.exp(-sigma * logs) >= min_term
        logs, w = logs[keep], w[keep]
    chunk = max(1, int(4_000_000 // max(1, s.size)))
    for i in range(0, logs.size, chunk):
        block = np.exp(-logs[i : i + chunk, None] * s[None, :])
        out += (w[i : i + chunk, None] * block).sum(axis=0)
    return out


def A_of(a: Perturbation, s):
    """A(s): exact atomic sum plus the closed-form smooth part, Re s >= 1."""
    s_arr = _check_halfplane(s)
    out = _atomic_transform(a, s_arr)
    if a.smooth is not None:
        out = out + a.smooth.mellin(s_arr)
    return out if np.asarray(s).ndim else complex(out[0])


def A_tail_bound(a: Perturbation, s) -> float:
    """Crude truncation bound |a|(Y) * Y^{-Re s} for mass beyond the horizon."""
    if not math.isfinite(a.horizon):
        return 0.0
    sigma = float(np.asarray(s, dtype=complex).real.min())
    return abs(a.a(a.horizon)) * a.horizon ** (-sigma)


def _series_length(a: Perturbation, sigma: float, tol: float) -> int:
    y_min = float(a.locs.min()) if a.locs.size else math.e
    r = y_min ** (-sigma)
    mass = max(a.abs_mass() * r, 1e-300)
    if r >= 1.0:
        raise ConditioningError("smallest atom too close to 1 for the Euler series")
    K = int(math.ceil(math.log(tol * (1.0 - r) / mass) / math.log(r))) if mass > tol else 1
    return min(max(K, 1), _K_CAP)


def B_of(a: Perturbation, s, tol: float = B_TOL):
    """B(s) = sum_k A_atomic(ks)/k + linear smooth part, truncated so the
    geometric tail bound stays below ``tol``.

    Requires the smallest atom strictly above 1; the series length follows
    from the exact geometric bound with the atom mass included.
    """
    s_arr = _check_halfplane(s)
    out = np.zeros(s_arr.shape, dtype=complex)
    if a.locs.size:
        y_min = float(a.locs.min())
        if y_min <= 1.0 + EPS_LOC:
            raise ConditioningError(
                f"smallest atom {y_min!r} within {EPS_LOC} of 1; series converges too slowly"
            )
        sigma = float(s_arr.real.min())
        K = _series_length(a, sigma, tol)
        floor = tol * 1e-4 / max(a.locs.size, 1)
        for k in range(1, K + 1):
            out += _atomic_transform(a, k * s_arr, min_term=floor) / k
    if a.smooth is not None:
        out = out + a.smooth.mellin(s_arr)
    return out if np.asarray(s).ndim else complex(out[0])


def C_of(a: Perturbation, s, tol: float = B_TOL):
    """C(s) = exp B(s); never zero."""
    out = np.exp(B_of(a, s, tol))
    return out


def Z_of(a: Perturbation, s, tol: float = B_TOL):
    """Z(s) = (reference zeta) * C(s); pole of the reference at s = 1."""
    s_arr = _check_halfplane(s)
    if np.any(s_arr == 1.0):
        raise PoleError("the reference factor has a pole at s = 1")
    C = C_of(a, s_arr, tol)
    if a.reference is Reference.TAU:
        out = s_arr / (s_arr - 1.0) * C
    else:
        out = zeta_line(s_arr) * C
    return out if np.asarray(s).ndim else complex(out[0])


def reference_derivative_factor(a: Perturbation, t):
    """The factor Phi(t) with it * Z(1+it)/(1+it) = Phi(t) * C(1+it).

    Phi = 1 for the smooth reference; for the usual-prime reference
    Phi(t) = it * zeta(1+it)/(1+it), regular at t = 0 with value 1.
    """
    t = np.asarray(t, dtype=float)
    if a.reference is Reference.TAU:
        return np.ones(t.shape, dtype=complex)
    zmp = zeta_minus_pole_line(t)
    return (1.0 + 1j * t * zmp) / (1.0 + 1j * t)


# ---------------------------------------------------------------------------
# vertical line samples and the Hoelder modulus
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LineSamples:
    sigma: float
    t: np.ndarray
    values: np.ndarray
    which: str
    meta: dict = field(default_factory=dict)

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0])

    def conjugate_defect(self) -> float:
        return float(np.abs(self.values[::-1] - np.conj(self.values)).max())

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            fh.write("t,re,im\n")
            for t, v in zip(self.t, self.values):
                fh.write(f"{t:.17g},{v.real:.17g},{v.imag:.17g}\n")


def _kahan_accumulate(total, comp, term):
    y = term - comp
    t = total + y
    comp = (t - total) - y
    return t, comp


def sample_line(a: Perturbation, which: str, sigma: float, T: float, dt: float,
                tol: float = B_TOL) -> LineSamples:
    """Samples of A, B, C or Z on the line sigma + it, t in [-T, T].

    Atom sums use compensated (Kahan) accumulation so that 1e4-term
    oscillatory sums hold up at 1e-12 targets.
    """
    if sigma < 1.0:
        raise DomainError("sample_line needs sigma >= 1")
    n = int(round(T / dt))
    t = (np.arange(2 * n + 1) - n) * dt
    s = sigma + 1j * t
    which = which.upper()
    if which == "A":
        values = _kahan_atomic_line(a, s)
        if a.smooth is not None:
            values = values + a.smooth.mellin(s)
    elif which in ("B", "C", "Z"):
        values = np.zeros(s.shape, dtype=complex)
        if a.locs.size:
            K = _series_length(a, sigma, tol)
            floor = tol * 1e-4 / max(a.locs.size, 1)
            for k in range(1, K + 1):
                values += _kahan_atomic_line(a, k * s, min_term=floor) / k
        if a.smooth is not None:
            values = values + a.smooth.mellin(s)
        if which in ("C", "Z"):
            values = np.exp(values)
        if which == "Z":
            if sigma == 1.0:
                raise PoleError("Z has a pole at s = 1; sample Z on sigma > 1")
            ref = (s / (s - 1.0)) if a.reference is Reference.TAU else zeta_line(s)
            values = ref * values
    else:
        raise DomainError(f"unknown line function {which!r}")
    return LineSamples(float(sigma), t, values, which,
                       meta={"T": n * dt, "dt": float(dt)})


def _kahan_atomic_line(a: Perturbation, s, min_term=0.0):
    t = s.imag
    sigma_arr = s.real
    out_r = np.zeros(t.shape)
    comp_r = np.zeros(t.shape)
    out_i = np.zeros(t.shape)
    comp_i = np.zeros(t.shape)
    logs, w = a.log_locs, a.weights
    if min_term > 0.0:
        amp_all = np.abs(w) * np.exp(-float(sigma_arr.min()) * logs)
        keep = amp_all >= min_term
        logs, w = logs[keep], w[keep]
    for lam, wj in zip(logs, w):
        amp = wj * np.exp(-sigma_arr * lam)
        phase = -lam * t
        out_r, comp_r = _kahan_accumulate(out_r, comp_r, amp * np.cos(phase))
        out_i, comp_i = _kahan_accumulate(out_i, comp_i, amp * np.sin(phase))
    return out_r + 1j * out_i


@dataclass(frozen=True)
class ModulusEstimate:
    deltas: np.ndarray
    omega: np.ndarray
    beta_hat: float
    omega_integral_partial: float
    dt: float
    meta: dict = field(default_factory=dict)

    def omega_at(self, delta: float) -> float:
        i = np.searchsorted(self.deltas, delta)
        return float(self.omega[min(i, self.omega.size - 1)])

    def to_json(self):
        return {
            "deltas": list(map(float, self.deltas)),
            "omega": list(map(float, self.omega)),
            "beta_hat": self.beta_hat,
            "omega_integral_partial": self.omega_integral_partial,
            "dt": self.dt,
            "meta": self.meta,
        }


def holder_modulus(L: LineSamples, deltas, max_lags: int = 192) -> ModulusEstimate:
    """omega(delta) = max |L(t) - L(t')| over grid pairs with |t - t'| <= delta.

    Grid pairs underestimate the true supremum; ``dt`` is reported alongside
    so the resolution bias stays explicit.  Lags are subsampled geometrically
    (at most ``max_lags``), and omega is a running maximum so it is
    nondecreasing by construction.  ``beta_hat`` is the least-squares slope of
    log omega against log delta over the given deltas; the partial integral of
    omega(t)/t over [delta_min, 1] uses the trapezoid rule in log t.
    """
    deltas = np.sort(np.asarray(deltas, dtype=float))
    dt = L.dt
    if dt > deltas[0] / 4.0 * (1.0 + 1e-9):
        raise ResolutionError(
            f"grid step {dt!r} too coarse; need dt <= min(deltas)/4 = {deltas[0] / 4!r}"
        )
    k_targets = np.unique(np.maximum(1, (deltas / dt).astype(np.int64)))
    k_max = int(k_targets[-1])
    fill = np.unique(np.geomspace(1, k_max, num=max_lags).astype(np.int64))
    lags = np.unique(np.concatenate([k_targets, fill]))
    vals = L.values
    m = np.empty(lags.size)
    for i, k in enumerate(lags):
        m[i] = np.abs(vals[k:] - vals[:-k]).max()
    running = np.maximum.accumulate(m)
    idx = np.searchsorted(lags, (deltas / dt).astype(np.int64), side="right") - 1
    idx = np.clip(idx, 0, lags.size - 1)
    omega = running[idx]
    good = omega > 0
    if good.sum() >= 2:
        beta_hat = float(np.polyfit(np.log(deltas[good]), np.log(omega[good]), 1)[0])
    else:
        beta_hat = 0.0
    lo = deltas[0]
    grid = deltas[(deltas >= lo) & (deltas <= 1.0)]
    om = omega[(deltas >= lo) & (deltas <= 1.0)]
    if grid.size >= 2:
        # integral of omega/t dt = integral of omega d(log t)
        integral = float(np.trapezoid(om, np.log(grid)))
    else:
        integral = 0.0
    return ModulusEstimate(deltas, omega, beta_hat, integral, dt,
                           meta={"lags_used": int(lags.size), "which": L.which})


@dataclass(frozen=True)
class ModulusBoundReport:
    K_hat: float
    K_half_sample: float
    n_pairs: int
    stable: bool


def c_modulus_bound_check(a: Perturbation, sigma_list, t_pairs,
                          omega: ModulusEstimate, tol: float = B_TOL) -> ModulusBoundReport:
    """Empirical constant in |C(sigma+it') - C(sigma+it)| <= K omega(|t'-t|).

    Pairs with omega(|dt|) = 0 are skipped; stability compares the maximum
    ratio over the first half of the sample with the full sample.
    """
    ratios = []
    for sigma in sigma_list:
        pairs = np.asarray(t_pairs, dtype=float)
        s1 = sigma + 1j * pairs[:, 0]
        s2 = sigma + 1j * pairs[:, 1]
        c1 = C_of(a, s1, tol)
        c2 = C_of(a, s2, tol)
        for (t1, t2), v1, v2 in zip(pairs, c1, c2):
            w = omega.omega_at(abs(t2 - t1))
            if w > 0:
                ratios.append(abs(v2 - v1) / w)
    ratios = np.asarray(ratios)
    if ratios.size == 0:
        return ModulusBoundReport(0.0, 0.0, 0, True)
    k_full = float(ratios.max())
    k_half = float(ratios[: max(1, ratios.size // 2)].max())
    stable = bool(k_full <= 1.1 * k_half + 1e-12)
    return ModulusBoundReport(k_full, k_half, int(ratios.size), stable)


# ---------------------------------------------------------------------------
# the closeness integral I(Y) = int_e^Y |a(y)| / y^2 dy
# ---------------------------------------------------------------------------

DIAMOND_TRENDS = ("BOUNDED", "LOG_DIVERGENT", "POWER_DIVERGENT")


@dataclass(frozen=True)
class DiamondResult:
    Y: np.ndarray
    I: np.ndarray
    trend: str
    slope: float
    block_I: np.ndarray  # I at e^n for integer n
    meta: dict = field(default_factory=dict)

    def rows(self):
        return zip(self.Y, self.I)


def diamond_integral(a: Perturbation, Y_grid) -> DiamondResult:
    """Partial integrals I(Y) = int_e^Y |a(y)| y^{-2} dy with a growth trend.

    Between breakpoints the atomic part is constant so each piece integrates
    in closed form; a smooth part is handled by fixed-order Gauss-Legendre on
    each gap with sign-change splitting.  The trend regresses the per-block
    increments at Y = e^n: summable decay is BOUNDED, increments ~ 1/n are
    LOG_DIVERGENT, slower decay is POWER_DIVERGENT (desk-scale bands, see
    ``meta['bands']``).
    """
    Y = np.sort(np.asarray(Y_grid, dtype=float))
    if Y[0] < math.e:
        raise DomainError("the closeness integral starts at e")
    y_max = float(Y[-1])
    n_max = int(math.floor(math.log(y_max) + 1e-9))
    block_edges = np.exp(np.arange(1, n_max + 1, dtype=float))
    edges = np.unique(np.concatenate([[math.e], a.locs, Y, block_edges]))
    edges = edges[(edges >= math.e) & (edges <= y_max)]
    if edges[-1] < y_max:
        edges = np.append(edges, y_max)

    if a.smooth is None:
        av = a._cum[np.searchsorted(a.locs, edges[:-1], side="right")]
        seg = np.abs(av) * (1.0 / edges[:-1] - 1.0 / edges[1:])
    else:
        seg = _diamond_segments_smooth(a, edges)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    I_at = lambda y: cum[np.searchsorted(edges, np.asarray(y, float) * (1 + 1e-15),
                                         side="right") - 1]
    I = I_at(Y)
    block_I = I_at(block_edges)
    trend, slope = _diamond_trend(block_I)
    return DiamondResult(Y, I, trend, slope, block_I,
                         meta={"bands": {"bounded": "slope <= -1.3",
                                         "log": "-1.3 < slope <= -0.8",
                                         "power": "slope > -0.8"}})


def _diamond_segments_smooth(a: Perturbation, edges):
    from scipy.optimize import brentq

    nodes, wts = np.polynomial.legendre.leggauss(12)
    seg = np.zeros(edges.size - 1)
    for i in range(edges.size - 1):
        lo, hi = edges[i], edges[i + 1]
        f_lo, f_hi = a.a(lo), a.a(hi * (1 - 1e-15))
        pieces = [(lo, hi)]
        if f_lo * f_hi < 0:
            root = brentq(lambda y: a.a(y), lo, hi, xtol=1e-12 * hi)
            pieces = [(lo, root), (root, hi)]
        total = 0.0
        for p0, p1 in pieces:
            ys = 0.5 * (p1 - p0) * nodes + 0.5 * (p0 + p1)
            total += 0.5 * (p1 - p0) * float(np.sum(wts * np.abs(a.a(ys)) / ys**2))
        seg[i] = total
    return seg


def _diamond_trend(block_I):
    if block_I.size < 4:
        return "BOUNDED" if block_I.max(initial=0.0) < 1e-12 else "LOG_DIVERGENT", 0.0
    inc = np.diff(block_I)
    total = block_I[-1]
    if total < 1e-12:
        return "BOUNDED", -math.inf
    if inc[inc.size // 2 :].sum() < 0.02 * total:
        return "BOUNDED", -math.inf
    n = np.arange(1, block_I.size, dtype=float)  # inc[i] is block [e^{i+1}, e^{i+2}]
    pos = inc > 0
    if pos.sum() < 3:
        return "BOUNDED", -math.inf
    slope = float(np.polyfit(np.log(n[pos]), np.log(inc[pos]), 1)[0])
    if slope <= -1.3:
        return "BOUNDED", slope
    if slope <= -0.8:
        return "LOG_DIVERGENT", slope
    return "POWER_DIVERGENT", slope
