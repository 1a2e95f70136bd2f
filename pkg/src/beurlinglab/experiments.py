"""Configured, reproducible experiment runs with CSV/JSON reports.

Every run is fully determined by (config, seed): reruns produce byte
identical files.  Reports carry no wall-clock data; floats are written with
17 significant digits.  Exit-code contract: 0 success, 1 schema violation,
2 assertion failure, 3 capacity error.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

try:
    import jsonschema
except ImportError:  # pragma: no cover
    jsonschema = None

from . import reference, smoothing, systems, transfer, verify
from .errors import CapacityError, SchemaError
from .lattice import density_estimate, euler_density, generate, partial_density_product
from .steps import StepFunction

EXPERIMENTS = ("DENSITY", "DIAMOND", "RANDOM_EXAMPLE", "COUNTEREXAMPLE",
               "SMOOTH", "VERIFY", "OSCILLATE")

OUT_ENV_VAR = "BEURLINGLAB_OUT"

_SYSTEM_SCHEMA = {
    "type": "object",
    "properties": {
        "kind": {"enum": ["usual", "random_sign", "block_coinflip",
                          "alternating", "plus", "minus", "custom"]},
        "params": {"type": "object"},
        "seed": {"type": "integer"},
    },
    "required": ["kind"],
}

CONFIG_SCHEMA = {
    "type": "object",
    "properties": {
        "experiment": {"enum": list(EXPERIMENTS)},
        "seed": {"type": "integer"},
        "seeds": {"type": "array", "items": {"type": "integer"}},
        "system": _SYSTEM_SCHEMA,
        "X": {"type": "number", "exclusiveMinimum": 1},
        "Y": {"type": "number", "exclusiveMinimum": 1},
        "n_lo": {"type": "integer", "minimum": 1},
        "n_hi": {"type": "integer", "minimum": 1},
        "alpha": {"type": "number"},
        "n_max": {"type": "integer", "minimum": 1},
        "n_max_holder": {"type": "integer", "minimum": 1},
        "eps": {"type": "number", "exclusiveMinimum": 0},
        "eps_list": {"type": "array", "items": {"type": "number"}},
        "sigma": {"type": "number"},
        "u_probe": {"type": "number"},
        "u_lo": {"type": "number"},
        "u_hi": {"type": "number"},
        "n_u": {"type": "integer", "minimum": 2},
        "T": {"type": "number", "exclusiveMinimum": 0},
        "dt": {"type": "number", "exclusiveMinimum": 0},
        "deltas_fit": {"type": "array", "items": {"type": "number"}},
        "delta_probe": {"type": "number", "exclusiveMinimum": 0},
        "remove": {"type": "array", "items": {"type": "number"}},
        "jitter": {"type": "boolean"},
        "block_len": {"type": "number", "exclusiveMinimum": 0},
        "start_doubled": {"type": "boolean"},
        "spread_tol": {"type": "number", "exclusiveMinimum": 0},
        "budget": {"type": "integer", "minimum": 1000},
    },
    "required": ["experiment"],
    "additionalProperties": False,
}

DEFAULTS = {
    "DENSITY": {"system": {"kind": "usual", "params": {"Y": 1e6}},
                "X": 1e6, "remove": [], "budget": 200_000_000},
    "DIAMOND": {"system": {"kind": "random_sign",
                           "params": {"alpha": 1.0, "n_max": 50}},
                "n_lo": 1, "n_hi": 50, "seed": 0},
    "RANDOM_EXAMPLE": {"alpha": 1.0, "n_max": 50, "n_max_holder": 200,
                       "seeds": list(range(20)), "eps": 0.1, "u_probe": 12.0,
                       "sigma": 1.25, "T": 50.0, "dt": 2.5e-4,
                       "deltas_fit": list(np.geomspace(0.05, 2.0, 9)),
                       "delta_probe": 1e-3},
    "COUNTEREXAMPLE": {"seed": 7, "n_hi": 20, "jitter": True},
    "SMOOTH": {"eps": 0.1, "sigma": 1.5, "u_lo": 2.0, "u_hi": 10.0, "n_u": 17},
    "OSCILLATE": {"X": 1e6, "block_len": 3.0, "start_doubled": False,
                  "budget": 200_000_000},
    "VERIFY": {},
}


@dataclass
class ExperimentResult:
    experiment: str
    report: dict
    tables: dict = field(default_factory=dict)  # name -> (header, rows)
    files: list = field(default_factory=list)
    exit_code: int = 0


def validate_config(config: dict) -> dict:
    """Schema-check and merge with the experiment defaults."""
    if jsonschema is not None:
        try:
            jsonschema.validate(config, CONFIG_SCHEMA)
        except jsonschema.ValidationError as exc:
            path = "/".join(str(p) for p in exc.absolute_path) or "(root)"
            raise SchemaError(f"config invalid at {path}: {exc.message}",
                              path=path) from exc
    elif "experiment" not in config or config["experiment"] not in EXPERIMENTS:
        raise SchemaError("config invalid at experiment", path="experiment")
    merged = dict(DEFAULTS[config["experiment"]])
    merged.update(config)
    return merged


def run(config: dict, out_dir: str | None = None, threads: int = 1,
        seed: int | None = None) -> ExperimentResult:
    """Validate, execute and write one experiment; see the exit-code contract."""
    cfg = validate_config(config)
    if seed is not None:
        cfg["seed"] = int(seed)
        if "seeds" in cfg:
            cfg["seeds"] = [int(seed) + i for i in range(len(cfg["seeds"]))]
    runner = _RUNNERS[cfg["experiment"]]
    try:
        result = runner(cfg, threads)
    except CapacityError as exc:
        result = ExperimentResult(cfg["experiment"],
                                  {"error": str(exc), "kind": "capacity"},
                                  exit_code=3)
    result.report["config"] = _jsonable(cfg)
    out_dir = out_dir or os.environ.get(OUT_ENV_VAR) or "."
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "report.json")
    with open(path, "w", newline="") as fh:
        json.dump(result.report, fh, sort_keys=True, indent=1)
        fh.write("\n")
    result.files.append(path)
    result.files.extend(emit_plotdata(result, out_dir))
    return result


def emit_plotdata(result: ExperimentResult, out_dir: str) -> list:
    """One deterministic CSV per figure-like table in the result."""
    paths = []
    for name, (header, rows) in sorted(result.tables.items()):
        path = os.path.join(out_dir, f"{name}.csv")
        with open(path, "w", newline="") as fh:
            fh.write(",".join(header) + "\n")
            for row in rows:
                fh.write(",".join(_fmt(v) for v in row) + "\n")
        paths.append(path)
    return paths


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    return format(float(v), ".17g")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    return obj


def _build_system(doc: dict, default_seed=0):
    doc = dict(doc)
    doc.setdefault("seed", default_seed)
    return systems.system_from_json(doc)


# ---------------------------------------------------------------------------
# the experiments
# ---------------------------------------------------------------------------

def _run_density(cfg, threads):
    sys_obj = _build_system(cfg["system"], cfg.get("seed", 0))
    counting = sys_obj.counting
    removed = [float(r) for r in cfg.get("remove", [])]
    if removed:
        keep = ~np.isin(counting.locs, removed)
        counting = StepFunction(counting.locs[keep], counting.weights[keep],
                                base=counting.base, horizon=counting.horizon)
    X = float(cfg["X"])
    N = generate(counting, X, budget=int(cfg.get("budget", 2e8)))
    rep = density_estimate(N)
    report = {"density": rep.to_json(), "N_at_X": N.count(X),
              "n_values": int(N.log_values.size)}
    if removed:
        report["euler_reference"] = euler_density(removed=removed)
    u = np.linspace(0.0, math.log(X), int(32 * math.log10(X)) + 1)
    ratios = N.count(np.exp(u)) / np.exp(u)
    tables = {"density_ratios": (["logx", "ratio"], list(zip(u, ratios)))}
    return ExperimentResult("DENSITY", report, tables)


def _run_diamond(cfg, threads):
    obj = _build_system(cfg["system"], cfg.get("seed", 0))
    pert = obj if isinstance(obj, systems.Perturbation) else systems.perturbation_of(obj)
    n_lo, n_hi = int(cfg["n_lo"]), int(cfg["n_hi"])
    Y = np.exp(np.arange(n_lo, n_hi + 1, dtype=float))
    d = transfer.diamond_integral(pert, Y)
    report = {"trend": d.trend, "slope": d.slope,
              "I_final": float(d.I[-1]), "n_hi": n_hi}
    tables = {"diamond_partial": (["logY", "partial_integral"],
                                  [(math.log(y), v) for y, v in d.rows()])}
    return ExperimentResult("DIAMOND", report, tables)


def _single_seed_random_example(cfg, seed):
    alpha = float(cfg["alpha"])
    eps = float(cfg["eps"])
    a_d = systems.random_sign_system(alpha, int(cfg["n_max"]), seed)
    d = transfer.diamond_integral(a_d, np.exp(np.arange(1.0, cfg["n_max"] + 1.0)))
    i_half = float(d.I[d.I.size // 2 - 1])
    probe = smoothing.density_via_C1(a_d, eps, float(cfg["u_probe"]),
                                     sigma=float(cfg["sigma"]))
    a_h = systems.random_sign_system(alpha, int(cfg["n_max_holder"]), seed)
    L = transfer.sample_line(a_h, "A", 1.0, float(cfg["T"]), float(cfg["dt"]))
    mod_fit = transfer.holder_modulus(L, np.asarray(cfg["deltas_fit"], float))
    dp = float(cfg["delta_probe"])
    mod_probe = transfer.holder_modulus(L, np.geomspace(dp, 1.0, 13))
    return {
        "seed": int(seed),
        "trend": d.trend,
        "slope": d.slope,
        "I_half": i_half,
        "I_final": float(d.I[-1]),
        "gap": probe.gap,
        "C1": probe.reference_C1,
        "rel_gap": probe.gap / abs(probe.reference_C1),
        "beta_hat": mod_fit.beta_hat,
        "omega_probe": float(mod_probe.omega[0]),
        "omega_integral": mod_probe.omega_integral_partial,
    }


def _run_random_example(cfg, threads):
    seeds = [int(s) for s in cfg["seeds"]]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(lambda s: _single_seed_random_example(cfg, s),
                                 seeds))
    else:
        rows = [_single_seed_random_example(cfg, s) for s in seeds]
    trends = [r["trend"] for r in rows]
    rel = np.array([r["rel_gap"] for r in rows])
    betas = np.array([r["beta_hat"] for r in rows])
    om = np.array([r["omega_probe"] for r in rows])
    ratio = np.array([r["I_final"] / r["I_half"] for r in rows])
    report = {
        "n_seeds": len(seeds),
        "all_log_divergent": all(t == "LOG_DIVERGENT" for t in trends),
        "frac_gap_below_5pct": float(np.mean(rel < 0.05)),
        "frac_beta_in_range": float(np.mean((betas > 0.05) & (betas < 0.5))),
        "frac_omega_small": float(np.mean(om < 0.05)),
        "min_I_ratio": float(ratio.min()),
        "median_rel_gap": float(np.median(rel)),
    }
    header = ["seed", "trend", "slope", "I_half", "I_final", "gap", "C1",
              "rel_gap", "beta_hat", "omega_probe", "omega_integral"]
    tables = {"random_example_seeds": (header,
                                       [[r[h] for h in header] for r in rows])}
    return ExperimentResult("RANDOM_EXAMPLE", report, tables)


def _run_counterexample(cfg, threads):
    seed = int(cfg["seed"])
    n_hi = int(cfg["n_hi"])
    Y = math.exp(float(n_hi))
    P = systems.block_coinflip_system(Y, seed)
    if cfg.get("jitter", True):
        locs = systems.jitter_atoms(P.counting.locs, seed)
        counting = StepFunction(locs, P.counting.weights, horizon=Y, validate=False)
        P = systems.GenPrimeSystem(counting, Y, free=True,
                                   reference=systems.Reference.PI, meta=P.meta)
    P1 = systems.usual_primes(Y)
    Pp = systems.plus_system(P, P1)
    Pm = systems.minus_system(P, P1)
    Yg = np.exp(np.arange(1.0, n_hi + 1.0))
    pp = partial_density_product(Pp, P1, Yg)
    pm = partial_density_product(Pm, P1, Yg)
    half = n_hi // 2 - 1
    report = {
        "seed": seed,
        "plus_gap_increment": float(pp.recip_gap[-1] - pp.recip_gap[half]),
        "plus_strictly_increasing": bool(np.all(np.diff(pp.recip_gap) > 0)),
        "plus_final": float(pp.recip_gap[-1]),
        "plus_product_final": float(pp.product[-1]),
        "minus_product_initial": float(pm.product[0]),
        "minus_product_final": float(pm.product[-1]),
        "minus_ratio": float(pm.product[-1] / pm.product[0]),
        "coins": P.meta["coins"],
    }
    rows = [(math.log(y), p_, g_, pm.product[i], pm.recip_gap[i])
            for i, (y, p_, g_) in enumerate(zip(pp.Y, pp.product, pp.recip_gap))]
    tables = {"counterexample_products": (
        ["logY", "product_plus", "recip_gap_plus", "product_minus",
         "recip_gap_minus"], rows)}
    return ExperimentResult("COUNTEREXAMPLE", report, tables)


def _run_smooth(cfg, threads):
    eps = float(cfg["eps"])
    sigma = float(cfg["sigma"])
    u = np.linspace(float(cfg["u_lo"]), float(cfg["u_hi"]), int(cfg["n_u"]))
    horizon = math.exp(u.max() + smoothing.KERNEL_SPAN * eps)
    cases = {
        "reference": (reference.reference_step(),
                      systems.Perturbation([], [], systems.Reference.TAU)),
        "naturals": (reference.naturals_staircase(horizon),
                     systems.Perturbation([], [], systems.Reference.PI)),
        "single_e": (reference.integers_with_generators([math.e], horizon),
                     systems.Perturbation([math.e], [1.0],
                                          systems.Reference.TAU, horizon=1e12)),
    }
    rows, agreement = [], {}
    for name, (N, pert) in sorted(cases.items()):
        conv = smoothing.smooth_counting(N, eps, u, tilt_sigma=sigma)
        four = smoothing.fourier_counting(pert, sigma, eps, np.exp(u))
        rel = float(np.max(np.abs(conv.values - four.values)
                           / np.abs(conv.values)))
        agreement[name] = rel
        for ui, vc, vf in zip(u, conv.values, four.values):
            rows.append((name, ui, vc, "CONVOLUTION", eps, sigma))
            rows.append((name, ui, vf, "FOURIER", eps, sigma))
    a0 = systems.Perturbation([], [], systems.Reference.TAU)
    ug = np.arange(-1.5, 1.5001, 0.01)
    _, mass = smoothing.fourier_derivative(a0, eps, ug)
    report = {"side_agreement_rel": agreement, "mass_identity": mass,
              "mass_error": abs(mass - 1.0)}
    tables = {"smooth_sides": (["system", "u", "value", "side", "eps", "tilt"],
                               rows)}
    return ExperimentResult("SMOOTH", report, tables)


def _run_oscillate(cfg, threads):
    X = float(cfg["X"])
    sys_o = systems.alternating_block_system(X, float(cfg["block_len"]),
                                             bool(cfg.get("start_doubled", False)))
    N = generate(sys_o, X, budget=int(cfg.get("budget", 2e8)))
    rep = density_estimate(N)
    report = {"density": rep.to_json(), "trend": rep.trend,
              "liminf_estimate": rep.meta["liminf"],
              "limsup_estimate": rep.meta["limsup"]}
    u = np.linspace(0.0, math.log(X), int(32 * math.log10(X)) + 1)
    ratios = N.count(np.exp(u)) / np.exp(u)
    tables = {"oscillate_ratios": (["logx", "ratio"], list(zip(u, ratios)))}
    return ExperimentResult("OSCILLATE", report, tables)


def _run_verify(cfg, threads):
    results = verify.run_suite(fail_fast=False)
    failures = [(n, d) for n, ok, d in results if not ok]
    report = {"checks": [[n, ok] for n, ok, _ in results],
              "n_failed": len(failures),
              "first_failure": failures[0][0] if failures else None}
    code = 2 if failures else 0
    return ExperimentResult("VERIFY", report, exit_code=code)


_RUNNERS = {
    "DENSITY": _run_density,
    "DIAMOND": _run_diamond,
    "RANDOM_EXAMPLE": _run_random_example,
    "COUNTEREXAMPLE": _run_counterexample,
    "SMOOTH": _run_smooth,
    "OSCILLATE": _run_oscillate,
    "VERIFY": _run_verify,
}
