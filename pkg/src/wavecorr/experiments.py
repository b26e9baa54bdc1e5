"""Config-driven experiment scenarios tying simulation against prediction.

Each scenario is a pure function of its (validated) config: identical config
and seed produce byte-identical record files. Thresholds live in the config,
not in code; when present, the run's pass flag (and the CLI exit code)
reflects them.
"""

import json
import time
from pathlib import Path

import numpy as np
from jsonschema import validate as _validate_schema

from . import correlation as corr
from . import gridio, noise, scattering, semiclassical, surface, wavesim
from .medium import Medium
from .phase_space import PhaseSpaceContext
from .util import rel_l2

__all__ = ["run", "compare", "list_scenarios", "default_config", "SCENARIOS"]


SCHEMA = {
    "type": "object",
    "required": ["schema_version", "scenario", "seed"],
    "properties": {
        "schema_version": {"const": 1},
        "scenario": {"type": "string"},
        "seed": {"type": "integer", "minimum": 0},
        "out_dir": {"type": "string"},
        "grid": {
            "type": "object",
            "properties": {
                "n": {"type": "integer", "exclusiveMinimum": 0},
                "length": {"type": "number", "exclusiveMinimum": 0},
                "eps": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "medium": {"type": "object"},
        "noise": {"type": "object"},
        "receivers": {"type": "array", "items": {"type": "number"}},
        "time": {"type": "object"},
        "ensemble": {"type": "integer", "exclusiveMinimum": 0},
        "thresholds": {"type": "object"},
        "params": {"type": "object"},
        "threads": {"type": "integer", "minimum": 1},
    },
    "additionalProperties": False,
}


def _merge(base, override):
    out = dict(base)
    for k, v in (override or {}).items():
        out[k] = _merge(base.get(k, {}), v) if isinstance(v, dict) and isinstance(base.get(k), dict) else v
    return out


def validate_config(config):
    _validate_schema(config, SCHEMA)
    if config["scenario"] not in SCENARIOS:
        raise ValueError(
            f"unknown scenario {config['scenario']!r}; "
            f"available: {sorted(SCENARIOS)}"
        )
    merged = _merge(default_config(config["scenario"]), config)
    for key in ("n0", "a0"):
        if key in merged.get("medium", {}) and merged["medium"][key] < 0:
            raise ValueError(f"medium.{key} must be nonnegative")
    return merged


def run(config, out_dir=None):
    """Validate, execute and manifest one scenario run."""
    started = time.time()
    cfg = validate_config(config)
    out = Path(out_dir or cfg.get("out_dir") or ".")
    out.mkdir(parents=True, exist_ok=True)
    outputs, warnings, metrics, passed = SCENARIOS[cfg["scenario"]](cfg, out)
    manifest = gridio.write_manifest(out, cfg, outputs, warnings, passed,
                                     started, extra={"metrics": metrics})
    return manifest


def compare(records, window, n_samples=512):
    """Windowed comparison metrics between records on a common lag grid.

    records : [test, reference]; both are resampled onto the overlap of their
    grids restricted to |tau| in [window[0], window[1]].
    Returns relative L2 distance, peak-lag shift (samples and time), and the
    L2 amplitude ratio.
    """
    test, ref = records
    lo = max(test.tau.min(), ref.tau.min())
    hi = min(test.tau.max(), ref.tau.max())
    if lo >= hi:
        raise ValueError("records have disjoint lag ranges")
    grid = np.linspace(lo, hi, n_samples)
    mask = (np.abs(grid) >= window[0]) & (np.abs(grid) <= window[1])
    if not mask.any():
        raise ValueError("comparison window is empty")
    grid = grid[mask]
    a = test.resample(grid).values
    b = ref.resample(grid).values
    dt = grid[1] - grid[0]
    xc = np.correlate(a - a.mean(), b - b.mean(), mode="full")
    shift = int(np.argmax(xc) - (len(a) - 1))
    ratio = float(np.linalg.norm(a) / max(np.linalg.norm(b), 1e-300))
    return {
        "rel_l2": float(rel_l2(a, b)),
        "peak_lag_shift_samples": shift,
        "peak_lag_shift_time": shift * dt,
        "amplitude_ratio": ratio,
    }


# ---------------------------------------------------------------------------
# scenario implementations

def _ctx_medium(cfg, dim=1):
    g = cfg["grid"]
    ctx = PhaseSpaceContext(g["n"], g["length"], g["eps"], dim=dim)
    m = Medium.from_descriptor(cfg["medium"])
    return ctx, m


def _scenario_white_noise_identity(cfg, out):
    """Delta-correlated source: compare dC/dtau against -G / (2 a0)."""
    ctx, medium = _ctx_medium(cfg)
    a0 = cfg["medium"]["a0"]
    t = cfg["time"]
    dt = t["dt_factor"] * ctx.h
    nm = noise.filtered_white(ctx, seed=cfg["seed"], dt=dt,
                              cutoff=cfg["noise"]["cutoff"])
    A, B = cfg["receivers"]
    tau_max = t["tau_max"]
    t_burn = t["burn_factor"] * 2.0 / a0
    t_total = t_burn + t["t_factor"] * tau_max + 2.2 * tau_max
    _, traces = wavesim.drive_ensemble(medium, ctx, nm, [A, B], t_total,
                                       dt=dt, n_real=cfg["ensemble"])
    rec = corr.empirical_correlation(traces[0], traces[1], dt, tau_max,
                                     burn_in=t_burn, pair=(A, B))
    drec = corr.correlation_derivative(rec)
    g = wavesim.greens(medium, ctx, B, [A], tau_max, dt=dt,
                       band_limit=nm.k_profile)
    ref = corr.CorrelationRecord(tau=g.t, values=-g.trace(0) / (2 * a0),
                                 provenance="exact", pair=(A, B), dt=g.dt)
    window = (cfg["params"]["window_lo"] * tau_max, tau_max)
    metrics = compare([drec, ref], window)
    ev = corr.CorrelationRecord(tau=rec.tau, values=rec.values[::-1],
                                provenance="derived", dt=rec.dt)
    metrics["evenness_rel_l2"] = float(rel_l2(ev.values, rec.values))

    gridio.record_to_csv(out / "correlation_empirical.csv", rec)
    gridio.record_to_csv(out / "correlation_derivative.csv", drec)
    gridio.record_to_csv(out / "greens_reference.csv", ref)
    gridio.curve_to_csv(out / "overlay_identity.csv",
                        [ref.tau, np.interp(ref.tau, drec.tau, drec.values),
                         ref.values],
                        ["tau", "dC_dtau", "minus_G_over_2a0"])
    outputs = ["correlation_empirical.csv", "correlation_empirical.csv.json",
               "correlation_derivative.csv", "correlation_derivative.csv.json",
               "greens_reference.csv", "greens_reference.csv.json",
               "overlay_identity.csv"]
    warnings = list(g.warnings)
    passed = _apply_thresholds(cfg, {"rel_l2": metrics["rel_l2"]})
    return outputs, warnings, metrics, passed


def _scenario_lemma_symmetry(cfg, out):
    """Stationarity reflection: C_AB(-tau) vs C_BA(tau) at T and 2T."""
    ctx, medium = _ctx_medium(cfg)
    a0 = cfg["medium"]["a0"]
    t = cfg["time"]
    dt = t["dt_factor"] * ctx.h
    nm = noise.filtered_white(ctx, seed=cfg["seed"], dt=dt,
                              cutoff=cfg["noise"]["cutoff"])
    A, B = cfg["receivers"]
    tau_max = t["tau_max"]
    t_burn = t["burn_factor"] * 2.0 / a0
    t_win = t["t_factor"] * tau_max
    t_total = t_burn + 2 * t_win + 2.2 * tau_max
    _, traces = wavesim.drive_ensemble(medium, ctx, nm, [A, B], t_total,
                                       dt=dt, n_real=cfg["ensemble"])
    n_half = int(round((t_burn + t_win + 2.2 * tau_max) / dt))

    def sym_err(ta, tb):
        ab = corr.empirical_correlation(ta, tb, dt, tau_max, burn_in=t_burn)
        ba = corr.empirical_correlation(tb, ta, dt, tau_max, burn_in=t_burn)
        return ab, ba, float(rel_l2(ab.values[::-1], ba.values))

    ab1, ba1, err1 = sym_err(traces[0][:, :n_half], traces[1][:, :n_half])
    ab2, ba2, err2 = sym_err(traces[0], traces[1])
    metrics = {"sym_rel_l2_T": err1, "sym_rel_l2_2T": err2,
               "improves": err2 < err1}
    gridio.record_to_csv(out / "c_ab_T.csv", ab1)
    gridio.record_to_csv(out / "c_ba_T.csv", ba1)
    gridio.record_to_csv(out / "c_ab_2T.csv", ab2)
    gridio.record_to_csv(out / "c_ba_2T.csv", ba2)
    outputs = [f"c_{p}_{s}.csv{e}" for p in ("ab", "ba") for s in ("T", "2T")
               for e in ("", ".json")]
    passed = _apply_thresholds(cfg, {"rel_l2": err1, "improves": err2 < err1})
    return outputs, [], metrics, passed


def _scenario_predictor_vs_empirical(cfg, out):
    """Ray prediction against the stochastic simulation, localized source."""
    ctx, medium = _ctx_medium(cfg)
    a0 = cfg["medium"]["a0"]
    t = cfg["time"]
    dt = t["dt_factor"] * ctx.h
    ns = cfg["noise"]
    nm = noise.band_spectrum(ctx, seed=cfg["seed"], dt=dt,
                             amplitude=ns["amplitude"],
                             x_support=tuple(ns["x_support"]),
                             xi_band=tuple(ns["xi_band"]))
    A, B = cfg["receivers"]
    tau_max = t["tau_max"]
    t_burn = t["burn_factor"] * 2.0 / a0
    t_total = t_burn + t["t_factor"] * tau_max + 2.2 * tau_max
    _, traces = wavesim.drive_ensemble(medium, ctx, nm, [A, B], t_total,
                                       dt=dt, n_real=cfg["ensemble"])
    rec = corr.empirical_correlation(traces[0], traces[1], dt, tau_max,
                                     burn_in=t_burn, pair=(A, B))
    pi = semiclassical.pi_bar(medium, nm, ctx)
    tau_pos = rec.tau[rec.tau > 0]
    pred = semiclassical.predict_correlation(medium, nm, ctx, tau_pos, A, B,
                                             pi=pi)
    window = tuple(cfg["params"]["window"])
    emp_pos = corr.CorrelationRecord(tau=tau_pos,
                                     values=rec.values[rec.tau > 0],
                                     provenance="empirical", pair=(A, B),
                                     dt=dt)
    metrics = compare([pred, emp_pos], window)
    metrics["masked_fraction"] = pi.masked_fraction
    gridio.record_to_csv(out / "correlation_empirical.csv", rec)
    gridio.record_to_csv(out / "correlation_semiclassical.csv", pred)
    gridio.curve_to_csv(out / "overlay_prediction.csv",
                        [tau_pos, emp_pos.values, pred.values],
                        ["tau", "empirical", "semiclassical"])
    outputs = ["correlation_empirical.csv", "correlation_empirical.csv.json",
               "correlation_semiclassical.csv",
               "correlation_semiclassical.csv.json", "overlay_prediction.csv"]
    passed = _apply_thresholds(cfg, {"rel_l2": metrics["rel_l2"]})
    return outputs, list(pi.warnings), metrics, passed


def _scenario_asymmetry(cfg, out):
    """One-sided source: measured anticausal/causal ratio vs the ray ratio."""
    ctx, medium = _ctx_medium(cfg)
    a0 = cfg["medium"]["a0"]
    n0 = cfg["medium"]["n0"]
    t = cfg["time"]
    dt = t["dt_factor"] * ctx.h
    ns = cfg["noise"]
    nm = noise.band_spectrum(ctx, seed=cfg["seed"], dt=dt,
                             amplitude=ns["amplitude"],
                             x_support=tuple(ns["x_support"]),
                             xi_band=tuple(ns["xi_band"]))
    A, B = cfg["receivers"]
    dist = abs(B - A)
    tau_arr = dist / np.sqrt(n0)
    tau_max = t["tau_max"]
    t_burn = t["burn_factor"] * 2.0 / a0
    t_total = t_burn + t["t_factor"] * tau_max + 2.2 * tau_max
    _, traces = wavesim.drive_ensemble(medium, ctx, nm, [A, B], t_total,
                                       dt=dt, n_real=cfg["ensemble"])
    rec = corr.empirical_correlation(traces[0], traces[1], dt, tau_max,
                                     burn_in=t_burn, pair=(A, B))
    half_w = cfg["params"]["peak_halfwidth"]
    causal = (rec.tau >= tau_arr - half_w) & (rec.tau <= tau_arr + half_w)
    anti = (rec.tau >= -tau_arr - half_w) & (rec.tau <= -tau_arr + half_w)
    amp_plus = float(np.abs(rec.values[causal]).max())
    amp_minus = float(np.abs(rec.values[anti]).max())
    k_emp = amp_minus / amp_plus
    res = semiclassical.asymmetry_factor(A, B, tau_arr, medium, nm,
                                         domain_size=ctx.length)
    metrics = {
        "k_empirical": k_emp, "k_predicted": res.k, "defined": res.defined,
        "rel_error": abs(k_emp - res.k) / abs(res.k) if res.defined else np.inf,
        "m_ba": res.m_ba, "m_ab": res.m_ab,
    }
    gridio.record_to_csv(out / "correlation_empirical.csv", rec)
    (out / "asymmetry.json").write_text(json.dumps(
        gridio._jsonable(metrics), sort_keys=True, indent=1))
    outputs = ["correlation_empirical.csv", "correlation_empirical.csv.json",
               "asymmetry.json"]
    passed = _apply_thresholds(cfg, {"rel_error": metrics["rel_error"]})
    return outputs, [], metrics, passed


def _scenario_dispersion_inversion(cfg, out):
    """Recover a two-layer depth profile from its fundamental dispersion curve."""
    p = cfg["params"]
    truth = tuple(p["truth"])
    nz = p["nz"]
    bc = p["bc_surface"]
    xi_grid = np.geomspace(p["xi_lo"], p["xi_hi"], p["n_xi"])
    fam = lambda th: surface.two_layer_profile(tuple(th), depth=p["depth"],
                                               nz=nz, bc_surface=bc)
    target = surface.dispersion_curve(fam(truth), xi_grid, branch=0)
    rng = np.random.default_rng(cfg["seed"])
    lam_obs = target.lam * (1.0 + p["noise_level"] * rng.standard_normal(len(xi_grid)))
    observed = surface.DispersionCurve(xi_grid, lam_obs, target.dlam_dxi, 0)
    init = np.asarray(p["init"], dtype=float)
    result = surface.invert_profile(observed, fam, init,
                                    bounds=(p["bounds_lo"], p["bounds_hi"]),
                                    n_starts=p["n_starts"], seed=cfg["seed"])
    speeds_true = np.sqrt(truth[:2])
    speeds_fit = np.sqrt(result.theta[:2])
    metrics = {
        "theta": result.theta.tolist(),
        "speed_errors": (np.abs(speeds_fit - speeds_true) / speeds_true).tolist(),
        "depth_error": abs(result.theta[2] - truth[2]) / truth[2],
        "residual": result.residual,
        "converged": result.converged,
    }
    gridio.curve_to_csv(out / "dispersion_target.csv",
                        [xi_grid, lam_obs, target.lam],
                        ["xi", "lambda_observed", "lambda_truth"])
    fit_curve = surface.dispersion_curve(result.profile, xi_grid, branch=0)
    gridio.curve_to_csv(out / "dispersion_fit.csv", [xi_grid, fit_curve.lam],
                        ["xi", "lambda_fit"])
    report = {
        "theta": result.theta.tolist(), "residual": result.residual,
        "residual_history": result.residual_history,
        "covariance": result.covariance.tolist(),
        "bc_surface": bc,
    }
    (out / "inversion_report.json").write_text(json.dumps(report, indent=1))
    outputs = ["dispersion_target.csv", "dispersion_fit.csv",
               "inversion_report.json"]
    passed = _apply_thresholds(cfg, {
        "speed_error": max(metrics["speed_errors"]),
        "depth_error": metrics["depth_error"],
    })
    return outputs, [], metrics, passed


def _scenario_scattering_identity(cfg, out):
    """Angular-average correlation vs Im G, free space and disk scatterer."""
    p = cfg["params"]
    from scipy.special import hankel1, j0

    # free space: closed forms on both sides
    k = p["omega"] / np.sqrt(p["n0"])
    r = p["free_space_kr"] / k
    lhs_free = 2 * np.pi * j0(k * r)
    g_free = -0.25j * hankel1(0, k * r)
    rhs_free = -8 * np.pi * p["n0"] * np.imag(g_free)
    free_rel = abs(lhs_free - rhs_free) / abs(lhs_free)

    pert = scattering.disk_perturbation(p["disk_n"], p["disk_radius"],
                                        (p["length"] / 2, p["length"] / 2))
    setup = scattering.HelmholtzSetup(p["n0"], p["omega"], p["length"],
                                      p["n"], perturbation=pert)
    c = p["length"] / 2
    reports = []
    for kd, ang in zip(p["pair_kr"], p["pair_angles"]):
        d = kd / setup.k
        x = (c + 0.6 * d * np.cos(ang), c + 0.6 * d * np.sin(ang))
        y = (c - 0.4 * d * np.cos(ang), c - 0.4 * d * np.sin(ang))
        rep = scattering.verify_im_g_identity(setup, x, y, n_dirs=p["n_dirs"])
        reports.append({"kr": kd, "x": list(x), "y": list(y),
                        "lhs": [rep["lhs"].real, rep["lhs"].imag],
                        "rhs": rep["rhs"], "rel_error": rep["rel_error"]})
    metrics = {
        "free_space_rel_error": free_rel,
        "disk_rel_errors": [r_["rel_error"] for r_ in reports],
    }
    (out / "identity_report.json").write_text(json.dumps(
        {"free_space": {"lhs": lhs_free, "rhs": rhs_free,
                        "rel_error": free_rel},
         "disk_pairs": reports}, indent=1))
    outputs = ["identity_report.json"]
    passed = _apply_thresholds(cfg, {
        "free_space_rel_error": free_rel,
        "disk_rel_error": max(metrics["disk_rel_errors"]),
    })
    return outputs, [], metrics, passed


def _apply_thresholds(cfg, observed):
    th = cfg.get("thresholds")
    if not th:
        return None
    ok = True
    for key, bound in th.items():
        if key not in observed:
            raise ValueError(f"threshold {key!r} has no observed metric")
        val = observed[key]
        if isinstance(bound, bool):
            ok = ok and (val == bound)
        else:
            ok = ok and (val <= bound)
    return ok


SCENARIOS = {
    "white-noise-identity": _scenario_white_noise_identity,
    "lemma-symmetry": _scenario_lemma_symmetry,
    "predictor-vs-empirical": _scenario_predictor_vs_empirical,
    "localized-source-asymmetry": _scenario_asymmetry,
    "dispersion-inversion": _scenario_dispersion_inversion,
    "scattering-identity": _scenario_scattering_identity,
}


def list_scenarios():
    return sorted(SCENARIOS)


def default_config(scenario):
    """Template config for a scenario: small and quick; tighten for studies."""
    base = {
        "schema_version": 1,
        "scenario": scenario,
        "seed": 1234,
        "grid": {"n": 64, "length": 1.0, "eps": 0.125},
        "medium": {"preset": "homogeneous", "n0": 1.0, "a0": 0.5, "dim": 1},
        "noise": {},
        "time": {"tau_max": 0.8, "t_factor": 60, "burn_factor": 5,
                 "dt_factor": 0.25},
        "ensemble": 8,
        "params": {},
    }
    per = {
        "white-noise-identity": {
            "receivers": [0.25, 0.625],
            "noise": {"cutoff": 0.5},
            "params": {"window_lo": 0.2},
            "thresholds": {"rel_l2": 0.2},
        },
        "lemma-symmetry": {
            "receivers": [0.25, 0.625],
            "noise": {"cutoff": 0.5},
            "thresholds": {"rel_l2": 0.05, "improves": True},
        },
        "predictor-vs-empirical": {
            "grid": {"n": 128, "length": 1.0, "eps": 0.0625},
            "receivers": [0.15, 0.45],
            "noise": {"amplitude": 1.0, "x_support": [0.55, 0.95],
                      "xi_band": [1.0, 2.5]},
            "time": {"tau_max": 0.85, "t_factor": 80, "burn_factor": 5,
                     "dt_factor": 0.25},
            "ensemble": 8,
            "params": {"window": [0.2, 0.8]},
            "thresholds": {"rel_l2": 0.3},
        },
        "localized-source-asymmetry": {
            "receivers": [0.3, 0.55],
            "noise": {"amplitude": 1.0, "x_support": [0.6, 0.75],
                      "xi_band": [1.0, 2.5]},
            "time": {"tau_max": 0.45, "t_factor": 100, "burn_factor": 5,
                     "dt_factor": 0.25},
            "ensemble": 16,
            "params": {"peak_halfwidth": 0.1},
            "thresholds": {"rel_error": 0.25},
        },
        "dispersion-inversion": {
            "params": {
                "truth": [1.0, 4.0, 0.5], "init": [1.3, 2.9, 0.63],
                "depth": 1.0, "nz": 256, "bc_surface": "neumann",
                "xi_lo": 0.5, "xi_hi": 10.0, "n_xi": 24,
                "noise_level": 0.0, "n_starts": 3,
                "bounds_lo": [0.3, 0.3, 0.1], "bounds_hi": [8.0, 8.0, 0.9],
            },
            "thresholds": {"speed_error": 0.01, "depth_error": 0.02},
        },
        "scattering-identity": {
            "params": {
                "n0": 1.0, "omega": 2 * np.pi / (20.0 * 4.0 / 192),
                "length": 4.0, "n": 192, "disk_n": 1.5,
                "disk_radius": 2.0 / (2 * np.pi / (20.0 * 4.0 / 192)),
                "free_space_kr": 6.0, "pair_kr": [4.0, 7.0, 8.2],
                "pair_angles": [0.3, 1.2, 2.1], "n_dirs": 128,
            },
            "thresholds": {"free_space_rel_error": 1e-6,
                           "disk_rel_error": 0.03},
        },
    }
    return _merge(base, per[scenario])
