"""Experiment runners: build data from a config, run, and write CSV/JSON artifacts.

Each runner returns a report dict. Every verdict in it names the threshold
it was judged against, and every report carries three health metrics:
boundary mass, high-mode (aliasing) fraction and conservation drift.
"""

from __future__ import annotations

import json
import math
import time
from pathlib import Path

import numpy as np

from . import __version__
from .bridge import ResolutionPlan, WavePacketParams, build_wave_packet, convergence_sweep
from .config import ExperimentConfig
from .diagnostics import (
    BLOWUP_PRED,
    GLOBAL,
    annular_decoupling_ratio,
    boost_spacetime,
    center_and_virial,
    classify_dichotomy,
    coercivity_report,
    concavity_monitor,
    conserved,
    dispersive_decay_fit,
    einstein_invariance,
    evolve_two_sided,
    required_span,
    static_trajectory,
    virial_series,
    zero_momentum_boost,
)
from .grid import Field, Grid2D, boundary_mass_fraction, high_mode_fraction
from .ground_state import ground_state, sample_on_grid, solve_ground_state
from .io import save_snapshot, write_csv, write_diagnostics, write_plotdata
from .kg import COMPLETED, UNDERRESOLVED, KGState, evolve, from_first_order
from .symmetry import lorentz_apply, low_pass

# fitted-slope targets for the bridge, with theta = 1/100
BRIDGE_TARGETS = {"e1": -2 + 4 * 0.01, "e2": -1 + 0.01, "f3": -2 + 3 * 0.01, "f4": -2 + 3 * 0.01}
SLOPE_TOL = 0.3
VIRIAL_TOL = 1e-3


# --------------------------------------------------------------------------
# initial data


def make_grid(cfg: ExperimentConfig) -> Grid2D:
    return Grid2D(int(cfg["grid"]["n"]), float(cfg["grid"]["L"]))


def smooth_noise(grid: Grid2D, seed: int, cutoff: float) -> np.ndarray:
    """Band-limited noise with unit sup norm from a counter-based generator."""
    rng = np.random.Generator(np.random.Philox(seed))
    white = Field(grid, rng.standard_normal((grid.n, grid.n)))
    a = low_pass(cutoff, white).data
    m = np.max(np.abs(a))
    return a / m if m > 0 else a


def _gaussian(grid: Grid2D, d: dict) -> np.ndarray:
    X, Y = grid.mesh
    cx, cy = d["center"]
    env = np.exp(-((X - cx) ** 2 + (Y - cy) ** 2) / (2.0 * d["width"] ** 2))
    kx, ky = d["momentum"]
    return env, np.cos(kx * X + ky * Y)


def initial_data(cfg: ExperimentConfig) -> KGState:
    """Klein-Gordon data for the configured preset."""
    g = make_grid(cfg)
    d = cfg["data"]
    mu = int(cfg["mu"])
    preset = d["preset"]
    if preset == "scaled-Q":
        u = (1.0 + d["eps"]) * sample_on_grid(ground_state(), g, tuple(d["center"])).data
        ut = np.zeros_like(u)
    elif preset == "gaussian":
        env, carrier = _gaussian(g, d)
        u = d["amplitude"] * env * carrier
        ut = d["ut_amplitude"] * env
    else:
        env, carrier = _gaussian(g, d)
        phi = Field(g, d["amplitude"] * env * carrier + 0j)
        p = WavePacketParams(d["lam"], phi, tuple(d["nu"]), d["t0"], tuple(d["x0"]), d["theta"])
        return from_first_order(build_wave_packet(p).data, 0.0, mu)
    if d["noise"]:
        env, _ = _gaussian(g, d)
        u = u + d["noise"] * env * smooth_noise(g, int(cfg["seed"]), d["noise_cutoff"])
    return KGState(Field(g, u), Field(g, ut), 0.0, mu)


# --------------------------------------------------------------------------
# report plumbing


def verdict(name: str, value, threshold, passed: bool, rule: str) -> dict:
    return {"name": name, "value": value, "threshold": threshold, "rule": rule, "passed": bool(passed)}


def health(u0: Field, final: Field | None, drift: float | None) -> dict:
    f = final if final is not None else u0
    return {
        "boundary_mass": max(boundary_mass_fraction(u0), boundary_mass_fraction(f)),
        "high_mode_fraction": high_mode_fraction(f),
        "energy_drift": drift,
    }


def _box_ok(cfg: ExperimentConfig, h: dict) -> bool:
    return h["boundary_mass"] <= cfg["limits"]["boundary_mass_max"]


def _store_stride(cfg: ExperimentConfig) -> int | None:
    k = int(cfg["store_every"])
    return k if k > 0 else None


def _trajectory_health(cfg, s0: KGState, traj) -> dict:
    return health(s0.u, traj.final.u, traj.energy_drift())


# --------------------------------------------------------------------------
# runners


def run_ground_state(cfg: ExperimentConfig, out: Path) -> dict:
    prof = solve_ground_state(cfg["ground_state"]["tol"])
    prof.save(out / "ground_state")
    write_plotdata(out / "plotdata_profile.csv", prof.r, prof.Q, "r", "Q")
    c = prof.constants()
    vs = [
        verdict("ode_residual", prof.residual, 1e-8, prof.residual < 1e-8, "residual < threshold"),
        verdict("pohozaev", prof.pohozaev_error, 1e-6, prof.pohozaev_error < 1e-6, "|E - M/2|/M < threshold"),
    ]
    return {"constants": c, "verdicts": vs, "health": {"boundary_mass": 0.0, "high_mode_fraction": 0.0,
                                                       "energy_drift": None,
                                                       "tail_cutoff": float(prof.r[-1])}}


def run_dichotomy(cfg: ExperimentConfig, out: Path) -> dict:
    if cfg["mu"] != -1:
        raise ValueError("the dichotomy experiment is focusing (mu = -1)")
    prof = ground_state()
    s0 = initial_data(cfg)
    v0 = classify_dichotomy(s0, prof)
    lim = cfg["limits"]
    traj = evolve(s0, cfg["T"], cfg["dt"], store_every=_store_stride(cfg),
                  blowup_threshold=lim["blowup_threshold"], drift_tol=lim["drift_tol"])
    v = v0.with_observation(traj)
    write_diagnostics(out / "diagnostics.csv", traj)
    write_plotdata(out / "plotdata_mass.csv", traj.times, traj.array("mass"), "t", "M")
    write_plotdata(out / "plotdata_sup.csv", traj.times, traj.array("sup"), "t", "sup")
    rep = {"prediction": v.as_dict(), "status": traj.status, "message": traj.message}
    vs = [verdict("dichotomy_agreement", v.observed, v.prediction, bool(v.agreement),
                  "observed outcome equals prediction (blowup: blowup_detected; global: completed to T)")]
    coer = coercivity_report(traj, prof)
    if v.prediction == GLOBAL:
        vs.append(verdict("coercivity_sandwich", [coer.min_lower_margin, coer.min_upper_margin], "2E <= H1^2 + |u_t|^2 <= 4E",
                          coer.sandwich_ok, "both margins nonnegative at every step"))
    elif v.prediction == BLOWUP_PRED:
        vs.append(verdict("gradient_threshold", coer.min_gradient_margin, prof.mass, coer.gradient_above_mass,
                          "integral |grad u|^2 > M(Q) at every step"))
        cv = concavity_monitor(traj, v)
        vs.append(verdict("concavity", cv.max_second_difference, 0.0, bool(cv.ok),
                          "second differences of M^{-1/2} negative at every interior step"))
    rep["verdicts"] = vs
    rep["health"] = _trajectory_health(cfg, s0, traj)
    return rep


def run_boost_check(cfg: ExperimentConfig, out: Path) -> dict:
    s0 = initial_data(cfg)
    b = cfg["boost"]
    nus = [np.asarray(nu, dtype=float) for nu in b["nus"]]
    span = max([required_span(s0.grid, nu) for nu in nus] + [0.0]) + b["span_margin"]
    dt = cfg["dt"]
    span = dt * math.ceil(span / dt)
    static = not np.any(s0.ut.data) and cfg["data"]["preset"] == "scaled-Q" and cfg["data"]["eps"] == 0.0
    if static:
        traj = static_trajectory(s0, -span, span, dt * max(1, int(b["store_every"])))
    else:
        traj = evolve_two_sided(s0, span, dt, store_every=int(b["store_every"]),
                                blowup_threshold=cfg["limits"]["blowup_threshold"], drift_tol=cfg["limits"]["drift_tol"])
    c0 = conserved(s0)
    rows = []
    for nu in nus:
        sl = boost_spacetime(traj, nu)
        c = conserved(sl)
        # (E, P) transforms as a spacetime vector under the inverse boost
        e_pred, p_pred = lorentz_apply(-nu, c0.E, np.asarray(c0.P))
        e_pred = float(e_pred)
        zm = zero_momentum_boost(c).tolist() if c.P_abs < c.E else None
        rows.append([nu[0], nu[1], c.E, c.P[0], c.P[1], c.M, c.rest_mass_sq, e_pred, p_pred[0], p_pred[1]])
        save_snapshot(sl, out / f"boosted_{nu[0]:+.3f}_{nu[1]:+.3f}.kgf1", {"nu": nu.tolist(), "zero_momentum_nu": zm})
    write_csv(out / "boosts.csv", ("nu1", "nu2", "E", "P1", "P2", "M", "rest_mass_sq", "E_pred", "P1_pred", "P2_pred"), rows)
    write_diagnostics(out / "diagnostics.csv", traj)
    spread = einstein_invariance(traj, nus)
    dev = max(abs(r[2] - r[7]) / abs(r[7]) for r in rows) if rows else 0.0
    vs = [
        verdict("einstein_spread", spread, 1e-2, spread < 1e-2, "relative spread of E^2 - |P|^2 < threshold"),
        verdict("boosted_energy", dev, 1e-2, dev < 1e-2, "relative deviation from the Lorentz-transformed energy"),
    ]
    return {"boosts": rows, "static": static, "span": span, "verdicts": vs,
            "health": _trajectory_health(cfg, s0, traj)}


def bridge_plan(cfg: ExperimentConfig) -> tuple[Field, ResolutionPlan]:
    b = cfg["bridge"]
    g = Grid2D(int(b["n"]), float(b["L_slow"]))
    X, Y = g.mesh
    phi = Field(g, b["amplitude"] * np.exp(-(X**2 + Y**2) / (2 * b["sigma"] ** 2)) + 0j)
    return phi, ResolutionPlan(n=g.n, L_slow=g.L, dt=float(b["dt"]))


def run_bridge(cfg: ExperimentConfig, out: Path) -> dict:
    b = cfg["bridge"]
    phi, plan = bridge_plan(cfg)
    mu = int(cfg["mu"])
    ref = ground_state().mass if mu == -1 else None
    rep = convergence_sweep(phi, [float(x) for x in b["lambdas"]], float(b["T"]), plan, mu=mu, reference_mass=ref)
    keys = ("e1", "e2", "e3", "e4", "f3", "f4", "disc_l4", "disc_l4_uncorrected", "disc_h12", "true_scattering_size")
    write_csv(out / "bridge.csv", ("lam",) + keys, [[bb.lam] + [getattr(bb, k) for k in keys] for bb in rep.budgets])
    for k in ("e1", "e2", "f3", "f4", "disc_l4"):
        write_plotdata(out / f"plotdata_bridge_{k}.csv", rep.lams, [getattr(bb, k) for bb in rep.budgets], "lam", k)
    vs = []
    if len(rep.lams) >= 2:
        for k, target in BRIDGE_TARGETS.items():
            s = rep.slope(k)
            vs.append(verdict(f"slope_{k}", s, target, abs(s - target) <= SLOPE_TOL, f"|slope - target| <= {SLOPE_TOL}"))
        vs.append(verdict("discrepancy_decreasing", [bb.disc_l4 for bb in rep.budgets], "strict decrease",
                          rep.strictly_decreasing(), "L^4 discrepancy strictly decreasing in lam"))
    edge = max((bb.disc_h12 for bb in rep.budgets), default=0.0)
    return {"sweep": rep.as_dict(), "verdicts": vs,
            "health": {"boundary_mass": boundary_mass_fraction(phi), "high_mode_fraction": high_mode_fraction(phi),
                       "energy_drift": None, "max_h12_discrepancy": edge}}


def run_decay_fit(cfg: ExperimentConfig, out: Path) -> dict:
    s0 = initial_data(cfg)
    d = cfg["decay"]
    fit = dispersive_decay_fit(s0.u, int(d["N"]), (d["t_min"], d["t_max"]), int(d["samples"]))
    write_plotdata(out / "plotdata_decay.csv", fit.times, fit.sup, "t", "sup")
    vs = [verdict("decay_slope", fit.slope, -1.0, abs(fit.slope + 1.0) <= 0.1, "|slope + 1| <= 0.1")]
    return {"slope": fit.slope, "intercept": fit.intercept, "verdicts": vs, "health": health(s0.u, None, None)}


def run_decoupling(cfg: ExperimentConfig, out: Path) -> dict:
    s0 = initial_data(cfg)
    d = cfg["decoupling"]
    c = annular_decoupling_ratio(s0.u, d["T"], d["dt"])
    vs = [verdict("decoupling_constant", c, 10.0, c < 10.0, "measured constant < threshold")]
    return {"constant": c, "verdicts": vs, "health": health(s0.u, None, None)}


def run_custom_evolve(cfg: ExperimentConfig, out: Path) -> dict:
    s0 = initial_data(cfg)
    k = int(cfg["snapshot_every"])
    count = [0]

    def snap(state):
        save_snapshot(state, out / f"snapshot_{count[0]:05d}.kgf1", {"t": state.t})
        count[0] += 1

    lim = cfg["limits"]
    traj = evolve(s0, cfg["T"], cfg["dt"], store_every=k if k > 0 else _store_stride(cfg),
                  blowup_threshold=lim["blowup_threshold"], drift_tol=lim["drift_tol"], on_store=snap if k > 0 else None)
    write_diagnostics(out / "diagnostics.csv", traj)
    vs = [verdict("completed", traj.status, COMPLETED, traj.status == COMPLETED, "run reaches T without early stop")]
    return {"status": traj.status, "message": traj.message, "scattering_size": traj.scattering_size(),
            "snapshots": count[0], "verdicts": vs, "health": _trajectory_health(cfg, s0, traj)}


def run_virial(cfg: ExperimentConfig, out: Path) -> dict:
    s0 = initial_data(cfg)
    lim = cfg["limits"]
    traj = evolve(s0, cfg["T"], cfg["dt"], store_every=_store_stride(cfg),
                  blowup_threshold=lim["blowup_threshold"], drift_tol=lim["drift_tol"])
    t = traj.times
    rate = virial_series(traj, printed=cfg["mu"] == -1)
    m = traj.array("mass")
    fd = (m[2:] - 2 * m[1:-1] + m[:-2]) / cfg["dt"] ** 2
    err = float(np.max(np.abs(fd - rate[1:-1]))) / max(float(np.max(np.abs(rate))), 1e-300) if fd.size else 0.0
    write_csv(out / "plotdata_virial.csv", ("t", "rate", "second_difference"), zip(t[1:-1], rate[1:-1], fd))
    v = cfg["virial"]
    cvs = center_and_virial(traj, v["R"], v["eps"])
    write_csv(out / "plotdata_center.csv", ("t", "X1", "X2", "Z"), [(c.t, c.X[0], c.X[1], c.Z) for c in cvs])
    write_diagnostics(out / "diagnostics.csv", traj)
    tol = VIRIAL_TOL
    vs = [verdict("virial_vs_second_difference", err, tol, err < tol,
                  "sup |M'' (finite difference) - rate| / sup |rate| < threshold")]
    return {"status": traj.status, "virial_error": err, "verdicts": vs,
            "formula": "focusing (as printed)" if cfg["mu"] == -1 else "sign-general (derived)",
            "health": _trajectory_health(cfg, s0, traj)}


RUNNERS = {
    "ground-state": run_ground_state,
    "dichotomy": run_dichotomy,
    "boost-check": run_boost_check,
    "bridge": run_bridge,
    "decay-fit": run_decay_fit,
    "decoupling": run_decoupling,
    "custom-evolve": run_custom_evolve,
    "virial": run_virial,
}


def _jsonable(o):
    if isinstance(o, dict):
        return {str(k): _jsonable(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_jsonable(v) for v in o]
    if isinstance(o, np.ndarray):
        return _jsonable(o.tolist())
    if isinstance(o, (np.floating, float)):
        f = float(o)
        return f if math.isfinite(f) else str(f)
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, np.bool_):
        return bool(o)
    return o


def run(cfg: ExperimentConfig, out: str | Path) -> tuple[dict, int]:
    """Run the configured experiment into ``out``; returns ``(report, exit_code)``.

    Exit code 0 means every verdict passed, 1 a failed verdict, 3 an
    underresolved run (box too small, drift or non-finite values) or a
    runtime failure, in which case the report is partial.
    """
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(cfg.to_json())
    t0 = time.perf_counter()
    report = {"experiment": cfg.experiment, "version": __version__, "config": cfg.to_dict()}
    code = 0
    try:
        if cfg.experiment not in ("ground-state", "bridge"):
            s0 = initial_data(cfg)
            bm = boundary_mass_fraction(s0.u)
            if bm > cfg["limits"]["boundary_mass_max"]:
                report.update(status=UNDERRESOLVED,
                              message=f"initial boundary mass {bm:.3g} exceeds {cfg['limits']['boundary_mass_max']:g}",
                              health=health(s0.u, None, None), verdicts=[])
                code = 3
        if code == 0:
            body = RUNNERS[cfg.experiment](cfg, out)
            report.update(body)
            h = report.get("health", {})
            if not _box_ok(cfg, h):
                report["status"] = UNDERRESOLVED
                report["message"] = f"boundary mass {h['boundary_mass']:.3g} exceeds the limit"
                code = 3
            elif report.get("status") == UNDERRESOLVED:
                code = 3
            else:
                report.setdefault("status", COMPLETED)
                code = 0 if all(v["passed"] for v in report["verdicts"]) else 1
    except Exception as exc:  # partial report with the failure recorded
        report.update(status="failed", message=f"{type(exc).__name__}: {exc}")
        report.setdefault("verdicts", [])
        code = 3
    report["wall_time"] = time.perf_counter() - t0
    (out / "report.json").write_text(json.dumps(_jsonable(report), indent=2, sort_keys=True) + "\n")
    return report, code
