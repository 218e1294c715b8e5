"""Desk-scale experiment drivers shared by the CLI and the acceptance suite."""
import logging
import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import graph as G
from . import grid as PG
from .ingest import load_mnist_idx, make_blobs, sample_labels
from .ode import (circle_ode_solve, allen_cahn_circle, solve_corrector, solve_profile,
                  velocity_adjusted_perimeter)
from .potentials import DoubleWell, Wells, profile_constant_c0
from .schemes import (EnergyTrace, RunResult, Scheme, SchemeParams, SchemeState,
                      energy_plateau, gd_step, reference_distance, run, scalar_scheme_compare,
                      successive_distance)

log = logging.getLogger(__name__)


@dataclass
class ExperimentResult:
    kind: str
    trace: EnergyTrace
    summary: dict = field(default_factory=dict)
    snapshots: list = field(default_factory=list)  # (name, field)
    tables: dict = field(default_factory=dict)  # file name -> list of row dicts
    diverged: bool = False


def _opt_float(v):
    return None if v in ("", None) else float(v)


def _truthy(v):
    return str(v).strip().lower() in ("1", "yes", "true", "on")


def scheme_params(cfg):
    sc = cfg["scheme"]
    return SchemeParams(tau=float(sc["tau"]), eta=_opt_float(sc.get("eta")),
                        rho=_opt_float(sc.get("rho")), alpha=float(sc.get("alpha", 0.0)),
                        eps=float(cfg["backend"]["eps"]), scheme=sc["scheme"])


def snapshot_steps(n_steps, count):
    """Evenly spaced step indices (including 0 and the last step), at most ``count``."""
    count = min(count, n_steps + 1)
    if count <= 0:
        return set()
    if count == 1:
        return {n_steps}
    return {int(round(s)) for s in np.linspace(0, n_steps, count)}


def _snapshotter(steps, store):
    def cb(state):
        if state.step in steps:
            store.append((f"step{state.step:08d}", np.array(state.u)))
    return cb


def _stop_rule(cfg, backend, eps, u_ref=None):
    st = cfg["stop"]
    if st["rule"] == "energy-plateau":
        return energy_plateau(backend, eps, st["plateau_tol"], st["plateau_window"])
    if st["rule"] == "reference-distance":
        if u_ref is None:
            raise ValueError("reference-distance stopping needs a reference solution")
        return reference_distance(u_ref, st["delta"], backend)
    return None


# ----------------------------------------------------------------------------
# grid experiments

def profile_disk(grid, radius, eps, W=None, center=(0.5, 0.5)):
    """Disk initialized with the optimal 1D profile across its boundary."""
    prof = solve_profile(W or DoubleWell())
    X = prof.X_max
    return PG.disk_init(grid, center, radius, eps, profile=lambda z: prof(np.clip(z, -X, X)))


def grid_initial(cfg, grid, W):
    b = cfg["backend"]
    init = b["init"]
    if init == "profile-disk":
        return profile_disk(grid, b["radius"], b["eps"], W)
    if init == "disk":
        u = PG.disk_init(grid, (0.5,) * grid.dim, b["radius"])
    elif init == "cshape":
        u = PG.cshape_init(grid)
    elif init == "schwarzp":
        return PG.schwarzp_init(grid, b.get("radius", 0.3))
    elif init == "gyroid":
        return PG.gyroid_init(grid)
    else:
        raise ValueError(f"unknown initial condition {init!r}")
    n_warm = int(b.get("warmup_steps", 0) or 0)
    if n_warm:
        h = _opt_float(b.get("warmup_tau")) or 10.0 * float(cfg["scheme"]["tau"])
        u = PG.warm_up(u, grid, b["eps"], h, n_warm, W)
    return u


def circle_predictions(trace, radius, alpha, scheme, c0, dt=1e-5, r_stop=0.01):
    """Add GL/c0 and the singular-limit predictions to each trace record.

    Momentum schemes are compared against the radius ODE, GD against the
    curvature-flow law r = sqrt(r0^2 - 2t).
    """
    t = trace["time"]
    if scheme is Scheme.GD:
        ac = allen_cahn_circle(radius, t)
        r = np.where(ac.vanished, np.nan, ac.radius)
        rdot = np.where(ac.vanished, np.nan, -1.0 / np.where(r > 0, r, np.nan))
        plain = 2 * math.pi * r
        adjusted = plain
    else:
        traj = circle_ode_solve(radius, 0.0, alpha, dt, t_end=max(t.max(), dt), r_stop=r_stop)
        r = np.interp(t, traj.t, traj.r, right=np.nan)
        rdot = np.interp(t, traj.t, traj.rdot, right=np.nan)
        ok = np.isfinite(r)
        plain = np.full_like(t, np.nan)
        adjusted = np.full_like(t, np.nan)
        plain[ok], adjusted[ok] = velocity_adjusted_perimeter(r[ok], rdot[ok])
    for i, rec in enumerate(trace.records):
        rec["gl_over_c0"] = rec["gl_energy"] / c0
        rec["ode_r"] = float(r[i])
        rec["ode_rdot"] = float(rdot[i])
        rec["plain_perimeter_pred"] = float(plain[i])
        rec["velocity_adjusted_perimeter_pred"] = float(adjusted[i])
    return trace


def circle_validation(n=256, eps=0.015, alpha=3.0, tau=1e-6, steps=1000000,
                      record_every=1000, R=2.0, radius=0.45, scheme="cinema",
                      eta=None, n_snapshots=0, stop=None, ode_dt=1e-5):
    """Shrinking-disk run with the singular-limit predictions attached to the trace."""
    grid = PG.PeriodicGrid(2, n)
    W = DoubleWell(R)
    u0 = profile_disk(grid, radius, eps, W)
    params = SchemeParams(tau=tau, eta=eta, alpha=alpha, eps=eps, scheme=scheme)
    backend = PG.GridBackend(grid, W)
    snaps = []
    res = run(SchemeState.at_rest(u0), params, backend, steps, record_every, stop=stop,
              callback=_snapshotter(snapshot_steps(steps, n_snapshots), snaps))
    c0 = profile_constant_c0(W)
    circle_predictions(res.trace, radius, alpha, params.scheme, c0, dt=ode_dt)
    res.extra["snapshots"] = snaps
    res.extra["c0"] = c0
    return res


def _grid_experiment(cfg):
    b, sc = cfg["backend"], cfg["scheme"]
    kind = cfg.kind
    grid = PG.PeriodicGrid(int(b["dim"]), int(b["n"]))
    W = DoubleWell(float(b["R"]))
    params = scheme_params(cfg)
    n_steps = int(sc["steps"])
    if kind == "grid-circle-validate":
        res = circle_validation(grid.n, b["eps"], params.alpha, params.tau, n_steps,
                                int(sc["record_every"]), b["R"], b["radius"],
                                params.scheme.value, params.eta, cfg["io"]["snapshots"],
                                stop=None, ode_dt=cfg["ode"]["dt"])
        snaps = res.extra.pop("snapshots")
        summary = _summary(res, params)
        summary["c0"] = res.extra["c0"]
        return ExperimentResult(kind, res.trace, summary, snaps, diverged=res.diverged)

    mean = _opt_float(b.get("mean"))
    backend = PG.GridBackend(grid, W, mean=mean)
    u0 = grid_initial(cfg, grid, W)
    state = SchemeState.at_rest(u0)
    pre_steps = 0
    if _truthy(sc.get("initial_gd_step", "no")) and params.scheme is not Scheme.GD:
        # one GD step of size tau^2 smooths the indicator before momentum starts
        gd = SchemeParams(tau=params.tau ** 2, eta=params.tau ** 2, eps=params.eps, scheme="gd")
        state = gd_step(state, gd, backend)
        state = SchemeState(state.u, np.zeros_like(state.u), 0, 0.0)
        pre_steps = 1
    u_ref = None
    if cfg["stop"]["rule"] == "reference-distance":
        u_ref = reference_solution(u0, backend, params.eps, cfg["stop"]["ref_tau"],
                                   cfg["stop"]["delta_ref"], cfg["stop"]["ref_max_steps"])
    stop = _stop_rule(cfg, backend, params.eps, u_ref)
    snaps = []
    res = run(state, params, backend, n_steps, int(sc["record_every"]), stop=stop,
              callback=_snapshotter(snapshot_steps(n_steps, cfg["io"]["snapshots"]), snaps))
    summary = _summary(res, params)
    summary["initial_gd_steps"] = pre_steps
    summary["total_steps"] = res.steps + pre_steps
    return ExperimentResult(kind, res.trace, summary, snaps, diverged=res.diverged)


def reference_solution(u0, backend, eps, tau=0.1, delta_ref=1e-12, max_steps=200000):
    """GD with step ``tau`` until successive iterates are within ``delta_ref``."""
    params = SchemeParams(tau=tau, eta=tau, eps=eps, scheme="gd")
    res = run(SchemeState.at_rest(u0), params, backend, max_steps, record_every=0,
              stop=successive_distance(delta_ref, backend))
    if res.status != "converged":
        log.warning("reference solution not converged after %d steps", res.steps)
    return res.state.u


def _summary(res, params):
    last = res.trace.records[-1]
    return {
        "status": res.status,
        "steps": res.steps,
        "final_time": last["time"],
        "final_gl_energy": last["gl_energy"],
        "final_total_energy": last["total_energy"],
        "final_discrete_energy": last["discrete_energy"],
        "diverged": res.diverged,
        "scheme": params.scheme.value,
    }


# ----------------------------------------------------------------------------
# graph experiments

@dataclass
class GraphSetup:
    dataset: object
    graph: object
    problem: object
    labeled: np.ndarray
    reachable: np.ndarray  # unlabeled vertices connected to some labeled vertex


def graph_setup(dataset, graph_type="full", sigma=0.2, cutoff=1e-3, knn=5,
                label_fraction=0.01, label_seed=0, eps=1.0):
    if graph_type == "full":
        g = G.build_full_graph(dataset.points, sigma, cutoff)
    elif graph_type == "knn":
        g = G.build_knn_graph(dataset.points, knn, sigma)
    else:
        raise ValueError(f"unknown graph type {graph_type!r}")
    labeled = sample_labels(dataset, label_fraction, label_seed)
    problem = G.LabeledProblem(g, labeled, dataset.labels[labeled], dataset.k, eps)
    reach = G.reachable_from(g, labeled)
    reach[labeled] = False
    return GraphSetup(dataset, g, problem, labeled, reach)


def graph_run(setup, scheme="fista", tau=10.0, rho=0.4, eta=None, alpha=0.0, steps=100,
              R=2.0, record_every=1, stop=None, on_step=None):
    """GD or FISTA from the uniform start; records raw and 1/N energies and accuracy."""
    p = setup.problem
    backend = G.GraphBackend(p, R=R, truth=setup.dataset.labels)
    if scheme == "gd":
        params = SchemeParams(tau=tau, eta=tau if eta is None else eta, eps=p.eps, scheme="gd")
    else:
        params = SchemeParams(tau=tau, eta=eta, rho=rho, alpha=alpha, eps=p.eps, scheme=scheme)
    truth = setup.dataset.labels
    reach = setup.reachable

    def acc_connected(U_int):
        pred = G.classify(p.assemble(U_int))
        return float(np.mean(pred[reach] == truth[reach])) if reach.any() else float("nan")

    def cb(state):
        if on_step is not None:
            on_step(state)

    res = run(SchemeState.at_rest(p.uniform_start()), params, backend, steps, record_every,
              stop=stop, callback=cb)
    for rec in res.trace.records:
        rec["gl_energy_raw"] = rec["gl_energy"]
    res.extra["U"] = p.assemble(res.state.u)
    res.extra["accuracy_connected"] = acc_connected(res.state.u)
    res.extra["params"] = params
    return res


def _graph_experiment(cfg):
    d, gcfg, b, sc = cfg["data"], cfg["graph"], cfg["backend"], cfg["scheme"]
    if cfg.kind == "graph-blobs":
        ds = make_blobs(d["n"], d["k"], d["std"], d["box_half_width"], cfg.seed)
    else:
        images = d["images"] or os.path.join(os.environ.get("MNIST_DIR", ""),
                                             "train-images-idx3-ubyte")
        labels = d["labels"] or os.path.join(os.environ.get("MNIST_DIR", ""),
                                             "train-labels-idx1-ubyte")
        ds = load_mnist_idx(images, labels)
        if d["subset"] and d["subset"] < ds.N:
            ds = ds.head(int(d["subset"]))
    setup = graph_setup(ds, gcfg["type"], gcfg["sigma"], gcfg["cutoff"], gcfg["knn"],
                        d["label_fraction"], d["label_seed"], b["eps"])
    res = graph_run(setup, sc["scheme"], sc["tau"], _opt_float(sc["rho"]),
                    _opt_float(sc["eta"]), sc["alpha"], int(sc["steps"]), b["R"],
                    int(sc["record_every"]))
    summary = _summary(res, res.extra["params"])
    summary.update({
        "N": ds.N, "labeled": int(setup.labeled.size),
        "connected_unlabeled": int(setup.reachable.sum()),
        "accuracy_connected": res.extra["accuracy_connected"],
        "final_gl_energy_scaled": res.trace.records[-1]["gl_energy_scaled"],
        "max_row_sum_error": float(np.max(res.trace["max_row_sum_error"])),
    })
    U = res.extra["U"]
    truth = ds.labels.copy()
    pred = G.classify(U)
    summary["accuracy"] = G.accuracy(pred, truth, exclude=setup.labeled)
    rows = [{"index": i, "true_label": int(truth[i]), "predicted_label": int(pred[i]),
             "max_component": float(U[i].max())} for i in range(ds.N)]
    return ExperimentResult(cfg.kind, res.trace, summary,
                            tables={"predictions.csv": rows}, diverged=res.diverged)


# ----------------------------------------------------------------------------
# ODE and scalar experiments

def _ode_experiment(cfg):
    b, o = cfg["backend"], cfg["ode"]
    W = DoubleWell(b["R"])
    prof = solve_profile(W, b["X_max"], b["n_points"])
    corr = solve_corrector(prof)
    inner, norms = corr.orthogonality()
    c0 = profile_constant_c0(W)
    traj = circle_ode_solve(o["r0"], o["rdot0"], o["alpha"], o["dt"], o["t_end"], o["r_stop"])
    plain, adjusted = velocity_adjusted_perimeter(traj.r, traj.rdot, c0)
    trace = EnergyTrace({"t": t, "r": r, "rdot": v, "plain_perimeter": p,
                         "adjusted_perimeter": a}
                        for t, r, v, p, a in zip(traj.t, traj.r, traj.rdot, plain, adjusted))
    m = np.abs(prof.x) <= corr.X_max + 1e-12
    corr_rows = [{"x": x, "phi": f, "psi": s, "dpsi": ds}
                 for x, f, s, ds in zip(corr.x, prof.phi[m], corr.psi, corr.dpsi)]
    summary = {
        "c0": c0, "profile_energy": prof.energy(),
        "corrector_c": corr.c, "corrector_X_max": corr.X_max,
        "orthogonality": inner, "orthogonality_scale": norms,
        "vanished": traj.vanished, "final_time": float(traj.t[-1]),
        "final_radius": float(traj.r[-1]), "diverged": False,
    }
    return ExperimentResult(cfg.kind, trace, summary, tables={"corrector.csv": corr_rows})


def _scalar_experiment(cfg):
    b, sc = cfg["backend"], cfg["scheme"]
    taus = [float(t) for t in str(sc["taus"]).split(",") if t.strip()]
    schemes = [Scheme(s.strip()) for s in str(sc["schemes"]).split(",") if s.strip()]
    results = scalar_scheme_compare(b["R"], sc["alpha"], taus, int(sc["steps"]),
                                    b["u0"], b["v0"], schemes)
    trace = EnergyTrace()
    flags = {}
    for (scheme, tau), res in results.items():
        for rec in res.trace.records:
            trace.append({"scheme": scheme.value, "tau": tau, "step": rec["step"],
                          "u": rec["u"], "energy": rec["discrete_energy"]})
        e = res.trace["discrete_energy"]
        flags[f"{scheme.value}@{tau:g}"] = {
            "diverged": res.diverged,
            "energy_increases": int(np.sum(np.diff(e[np.isfinite(e)]) > 0)),
            "final_energy": float(e[-1]),
        }
    summary = {"runs": flags, "diverged": any(f["diverged"] for f in flags.values())}
    return ExperimentResult(cfg.kind, trace, summary)


def run_experiment(cfg):
    kind = cfg.kind
    if kind.startswith("grid-"):
        return _grid_experiment(cfg)
    if kind.startswith("graph-"):
        return _graph_experiment(cfg)
    if kind == "ode-corrector":
        return _ode_experiment(cfg)
    if kind == "scalar-compare":
        return _scalar_experiment(cfg)
    raise ValueError(f"unknown experiment kind {kind!r}")


# ----------------------------------------------------------------------------
# sweeps

def sweep(cfg, parameter, values):
    """Step counts to convergence for each value of ``[scheme] parameter``.

    With the reference-distance rule the reference solution is computed once
    and shared by all entries. Non-converged entries are marked, not fatal.
    """
    rows = []
    values = list(values)
    if not values:
        return rows
    if not cfg.kind.startswith("grid-") or cfg.kind == "grid-circle-validate":
        raise ValueError("sweeps are supported for grid-curve and grid-minimal-surface")
    b = cfg["backend"]
    grid = PG.PeriodicGrid(int(b["dim"]), int(b["n"]))
    W = DoubleWell(float(b["R"]))
    backend = PG.GridBackend(grid, W, mean=_opt_float(b.get("mean")))
    u0 = grid_initial(cfg, grid, W)
    u_ref = None
    if cfg["stop"]["rule"] == "reference-distance":
        st = cfg["stop"]
        u_ref = reference_solution(u0, backend, float(b["eps"]), st["ref_tau"],
                                   st["delta_ref"], st["ref_max_steps"])
    for value in values:
        c = cfg.copy()
        c.set("scheme", parameter, value)
        if parameter == "tau" and c["scheme"]["scheme"] == "gd":
            c.set("scheme", "eta", "")
        params = scheme_params(c)
        steps, status, energy = convergence_run(u0, params, backend, int(c["scheme"]["steps"]),
                                                _stop_rule(c, backend, params.eps, u_ref),
                                                _truthy(c["scheme"].get("initial_gd_step", "no")))
        rows.append({"value": value, "steps": steps, "final_energy": energy,
                     "status": status})
    return rows


def convergence_run(u0, params, backend, max_steps, stop, initial_gd_step=False):
    """Steps until ``stop`` fires; a preliminary GD step of size tau^2 is counted."""
    state = SchemeState.at_rest(u0)
    extra = 0
    if initial_gd_step and params.scheme is not Scheme.GD:
        gd = SchemeParams(tau=params.tau ** 2, eta=params.tau ** 2, eps=params.eps, scheme="gd")
        state = gd_step(state, gd, backend)
        state = SchemeState(state.u, np.zeros_like(state.u))
        extra = 1
    res = run(state, params, backend, max_steps, record_every=0, stop=stop)
    energy = backend.gl_energy(res.state.u, params.eps)
    return res.steps + extra, res.status, energy
