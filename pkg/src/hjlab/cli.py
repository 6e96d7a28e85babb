"""Command-line front end: reproducible runs, analyses and certificates.

Exit codes: 0 success, 1 domain error (bad arguments/preconditions),
2 numerical failure (CFL, non-convergence).  Commands emit tidy JSON/CSV
for post-processing, never plots; floating-point output is rounded to 12
significant digits so reruns of a manifest are byte-identical.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from . import __version__
from .grids import Grid, GridFunction
from .steady import make_params, steady_U, steady_U_a
from .spectral import WeightedSpace, eigenpoly, positive_zeros, gram_matrix
from .kernel import KernelParams, apply_semigroup, check_normalization
from .solver import (
    NumericalFailure,
    SolverConfig,
    build_gbu_data,
    build_rbc_data,
    detect_rbc_time,
    solve_classical,
    solve_singular,
    solve_truncated,
)
from .zeros import track_intersections, vanishing_count
from .rates import bubble_profile_check, fit_power_law, rbc_profile_check
from . import braid as braid_mod


def _round_sig(x, digits=12):
    if isinstance(x, dict):
        return {k: _round_sig(v, digits) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_round_sig(v, digits) for v in x]
    if isinstance(x, np.ndarray):
        return [_round_sig(float(v), digits) for v in x.tolist()]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        if x == 0 or not math.isfinite(x):
            return x
        return float(f"{x:.{digits - 1}e}")
    if isinstance(x, (np.integer,)):
        return int(x)
    return x


def emit_json(payload: dict, out: str | None):
    text = json.dumps(_round_sig(payload), indent=2, sort_keys=True)
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


@dataclass
class ExperimentManifest:
    experiment_id: str
    command: str
    config_path: str | None
    inputs: dict = field(default_factory=dict)
    outputs: list = field(default_factory=list)
    version: str = __version__
    seeds: dict = field(default_factory=dict)

    @staticmethod
    def create(command: str, config_path: str | None, payload: dict) -> "ExperimentManifest":
        blob = json.dumps({"cmd": command, "cfg": payload, "v": __version__},
                          sort_keys=True).encode()
        return ExperimentManifest(
            experiment_id=hashlib.sha256(blob).hexdigest()[:16],
            command=command, config_path=config_path, inputs=payload)

    def write(self, outdir: Path):
        outdir.mkdir(parents=True, exist_ok=True)
        path = outdir / "manifest.json"
        emit_json(self.__dict__, str(path))
        return path


def load_config(path: str) -> dict:
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def _grid_from_config(gc: dict) -> Grid:
    R = float(gc.get("R", 1.0))
    kind = gc.get("kind", "graded")
    if kind == "uniform":
        return Grid.uniform(R, int(gc.get("n", 401)))
    return Grid.graded(R, h_min=float(gc.get("h_min", 1e-5 * R)),
                       ratio=float(gc.get("ratio", 0.97)))


def _solver_config(cfg: dict, params, grid) -> SolverConfig:
    st = cfg.get("stepping", {})
    stop = cfg.get("stop", {})
    out = cfg.get("output", {})
    return SolverConfig(
        params=params, grid=grid,
        mode=st.get("mode", "imex"),
        dt_init=float(st.get("dt_init", 1e-7)),
        dt_safety=float(st.get("dt_safety", 0.5)),
        adaptive=bool(st.get("adaptive", True)),
        rel_change_target=float(st.get("rel_change_target", 0.01)),
        newton_sweeps=int(st.get("newton_sweeps", 1)),
        t_end=stop.get("t_end"),
        gradient_threshold=stop.get("gradient_threshold"),
        snapshot_times=tuple(out.get("snapshot_times", ())),
        snapshot_factor=out.get("snapshot_factor"),
        stop_on_vanish_below=stop.get("vanish_below"),
        stop_after_crossing=stop.get("after_crossing"),
    )


def _stamp_line(manifest: ExperimentManifest, params) -> str:
    return f"# manifest={manifest.experiment_id} p={_round_sig(params.p)}"


def read_csv(path) -> np.ndarray:
    """Read a two-plus-column CSV, skipping '#' stamps and the header row."""
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            first = line.split(",")[0]
            try:
                float(first)
            except ValueError:
                continue  # header
            rows.append([float(v) for v in line.split(",")])
    return np.asarray(rows)


def _write_run_outputs(result, outdir: Path, manifest: ExperimentManifest, params):
    outdir.mkdir(parents=True, exist_ok=True)
    stamp = {"manifest": manifest.experiment_id, "p": params.p}
    for snap in result.snapshots:
        name = outdir / f"t={_round_sig(snap.t)}.csv"
        with open(name, "w", newline="") as fh:
            fh.write(_stamp_line(manifest, params) + "\n")
            w = csv.writer(fh)
            w.writerow(["x", "u"])
            for x, u in zip(snap.x, snap.values):
                w.writerow([_round_sig(float(x)), _round_sig(float(u))])
        manifest.outputs.append(name.name)
    for label, series in (("boundary", result.boundary),
                          ("m_raw", result.m_raw),
                          ("m_bubble", result.m_bubble)):
        name = outdir / f"trace_{label}.csv"
        with open(name, "w", newline="") as fh:
            fh.write(_stamp_line(manifest, params) + "\n")
            w = csv.writer(fh)
            w.writerow(["t", "value"])
            for t, v in zip(result.t, series):
                w.writerow([_round_sig(float(t)), _round_sig(float(v))])
        manifest.outputs.append(name.name)
    with open(outdir / "events.jsonl", "w") as fh:
        for ev in result.events:
            fh.write(json.dumps(_round_sig({**ev, **stamp}), sort_keys=True) + "\n")
    manifest.outputs.append("events.jsonl")
    manifest.write(outdir)


# --- subcommand handlers ----------------------------------------------------


def cmd_steady(args):
    params = make_params(args.p)
    xs = np.asarray(args.x if args.x else [0.0, 0.5, 1.0, 2.0])
    payload = {
        "params": params.__dict__,
        "U": {str(x): steady_U(params, x) for x in xs},
    }
    if args.a is not None:
        payload["U_a"] = {str(x): steady_U_a(params, args.a, x) for x in xs}
    emit_json(payload, args.out)
    return 0


def cmd_spectrum(args):
    params = make_params(args.p)
    sp = WeightedSpace(params.alpha)
    modes = []
    for j in range(args.jmax + 1):
        ph = eigenpoly(j, sp, params)
        modes.append({
            "j": j,
            "lambda": ph.lam,
            "coeffs": list(ph.coeffs),
            "b0": ph.b0,
            "zeros": list(positive_zeros(ph)),
        })
    G = gram_matrix(args.jmax, sp, params)
    payload = {
        "p": params.p, "alpha": params.alpha, "k": params.k,
        "modes": modes,
        "gram_max_deviation": float(np.max(np.abs(G - np.eye(args.jmax + 1)))),
    }
    emit_json(payload, args.out)
    return 0


def cmd_kernel(args):
    if args.p is not None:
        params = make_params(args.p)
        alpha = params.alpha
    else:
        alpha = args.alpha
        if alpha is None:
            raise ValueError("kernel needs --alpha or --p")
        p = 1.0 / (alpha - 1.0) + 1.0  # alpha = p/(p-1) inverted
        params = make_params(p)
    kp = KernelParams.for_alpha(alpha)
    payload = {"alpha": alpha, "C_alpha": kp.C_alpha}
    if args.check_normalization:
        grid_t = [0.1, 0.5, 1.0, 2.0, 5.0]
        grid_x = [0.0, 1.0, 3.0, 6.0, 10.0]
        table = {}
        for t in grid_t:
            for x in grid_x:
                table[f"t={t},x={x}"] = check_normalization(t, x, kp)
        payload["normalization"] = table
    if args.eigen_test:
        j, s = int(args.eigen_test[0]), float(args.eigen_test[1])
        sp = WeightedSpace(alpha)
        phi = eigenpoly(j, sp, params)
        y = Grid(np.linspace(0, 6, 25))
        W = apply_semigroup(s, phi, kp, params, y, growth=(2 * j, 0.0))
        expected = math.exp(-phi.lam * s) * phi(y.nodes)
        payload["eigen_test"] = {
            "j": j, "s": s,
            "rel_sup_error": float(np.max(np.abs(W.values - expected))
                                   / np.max(np.abs(expected))),
        }
    emit_json(payload, args.out)
    return 0


def cmd_solve(args, singular=False):
    cfg_dict = load_config(args.config)
    params = make_params(float(cfg_dict["params"]["p"]))
    grid = _grid_from_config(cfg_dict.get("grid", {}))
    scfg = _solver_config(cfg_dict, params, grid)
    manifest = ExperimentManifest.create(
        "solve-singular" if singular else "solve", args.config, cfg_dict)
    data = cfg_dict.get("data", {})
    kind = data.get("kind", "rbc-seed" if singular else "gbu-seed")
    if singular:
        if kind != "rbc-seed":
            raise ValueError(f"unsupported singular data kind {kind!r}")
        seed = build_rbc_data(int(data.get("ell", 1)), float(data.get("eps", 0.1)),
                              float(data.get("s0", 6.0)), None, params,
                              R=grid.R, grid=grid)
        result = solve_singular(seed, scfg, a=float(data.get("a", 1e-4)))
        tau = detect_rbc_time(result)
        if tau is not None:
            result.events.append({"type": "rbc_time", "t": tau})
    else:
        if kind == "gbu-seed":
            u0 = build_gbu_data(int(data.get("ell", 1)), float(data.get("eps", 0.1)),
                                float(data.get("s0", 1.9)), None, params,
                                R=grid.R, grid=grid)
        elif kind == "sine":
            amp = float(data.get("amplitude", 1.0))
            u0 = GridFunction(grid, amp * np.sin(np.pi * grid.nodes / grid.R))
        else:
            raise ValueError(f"unknown data kind {kind!r}")
        M = cfg_dict.get("stepping", {}).get("truncation")
        if M is not None:
            result = solve_truncated(u0, scfg, M=float(M))
        else:
            result = solve_classical(u0, scfg)
    _write_run_outputs(result, Path(args.outdir), manifest, params)
    print(f"wrote {len(result.snapshots)} snapshots to {args.outdir} "
          f"(manifest {manifest.experiment_id})")
    return 0


def cmd_zeros(args):
    params = make_params(args.p)
    files = sorted(Path(args.snapshots).glob("t=*.csv"),
                   key=lambda p: float(p.stem.split("=")[1]))
    if not files:
        raise ValueError(f"no snapshot files under {args.snapshots}")
    snaps = []
    grid = None
    for f in files:
        rows = read_csv(f)
        if grid is None:
            grid = Grid(rows[:, 0])
        snaps.append(GridFunction(grid, rows[:, 1], t=float(f.stem.split("=")[1])))
    ref = steady_U(params, grid.nodes) if args.against_steady else None
    tracks = track_intersections(snaps, reference=ref)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["label", "t", "x"])
        for tr in tracks:
            for t, x in zip(tr.times, tr.positions):
                w.writerow([tr.label, _round_sig(t), _round_sig(x)])
    summary = {
        "tracks": [{"label": tr.label, "event": tr.event,
                    "event_time": tr.event_time,
                    "collapsed_with": list(tr.collapsed_with)} for tr in tracks],
    }
    if args.t_est is not None:
        summary["n_vanishing"] = vanishing_count(
            tracks, T_est=args.t_est, window=args.window or args.t_est,
            vanish_threshold=args.vanish_threshold, warn=None)
    emit_json(summary, args.events)
    return 0


def cmd_rate_fit(args):
    rows = read_csv(args.trace)
    t, v = rows[:, 0], rows[:, 1]
    keep = v > 0
    fit = fit_power_law(t[keep], v[keep], singular_time=args.singular_time)
    emit_json({
        "exponent": fit.exponent, "L": fit.L, "T_or_tau": fit.T_or_tau,
        "r_squared": fit.r_squared, "window": list(fit.window),
        "n_points": fit.n_points, "T_was_fitted": fit.T_was_fitted,
    }, args.out)
    return 0


def cmd_profile_check(args):
    params = make_params(args.p)
    if args.mode == "bubble":
        rows = read_csv(args.snapshot)
        x, u = rows[:, 0], rows[:, 1]
        ux = np.gradient(u, x)
        rep = bubble_profile_check(x, ux, args.m, params,
                                   x_window=args.x_window, x_floor=args.x_floor)
        header = ["m", "a", "C", "sup_deviation", "n_points"]
        table = [[args.m, rep["a"], rep["C"], rep["sup_deviation"], rep["n_points"]]]
    else:
        files = sorted(Path(args.snapshot).glob("t=*.csv"),
                       key=lambda p: float(p.stem.split("=")[1]))
        snaps = []
        grid = None
        for f in files:
            rows = read_csv(f)
            if grid is None:
                grid = Grid(rows[:, 0])
            snaps.append(GridFunction(grid, rows[:, 1],
                                      t=float(f.stem.split("=")[1])))
        rep = rbc_profile_check(snaps, args.tau, args.n, params)
        header = ["t", "L", "misfit"]
        table = [[t, L, mis] for t, L, mis in
                 zip(rep["times"], rep["L_per_snapshot"], rep["misfits"])]
    lines = [",".join(header)]
    for row in table:
        lines.append(",".join(str(_round_sig(float(v))) for v in row))
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        print(text, end="")
    return 0


def cmd_braid(args):
    if args.braid_cmd == "equiv":
        ok = braid_mod.equiv(args.w1, args.w2)
        emit_json({"w1": args.w1, "w2": args.w2, "equivalent": ok}, args.out)
        return 0
    if args.braid_cmd == "reduce":
        cert = braid_mod.reduce_reachable(args.A, args.B)
        emit_json(cert.to_dict(), args.out)
        return 0
    if args.braid_cmd == "verify":
        report = braid_mod.verify_identities()
        certs = braid_mod.verify_nonreductions(n_max=args.nmax)
        emit_json({
            "identities_checked": report["checked"],
            "identity_failures": report["failures"],
            "nonreductions": [
                {"family": fam, "n": n, "verdict": c.verdict, "mechanism": c.mechanism}
                for fam, n, c in certs
            ],
        }, args.out)
        return 0
    if args.braid_cmd == "encode":
        rows = np.loadtxt(args.curves, delimiter=",", skiprows=1)
        x = rows[:, 0]
        curves = [(x, rows[:, i]) for i in (1, 2, 3)]
        word = braid_mod.encode(curves)
        emit_json({"word": word or "I",
                   "generator_order": dict(braid_mod.GENERATOR_ORDER)}, args.out)
        return 0
    raise ValueError(f"unknown braid subcommand {args.braid_cmd!r}")


def cmd_reproduce(args):
    if args.what != "acceptance":
        raise ValueError("only 'reproduce acceptance' is wired up")
    import subprocess
    test = Path(__file__).resolve().parents[2] / "tests" / "test_acceptance.py"
    cmd = [sys.executable, "-m", "pytest", str(test), "-v", "-s"]
    return subprocess.call(cmd)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hjlab", description=__doc__)
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("steady", help="model constants and steady states")
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--a", type=float)
    p.add_argument("--x", type=float, nargs="*")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_steady)

    p = sub.add_parser("spectrum", help="eigenpolynomials of the linearized operator")
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--jmax", type=int, default=5)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_spectrum)

    p = sub.add_parser("kernel", help="heat-kernel diagnostics")
    p.add_argument("--alpha", type=float)
    p.add_argument("--p", type=float)
    p.add_argument("--check-normalization", action="store_true")
    p.add_argument("--eigen-test", nargs=2, metavar=("J", "S"))
    p.add_argument("--out")
    p.set_defaults(fn=cmd_kernel)

    p = sub.add_parser("solve", help="Dirichlet run from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--outdir", required=True)
    p.set_defaults(fn=cmd_solve)

    p = sub.add_parser("solve-singular", help="singular-data run (z = u - U)")
    p.add_argument("--config", required=True)
    p.add_argument("--outdir", required=True)
    p.set_defaults(fn=lambda a: cmd_solve(a, singular=True))

    p = sub.add_parser("zeros", help="track intersections across snapshots")
    p.add_argument("--snapshots", required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--against-steady", action="store_true")
    p.add_argument("--t-est", type=float)
    p.add_argument("--window", type=float)
    p.add_argument("--vanish-threshold", type=float)
    p.add_argument("--out", required=True)
    p.add_argument("--events")
    p.set_defaults(fn=cmd_zeros)

    p = sub.add_parser("rate-fit", help="power-law fit of a trace csv")
    p.add_argument("--trace", required=True)
    p.add_argument("--singular-time", type=float)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_rate_fit)

    p = sub.add_parser("profile-check", help="bubble / recovery profile misfit")
    p.add_argument("--mode", choices=["bubble", "rbc"], required=True)
    p.add_argument("--snapshot", required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--m", type=float, help="wall gradient (bubble mode)")
    p.add_argument("--x-window", type=float, default=0.05)
    p.add_argument("--x-floor", type=float, default=5e-3)
    p.add_argument("--tau", type=float, help="recovery time (rbc mode)")
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_profile_check)

    p = sub.add_parser("braid", help="positive-braid engine")
    bsub = p.add_subparsers(dest="braid_cmd", required=True)
    b = bsub.add_parser("equiv")
    b.add_argument("w1")
    b.add_argument("w2")
    b.add_argument("--out")
    b = bsub.add_parser("reduce")
    b.add_argument("A")
    b.add_argument("B")
    b.add_argument("--out")
    b = bsub.add_parser("verify")
    b.add_argument("--nmax", type=int, default=5)
    b.add_argument("--out")
    b = bsub.add_parser("encode")
    b.add_argument("curves")
    b.add_argument("--out")
    p.set_defaults(fn=cmd_braid)

    p = sub.add_parser("reproduce", help="rerun the acceptance suite")
    p.add_argument("what", choices=["acceptance"])
    p.set_defaults(fn=cmd_reproduce)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ValueError, FileNotFoundError, KeyError) as exc:
        print(json.dumps({"error": str(exc), "kind": "domain"}), file=sys.stderr)
        return 1
    except (NumericalFailure, RuntimeError, ArithmeticError) as exc:
        print(json.dumps({"error": str(exc), "kind": "numerical"}), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
