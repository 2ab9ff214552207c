"""Command-line front end.

Commands: bode, hosidf (bode for harmonics >= 2), simulate, step, report,
fit-plant.  CSV files are the canonical output; SVG plots are optional
(--svg).  Every command writes a manifest.json capturing the resolved
configuration, seed and produced files, so a run can be reproduced
bit-identically.

Controller parameters may come from an INI config file (see --config);
explicit command-line flags override file values.
"""

from __future__ import annotations

import argparse
import configparser
import dataclasses
import json
import math
import os
import sys
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__, _svg, metrics, simulate
from .controllers import (
    CONTROLLER_NAMES,
    ControllerSpec,
    build,
    phase_margin,
    tune_gain_for_bandwidth,
)
from .errors import ResetLoopError, UnstableLoopError
from .harmonic_analysis import sweep
from .plant import PlantModel, default_stage, fit_second_order, load_frf
from .reset_system import ResetStateSpace, lift, make_clegg, make_fore, rseries

ELEMENT_NAMES = ("CI", "FORE")
SINE_FREQS_HZ = (0.5, 10.0, 20.0)


# ---------------------------------------------------------------------------
# output helpers

def _atomic_write(path: str, text: str):
    d = os.path.dirname(path) or "."
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", text=True)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class Manifest:
    def __init__(self, command: str, config: dict, seed: int | None):
        self.data = {
            "command": command,
            "tool_version": __version__,
            "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
            "seed": seed,
            "config": config,
            "outputs": [],
        }

    def add(self, path: str) -> str:
        self.data["outputs"].append(path)
        return path

    def write(self, out_dir: str):
        path = os.path.join(out_dir, "manifest.json")
        _atomic_write(path, json.dumps(self.data, indent=2, sort_keys=True) + "\n")


def _fmt(x: float) -> str:
    return f"{x:.17g}"


# ---------------------------------------------------------------------------
# config file / spec resolution

def _load_config(path: str | None) -> tuple[dict, dict[str, ControllerSpec]]:
    """Returns ([run] defaults, controller specs by section name)."""
    run: dict = {}
    specs: dict[str, ControllerSpec] = {}
    if path is None:
        return run, specs
    parser = configparser.ConfigParser()
    with open(path, "r", encoding="utf-8") as fh:
        parser.read_file(fh)
    if parser.has_section("run"):
        for key, val in parser.items("run"):
            run[key] = val
    float_fields = {
        f.name
        for f in dataclasses.fields(ControllerSpec)
        if f.name not in ("name", "structure")
    }
    for section in parser.sections():
        if not section.startswith("controller."):
            continue
        label = section.split(".", 1)[1]
        kwargs: dict = {"name": label if label in CONTROLLER_NAMES else "custom"}
        for key, val in parser.items(section):
            if key in ("name", "structure"):
                kwargs[key] = val
            elif key in float_fields:
                kwargs[key] = float(val)
            else:
                raise ResetLoopError(f"unknown controller field {key!r} in [{section}]")
        specs[label] = ControllerSpec(**kwargs)
    return run, specs


def _resolve_plant(arg: str) -> PlantModel | None:
    if arg == "default":
        return default_stage()
    if arg == "none":
        return None
    if arg.startswith("frf:"):
        records = load_frf(arg[4:])
        model, residual = fit_second_order(records)
        print(f"fitted plant from {arg[4:]} (residual {residual:.3g})")
        return model
    raise ResetLoopError(f"unknown plant source {arg!r} (default | none | frf:<path>)")


def _spec_for(name: str, specs: dict[str, ControllerSpec]) -> ControllerSpec:
    if name in specs:
        return specs[name]
    if name in CONTROLLER_NAMES:
        return ControllerSpec(name=name)
    raise ResetLoopError(
        f"unknown controller {name!r}; valid: "
        + ", ".join(CONTROLLER_NAMES + ELEMENT_NAMES)
        + ", or a [controller.<name>] config section"
    )


def _build_system(
    name: str,
    specs: dict[str, ControllerSpec],
    plant: PlantModel | None,
    bandwidth_hz: float,
    tune: bool,
) -> ResetStateSpace:
    """Build a controller (gain-tuned against the plant) or a bare element."""
    if name in ELEMENT_NAMES:
        return make_clegg(1.0) if name == "CI" else make_fore(1.0)
    ctrl = build(_spec_for(name, specs))
    if plant is not None and tune:
        k = tune_gain_for_bandwidth(ctrl, plant, 2.0 * math.pi * bandwidth_hz)
        ctrl = ctrl.scaled(k)
    return ctrl


# ---------------------------------------------------------------------------
# bode / hosidf

def _cmd_bode(args) -> int:
    run_cfg, specs = _load_config(args.config)
    out_dir = args.out
    plant = _resolve_plant(args.plant)
    harmonics = [int(h) for h in args.harmonics.split(",")]
    if args.response == "sensitivity" and harmonics != [1]:
        raise ResetLoopError("sensitivity response is defined for harmonic 1 only")
    names = args.controllers.split(",")
    manifest = Manifest(
        "hosidf" if args.min_harmonic >= 2 else "bode",
        {
            "controllers": names,
            "harmonics": harmonics,
            "plant": args.plant,
            "omega_min": args.omega_min,
            "omega_max": args.omega_max,
            "points": args.points,
            "response": args.response,
            "bandwidth_hz": args.bandwidth_hz,
            "tune": not args.no_tune,
        },
        None,
    )
    if any(h < args.min_harmonic for h in harmonics):
        raise ResetLoopError(
            f"this command requires harmonics >= {args.min_harmonic}"
        )
    svg_curves: dict[int, dict[str, tuple[list, list]]] = {h: {} for h in harmonics}
    for name in names:
        ctrl = _build_system(name, specs, plant, args.bandwidth_hz, not args.no_tune)
        sys_full = ctrl if plant is None else rseries(ctrl, lift(plant.to_state_space()))
        resp = sweep(sys_full, args.omega_min, args.omega_max, args.points, harmonics)
        for h in harmonics:
            vals = resp.values[h]
            if args.response == "sensitivity":
                vals = 1.0 / (1.0 + vals)
            lines = ["omega_rad_s,mag_db,phase_deg"]
            with np.errstate(divide="ignore"):
                mags = 20.0 * np.log10(np.abs(vals))
            phases = np.degrees(np.angle(vals))
            for w, m, p in zip(resp.omega, mags, phases):
                lines.append(f"{_fmt(w)},{_fmt(m)},{_fmt(p)}")
            path = os.path.join(out_dir, f"bode_{name}_h{h}.csv")
            _atomic_write(path, "\n".join(lines) + "\n")
            manifest.add(path)
            svg_curves[h][name] = (list(resp.omega), list(mags))
            print(f"wrote {path}")
    if args.svg:
        for h in harmonics:
            path = os.path.join(out_dir, f"bode_h{h}.svg")
            _atomic_write(
                path,
                _svg.line_plot_svg(
                    svg_curves[h],
                    f"harmonic {h} magnitude",
                    "omega [rad/s] (log)",
                    "magnitude [dB]",
                ),
            )
            manifest.add(path)
            print(f"wrote {path}")
    manifest.write(out_dir)
    return 0


# ---------------------------------------------------------------------------
# simulate / step

def _scenario_config(args) -> simulate.SimConfig:
    sig = simulate.SignalSpec(
        kind=args.signal,
        freq=args.freq,
        band=(args.band_lo, args.band_hi),
        amplitude=args.amplitude,
        seed=args.seed,
    )
    return simulate.SimConfig(
        fs=args.fs,
        duration=args.duration,
        mode=args.mode,
        signal=sig,
        transient_discard=min(args.discard, args.duration / 2),
    )


def _write_run_outputs(out_dir, name, trace, ctrl, manifest) -> dict:
    import io

    buf = io.StringIO()
    simulate.write_trace_csv(trace, buf)
    path = os.path.join(out_dir, f"trace_{name}.csv")
    _atomic_write(path, buf.getvalue())
    manifest.add(path)

    buf = io.StringIO()
    resetting = [i for i, f in enumerate(ctrl.reset_flags) if f]
    simulate.write_events_csv(trace, resetting, buf)
    path = os.path.join(out_dir, f"events_{name}.csv")
    _atomic_write(path, buf.getvalue())
    manifest.add(path)

    rms, mx = metrics.rms_max(trace)
    return {"rms": rms, "max_abs": mx}


def _cmd_simulate(args) -> int:
    run_cfg, specs = _load_config(args.config)
    out_dir = args.out
    plant = _resolve_plant(args.plant)
    if plant is None:
        raise ResetLoopError("simulate requires a plant (default or frf:<path>)")
    if args.command == "step":
        args.mode = "step"
        args.signal = "step"
    cfg = _scenario_config(args)
    manifest = Manifest(
        args.command,
        {
            "controller": args.controller,
            "plant": args.plant,
            "mode": cfg.mode,
            "signal": dataclasses.asdict(cfg.signal),
            "fs": cfg.fs,
            "duration": cfg.duration,
            "transient_discard": cfg.transient_discard,
            "bandwidth_hz": args.bandwidth_hz,
            "tune": not args.no_tune,
        },
        args.seed,
    )
    ctrl = _build_system(args.controller, specs, plant, args.bandwidth_hz, not args.no_tune)
    try:
        trace = simulate.run(ctrl, plant, cfg)
    except UnstableLoopError as exc:
        print(f"refusing to run: {exc}", file=sys.stderr)
        try:
            pm = phase_margin(ctrl, plant)
            print(f"diagnostic: phase margin {pm:.2f} deg", file=sys.stderr)
        except ResetLoopError as diag:
            print(f"diagnostic: {diag}", file=sys.stderr)
        return 1
    cells = _write_run_outputs(out_dir, args.controller, trace, ctrl, manifest)
    lines = ["controller,scenario,freq_hz,rms,max_abs"]
    freq = cfg.signal.freq if cfg.signal.kind == "sine" else float("nan")
    lines.append(
        f"{args.controller},{cfg.mode},{_fmt(freq)},{_fmt(cells['rms'])},{_fmt(cells['max_abs'])}"
    )
    if cfg.mode == "step":
        ov, st = metrics.step_metrics(trace)
        lines.append(f"# overshoot_pct={_fmt(ov)} settling_s={_fmt(st)}")
        print(f"overshoot {ov:.2f}% settling {st:.4f} s")
    path = os.path.join(out_dir, f"metrics_{args.controller}.csv")
    _atomic_write(path, "\n".join(lines) + "\n")
    manifest.add(path)
    if cfg.signal.kind == "bandnoise":
        f, cp = metrics.cpsd(trace)
        body = "freq_hz,cumulative_power\n" + "\n".join(
            f"{_fmt(a)},{_fmt(b)}" for a, b in zip(f, cp)
        )
        path = os.path.join(out_dir, f"cpsd_{args.controller}_{cfg.mode}.csv")
        _atomic_write(path, body + "\n")
        manifest.add(path)
    print(f"rms {cells['rms']:.6g}  max {cells['max_abs']:.6g}")
    manifest.write(out_dir)
    return 0


# ---------------------------------------------------------------------------
# report

def _report_runs(controllers, plant, args):
    """(kind, controller, scenario) -> callable producing that sub-result."""
    jobs = []
    for name in controllers:
        for mode in ("reference", "disturbance"):
            for f_hz in SINE_FREQS_HZ:
                jobs.append((name, mode, f_hz, "sine"))
            jobs.append((name, mode, None, "bandnoise"))
        jobs.append((name, "step", None, "step"))
    return jobs


def _cmd_report(args) -> int:
    run_cfg, specs = _load_config(args.config)
    out_dir = args.out
    plant = _resolve_plant(args.plant)
    if plant is None:
        raise ResetLoopError("report requires a plant (default or frf:<path>)")
    controllers = (
        list(CONTROLLER_NAMES)
        if args.controllers == "all"
        else args.controllers.split(",")
    )
    manifest = Manifest(
        "report",
        {
            "controllers": controllers,
            "plant": args.plant,
            "fs": args.fs,
            "duration": args.duration,
            "amplitude": args.amplitude,
            "band": [args.band_lo, args.band_hi],
            "bandwidth_hz": args.bandwidth_hz,
            "check": args.check,
        },
        args.seed,
    )
    built = {}
    for name in controllers:
        built[name] = _build_system(name, specs, plant, args.bandwidth_hz, True)

    results: dict[tuple, dict] = {}
    failures: list[str] = []

    def one(job):
        name, mode, f_hz, kind = job
        ctrl = built[name]
        try:
            if kind == "step":
                trace = simulate.step_response(
                    ctrl, plant, args.amplitude, args.fs, args.step_duration
                )
                ov, st = metrics.step_metrics(trace)
                return job, {"overshoot": ov, "settling": st}
            sig = simulate.SignalSpec(
                kind=kind,
                freq=f_hz if f_hz else 10.0,
                band=(args.band_lo, args.band_hi),
                amplitude=args.amplitude,
                seed=args.seed,
            )
            cfg = simulate.SimConfig(
                fs=args.fs,
                duration=args.duration,
                mode=mode,
                signal=sig,
                transient_discard=min(args.discard, args.duration / 2),
            )
            trace = simulate.run(ctrl, plant, cfg)
            rms, mx = metrics.rms_max(trace)
            out = {"rms": rms, "max_abs": mx}
            if kind == "bandnoise":
                f, cp = metrics.cpsd(trace)
                body = "freq_hz,cumulative_power\n" + "\n".join(
                    f"{_fmt(a)},{_fmt(b)}" for a, b in zip(f, cp)
                )
                path = os.path.join(out_dir, f"cpsd_{name}_{mode}.csv")
                _atomic_write(path, body + "\n")
                out["cpsd_path"] = path
            return job, out
        except ResetLoopError as exc:
            return job, {"error": f"{type(exc).__name__}: {exc}"}

    jobs = _report_runs(controllers, plant, args)
    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            for job, res in pool.map(one, jobs):
                results[job] = res
    else:
        for job in jobs:
            j, res = one(job)
            results[j] = res

    # long-format metrics
    lines = ["controller,scenario,freq_hz,rms,max_abs"]
    for (name, mode, f_hz, kind), res in sorted(
        results.items(), key=lambda kv: str(kv[0])
    ):
        if kind != "sine":
            continue
        if "error" in res:
            lines.append(f"{name},{mode},{_fmt(f_hz)},FAILED,FAILED")
            failures.append(f"{name}/{mode}/{f_hz} Hz: {res['error']}")
        else:
            lines.append(
                f"{name},{mode},{_fmt(f_hz)},{_fmt(res['rms'])},{_fmt(res['max_abs'])}"
            )
    path = os.path.join(out_dir, "metrics.csv")
    _atomic_write(path, "\n".join(lines) + "\n")
    manifest.add(path)

    # Table-1-style matrix: one row per controller
    cols = []
    for mode_label, mode in (("ref", "reference"), ("dist", "disturbance")):
        for f_hz in SINE_FREQS_HZ:
            cols.append((mode_label, mode, f_hz))
    header = ["controller"]
    for mode_label, _, f_hz in cols:
        header.append(f"{mode_label}_{f_hz:g}Hz_rms")
        header.append(f"{mode_label}_{f_hz:g}Hz_max")
    lines = [",".join(header)]
    for name in controllers:
        row = [name]
        for _, mode, f_hz in cols:
            res = results.get((name, mode, f_hz, "sine"), {})
            if "error" in res or not res:
                row += ["FAILED", "FAILED"]
            else:
                row += [_fmt(res["rms"]), _fmt(res["max_abs"])]
        lines.append(",".join(row))
    path = os.path.join(out_dir, "table.csv")
    _atomic_write(path, "\n".join(lines) + "\n")
    manifest.add(path)

    lines = ["controller,overshoot_pct,settling_s"]
    for name in controllers:
        res = results.get((name, "step", None, "step"), {})
        if "error" in res or not res:
            lines.append(f"{name},FAILED,FAILED")
            failures.append(f"{name}/step: {res.get('error', 'missing')}")
        else:
            lines.append(f"{name},{_fmt(res['overshoot'])},{_fmt(res['settling'])}")
    path = os.path.join(out_dir, "steps.csv")
    _atomic_write(path, "\n".join(lines) + "\n")
    manifest.add(path)

    for res in results.values():
        if "cpsd_path" in res:
            manifest.add(res["cpsd_path"])

    exit_code = 0
    if failures:
        print(f"{len(failures)} sub-run(s) failed:", file=sys.stderr)
        for f in failures:
            print(f"  {f}", file=sys.stderr)
        exit_code = 1

    if args.check and not failures:
        checks = _trend_checks(results, controllers)
        for label, ok, detail in checks:
            print(f"[{'PASS' if ok else 'FAIL'}] {label}: {detail}")
        if not all(ok for _, ok, _ in checks):
            exit_code = 1
    manifest.write(out_dir)
    print(f"report written to {out_dir}")
    return exit_code


def _trend_checks(results, controllers):
    """Orderings that the benchmark experiment is expected to reproduce."""

    def rms(name, mode, f_hz):
        return results[(name, mode, f_hz, "sine")]["rms"]

    def mx(name, mode, f_hz):
        return results[(name, mode, f_hz, "sine")]["max_abs"]

    checks = []
    ok = all(rms("PI2D", "disturbance", f) < rms("PID", "disturbance", f)
             for f in SINE_FREQS_HZ)
    checks.append((
        "PI2D < PID disturbance rms at 0.5/10/20 Hz", ok,
        "; ".join(f"{f:g} Hz: {rms('PI2D', 'disturbance', f):.4g} vs "
                  f"{rms('PID', 'disturbance', f):.4g}" for f in SINE_FREQS_HZ),
    ))
    a, b = mx("PICID", "disturbance", 10.0), mx("PI2D", "disturbance", 10.0)
    checks.append(("PICID max > PI2D max at 10 Hz disturbance", a > b,
                   f"{a:.4g} vs {b:.4g}"))
    ref20 = {n: rms(n, "reference", 20.0) for n in controllers}
    winner = min(ref20, key=ref20.get)
    checks.append(("CGLP_PI2D minimum rms at 20 Hz reference", winner == "CGLP_PI2D",
                   f"minimum is {winner} ({ref20[winner]:.6g})"))
    near = []
    for n in ("C_IbLPF", "C_LPF", "C_HPF"):
        for mode in ("reference", "disturbance"):
            for f in SINE_FREQS_HZ:
                rel = abs(rms(n, mode, f) / rms("PI2D", mode, f) - 1.0)
                near.append(rel)
    checks.append(("C_IbLPF/C_LPF/C_HPF rms within 2% of PI2D", max(near) < 0.02,
                   f"max deviation {max(near) * 100:.3f}%"))
    ov_c = results[("CGLP_PI2D", "step", None, "step")]["overshoot"]
    ov_p = results[("PI2D", "step", None, "step")]["overshoot"]
    checks.append(("CGLP_PI2D overshoot < PI2D", ov_c < ov_p,
                   f"{ov_c:.2f}% vs {ov_p:.2f}%"))
    return checks


# ---------------------------------------------------------------------------
# fit-plant

def _cmd_fit_plant(args) -> int:
    records = load_frf(args.frf)
    model, residual = fit_second_order(records)
    manifest = Manifest("fit-plant", {"frf": args.frf}, None)
    out = {
        "form": model.form,
        "m": model.m,
        "c": model.c,
        "k": model.k,
        "gain": model.gain,
        "residual": residual,
    }
    path = os.path.join(args.out, "fitted_plant.json")
    _atomic_write(path, json.dumps(out, indent=2) + "\n")
    manifest.add(path)
    manifest.write(args.out)
    print(json.dumps(out, indent=2))
    return 0


# ---------------------------------------------------------------------------
# argument parsing

def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--plant", default="default",
                   help="default | none | frf:<path> (default: %(default)s)")
    p.add_argument("--fs", type=float, default=10_000.0, help="sample rate, Hz")
    p.add_argument("--duration", type=float, default=60.0, help="run length, s")
    p.add_argument("--seed", type=int, default=0, help="noise seed")
    p.add_argument("--out", default=None, help="output directory "
                   "(default: $RESETLOOP_OUT or ./resetloop-out)")
    p.add_argument("--svg", action="store_true", help="also write SVG plots")
    p.add_argument("--jobs", type=int, default=1, help="concurrent sub-runs")
    p.add_argument("--check", action="store_true",
                   help="assert the expected benchmark orderings")
    p.add_argument("--config", default=None, help="INI config file")
    p.add_argument("--bandwidth-hz", dest="bandwidth_hz", type=float, default=150.0,
                   help="gain-tuning crossover (default: %(default)s Hz)")
    p.add_argument("--no-tune", action="store_true",
                   help="skip gain tuning against the plant")
    p.add_argument("--discard", type=float, default=5.0,
                   help="transient discard before metrics, s")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="resetloop",
        description="Reset-control frequency analysis and closed-loop simulation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    for cmd, min_h, default_h in (("bode", 1, "1"), ("hosidf", 2, "3")):
        p = sub.add_parser(cmd, help=f"harmonic frequency responses (n >= {min_h})")
        p.add_argument("--controllers", required=True,
                       help="comma list of " + ",".join(CONTROLLER_NAMES + ELEMENT_NAMES))
        p.add_argument("--harmonics", default=default_h, help="comma list of orders")
        p.add_argument("--omega-min", type=float, default=0.1)
        p.add_argument("--omega-max", type=float, default=1000.0)
        p.add_argument("--points", type=int, default=200)
        p.add_argument("--response", choices=("open-loop", "sensitivity"),
                       default="open-loop")
        _add_common(p)
        p.set_defaults(func=_cmd_bode, min_harmonic=min_h)

    for cmd in ("simulate", "step"):
        p = sub.add_parser(cmd, help="closed-loop run" if cmd == "simulate"
                           else "closed-loop reference step")
        p.add_argument("--controller", required=True)
        if cmd == "simulate":
            p.add_argument("--mode", choices=("disturbance", "reference", "step"),
                           default="disturbance")
            p.add_argument("--signal", choices=("sine", "bandnoise", "step"),
                           default="sine")
            p.add_argument("--freq", type=float, default=10.0, help="sine freq, Hz")
        p.add_argument("--amplitude", type=float, default=1.0)
        p.add_argument("--band-lo", type=float, default=0.5)
        p.add_argument("--band-hi", type=float, default=30.0)
        _add_common(p)
        if cmd == "step":
            p.set_defaults(duration=2.0, discard=0.0, mode="step", signal="step",
                           freq=10.0)
        p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("report", help="full benchmark matrix over all controllers")
    p.add_argument("--controllers", default="all")
    p.add_argument("--amplitude", type=float, default=1.0)
    p.add_argument("--band-lo", type=float, default=0.5)
    p.add_argument("--band-hi", type=float, default=30.0)
    p.add_argument("--step-duration", type=float, default=2.0)
    _add_common(p)
    p.set_defaults(func=_cmd_report)

    p = sub.add_parser("fit-plant", help="fit a second-order model to FRF data")
    p.add_argument("--frf", required=True, help="FRF CSV path")
    _add_common(p)
    p.set_defaults(func=_cmd_fit_plant)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.out is None:
        args.out = os.environ.get("RESETLOOP_OUT", "resetloop-out")
    try:
        return args.func(args)
    except ResetLoopError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
