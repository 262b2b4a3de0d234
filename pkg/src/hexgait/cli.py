"""Command line entry point.

Thin client over the library: `validate`, `workspace`, `trajectory`, `run`
and `sweep` call the same functions the service exposes, and `serve`
hosts the live teleoperation service. Exit codes: 0 success, 1 validation
failure, 2 runtime failure. Flags fall back to HEXGAIT_* environment
variables (HEXGAIT_ROBOT, HEXGAIT_GAITS, HEXGAIT_OUT, HEXGAIT_TICK_RATE,
HEXGAIT_SEED, HEXGAIT_BIND).
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from pathlib import Path

import numpy as np

from . import model, runner, workspace
from .sim import SimWorld

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2


def _env(name: str, default=None):
    return os.environ.get(f"HEXGAIT_{name}", default)


def _load_robot(path: str) -> model.RobotSpec:
    return model.load_robot_file(path)


def _load_gaits(path: str | None) -> dict[str, model.GaitSpec]:
    gaits = model.load_gait_file(path) if path else model.default_gait_library()
    return {g.name: g for g in gaits}


def cmd_validate(args) -> int:
    failures = 0
    try:
        robot = _load_robot(args.robot)
        print(f"robot: OK ({robot.name}: {robot.leg_count} legs, "
              f"{sum(leg.joint_count for leg in robot.legs)} joints)")
    except model.ConfigError as e:
        print(f"robot: FAIL {e}")
        failures += 1
    try:
        gaits = _load_gaits(args.gaits)
        for g in gaits.values():
            print(f"gait {g.name}: OK (duty factor "
                  f"{g.stance_phase}/{g.period})")
    except model.ConfigError as e:
        print(f"gaits: FAIL {e}")
        failures += 1
    return EXIT_VALIDATION if failures else EXIT_OK


def _search_from_args(args) -> workspace.SearchParams:
    search = workspace.SearchParams(
        bearing_step=np.deg2rad(args.bearing_step))
    if args.height_min is not None:
        search.height_min = args.height_min
    if args.height_max is not None:
        search.height_max = args.height_max
    return search


def cmd_workspace(args) -> int:
    robot = _load_robot(args.robot)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    search = _search_from_args(args)
    workspaces = workspace.compute_workspaces(robot, search,
                                              cache_dir=args.cache_dir)
    walk = workspace.derive_walkspace(robot, workspaces)

    with open(out / "workspace.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["leg_id", "height", "bearing_rad", "radius_m"])
        for lid in sorted(workspaces):
            for sl in workspaces[lid].slices:
                for b, r in zip(sl.bearings, sl.radii):
                    w.writerow([lid, f"{sl.height:.6f}", f"{b:.9f}", f"{r:.9f}"])
    for leg in robot.legs:
        with open(out / f"walkspace_leg{leg.id}.csv", "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["bearing_rad", "radius_m", "x_m", "y_m"])
            for b, r in zip(walk.bearings, walk.radii):
                w.writerow([f"{b:.9f}", f"{r:.9f}",
                            f"{leg.default_tip[0] + r * np.cos(b):.9f}",
                            f"{leg.default_tip[1] + r * np.sin(b):.9f}"])
    print(f"wrote {out / 'workspace.csv'} and "
          f"{robot.leg_count} walkspace polygon files")
    return EXIT_OK


def cmd_trajectory(args) -> int:
    from .walkctrl import WalkController
    robot = _load_robot(args.robot)
    gaits = _load_gaits(args.gaits)
    if args.gait not in gaits:
        print(f"unknown gait {args.gait!r}")
        return EXIT_VALIDATION
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ctrl = WalkController(robot, gaits[args.gait], tick_rate=args.tick_rate)
    ctrl.set_velocity(args.velocity)
    ticks = 3 * ctrl.timing.period_ticks
    with open(out / "tip_paths.csv", "w", newline="") as tf, \
            open(out / "gait_diagram.csv", "w", newline="") as gf:
        tw = csv.writer(tf)
        gw = csv.writer(gf)
        tw.writerow(["time", "leg_id", "x", "y", "z", "phase"])
        gw.writerow(["tick", "time"] + [f"leg{leg.id}" for leg in robot.legs])
        for k in range(ticks):
            targets = ctrl.tick()
            t = k / args.tick_rate
            states = []
            for i, leg in enumerate(robot.legs):
                state, _ = ctrl.timing.leg_state(k, i)
                states.append(1 if state.value == "stance" else 0)
                tip = targets[leg.id].vector
                tw.writerow([f"{t:.6f}", leg.id,
                             f"{tip[0]:.9f}", f"{tip[1]:.9f}", f"{tip[2]:.9f}",
                             state.value])
            gw.writerow([k, f"{t:.6f}"] + states)
    print(f"wrote {out / 'tip_paths.csv'} and {out / 'gait_diagram.csv'}")
    return EXIT_OK


def cmd_run(args) -> int:
    robot = _load_robot(args.robot)
    gaits = _load_gaits(args.gaits)
    script_text = Path(args.script).read_text() if args.script else ""
    events = runner.parse_script(script_text)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    search = workspace.SearchParams(bearing_step=np.deg2rad(args.bearing_step))
    workspaces = workspace.compute_workspaces(robot, search,
                                              cache_dir=args.cache_dir)
    walk = workspace.derive_walkspace(robot, workspaces)
    world = SimWorld(incline=np.deg2rad(args.incline))
    run = runner.SimRun(robot, gaits[args.gait], walk, tick_rate=args.tick_rate,
                        world=world, gait_library=gaits, seed=args.seed)
    duration = args.duration
    if events:
        duration = max(duration, events[-1].time + 1.0)
    log = run.run(duration, events=events)

    runner.write_run_csv(out / "run.csv", log, robot)
    runner.write_joint_csv(out / "joints.csv", log, robot)
    _write_segment_metrics(out / "metrics.csv", log, events, robot,
                           run.world.gravity)
    print(f"ran {duration:.1f}s: straight-line distance {log.distance():.3f} m, "
          f"path {log.path_length():.3f} m, clamps {log.clamp_events}, "
          f"slips {log.slip_events}")
    print(f"wrote {out / 'run.csv'}, {out / 'joints.csv'}, {out / 'metrics.csv'}")
    return EXIT_OK


def _write_segment_metrics(path: Path, log: runner.RunLog,
                           events, robot: model.RobotSpec, gravity: float):
    bounds = sorted({0.0} | {e.time for e in events} | {log.times[-1]})
    times = np.array(log.times)
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["t_start", "t_end", "mean_power_w", "distance_m",
                    "mean_speed_mps", "cot"])
        for t0, t1 in zip(bounds, bounds[1:]):
            mask = (times > t0) & (times <= t1)
            if not np.any(mask):
                continue
            idx = np.where(mask)[0]
            power = float(np.mean([log.powers[i] for i in idx]))
            dist = log.records[idx[-1]].distance - log.records[idx[0]].distance
            span = times[idx[-1]] - times[idx[0]]
            speed = dist / span if span > 0 else 0.0
            cot = power / (robot.mass * gravity * speed) if speed > 1e-6 else ""
            w.writerow([f"{t0:.3f}", f"{t1:.3f}", f"{power:.6f}",
                        f"{dist:.6f}", f"{speed:.6f}",
                        f"{cot:.6f}" if cot != "" else ""])


def cmd_sweep(args) -> int:
    robot = _load_robot(args.robot)
    gaits = _load_gaits(args.gaits)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    search = workspace.SearchParams(bearing_step=np.deg2rad(args.bearing_step))
    workspaces = workspace.compute_workspaces(robot, search,
                                              cache_dir=args.cache_dir)
    walk = workspace.derive_walkspace(robot, workspaces)
    stride = args.stride
    if stride is None:
        stride = 2.0 * min(walk.radius_at(0.0), walk.radius_at(np.pi))
    rows = runner.sweep_step_frequency(
        robot, gaits[args.gait], walk, stride_length=stride,
        frequencies=args.frequencies, tick_rate=args.tick_rate)
    runner.write_sweep_csv(out / "sweep.csv", rows)
    for r in rows:
        print(f"f={r['step_frequency']:.2f} Hz: CoT {r['cot']:.3f} "
              f"(measured {r['measured_speed']:.3f} m/s)")
    print(f"wrote {out / 'sweep.csv'}")
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app
    robot = _load_robot(args.robot)
    gaits = _load_gaits(args.gaits)
    host, _, port = args.bind.rpartition(":")
    app = create_app(robot, gaits, tick_rate=args.tick_rate,
                     cache_dir=args.cache_dir, ui_dir=args.ui_dir,
                     seed=args.seed)
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port),
                log_level="warning")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hexgait",
                                     description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_required=True):
        p.add_argument("--robot", default=_env("ROBOT"), required=_env("ROBOT") is None,
                       help="robot description YAML")
        p.add_argument("--gaits", default=_env("GAITS"),
                       help="gait library YAML (default: built-in library)")
        p.add_argument("--tick-rate", type=float,
                       default=float(_env("TICK_RATE", 200.0)))
        p.add_argument("--seed", type=int, default=int(_env("SEED", 0)))
        p.add_argument("--cache-dir", default=_env("CACHE_DIR"),
                       help="workspace cache directory")
        p.add_argument("--bearing-step", type=float, default=5.0,
                       help="workspace search bearing step (degrees)")
        if out_required:
            p.add_argument("--out", default=_env("OUT"),
                           required=_env("OUT") is None, help="output directory")

    p = sub.add_parser("validate", help="check a robot and gait description")
    p.add_argument("--robot", default=_env("ROBOT"), required=_env("ROBOT") is None)
    p.add_argument("--gaits", default=_env("GAITS"))
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("workspace", help="export workspace and walkspace CSVs")
    common(p)
    p.add_argument("--height-min", type=float, default=None)
    p.add_argument("--height-max", type=float, default=None)
    p.set_defaults(func=cmd_workspace)

    p = sub.add_parser("trajectory", help="export tip paths and gait diagram")
    common(p)
    p.add_argument("--gait", default="tripod")
    p.add_argument("--velocity", type=float, nargs=3,
                   default=[0.2, 0.0, 0.0], metavar=("VX", "VY", "WZ"))
    p.set_defaults(func=cmd_trajectory)

    p = sub.add_parser("run", help="run a timed command script in the simulator")
    common(p)
    p.add_argument("--script", default=None, help="command script file")
    p.add_argument("--gait", default="tripod", help="initial gait")
    p.add_argument("--duration", type=float, default=10.0)
    p.add_argument("--incline", type=float, default=0.0,
                   help="ground incline (degrees)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="cost-of-transport step frequency sweep")
    common(p)
    p.add_argument("--gait", default="tripod")
    p.add_argument("--stride", type=float, default=None,
                   help="stride length (default: full walkspace chord)")
    p.add_argument("--frequencies", type=float, nargs="+",
                   default=[0.4, 0.8, 1.2, 1.8, 2.4, 3.0, 3.6, 4.2])
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("serve", help="host the teleoperation service")
    p.add_argument("--robot", default=_env("ROBOT"), required=_env("ROBOT") is None)
    p.add_argument("--gaits", default=_env("GAITS"))
    p.add_argument("--bind", default=_env("BIND", "127.0.0.1:8080"))
    p.add_argument("--tick-rate", type=float,
                   default=float(_env("TICK_RATE", 200.0)))
    p.add_argument("--seed", type=int, default=int(_env("SEED", 0)))
    p.add_argument("--cache-dir", default=_env("CACHE_DIR"))
    p.add_argument("--ui-dir", default=_env("UI_DIR"),
                   help="directory with the built browser console")
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except model.ConfigError as e:
        print(f"validation error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except runner.ScriptError as e:
        print(f"script error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except FileNotFoundError as e:
        print(f"missing file: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except KeyboardInterrupt:
        return EXIT_OK
    except Exception as e:  # surfaced with a stable exit code
        print(f"runtime error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
