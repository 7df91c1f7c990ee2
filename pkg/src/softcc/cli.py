"""``softcc`` command-line front end.

Subcommands::

    softcc validate [ROBOT.yaml] [--segments N]
    softcc simulate SCENARIO.yaml|PRESET [--out DIR] [--jobs J] [--seed S]
    softcc identify DATA.csv... --amplitude A... | --synthetic [--noise SIGMA] --out PARAMS.json
    softcc plotdata RUN_DIR [--out DIR]

Exit codes: 0 success, 2 configuration error, 3 numerical failure, 4 failed checks.
The log level comes from the ``SOFTCC_LOG`` environment variable (default WARNING).
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import re
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .errors import ConfigError, DomainError, IdentificationError, IntegrationError, SingularTaskError
from .simulation import TimeSeries, l2_error, run_scenario

log = logging.getLogger("softcc")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_CHECKS = 0, 2, 3, 4
CSV_MAGIC = "# softcc timeseries v1"
SETTLE_S = 2.0  # transient excluded from steady-state task errors


# ---------------------------------------------------------------- time-series CSV

def timeseries_columns(n: int, extras: dict) -> list[str]:
    cols = ["t"] + [f"q{i}" for i in range(1, n + 1)] + [f"qd{i}" for i in range(1, n + 1)]
    cols += [f"tau{i}" for i in range(1, n + 1)] + ["tip_x", "tip_y", "contact", "phase"]
    for name, val in extras.items():
        width = np.asarray(val).reshape(len(val), -1).shape[1]
        cols += [name] if width == 1 else [f"{name}{i}" for i in range(1, width + 1)]
    return cols


def write_timeseries(path, ts: TimeSeries) -> None:
    n = ts.q.shape[1]
    extras = {k: np.asarray(v).reshape(len(v), -1) for k, v in ts.extras.items() if len(v) == len(ts)}
    with open(path, "w", newline="") as fh:
        fh.write(CSV_MAGIC + "\n")
        w = csv.writer(fh)
        w.writerow(timeseries_columns(n, extras))
        for k in range(len(ts)):
            row = [repr(float(ts.t[k]))]
            row += [repr(float(v)) for v in np.concatenate([ts.q[k], ts.qd[k], ts.tau[k], ts.tip[k]])]
            row += [int(ts.contact[k]), ts.phase[k]]
            for v in extras.values():
                row += [repr(float(x)) for x in v[k]]
            w.writerow(row)


def read_timeseries(path) -> dict[str, np.ndarray]:
    """Columns of a time-series CSV; ``phase`` stays a string array."""
    with open(path, newline="") as fh:
        first = fh.readline().strip()
        if first != CSV_MAGIC:
            raise ConfigError(f"{path}: not a softcc time series (header {first!r})", "timeseries")
        rows = list(csv.reader(fh))
    if not rows:
        raise ConfigError(f"{path}: missing column header", "timeseries")
    header, body = rows[0], rows[1:]
    data = {}
    for j, name in enumerate(header):
        col = [r[j] for r in body]
        data[name] = np.array(col, dtype=str) if name == "phase" else np.array(col, dtype=float)
    return data


# ---------------------------------------------------------------- metrics

def run_metrics(cfg: cfgmod.ScenarioFile, ts: TimeSeries, seconds: float) -> dict:
    m = {"samples": len(ts), "runtime_s": round(seconds, 3)}
    kind = cfg.controller.type
    if kind in ("curvature", "pid") and "qref" in ts.extras:
        e = ts.q - ts.extras["qref"]
        m["l2_error_rad"] = l2_error(e[:-1], dt=ts.period)
        m["max_abs_error_rad"] = float(np.abs(e).max())
    if cfg.walls or kind == "surface_follow":
        m["contact_onset_s"] = ts.events.get("contact_onset")
        m["phase_switches"] = [{"t_s": t, "from": a, "to": b} for t, a, b in ts.events.get("phase_switches", [])]
        m["max_penetration_m"] = ts.max_penetration
        m["contact_at_end"] = bool(ts.contact[-1])
        if "tangential_error" in ts.extras:
            m["final_tangential_error_m"] = float(ts.extras["tangential_error"][-1, 0])
    if kind == "hierarchy":
        late = ts.t >= min(SETTLE_S, ts.t[-1])
        m["task_error_final"] = {}
        m["task_error_max_after_settle"] = {}
        for k, v in ts.extras.items():
            if k.startswith("err_"):
                m["task_error_final"][k[4:]] = float(v[-1, 0])
                m["task_error_max_after_settle"][k[4:]] = float(v[late, 0].max())
        if "annihilation" in ts.extras:
            m["max_annihilation"] = float(ts.extras["annihilation"].max())
    return m


def summary_line(label: str, m: dict) -> str:
    parts = [label or "run"]
    for key in ("l2_error_rad", "contact_onset_s", "final_tangential_error_m", "max_annihilation"):
        if m.get(key) is not None:
            parts.append(f"{key}={m[key]:.4g}")
    if "task_error_final" in m:
        parts += [f"err_{k}={v:.3g}" for k, v in m["task_error_final"].items()]
    if "phase_switches" in m:
        parts.append("phases=" + ">".join([m["phase_switches"][0]["from"]] + [s["to"] for s in m["phase_switches"]])
                     if m["phase_switches"] else "phases=none")
    parts.append(f"{m['runtime_s']:.1f}s")
    return "  ".join(parts)


# ---------------------------------------------------------------- simulate

def _slug(label: str) -> str:
    return re.sub(r"[^A-Za-z0-9.]+", "_", label).strip("_")


def _load_scenario(source: str) -> cfgmod.ScenarioFile:
    if source in cfgmod.PRESETS:
        return cfgmod.preset(source)
    path = Path(source)
    if not path.exists():
        raise ConfigError(f"{source!r} is neither a file nor a preset ({', '.join(cfgmod.PRESETS)})", "scenario")
    return cfgmod.parse_scenario(cfgmod.load_yaml(path))


def _run_one(cfg_json: dict, index: int):
    cfg = cfgmod.parse_scenario(cfg_json)
    label, sc = cfgmod.build_scenarios(cfg)[index]
    t0 = time.perf_counter()
    ts = run_scenario(sc)
    return label, ts, time.perf_counter() - t0


def simulate(cfg: cfgmod.ScenarioFile, out: Path, jobs: int = 1) -> dict:
    """Run every scenario of ``cfg`` and write its artifacts under ``out``."""
    runs = cfgmod.build_scenarios(cfg)
    data = cfg.model_dump(mode="json")
    if jobs > 1 and len(runs) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(runs))) as pool:
            results = list(pool.map(_run_one, [data] * len(runs), range(len(runs))))
    else:
        results = [_run_one(data, i) for i in range(len(runs))]
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.yaml").write_text(cfgmod.to_yaml(cfg))
    metrics = {"name": cfg.name, "controller": cfg.controller.type, "seed": cfg.seed, "runs": {}}
    for label, ts, seconds in results:
        key = label or "run"
        fname = f"timeseries_{_slug(label)}.csv" if label else "timeseries.csv"
        write_timeseries(out / fname, ts)
        metrics["runs"][key] = {"timeseries": fname, **run_metrics(cfg, ts, seconds)}
        print(summary_line(label, metrics["runs"][key]))
    (out / "metrics.json").write_text(json.dumps(metrics, indent=2))
    return metrics


def cmd_simulate(args) -> int:
    cfg = _load_scenario(args.scenario)
    if args.seed is not None:
        cfg = cfg.model_copy(update={"seed": args.seed})
    out = Path(args.out) if args.out else Path("runs") / cfg.name
    simulate(cfg, out, args.jobs)
    print(f"artifacts written to {out}")
    return EXIT_OK


# ---------------------------------------------------------------- validate

def cmd_validate(args) -> int:
    from .validation import validate

    if args.robot:
        data = cfgmod.load_yaml(args.robot)
        robot_file = cfgmod.parse_robot(data["robot"] if "robot" in data and "segments" not in data else data)
    else:
        robot_file = cfgmod.paper_robot_file(args.segments)
    report = validate(robot_file.build())
    print(report.format())
    return EXIT_OK if report.passed else EXIT_CHECKS


# ---------------------------------------------------------------- identify

def cmd_identify(args) -> int:
    from . import identification as ident

    if args.synthetic:
        if args.data:
            raise ConfigError("give data files or --synthetic, not both", "data")
        experiments = ident.synthesize_step_data(noise=args.noise, seed=args.seed or 0)
    else:
        if not args.data:
            raise ConfigError("no data files given (or use --synthetic)", "data")
        amps = args.amplitude or [None] * len(args.data)
        if len(amps) != len(args.data):
            raise ConfigError(f"{len(args.data)} files but {len(amps)} amplitudes", "amplitude")
        experiments = [ident.read_step_csv(p, a) for p, a in zip(args.data, amps)]
    grid = tuple(args.grid) if args.grid else ident.DEFAULT_GRID
    params = ident.identify(experiments, grid, search=args.search, jobs=args.jobs)
    ident.write_params_json(args.out, params)
    print(json.dumps(params.to_dict(), indent=2))
    return EXIT_OK


# ---------------------------------------------------------------- plotdata

def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def plot_bundles(run: Path) -> dict[str, tuple[list[str], list]]:
    """Plot-ready tables for a run directory, keyed by relative output path."""
    files = sorted(run.glob("timeseries*.csv"))
    if not files:
        raise ConfigError(f"{run}: no time series found", "run")
    bundles = {}
    walls = []
    if (run / "config.yaml").exists():
        walls = cfgmod.load_yaml(run / "config.yaml").get("walls", [])
    for f in files:
        d = read_timeseries(f)
        if d["t"].size == 0:
            raise ConfigError(f"{f.name}: run is empty", "run")
        sub = f.stem[len("timeseries_"):]  # multi-run scenarios get one folder per run
        prefix = f"{sub}/" if sub else ""
        t = d["t"]
        n = sum(1 for k in d if re.fullmatch(r"q\d+", k))
        tau = [d[f"tau{i}"] for i in range(1, n + 1)]
        bundles[f"{prefix}torques.csv"] = (["t"] + [f"tau{i}" for i in range(1, n + 1)],
                                           np.column_stack([t] + tau).tolist())
        if "qref1" in d:
            cols, data = ["t"], [t]
            for i in range(1, n + 1):
                cols += [f"q{i}", f"qref{i}"]
                data += [d[f"q{i}"], d[f"qref{i}"]]
            bundles[f"{prefix}q_vs_ref.csv"] = (cols, np.column_stack(data).tolist())
        if walls or "xd1" in d:
            rows = []
            for k in range(t.size):
                marker = int(k == 0 or d["phase"][k] != d["phase"][k - 1])
                xd = [d["xd1"][k], d["xd2"][k]] if "xd1" in d else ["", ""]
                rows.append([t[k], d["tip_x"][k], d["tip_y"][k], int(d["contact"][k]), d["phase"][k],
                             *xd, marker])
            bundles[f"{prefix}tip_path.csv"] = (["t", "tip_x", "tip_y", "contact", "phase", "xd_x", "xd_y",
                                                 "phase_start"], rows)
    if walls:
        bundles["walls.csv"] = (["wall", "x", "y"],
                                [[i, *w[p]] for i, w in enumerate(walls) for p in ("a_m", "b_m")])
    return bundles


def cmd_plotdata(args) -> int:
    run = Path(args.run)
    if not run.is_dir():
        raise ConfigError(f"{run} is not a run directory", "run")
    bundles = plot_bundles(run)  # everything is built before the first file is written
    out = Path(args.out) if args.out else run / "plots"
    out.mkdir(parents=True, exist_ok=True)
    for name, (header, rows) in bundles.items():
        (out / name).parent.mkdir(parents=True, exist_ok=True)
        _write_csv(out / name, header, rows)
        print(out / name)
    return EXIT_OK


# ---------------------------------------------------------------- entry point

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="softcc", description="Soft-arm modelling, control and identification.")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("validate", help="run the model invariant checks on a robot description")
    v.add_argument("robot", nargs="?", help="robot (or scenario) YAML; default: the reference arm")
    v.add_argument("--segments", type=int, default=5, help="segments of the default arm")
    v.set_defaults(func=cmd_validate)

    s = sub.add_parser("simulate", help="run a scenario file or preset")
    s.add_argument("scenario", help=f"YAML file or preset ({', '.join(cfgmod.PRESETS)})")
    s.add_argument("--out", help="artifact directory (default runs/<name>)")
    s.add_argument("--jobs", type=int, default=1, help="parallel runs for multi-gain scenarios")
    s.add_argument("--seed", type=int, default=None, help="overrides the scenario seed (default 0)")
    s.set_defaults(func=cmd_simulate)

    i = sub.add_parser("identify", help="fit stiffness, damping and actuator gains to step responses")
    i.add_argument("data", nargs="*", help="step-response CSV files")
    i.add_argument("--amplitude", type=float, nargs="+", help="step amplitude of each file")
    i.add_argument("--synthetic", action="store_true", help="use simulated step responses")
    i.add_argument("--noise", type=float, default=0.0, help="noise std of synthetic data (rad)")
    i.add_argument("--seed", type=int, default=0)
    i.add_argument("--grid", type=float, nargs="+", help="candidate lag constants (s)")
    i.add_argument("--search", choices=("coordinate", "full"), default="coordinate")
    i.add_argument("--jobs", type=int, default=1)
    i.add_argument("--out", default="params.json")
    i.set_defaults(func=cmd_identify)

    d = sub.add_parser("plotdata", help="derive plot-ready CSV files from a run directory")
    d.add_argument("run")
    d.add_argument("--out", help="output directory (default RUN/plots)")
    d.set_defaults(func=cmd_plotdata)
    return p


def main(argv=None) -> int:
    level = os.environ.get("SOFTCC_LOG", "WARNING").upper()
    logging.basicConfig(level=level if isinstance(logging.getLevelName(level), int) else "WARNING",
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (IntegrationError, IdentificationError, SingularTaskError, DomainError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
