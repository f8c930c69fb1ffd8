"""Command-line entry point: simulate, evaluate, subset-study, battery, select."""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
import time
from pathlib import Path
from typing import Optional, Sequence

from . import __version__, battery, selection
from .core import Technology, prepare_maps
from .engines import CrossDeviceMethod, EngineConfig
from .evaluation import ExperimentConfig, ExperimentError, dataset_environment_id, run_experiment
from .formats import read_scans_csv, save_model, write_rows_csv, write_scans_csv
from .seeding import derive_seed
from .sim import DeviceProfile, environment_from_dict, environment_to_dict, generate_dataset, make_environment

log = logging.getLogger("ambientloc")


class CLIError(Exception):
    pass


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0, help="master seed; every random stream derives from it")
    p.add_argument("--config", type=Path, help="JSON/TOML file of option defaults (flags still win)")
    p.add_argument("--out", type=Path, default=Path("."), help="output directory")
    p.add_argument("--format", choices=("csv", "json"), default="json", help="format of summary tables")


def _engine_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--engine", choices=("knn", "svm", "gp"), default="knn")
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--method", choices=[m.value for m in CrossDeviceMethod], default="basic")
    p.add_argument("--log-ratio", action="store_true")
    p.add_argument("--svm-c", type=float, default=10.0)
    p.add_argument("--svm-kernel", choices=("linear", "rbf"), default="linear")
    p.add_argument("--svm-gamma", type=float, default=1.0)
    p.add_argument("--gp-lengthscale", type=float, default=0.5)
    p.add_argument("--gp-signal", type=float, default=1.0)
    p.add_argument("--gp-noise", type=float, default=0.01)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ambientloc", description=__doc__)
    parser.add_argument("--version", action="version", version=f"ambientloc {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic scan dataset")
    _common(p)
    src = p.add_mutually_exclusive_group()
    src.add_argument("--preset", choices=("room", "floor"), default="room")
    src.add_argument("--env", type=Path, help="environment JSON ({preset: ...} or a full environment description)")
    p.add_argument("--session", default="day1", help="session name; new name = new day, same building")
    p.add_argument("--samples", type=int, default=10)
    p.add_argument("--device-id", default="reference")
    p.add_argument("--device-gain", type=float, default=1.0)
    p.add_argument("--device-offset", type=float, default=0.0)
    p.add_argument("--device-noise", type=float, default=1.0)
    p.add_argument("--placement-jitter", type=float, default=0.1)
    p.add_argument("--phase-drift", type=float, default=0.6)
    p.add_argument("--quantize", action="store_true", help="round readings to 1 dB")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("evaluate", help="train on one dataset, localize another, report errors")
    _common(p)
    p.add_argument("--train", type=Path, required=True)
    p.add_argument("--test", type=Path, required=True)
    p.add_argument("--tech", action="append", choices=[t.value for t in Technology],
                   help="technology to evaluate; repeat for one report row per technology")
    _engine_flags(p)
    p.add_argument("--subset", choices=("strongest", "weakest", "greedy", "random"))
    p.add_argument("--subset-n", type=int)
    p.add_argument("--save-model", action="store_true", help="also write a reusable engine artifact")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("subset-study", help="median error vs number of randomly chosen stations")
    _common(p)
    p.add_argument("--train", type=Path, required=True)
    p.add_argument("--test", type=Path, required=True)
    p.add_argument("--tech", default="fm", choices=[t.value for t in Technology])
    p.add_argument("--n", default="1..5", help="N, A..B, or a comma list")
    p.add_argument("--trials", type=int, default=selection.DEFAULT_TRIALS)
    p.add_argument("--k", type=int, default=1)
    p.set_defaults(func=cmd_subset_study)

    p = sub.add_parser("battery", help="battery life vs scan interval")
    _common(p)
    p.add_argument("--tech", choices=("wifi", "fm", "custom"), default="wifi")
    p.add_argument("--baseline", type=float, default=battery.BASELINE_LIFE_H,
                   help="life with radios off, hours (default inferred: 1.3 h / 3%%)")
    p.add_argument("--observation", help="custom fit point 'INTERVAL_S,LIFE_H'")
    p.add_argument("--scan-cost", type=float, help="use this k directly instead of fitting")
    p.add_argument("--beacons", type=int, help="FM beacons scanned (scan energy scales linearly)")
    p.add_argument("--intervals", default="1,2,5,10,20,30,60,120")
    p.set_defaults(func=cmd_battery)

    p = sub.add_parser("select", help="choose a station subset")
    _common(p)
    p.add_argument("--strategy", choices=("strongest", "weakest", "greedy"), required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--train", type=Path, required=True)
    p.add_argument("--test", type=Path, help="held-out dataset (greedy only)")
    p.add_argument("--tech", default="fm", choices=[t.value for t in Technology])
    p.add_argument("--k", type=int, default=1)
    p.set_defaults(func=cmd_select)
    return parser


# config handling ----------------------------------------------------------

def _load_config(path: Path) -> dict:
    text = path.read_text()
    if path.suffix == ".toml":
        try:
            import tomllib
        except ModuleNotFoundError:
            import tomli as tomllib
        return tomllib.loads(text)
    return json.loads(text)


def parse_args(argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
    """Flags override config-file values, which override built-in defaults."""
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    args = parser.parse_args(argv)
    if getattr(args, "config", None) is None:
        return args
    doc = _load_config(args.config)
    section = doc.get(args.command, {k: v for k, v in doc.items() if not isinstance(v, dict)})
    subparser = next(a for a in parser._subparsers._group_actions).choices[args.command]
    dests = {a.dest for a in subparser._actions}
    defaults = {}
    for key, value in section.items():
        dest = key.replace("-", "_")
        if dest not in dests:
            parser.error(f"config key {key!r} is not an option of {args.command}")
        if dest in ("train", "test", "env", "out"):
            value = Path(value)
        defaults[dest] = value
    subparser.set_defaults(**defaults)
    for a in subparser._actions:
        if a.dest in defaults:
            a.required = False
    return parser.parse_args(argv)


# helpers --------------------------------------------------------------------

def _parse_n_range(text: str) -> list[int]:
    text = text.strip()
    if ".." in text:
        a, b = text.split("..", 1)
        return list(range(int(a), int(b) + 1))
    return [int(v) for v in text.split(",") if v.strip()]


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _args_doc(args: argparse.Namespace) -> dict:
    return {k: (str(v) if isinstance(v, Path) else v) for k, v in sorted(vars(args).items()) if k != "func"}


def write_manifest(args: argparse.Namespace, inputs: list[Path], outputs: list[Path], started: float) -> Path:
    doc = _args_doc(args)
    config_hash = hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()
    manifest = {
        "command": args.command,
        "arguments": doc,
        "config_hash": config_hash,
        "seed": args.seed,
        "inputs": [str(p) for p in inputs],
        "outputs": [p.name for p in outputs],
        "tool_version": __version__,
        "started_at": started,
        "duration_s": round(time.time() - started, 6),
    }
    path = args.out / "manifest.json"
    _write_json(path, manifest)
    return path


def _engine_config(args) -> EngineConfig:
    return EngineConfig(
        engine=args.engine, k=args.k, log_ratio=args.log_ratio, svm_c=args.svm_c, svm_kernel=args.svm_kernel,
        svm_gamma=args.svm_gamma, gp_lengthscale=args.gp_lengthscale, gp_signal_variance=args.gp_signal,
        gp_noise_variance=args.gp_noise, seed=args.seed,
    )


def _load_scans(path: Path):
    if not path.exists():
        raise CLIError(f"dataset not found: {path}")
    return read_scans_csv(path, environment_id=dataset_environment_id(path))


def _maps(args, tech: str):
    train, test = _load_scans(args.train), _load_scans(args.test)
    return prepare_maps(train, test, [Technology.parse(tech)])


# commands ---------------------------------------------------------------------

def cmd_simulate(args) -> list[Path]:
    env_seed = derive_seed(args.seed, "environment")
    if args.env is not None:
        doc = json.loads(args.env.read_text())
        if "preset" in doc and "seed" not in doc:
            doc = {**doc, "seed": env_seed}
        env = environment_from_dict(doc)
    else:
        env = make_environment(args.preset, env_seed)
    device = DeviceProfile(args.device_id, args.device_gain, args.device_offset, args.device_noise)
    scans = generate_dataset(
        env, device=device, samples_per_location=args.samples,
        seed=derive_seed(args.seed, "session", args.session), session_id=args.session,
        placement_jitter=args.placement_jitter, phase_drift=args.phase_drift, quantize=args.quantize,
    )
    scans_path, env_path = args.out / "scans.csv", args.out / "environment.json"
    write_scans_csv(scans, scans_path)
    _write_json(env_path, environment_to_dict(env))
    print(f"{len(scans)} locations, {len(env.beacons)} beacons -> {scans_path}")
    return [scans_path, env_path]


def cmd_evaluate(args) -> list[Path]:
    techs = args.tech or ["fm"]
    subset = None
    if args.subset:
        if not args.subset_n:
            raise CLIError("--subset needs --subset-n")
        subset = {"strategy": args.subset, "n": args.subset_n, "seed": derive_seed(args.seed, "subset")}
    for p in (args.train, args.test):
        if not p.exists():
            raise CLIError(f"dataset not found: {p}")
    engine = _engine_config(args)
    method = CrossDeviceMethod(args.method)
    rows, outputs = [], []
    for tech in techs:
        cfg = ExperimentConfig(args.train, args.test, (Technology.parse(tech),), engine, method, subset)
        res = run_experiment(cfg)
        st = res.stats
        rows.append({"tech": tech, "engine": args.engine, "method": args.method, "beacons": len(res.beacons),
                     **{k: v for k, v in st.to_dict().items() if k != "cdf"}})
        loc_path = args.out / f"locations_{tech}.csv"
        write_rows_csv(loc_path, ["grid_index", "true_x", "true_y", "est_x", "est_y", "error_m"],
                       ([r.grid_index, r.true_x, r.true_y, r.est_x, r.est_y, r.error_m] for r in res.records))
        cdf_path = args.out / f"cdf_{tech}.csv"
        write_rows_csv(cdf_path, ["error_m", "fraction"], st.cdf)
        outputs += [loc_path, cdf_path]
        if args.save_model:
            train_map, _ = _maps(args, tech)
            model_path = args.out / f"model_{tech}.json"
            save_model(train_map, engine.for_method(method) if args.engine == "knn" else engine, model_path)
            outputs.append(model_path)
        print(f"{tech:5s} n={st.n} class_rate={st.classification_rate:.3f} median={st.median:.2f} m "
              f"p90={st.p90:.2f} m p95={st.p95:.2f} m")
    if args.format == "csv":
        stats_path = args.out / "stats.csv"
        keys = list(rows[0])
        write_rows_csv(stats_path, keys, ([r[k] for k in keys] for r in rows))
    else:
        stats_path = args.out / "stats.json"
        _write_json(stats_path, rows)
    return [stats_path] + outputs


def cmd_subset_study(args) -> list[Path]:
    ns = _parse_n_range(args.n)
    if not ns:
        raise CLIError("empty --n range")
    train, test = _maps(args, args.tech)
    config = EngineConfig(k=args.k)
    trial_rows, summary = [], []
    for n in ns:
        r = selection.random_subset_study(train, test, n, args.trials, derive_seed(args.seed, "subset", n), config)
        trial_rows += [(n, t, m) for t, m in enumerate(r.median_errors)]
        summary.append({"n": n, "trials": r.trials, "mean_of_medians": r.mean_of_medians,
                        "min_of_medians": r.min_of_medians, "max_of_medians": r.max_of_medians,
                        "std_error": r.std_error})
        print(f"n={n:3d} mean={r.mean_of_medians:.3f} m min={r.min_of_medians:.3f} max={r.max_of_medians:.3f}")
    trials_path = args.out / "study_trials.csv"
    write_rows_csv(trials_path, ["n", "trial", "median_error"], trial_rows)
    csv_path = args.out / "study_summary.csv"
    keys = list(summary[0])
    write_rows_csv(csv_path, keys, ([row[k] for k in keys] for row in summary))
    json_path = args.out / "study_summary.json"
    _write_json(json_path, {"tech": args.tech, "trials": args.trials, "rows": summary})
    return [trials_path, csv_path, json_path]


def cmd_battery(args) -> list[Path]:
    if args.scan_cost is not None:
        model = battery.PowerModel(args.baseline, args.scan_cost, args.tech, args.beacons)
    elif args.tech == "wifi":
        model = battery.wifi_model(args.baseline)
    elif args.tech == "fm":
        model = battery.fm_model(args.baseline, args.beacons or battery.FM_OBSERVATION_BEACONS)
    else:
        if not args.observation:
            raise CLIError("--tech custom needs --observation INTERVAL,LIFE or --scan-cost")
        t, life = _floats(args.observation)
        model = battery.fit_scan_cost(args.baseline, (t, life), "custom")
    rows = battery.sweep(model, _floats(args.intervals))
    path = args.out / "battery.csv"
    write_rows_csv(path, ["interval_s", "life_h"], rows)
    print(f"{args.tech}: baseline {model.baseline_life} h (inferred), scan cost k={model.scan_cost:.6g}")
    for t, life in rows:
        print(f"  T={t:g} s  L={life:.2f} h")
    return [path]


def cmd_select(args) -> list[Path]:
    if args.strategy == "greedy":
        if args.test is None:
            raise CLIError("greedy selection needs --test")
        train, test = _maps(args, args.tech)
        chosen = selection.greedy_select(train, test, args.n, EngineConfig(k=args.k))
    else:
        scans = _load_scans(args.train)
        train, _ = prepare_maps(scans, scans, [Technology.parse(args.tech)])
        pick = selection.select_strongest if args.strategy == "strongest" else selection.select_weakest
        chosen = pick(train, args.n)
    rows = [{"rank": i + 1, "tech": b.technology.value, "channel": b.channel} for i, b in enumerate(chosen)]
    if args.format == "csv":
        path = args.out / "selection.csv"
        write_rows_csv(path, ["rank", "tech", "channel"], ([r["rank"], r["tech"], r["channel"]] for r in rows))
    else:
        path = args.out / "selection.json"
        _write_json(path, {"strategy": args.strategy, "n": args.n, "beacons": rows})
    print(", ".join(f"{r['tech'].upper()}:{r['channel']}" for r in rows))
    return [path]


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    started = time.time()
    try:
        args.out.mkdir(parents=True, exist_ok=True)
        outputs = args.func(args)
        inputs = [p for p in (getattr(args, "train", None), getattr(args, "test", None), getattr(args, "env", None))
                  if p is not None]
        write_manifest(args, inputs, outputs, started)
    except (CLIError, ExperimentError, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
