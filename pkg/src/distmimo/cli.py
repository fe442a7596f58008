"""Command-line front end.

Subcommands map one-to-one onto the library's experiment families:

    svd-sweep   mean ordered singular values versus per-RAU array size
    ber         BER campaigns (any mode), one curve per config variant
    pc-compare  matched fully-connected versus partially-connected curves
    multiuser   downlink multiuser campaigns
    g-inhomo    inhomogeneous large-scale-fading suite with references
    gsc         selection-combining reference curves and DGV power laws
    gain        closed-form diversity gain lookup
    replay      re-run a manifest and reproduce its outputs byte-identically

Configs are TOML files; command-line flags override file values.  Every
run writes a JSON manifest holding the effective configuration, seed and
config hash, which fully determines the outputs.

Exit codes: 0 success, 2 config error, 3 precondition violation,
4 statistical cap exceeded on every point.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

import numpy as np
import scipy

from . import __version__
from .analysis import singular_value_sweep
from .beamforming import diversity_gain_formula
from .curves import write_curve_csv
from .detect import RankDeficientChannelError
from .montecarlo import (MODES, ExperimentConfig, PreconditionError,
                         inhomogeneous_g_suite, run_campaign)
from .orderstats import GscConfig, dgv_curve, gsc_ber_sim


class ConfigError(ValueError):
    """Invalid or missing configuration input; exits with code 2."""


# -- config plumbing ---------------------------------------------------------

EXPERIMENT_KEYS = {
    "mode", "n_streams", "n_paths", "k_tx", "k_rx", "n_tx", "n_rx",
    "k_bs", "n_bs", "k_users", "n_user", "rf_per_stream", "g_db",
    "snr_db", "min_errors", "max_trials", "symbols_per_trial",
    "batch_trials", "noise_std", "spacing", "seed", "label",
}


def load_config(path) -> dict:
    try:
        with open(path, "rb") as f:
            return tomllib.load(f)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"config file {path} does not parse: {e}")


def _expand_grid(value, field="snr_db"):
    """A grid is either an explicit list or a {start, stop, step} table."""
    if isinstance(value, dict):
        missing = {"start", "stop", "step"} - set(value)
        if missing:
            raise ConfigError(f"{field} table is missing field(s): {sorted(missing)}")
        start, stop, step = (float(value[k]) for k in ("start", "stop", "step"))
        if step <= 0:
            raise ConfigError(f"{field}.step must be > 0")
        n = int(round((stop - start) / step))
        grid = [start + i * step for i in range(n + 1) if start + i * step <= stop + 1e-9]
        if not grid:
            raise ConfigError(f"{field} range is empty")
        return tuple(grid)
    if isinstance(value, (list, tuple)):
        if not value:
            raise ConfigError(f"{field} list must not be empty")
        return tuple(float(v) for v in value)
    raise ConfigError(f"{field} must be a list or a start/stop/step table")


def build_experiment(data: dict, args, require_mode: bool = True) -> ExperimentConfig:
    """Merge file values and flag overrides into an ExperimentConfig."""
    unknown = set(data) - EXPERIMENT_KEYS
    if unknown:
        raise ConfigError(f"unknown config field(s): {sorted(unknown)}")
    merged = dict(data)
    merged.pop("label", None)
    flag_map = {
        "mode": args.mode, "n_streams": args.ns, "n_paths": args.L,
        "k_tx": args.kt, "k_rx": args.kr, "n_tx": args.nt, "n_rx": args.nr,
        "k_bs": args.kb, "k_users": args.ku, "n_bs": args.nb, "n_user": args.nu,
        "g_db": args.g_db, "seed": args.seed, "min_errors": args.min_errors,
        "max_trials": args.max_trials,
    }
    for key, val in flag_map.items():
        if val is not None:
            merged[key] = val
    if args.snr_start is not None or args.snr_stop is not None or args.snr_step is not None:
        if None in (args.snr_start, args.snr_stop, args.snr_step):
            raise ConfigError("--snr-start/--snr-stop/--snr-step must be given together")
        merged["snr_db"] = {"start": args.snr_start, "stop": args.snr_stop,
                            "step": args.snr_step}
    if "snr_db" in merged:
        merged["snr_grid_db"] = _expand_grid(merged.pop("snr_db"))
    if require_mode and "mode" not in merged:
        raise ConfigError("missing required field: mode")
    if "n_streams" not in merged:
        raise ConfigError("missing required field: n_streams")
    try:
        return ExperimentConfig(**merged)
    except TypeError as e:
        raise ConfigError(str(e))
    except ValueError as e:
        raise ConfigError(str(e))


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def write_manifest(out: Path, subcommand: str, runs: list, outputs: list) -> Path:
    """Record everything that determines the run's outputs."""
    manifest = {
        "subcommand": subcommand,
        "runs": runs,
        "outputs": sorted(outputs),
        "versions": {
            "distmimo": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
    }
    path = out / "manifest.json"
    with open(path, "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")
    return path


def _config_dict(cfg: ExperimentConfig) -> dict:
    d = dataclasses.asdict(cfg)
    d["config_hash"] = cfg.config_hash()
    return d


def _run_and_write(cfg: ExperimentConfig, label: str, out: Path, args,
                   runs: list, outputs: list):
    curve = run_campaign(cfg, threads=args.threads)
    curve = dataclasses.replace(curve, label=label)
    path = out / f"{label}.csv"
    write_curve_csv(curve, path)
    runs.append({"label": label, "config": _config_dict(cfg)})
    outputs.append(path.name)
    print(f"{label}: {len(curve.points)} points -> {path}")
    return curve


def _cap_status(curves) -> int:
    """Exit 4 when no point anywhere reached its error target."""
    curves = list(curves)
    min_errors_ok = any(
        p.errors >= cfg_min for curve, cfg_min in curves for p in curve.points)
    return 0 if min_errors_ok else 4


# -- subcommands -------------------------------------------------------------

def cmd_ber(args) -> int:
    data = load_config(args.config) if args.config else {}
    variants = data.pop("variants", [{}])
    if not isinstance(variants, list) or not all(isinstance(v, dict) for v in variants):
        raise ConfigError("variants must be an array of tables")
    out = _out_dir(args)
    runs, outputs, curves = [], [], []
    for idx, var in enumerate(variants):
        merged = {**data, **var}
        label = merged.pop("label", None) or (f"ber_{idx}" if len(variants) > 1 else "ber")
        cfg = build_experiment(merged, args)
        curves.append((_run_and_write(cfg, label, out, args, runs, outputs), cfg.min_errors))
    write_manifest(out, "ber", runs, outputs)
    return _cap_status(curves)


def cmd_pc_compare(args) -> int:
    data = load_config(args.config) if args.config else {}
    pc_vars = data.pop("pc", [{}])
    fc_vars = data.pop("fc", [{}])
    out = _out_dir(args)
    runs, outputs, curves = [], [], []
    for mode_name, mode, var_list in (("pc", "single_user_pc", pc_vars),
                                      ("fc", "single_user_fc", fc_vars)):
        for var in var_list:
            merged = {**data, **var, "mode": mode}
            if "k" in merged:
                k = merged.pop("k")
                merged.setdefault("k_tx", k)
                merged.setdefault("k_rx", k)
            label = merged.pop("label", None) or \
                f"{mode_name}_k{merged.get('k_tx', 2)}_ns{merged.get('n_streams', '?')}"
            cfg = build_experiment(merged, args)
            curves.append((_run_and_write(cfg, label, out, args, runs, outputs),
                           cfg.min_errors))
    write_manifest(out, "pc-compare", runs, outputs)
    return _cap_status(curves)


def cmd_multiuser(args) -> int:
    data = load_config(args.config) if args.config else {}
    variants = data.pop("variants", [{}])
    out = _out_dir(args)
    runs, outputs, curves = [], [], []
    for idx, var in enumerate(variants):
        merged = {**data, **var, "mode": "multiuser_dl"}
        label = merged.pop("label", None) or \
            f"mu_kb{merged.get('k_bs', 2)}_ku{merged.get('k_users', 2)}"
        cfg = build_experiment(merged, args, require_mode=False)
        curves.append((_run_and_write(cfg, label, out, args, runs, outputs),
                       cfg.min_errors))
    write_manifest(out, "multiuser", runs, outputs)
    return _cap_status(curves)


def cmd_g_inhomo(args) -> int:
    data = load_config(args.config) if args.config else {}
    matrices = data.pop("g_matrices", None)
    if not matrices:
        raise ConfigError("missing required field: g_matrices")
    if isinstance(matrices, list) and matrices and isinstance(matrices[0], dict):
        matrices = [m.get("g") for m in matrices]
        if any(m is None for m in matrices):
            raise ConfigError("each g_matrices entry needs a g field")
    data.setdefault("mode", "single_user_fc")
    cfg = build_experiment(data, args)
    out = _out_dir(args)
    labeled = inhomogeneous_g_suite(cfg, matrices, threads=args.threads)
    runs, outputs, curves = [], [], []
    for label, curve in labeled:
        curve = dataclasses.replace(curve, label=label)
        path = out / f"{label}.csv"
        write_curve_csv(curve, path)
        outputs.append(path.name)
        curves.append((curve, cfg.min_errors))
        print(f"{label}: {len(curve.points)} points -> {path}")
    runs.append({"label": "base", "config": _config_dict(cfg),
                 "g_matrices": matrices})
    write_manifest(out, "g-inhomo", runs, outputs)
    return _cap_status(curves)


def cmd_gsc(args) -> int:
    data = load_config(args.config) if args.config else {}
    systems = data.get("systems")
    if not systems:
        raise ConfigError("missing required field: systems")
    grid = _expand_grid(data.get("snr_db", {"start": 0, "stop": 40, "step": 4}))
    trials = int(data.get("trials", 200_000))
    seed = args.seed if args.seed is not None else int(data.get("seed", 0))
    out = _out_dir(args)
    runs, outputs = [], []
    for sysdef in systems:
        try:
            cfg = GscConfig(
                n_branches=int(sysdef["n_branches"]),
                selection_rank=int(sysdef["selection_rank"]),
                branch_snrs=sysdef.get("branch_snrs"),
            )
        except KeyError as e:
            raise ConfigError(f"systems entry is missing field: {e.args[0]}")
        except ValueError as e:
            raise ConfigError(str(e))
        curve = gsc_ber_sim(cfg, grid, trials=trials, seed=seed)
        path = out / f"{curve.label}.csv"
        write_curve_csv(curve, path)
        outputs.append(path.name)
        runs.append({"label": curve.label, "config": {
            "n_branches": cfg.n_branches, "selection_rank": cfg.selection_rank,
            "branch_snrs": list(cfg.branch_snrs), "trials": trials,
            "seed": seed, "snr_grid_db": list(grid)}})
        print(f"{curve.label}: {len(curve.points)} points -> {path}")
    for ref in data.get("dgv", []):
        try:
            gd = int(ref["gd"])
            anchor = (float(ref["anchor_snr_db"]), float(ref["anchor_ber"]))
        except KeyError as e:
            raise ConfigError(f"dgv entry is missing field: {e.args[0]}")
        curve = dgv_curve(gd, grid, anchor)
        path = out / f"{curve.label}.csv"
        write_curve_csv(curve, path)
        outputs.append(path.name)
        runs.append({"label": curve.label, "config": {
            "gd": gd, "anchor": list(anchor), "snr_grid_db": list(grid)}})
        print(f"{curve.label}: reference -> {path}")
    write_manifest(out, "gsc", runs, outputs)
    return 0


def cmd_svd_sweep(args) -> int:
    data = load_config(args.config) if args.config else {}
    sweeps = data.get("sweeps")
    if not sweeps:
        raise ConfigError("missing required field: sweeps")
    out = _out_dir(args)
    runs, outputs = [], []
    for sw in sweeps:
        try:
            k = int(sw["k"])
            indices = [int(i) for i in sw["indices"]]
            n_rx_list = _expand_grid(sw["n_rx"], field="n_rx")
        except KeyError as e:
            raise ConfigError(f"sweeps entry is missing field: {e.args[0]}")
        n_paths = int(sw.get("n_paths", 3))
        n_seeds = int(sw.get("n_seeds", 100))
        seed = args.seed if args.seed is not None else int(sw.get("seed", 0))
        table = singular_value_sweep(
            k=k, n_paths=n_paths, n_rx_list=[int(n) for n in n_rx_list],
            indices=indices, n_seeds=n_seeds, seed=seed,
            g_db=float(sw.get("g_db", -20.0)))
        label = sw.get("label", f"svd_k{k}")
        path = out / f"{label}.csv"
        table.write_csv(path)
        outputs.append(path.name)
        runs.append({"label": label, "config": {
            "k": k, "indices": indices, "n_rx": [int(n) for n in n_rx_list],
            "n_paths": n_paths, "n_seeds": n_seeds, "seed": seed}})
        print(f"{label}: {len(table.n_rx)} sizes -> {path}")
    write_manifest(out, "svd-sweep", runs, outputs)
    return 0


def cmd_gain(args) -> int:
    if args.gain_mode is None or args.ns is None or args.L is None:
        raise ConfigError("gain requires --mode, --ns and --L")
    value = diversity_gain_formula(
        args.gain_mode, args.ns, args.L,
        k_tx=args.kt if args.kt is not None else 1,
        k_rx=args.kr if args.kr is not None else 1,
        k_bs=args.kb if args.kb is not None else 1)
    print(value)
    return 0


def cmd_replay(args) -> int:
    try:
        with open(args.manifest) as f:
            manifest = json.load(f)
    except FileNotFoundError:
        raise ConfigError(f"manifest not found: {args.manifest}")
    except json.JSONDecodeError as e:
        raise ConfigError(f"manifest does not parse: {e}")
    sub = manifest.get("subcommand")
    out = _out_dir(args)
    if sub in ("ber", "pc-compare", "multiuser"):
        for run in manifest["runs"]:
            conf = dict(run["config"])
            conf.pop("config_hash", None)
            cfg = ExperimentConfig(**conf)
            curve = run_campaign(cfg, threads=args.threads)
            curve = dataclasses.replace(curve, label=run["label"])
            write_curve_csv(curve, out / f"{run['label']}.csv")
            print(f"replayed {run['label']}")
        return 0
    if sub == "g-inhomo":
        run = manifest["runs"][0]
        conf = dict(run["config"])
        conf.pop("config_hash", None)
        cfg = ExperimentConfig(**conf)
        for label, curve in inhomogeneous_g_suite(cfg, run["g_matrices"],
                                                  threads=args.threads):
            curve = dataclasses.replace(curve, label=label)
            write_curve_csv(curve, out / f"{label}.csv")
            print(f"replayed {label}")
        return 0
    if sub == "gsc":
        for run in manifest["runs"]:
            conf = run["config"]
            if "gd" in conf:
                curve = dgv_curve(conf["gd"], conf["snr_grid_db"], tuple(conf["anchor"]))
            else:
                cfg = GscConfig(conf["n_branches"], conf["selection_rank"],
                                conf.get("branch_snrs"))
                curve = gsc_ber_sim(cfg, conf["snr_grid_db"],
                                    trials=conf["trials"], seed=conf["seed"])
            write_curve_csv(curve, out / f"{run['label']}.csv")
            print(f"replayed {run['label']}")
        return 0
    if sub == "svd-sweep":
        for run in manifest["runs"]:
            conf = run["config"]
            table = singular_value_sweep(
                k=conf["k"], n_paths=conf["n_paths"], n_rx_list=conf["n_rx"],
                indices=conf["indices"], n_seeds=conf["n_seeds"], seed=conf["seed"])
            table.write_csv(out / f"{run['label']}.csv")
            print(f"replayed {run['label']}")
        return 0
    raise ConfigError(f"manifest subcommand {sub!r} cannot be replayed")


# -- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="distmimo",
        description="Distributed-subarray mmWave massive MIMO simulations")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, campaign=True):
        p.add_argument("--config", help="TOML config file")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out-dir", default="out")
        p.add_argument("--threads", type=int, default=1,
                       help="worker threads; never changes results")
        if campaign:
            p.add_argument("--min-errors", type=int, default=None)
            p.add_argument("--max-trials", type=int, default=None)
            p.add_argument("--mode", choices=MODES, default=None)
            p.add_argument("--ns", type=int, default=None, help="data streams")
            p.add_argument("--L", type=int, default=None, help="paths per subchannel")
            p.add_argument("--kt", type=int, default=None)
            p.add_argument("--kr", type=int, default=None)
            p.add_argument("--nt", type=int, default=None)
            p.add_argument("--nr", type=int, default=None)
            p.add_argument("--kb", type=int, default=None)
            p.add_argument("--ku", type=int, default=None)
            p.add_argument("--nb", type=int, default=None)
            p.add_argument("--nu", type=int, default=None)
            p.add_argument("--g-db", type=float, default=None)
            p.add_argument("--snr-start", type=float, default=None)
            p.add_argument("--snr-stop", type=float, default=None)
            p.add_argument("--snr-step", type=float, default=None)

    common(sub.add_parser("ber", help="BER campaign(s)"))
    common(sub.add_parser("pc-compare", help="matched FC vs PC curves"))
    common(sub.add_parser("multiuser", help="multiuser downlink curves"))
    common(sub.add_parser("g-inhomo", help="inhomogeneous fading suite"))
    common(sub.add_parser("gsc", help="GSC and DGV reference curves"), campaign=False)
    common(sub.add_parser("svd-sweep", help="singular values vs array size"),
           campaign=False)

    gain = sub.add_parser("gain", help="closed-form diversity gain")
    gain.add_argument("--mode", dest="gain_mode",
                      choices=["full", "pc", "mu_downlink"], default=None)
    gain.add_argument("--ns", type=int, default=None)
    gain.add_argument("--L", type=int, default=None)
    gain.add_argument("--kt", type=int, default=None)
    gain.add_argument("--kr", type=int, default=None)
    gain.add_argument("--kb", type=int, default=None)

    rep = sub.add_parser("replay", help="re-run a manifest")
    rep.add_argument("manifest")
    rep.add_argument("--out-dir", default="out")
    rep.add_argument("--threads", type=int, default=1)
    return parser


COMMANDS = {
    "ber": cmd_ber,
    "pc-compare": cmd_pc_compare,
    "multiuser": cmd_multiuser,
    "g-inhomo": cmd_g_inhomo,
    "gsc": cmd_gsc,
    "svd-sweep": cmd_svd_sweep,
    "gain": cmd_gain,
    "replay": cmd_replay,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except (PreconditionError, RankDeficientChannelError) as e:
        print(f"precondition violation: {e}", file=sys.stderr)
        return 3
    except ValueError as e:
        if args.command == "gain":
            print(f"precondition violation: {e}", file=sys.stderr)
            return 3
        raise


if __name__ == "__main__":
    sys.exit(main())
