"""Command-line entry point: ``hypmnnr <command> [flags]``.

Exit codes: 0 success, 2 usage or configuration error, 3 numerical
non-convergence.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .analytics import (ExpectationSpec, PathlossModel, expected_interference, pair_fraction,
                        pathloss_tail_integral)
from .errors import HypMNNRError, NonConvergenceError
from .marks import DegenerateMarks, beta_from_mean_var, parse_control_set, parse_mark_model
from .mnnr import mnnr_partition
from .numerics import volume_F_mc, volume_F_paper, volume_F_slice
from .pointprocess import OPEN, Window, read_pattern
from .simharness import ExperimentConfig, run_interference_sweep, run_pair_fraction

EXIT_OK, EXIT_USAGE, EXIT_NONCONVERGENCE = 0, 2, 3

# settings shared by the commands that sample patterns
_SIM = {"seed": 0, "reps": 400, "window": "30x30", "boundary": "torus", "workers": 1}
_MODEL = {"lambda": 1.0, "control": "full", "mode": "analytic", "nodes": 32}

DEFAULTS = {
    "pair-fraction": {**_MODEL, **_SIM, "marks": "degenerate:mu=0.5", "out": None},
    "sweep-variance": {**_MODEL, **_SIM, "mean": 0.5, "variances": None, "out": None},
    "interference": {**_MODEL, **_SIM, "marks": "degenerate:mu=0.5", "beta": 2.5,
                     "excl_radius": [1.0], "out": None},
    "cluster": {"input": None, "control": "full", "boundary": None, "window": None, "out": None},
    "volume": {"s": None, "z": None, "ztilde": None, "marks": None, "method": "slice",
               "mc_n": 1_000_000, "seed": 0, "out": None},
}
# settings that do not change results and are left out of the echoed config
_NOT_ECHOED = ("workers", "out")


class UsageError(HypMNNRError):
    pass


# --------------------------------------------------------------------------
# argument parsing


def _float_list(text: str) -> list[float]:
    try:
        vals = [float(v) for v in text.replace(";", ",").split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of numbers, got {text!r}")
    return vals


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hypmnnr", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, sim=True):
        sp.add_argument("--config", type=Path, help="JSON file of settings; flags override it")
        sp.add_argument("--out", help="output path (default: stdout)")
        if sim:
            sp.add_argument("--lambda", dest="lambda", type=float, default=None, help="intensity")
            sp.add_argument("--control", default=None, help="control set: full, empty, minproduct:tau=.., maxratio:rho=..")
            sp.add_argument("--mode", choices=["analytic", "sim", "both"], default=None)
            sp.add_argument("--nodes", type=int, default=None, help="quadrature nodes for the outer mark")
            sp.add_argument("--seed", type=int, default=None, help="master seed")
            sp.add_argument("--reps", type=int, default=None, help="simulation replicates")
            sp.add_argument("--window", default=None, help="window as WxH")
            sp.add_argument("--boundary", choices=["torus", "open"], default=None)
            sp.add_argument("--workers", type=int, default=None, help="worker processes")

    sp = sub.add_parser("pair-fraction", help="fraction of atoms in cooperative pairs")
    common(sp)
    sp.add_argument("--marks", default=None, help="degenerate:mu=.., beta:mean=..,var=.., uniform:lo=..,hi=..")

    sp = sub.add_parser("sweep-variance", help="pair fraction over Beta mark variances")
    common(sp)
    sp.add_argument("--mean", type=float, default=None)
    sp.add_argument("--variances", type=_float_list, default=None)

    sp = sub.add_parser("interference", help="mean interference from singles and pairs",
                        description="Singles use (1 - P_D) * lambda * tail integral and pairs "
                                    "P_D * lambda * tail integral (the intensity split of the "
                                    "partition); *_window columns truncate the tail at half the "
                                    "shorter window side, as the simulation does.")
    common(sp)
    sp.add_argument("--marks", default=None)
    sp.add_argument("--beta", type=float, default=None, help="pathloss exponent (> 2)")
    sp.add_argument("--excl-radius", dest="excl_radius", type=_float_list, default=None,
                    help="exclusion radius, or a comma-separated sweep")

    sp = sub.add_parser("cluster", help="partition a point file into pairs and singles")
    common(sp, sim=False)
    sp.add_argument("--input", default=None, help="CSV file with header x,y,z")
    sp.add_argument("--control", default=None)
    sp.add_argument("--boundary", choices=["torus", "open"], default=None)
    sp.add_argument("--window", default=None)

    sp = sub.add_parser("volume", help="evaluate the union volume F(s, z, ztilde)")
    common(sp, sim=False)
    sp.add_argument("--s", type=float, default=None)
    sp.add_argument("--z", type=float, default=None)
    sp.add_argument("--ztilde", type=float, default=None)
    sp.add_argument("--marks", default=None)
    sp.add_argument("--method", choices=["slice", "paper", "mc", "all"], default=None)
    sp.add_argument("--mc-n", dest="mc_n", type=int, default=None)
    sp.add_argument("--seed", type=int, default=None)
    return p


def resolve(args: argparse.Namespace) -> dict:
    """Defaults, then the config file, then explicitly given flags."""
    cfg = dict(DEFAULTS[args.command])
    if args.config is not None:
        try:
            data = json.loads(Path(args.config).read_text())
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(data, dict):
            raise UsageError("config file must hold a JSON object")
        command = data.pop("command", args.command)
        if command != args.command:
            raise UsageError(f"config is for {command!r}, not {args.command!r}")
        unknown = sorted(set(data) - set(cfg))
        if unknown:
            raise UsageError(f"unknown config keys for {args.command}: {', '.join(unknown)}")
        cfg.update(data)
    for key in cfg:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    return cfg


def _window(text, boundary) -> Window:
    try:
        w, h = (float(v) for v in str(text).lower().split("x"))
    except ValueError:
        raise UsageError(f"window must look like WxH, got {text!r}") from None
    return Window(w, h, boundary)


def _experiment(cfg: dict, marks, pathloss=None) -> ExperimentConfig:
    return ExperimentConfig(float(cfg["lambda"]), _window(cfg["window"], cfg["boundary"]), marks,
                            parse_control_set(cfg["control"]), replicates=int(cfg["reps"]),
                            master_seed=int(cfg["seed"]), pathloss=pathloss, workers=int(cfg["workers"]))


# --------------------------------------------------------------------------
# output


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return "yes" if x else "no"
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _header(command: str, cfg: dict) -> list[str]:
    echoed = {k: v for k, v in cfg.items() if k not in _NOT_ECHOED}
    stamp = datetime.now(timezone.utc).replace(microsecond=0).isoformat()
    return [f"# hypmnnr {__version__}",
            f"# command: {command}",
            f"# config: {json.dumps(echoed, sort_keys=True)}",
            f"# seed: {cfg.get('seed', '')}",
            f"# timestamp: {stamp}"]


def _emit(text: str, out) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _write_csv(command: str, cfg: dict, columns: list[str], rows: list[list], notes=()) -> None:
    buf = io.StringIO()
    for line in _header(command, cfg) + [f"# {n}" for n in notes]:
        buf.write(line + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    _emit(buf.getvalue(), cfg.get("out"))


def _agree(analytic: float, summary) -> bool:
    return abs(analytic - summary.mean) <= 3.0 * summary.stderr


# --------------------------------------------------------------------------
# commands


def _mode(cfg):
    mode = cfg["mode"]
    if mode not in ("analytic", "sim", "both"):
        raise UsageError(f"mode must be analytic, sim or both, got {mode!r}")
    return mode in ("analytic", "both"), mode in ("sim", "both")


def cmd_pair_fraction(cfg: dict) -> int:
    marks = parse_mark_model(cfg["marks"])
    control = parse_control_set(cfg["control"])
    want_a, want_s = _mode(cfg)
    cols = ["quantity", "mean", "stderr", "ci_lo", "ci_hi", "replicates", "seed"]
    rows = []
    value = summary = None
    if want_a:
        value = pair_fraction(float(cfg["lambda"]), marks, control, ExpectationSpec(nodes=int(cfg["nodes"])))
        rows.append(["pair_fraction_analytic", value, 0.0, value, value, 0, None])
    if want_s:
        summary = run_pair_fraction(_experiment(cfg, marks))
        rows.append(["pair_fraction_sim", summary.mean, summary.stderr, *summary.ci95,
                     summary.replicates, int(cfg["seed"])])
    if want_a and want_s:
        cols.append("agree")
        verdict = _agree(value, summary)
        for row in rows:
            row.append(verdict)
    _write_csv("pair-fraction", cfg, cols, rows)
    return EXIT_OK


def cmd_sweep_variance(cfg: dict) -> int:
    variances = cfg["variances"]
    if not variances:
        raise UsageError("--variances needs at least one value")
    models = [beta_from_mean_var(float(cfg["mean"]), float(v)) for v in variances]
    control = parse_control_set(cfg["control"])
    want_a, want_s = _mode(cfg)
    cols = ["variance", "analytic", "sim_mean", "sim_stderr", "ci_lo", "ci_hi", "replicates", "seed"]
    if want_a and want_s:
        cols.append("agree")
    rows = []
    for v, m in zip(variances, models):
        value = summary = None
        if want_a:
            value = pair_fraction(float(cfg["lambda"]), m, control, ExpectationSpec(nodes=int(cfg["nodes"])))
        row = [float(v), value]
        if want_s:
            summary = run_pair_fraction(_experiment(cfg, m))
            row += [summary.mean, summary.stderr, *summary.ci95, summary.replicates, int(cfg["seed"])]
        else:
            row += [None] * 6
        if want_a and want_s:
            row.append(_agree(value, summary))
        rows.append(row)
    _write_csv("sweep-variance", cfg, cols, rows)
    return EXIT_OK


def cmd_interference(cfg: dict) -> int:
    marks = parse_mark_model(cfg["marks"])
    control = parse_control_set(cfg["control"])
    lam = float(cfg["lambda"])
    radii = cfg["excl_radius"]
    if isinstance(radii, (int, float)):
        radii = [radii]
    if not radii:
        raise UsageError("--excl-radius needs at least one value")
    pls = [PathlossModel(float(cfg["beta"]), float(R)) for R in radii]
    window = _window(cfg["window"], cfg["boundary"])
    r_max = 0.5 * min(window.width, window.height)
    want_a, want_s = _mode(cfg)
    cols = ["excl_radius"]
    if want_a:
        cols += ["singles_analytic", "pairs_analytic", "sum_analytic", "lambda_tail",
                 "singles_window", "pairs_window", "lambda_tail_window"]
    if want_s:
        cols += ["singles_sim", "singles_stderr", "pairs_sim", "pairs_stderr", "replicates", "seed"]
    if want_a and want_s:
        cols.append("agree")
    p_d = pair_fraction(lam, marks, control, ExpectationSpec(nodes=int(cfg["nodes"]))) if want_a else None
    sims = run_interference_sweep(_experiment(cfg, marks, pls[0]), radii) if want_s else None
    rows = []
    for k, pl in enumerate(pls):
        row = [float(pl.excl_radius)]
        if want_a:
            si, pa = expected_interference(lam, marks, control, pl, p_d=p_d)
            sw, pw = expected_interference(lam, marks, control, pl, r_max=r_max, p_d=p_d)
            row += [si, pa, si + pa, lam * pathloss_tail_integral(pl),
                    sw, pw, lam * pathloss_tail_integral(pl, r_max)]
        if want_s:
            s1, s2 = sims[k]
            row += [s1.mean, s1.stderr, s2.mean, s2.stderr, s1.replicates, int(cfg["seed"])]
        if want_a and want_s:
            row.append(_agree(sw, s1) and _agree(pw, s2))
        rows.append(row)
    notes = ["singles = (1 - P_D) * lambda * tail integral; pairs = P_D * lambda * tail integral"]
    _write_csv("interference", cfg, cols, rows, notes)
    return EXIT_OK


def cmd_cluster(cfg: dict) -> int:
    if not cfg["input"]:
        raise UsageError("cluster needs --input")
    window = None
    if cfg["window"]:
        window = _window(cfg["window"], cfg["boundary"] or "torus")
    pattern = read_pattern(cfg["input"], window)
    boundary = cfg["boundary"] or (pattern.window.boundary if pattern.window else OPEN)
    control = parse_control_set(cfg["control"])
    part = mnnr_partition(pattern, control, pattern.metric(boundary))
    data = part.to_json()
    echoed = {k: v for k, v in cfg.items() if k not in _NOT_ECHOED}
    data["meta"] = {"version": __version__, "config": echoed}
    text = json.dumps(data, indent=2) + "\n"
    if cfg["out"]:
        Path(cfg["out"]).write_text(text)
    else:
        sys.stdout.write(text)
    print(f"atoms={part.n} pairs={len(part.pairs)} singles={len(part.singles)} "
          f"pair_fraction={part.pair_fraction:.6f}", file=sys.stderr if not cfg["out"] else sys.stdout)
    return EXIT_OK


def cmd_volume(cfg: dict) -> int:
    for key in ("s", "z", "ztilde", "marks"):
        if cfg[key] is None:
            raise UsageError(f"volume needs --{key}")
    s, z, zt = float(cfg["s"]), float(cfg["z"]), float(cfg["ztilde"])
    marks = parse_mark_model(cfg["marks"])
    method = cfg["method"]
    methods = ["slice", "paper", "mc"] if method == "all" else [method]
    results = []
    for name in methods:
        if name == "slice":
            results.append(volume_F_slice(s, z, zt, marks))
        elif name == "paper":
            if isinstance(marks, DegenerateMarks):
                if method == "all":
                    continue
            results.append(volume_F_paper(s, z, zt, marks))
        elif name == "mc":
            rng = np.random.default_rng(int(cfg["seed"]))
            results.append(volume_F_mc(s, z, zt, marks, int(cfg["mc_n"]), rng))
        else:
            raise UsageError(f"unknown method {name!r}")
    buf = io.StringIO()
    for r in results:
        buf.write(f"F={r.value!r} method={r.method} stderr={r.stderr!r}\n")
    if len(results) > 1:
        exact = [r for r in results if r.stderr == 0]
        dev = max((abs(a.value - b.value) for i, a in enumerate(exact) for b in exact[i + 1:]), default=0.0)
        noisy = [r for r in results if r.stderr > 0]
        z_scores = [abs(n.value - e.value) / n.stderr for n in noisy for e in exact]
        buf.write(f"max_deviation={dev!r}")
        if z_scores:
            buf.write(f" max_mc_z={max(z_scores):.3f}")
        buf.write("\n")
    if cfg["out"]:
        rows = [[r.method, r.value, r.stderr] for r in results]
        _write_csv("volume", cfg, ["method", "value", "stderr"], rows)
    sys.stdout.write(buf.getvalue())
    return EXIT_OK


COMMANDS = {
    "pair-fraction": cmd_pair_fraction,
    "sweep-variance": cmd_sweep_variance,
    "interference": cmd_interference,
    "cluster": cmd_cluster,
    "volume": cmd_volume,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = resolve(args)
        return COMMANDS[args.command](cfg)
    except NonConvergenceError as exc:
        print(f"hypmnnr: did not converge: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except (HypMNNRError, ValueError) as exc:
        print(f"hypmnnr: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
