"""Command-line front end: single runs, sweeps, criteria, Monte Carlo.

Every subcommand is deterministic under a fixed seed: identical flags
produce identical bytes.  Machine output (CSV/JSON) renders doubles with 17
significant digits; human tables use 6.

Exit codes: 0 success, 2 usage/configuration error, 3 self-test failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .criteria import cluster_combos, evaluate, ghz_combos, nopa_criteria
from .gaussian import state_from_json
from .jsonutil import format_float, render
from .ledger import ledger_to_json
from .protocol import (
    ProtocolConfig,
    added_noise,
    build_four_mode_state,
    consistency_zscores,
    ideal_reference,
    run_protocol,
    transfer_report,
)
from .stations import run_network

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_SELFTEST = 3

_CONFIG_KEYS = (
    "reflectivity", "r1", "r2", "shots", "seed", "output", "format",
    "grid_R", "grid_r", "emit_ledger", "network", "combos", "state",
)


def _human(x):
    return format(float(x), ".6g")


def _parse_grid(text, name):
    try:
        start, stop, step = (float(v) for v in text.split(":"))
    except ValueError:
        raise ValueError(f"{name} must look like start:stop:step, got {text!r}") from None
    if step <= 0:
        raise ValueError(f"{name} step must be > 0")
    if stop < start:
        raise ValueError(f"{name} is empty (stop < start)")
    count = int(np.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + k * step, 12) for k in range(count)]


def _load_config_file(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ValueError(f"cannot read config file {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ValueError("config file must contain a JSON object")
    unknown = set(doc) - set(_CONFIG_KEYS)
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    return doc


def _merge(args, key, default):
    """Flag value if given, else config-file value, else default."""
    value = getattr(args, key, None)
    if value is not None:
        return value
    if args.file_config and key in args.file_config:
        return args.file_config[key]
    return default


def _resolve(args):
    args.file_config = _load_config_file(args.config) if args.config else {}
    seed = _merge(args, "seed", None)
    if seed is None:
        seed = int(os.environ.get("NOPA_SEED", "0"))
    return {
        "R": float(_merge(args, "reflectivity", 0.5)),
        "r1": float(_merge(args, "r1", 1.0)),
        "r2": float(_merge(args, "r2", 1.0)),
        "shots": int(_merge(args, "shots", 1)),
        "seed": int(seed),
        "output": _merge(args, "output", None),
        "format": _merge(args, "format", None),
    }


def _write_out(path, text):
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _print_table(rows, header):
    widths = [max(len(str(r[i])) for r in [header] + rows) for i in range(len(header))]
    for row in [header] + rows:
        print("  ".join(str(v).rjust(w) for v, w in zip(row, widths)))


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_run(args):
    opts = _resolve(args)
    config = ProtocolConfig(
        R=opts["R"], r1=opts["r1"], r2=opts["r2"], seed=opts["seed"], shots=opts["shots"]
    )
    result = run_protocol(config)
    report = transfer_report(config)
    noise = added_noise(config.r1, config.r2, config.R)
    ideal = ideal_reference(config)

    print(f"reflectivity R = {_human(config.R)}  ->  gain G = {_human(config.gain)}")
    print(f"squeezing r1 = {_human(config.r1)}, r2 = {_human(config.r2)}")
    print()
    print("transfer coefficients (output quadratures over source quadratures):")
    rows = [
        [label] + [_human(v) for v in report.matrix[i]]
        for i, label in enumerate(report.row_labels)
    ]
    _print_table(rows, [""] + list(report.basis_labels))
    print()
    quads = ("X_out_s", "P_out_s", "X_out_i", "P_out_i")
    rows = [
        [q, _human(result.cov[i, i]), _human(ideal.cov[i, i]),
         _human(result.cov[i, i] - ideal.cov[i, i]),
         _human((noise.out_s_x, noise.out_s_p, noise.out_i_x, noise.out_i_p)[i])]
        for i, q in enumerate(quads)
    ]
    _print_table(rows, ["quadrature", "variance", "ideal", "excess", "predicted"])

    if args.emit_ledger and not opts["output"]:
        print()
        print(ledger_to_json(result.ledger))
    if opts["output"]:
        doc = result.to_json()
        if args.emit_ledger:
            doc = doc[:-1] + ',"ledger":' + ledger_to_json(result.ledger) + "}"
        _write_out(opts["output"], doc + "\n")
    return EXIT_OK


def cmd_sweep(args):
    opts = _resolve(args)
    grid_R = _merge(args, "grid_R", None)
    grid_r = _merge(args, "grid_r", None)
    Rs = _parse_grid(grid_R, "--grid-R") if grid_R else [opts["R"]]
    if any(not 0.0 <= R < 1.0 for R in Rs):
        raise ValueError("R grid must lie inside [0, 1)")
    if grid_r:
        r_pairs = [(r, r) for r in _parse_grid(grid_r, "--grid-r")]
    else:
        r_pairs = [(opts["r1"], opts["r2"])]

    lines = ["R,r1,r2,G,var_Xs,var_Ps,var_Xi,var_Pi,excess_Xs,excess_Xi"]
    for R in Rs:
        for r1, r2 in r_pairs:
            config = ProtocolConfig(R=R, r1=r1, r2=r2, seed=opts["seed"])
            result = run_protocol(config)
            noise = added_noise(r1, r2, R)
            values = [R, r1, r2, config.gain,
                      result.cov[0, 0], result.cov[1, 1], result.cov[2, 2], result.cov[3, 3],
                      noise.out_s_x, noise.out_i_x]
            lines.append(",".join(format_float(v) for v in values))
    _write_out(opts["output"], "\n".join(lines) + "\n")
    return EXIT_OK


def cmd_criteria(args):
    opts = _resolve(args)
    combos = _merge(args, "combos", "nopa")
    state_path = _merge(args, "state", None)

    if combos == "nopa":
        _, led = build_four_mode_state(opts["r1"], opts["r2"], opts["R"])
        report = evaluate(led, nopa_criteria(opts["R"]))
    else:
        if not state_path:
            raise ValueError(f"--combos {combos} requires --state <path>")
        try:
            with open(state_path, "r", encoding="utf-8") as fh:
                state = state_from_json(fh.read())
        except (OSError, json.JSONDecodeError) as exc:
            raise ValueError(f"cannot load state file {state_path}: {exc}") from exc
        if state.num_modes != 4:
            raise ValueError(f"criteria need a 4-mode state, got {state.num_modes} modes")
        family = cluster_combos if combos == "cluster" else ghz_combos
        report = evaluate(state, family(state.modes))

    if opts["format"] == "json":
        doc = {
            "criteria": [
                {"label": r.label, "variance": r.variance, "bound": r.bound,
                 "margin": r.margin, "pass": r.passed}
                for r in report.results
            ],
            "pass": report.passed,
        }
        _write_out(opts["output"], render(doc) + "\n")
    else:
        rows = [
            [r.label, _human(r.variance), _human(r.bound), _human(r.margin),
             "pass" if r.passed else "fail"]
            for r in report.results
        ]
        _print_table(rows, ["criterion", "variance", "bound", "margin", "result"])
        print(f"overall: {'pass' if report.passed else 'fail'}")
    return EXIT_OK


def cmd_montecarlo(args):
    opts = _resolve(args)
    if opts["shots"] < 100:
        raise ValueError("montecarlo needs --shots >= 100")
    config = ProtocolConfig(
        R=opts["R"], r1=opts["r1"], r2=opts["r2"], seed=opts["seed"], shots=opts["shots"]
    )
    result = run_protocol(config)
    scores = consistency_zscores(result)

    quads = ("X_out_s", "P_out_s", "X_out_i", "P_out_i")
    print(f"{config.shots} shots, seed {config.seed}")
    rows = [
        [q, _human(result.sampled_mean[i]), _human(result.mean[i]), _human(scores.mean_z[i]),
         _human(result.sampled_cov[i, i]), _human(result.cov[i, i]), _human(scores.cov_z[i, i])]
        for i, q in enumerate(quads)
    ]
    _print_table(
        rows,
        ["quadrature", "mean", "exact", "z", "variance", "exact", "z"],
    )
    print(f"max |z| over all moments: {_human(scores.max_abs)}")

    failed = scores.max_abs > 6.0
    if failed:
        print("SELF-TEST FAILED: sampled moments deviate beyond 6 standard errors")

    if _merge(args, "network", False):
        net_result, _ = run_network(config)
        dev_mean = float(np.abs(net_result.shot_means - result.shot_means).max())
        dev_cov = float(np.abs(net_result.conditional_cov - result.conditional_cov).max())
        print(f"network equivalence: max per-shot mean deviation {dev_mean:.3e}, "
              f"conditional cov deviation {dev_cov:.3e}")
        if dev_mean > 1e-12 or dev_cov > 1e-12:
            print("SELF-TEST FAILED: station network deviates from direct pipeline")
            failed = True

    return EXIT_SELFTEST if failed else EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-R", "--reflectivity", type=float, help="splitter reflectivity in [0, 1)")
    common.add_argument("--r1", type=float, help="squeezing of the first EPR pair")
    common.add_argument("--r2", type=float, help="squeezing of the second EPR pair")
    common.add_argument("--shots", type=int, help="number of Monte Carlo shots")
    common.add_argument("--seed", type=int, help="RNG seed (falls back to $NOPA_SEED, then 0)")
    common.add_argument("--output", help="write machine output to this path")
    common.add_argument("--format", choices=("csv", "json"), help="machine output format")
    common.add_argument("--config", help="JSON config file; flags override its values")

    parser = argparse.ArgumentParser(
        prog="nopasim",
        description="Nonlocal two-mode amplifier simulator (covariance engine + exact ledger)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", parents=[common], help="single run: transfer, variances, noise")
    p.add_argument("--emit-ledger", action="store_true", dest="emit_ledger", default=None,
                   help="include the Heisenberg ledger JSON in the output")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", parents=[common], help="parameter sweep to CSV")
    p.add_argument("--grid-R", dest="grid_R", help="R grid as start:stop:step")
    p.add_argument("--grid-r", dest="grid_r", help="squeezing grid (r1=r2) as start:stop:step")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("criteria", parents=[common], help="inseparability criterion report")
    p.add_argument("--combos", choices=("nopa", "cluster", "ghz"),
                   help="criterion family (default nopa)")
    p.add_argument("--state", help="JSON state file for cluster/ghz evaluation")
    p.set_defaults(func=cmd_criteria)

    p = sub.add_parser("montecarlo", parents=[common],
                       help="sampled vs exact moments; nonzero exit beyond 6 sigma")
    p.add_argument("--network", action="store_true", default=None,
                   help="route through the station network and assert equivalence")
    p.set_defaults(func=cmd_montecarlo)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
