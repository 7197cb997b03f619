"""Command-line entry point: ``suppil <subcommand> [flags]``.

Exit status is 0 when every check passes, 2 when any check fails and 1 on a
usage or configuration error.  Summaries go to standard error; CSV goes to
``--out`` (a directory, or ``-`` for standard output).
"""

from __future__ import annotations

import argparse
import sys
from importlib import resources
from pathlib import Path

from . import checks
from .config import ConfigError, SuiteConfig, mdp_from_text, parse_config, parse_config_text, parse_range
from .harness import TrialFailure, rows_to_csv, run_suite
from .mdp import validate_mdp

EXIT_OK, EXIT_USAGE, EXIT_FAIL = 0, 1, 2

SUBCOMMANDS = ("validate", "example1", "prop2", "gap-scaling", "lower-bound", "landscape",
               "binomial", "run")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _seed(text):
    value = int(text, 0)
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _positive(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="suppil", description="Imitation learning with a supplementary "
                                                "dataset: checks and experiment suites.")
    common = _Parser(add_help=False)
    common.add_argument("--config", help="INI configuration file")
    common.add_argument("--seed", type=_seed, help="master seed (unsigned 64-bit)")
    common.add_argument("--out", default="-", help="output directory, or - for stdout")
    common.add_argument("--trials", type=_positive, help="override the trial count")
    common.add_argument("--jobs", type=_positive, default=1,
                        help="worker processes; results do not depend on it")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    helps = {
        "validate": "check a configuration file (and optionally an MDP file)",
        "example1": "reproduce the worked two-dimensional discriminator example",
        "prop2": "tabular WBCU versus BC on random instances",
        "gap-scaling": "imitation-gap rate experiments",
        "lower-bound": "NBCU lower-bound experiment on the standard imitation instance",
        "landscape": "margin, Lipschitz, quadratic-growth and condition batteries",
        "binomial": "E[1/(X+1)] <= 1/(np) for X ~ Bin(n, p)",
        "run": "run the experiments of a configuration file",
    }
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, parents=[common], help=helps[name], description=helps[name])
        if name == "validate":
            p.add_argument("--mdp", help="plain-text MDP file to validate")
        if name == "binomial":
            p.add_argument("--n", type=_positive, help="single n (with --p)")
            p.add_argument("--p", type=float, help="single p in (0, 1) (with --n)")
    return parser


def _log(msg):
    print(msg, file=sys.stderr)


def _dict_rows(dicts):
    if not dicts:
        return [[]]
    header = list(dicts[0])
    out = [header]
    for d in dicts:
        out.append([_cell(d[k]) for k in header])
    return out


def _cell(v):
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _emit(rows, out, name):
    text = rows_to_csv(rows)
    if out == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    directory = Path(out)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / f"{name}.csv"
    path.write_text(text)
    _log(f"wrote {path}")


def _load(args, builtin=None) -> SuiteConfig:
    if args.config:
        cfg = parse_config(args.config)
    elif builtin is not None:
        text = resources.files("suppil").joinpath("suites", builtin).read_text()
        cfg = parse_config_text(text)
    else:
        cfg = SuiteConfig()
    return cfg.with_overrides(trials=args.trials, seed=args.seed)


def _suite_failures(rows):
    fails = []
    for row in rows[1:]:
        extra = dict(kv.split("=", 1) for kv in row[-1].split(";") if "=" in kv)
        if extra.get("holds") == "false":
            fails.append(f"{row[0]} {row[2]}" + (f" eta={row[3]} n_tot={row[4]}" if row[3] else
                                                  f" {extra.get('kind', '')}"))
    return fails


def _run_suite(args, cfg, name):
    if not cfg.experiments:
        raise ConfigError(["configuration defines no [experiment NAME] sections"])
    rows = run_suite(cfg, jobs=args.jobs, log=_log)
    _emit(rows, args.out, name)
    fails = _suite_failures(rows)
    for f in fails:
        _log(f"FAIL {f}")
    _log(f"{name}: {len(fails)} failing check(s)" if fails else f"{name}: all checks pass")
    return EXIT_FAIL if fails else EXIT_OK


def _cmd_validate(args):
    if not args.config and not args.mdp:
        raise UsageError("validate needs --config and/or --mdp")
    rows = [["kind", "name", "detail"]]
    status = EXIT_OK
    if args.config:
        cfg = parse_config(args.config).with_overrides(trials=args.trials, seed=args.seed)
        for exp in cfg.experiments:
            rows.append(["experiment", exp.name,
                         f"instance={exp.instance.name};algorithms={'+'.join(exp.algorithms)};"
                         f"cells={len(exp.cells())};trials={exp.trials};seed={exp.seed}"])
        for name, settings in cfg.checks.items():
            rows.append(["check", name, ";".join(f"{k}={v}" for k, v in settings.items())])
        _log(f"config ok: {len(cfg.experiments)} experiment(s), {len(cfg.checks)} check section(s)")
    if args.mdp:
        try:
            mdp = mdp_from_text(Path(args.mdp).read_text())
        except (OSError, ValueError) as exc:
            raise ConfigError([f"{args.mdp}: {exc}"]) from None
        violations = validate_mdp(mdp)
        for v in violations:
            rows.append(["violation", v.kind, f"index={v.index};value={v.value!r}"])
        _log(f"mdp {mdp.shape}: {len(violations)} violation(s)")
        if violations:
            status = EXIT_FAIL
    _emit(rows, args.out, "validate")
    return status


def _battery(args, battery, name):
    _emit(_dict_rows(battery.rows), args.out, name)
    _log(battery.summary + (" PASS" if battery.passed else " FAIL"))
    return EXIT_OK if battery.passed else EXIT_FAIL


def _cmd_example1(args):
    qs = checks.example1_quantities()
    for q in qs:
        _log(f"{'PASS' if q.passed else 'FAIL'} {q.name}: {q.value:.6g} "
             f"(expected {q.expected:.6g} +/- {q.tolerance:g})")
    return _battery(args, checks.example1_battery(), "example1")


def _cmd_prop2(args):
    s = _load(args).check_settings("prop2")
    if args.trials is not None:
        s["trials"] = args.trials
    if args.seed is not None:
        s["seed"] = args.seed
    return _battery(args, checks.prop2_battery(**s), "prop2")


def _cmd_landscape(args):
    s = _load(args).check_settings("landscape")
    if args.trials is not None:
        s["trials"] = args.trials
    if args.seed is not None:
        s["seed"] = args.seed
    return _battery(args, checks.landscape_battery(**s), "landscape")


def _cmd_binomial(args):
    if (args.n is None) != (args.p is None):
        raise UsageError("--n and --p must be given together")
    if args.n is not None:
        if not 0.0 < args.p < 1.0:
            raise UsageError("--p must lie strictly between 0 and 1")
        battery = checks.binomial_battery([args.n], [args.p])
        r = battery.rows[0]
        _log(f"n={r['n']} p={r['p']:g}: exact {r['exact']:.6g}, bound {r['bound']:.6g}, "
             f"{'holds' if r['holds'] else 'violated'}")
    else:
        s = _load(args).check_settings("binomial")
        try:
            ps = parse_range(str(s["p_values"]))
        except ValueError as exc:
            raise ConfigError([f"[binomial] p_values: {exc}"]) from None
        if not ps or not all(0.0 < p < 1.0 for p in ps):
            raise ConfigError(["[binomial] p_values: values must lie strictly in (0, 1)"])
        battery = checks.binomial_battery(range(1, int(s["n_max"]) + 1), ps)
    return _battery(args, battery, "binomial")


def dispatch(command, args) -> int:
    if command == "validate":
        return _cmd_validate(args)
    if command == "example1":
        return _cmd_example1(args)
    if command == "prop2":
        return _cmd_prop2(args)
    if command == "landscape":
        return _cmd_landscape(args)
    if command == "binomial":
        return _cmd_binomial(args)
    if command == "gap-scaling":
        return _run_suite(args, _load(args, "gap_scaling.ini"), "gap-scaling")
    if command == "lower-bound":
        return _run_suite(args, _load(args, "lower_bound.ini"), "lower-bound")
    if command == "run":
        if not args.config:
            raise UsageError("run needs --config")
        return _run_suite(args, _load(args), "run")
    raise UsageError(f"unknown subcommand {command!r}")


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return dispatch(args.command, args)
    except UsageError as exc:
        _log(f"usage error: {exc}")
        return EXIT_USAGE
    except ConfigError as exc:
        for err in exc.errors:
            _log(f"config error: {err}")
        return EXIT_USAGE
    except TrialFailure as exc:
        _log(f"trial failure: {exc}")
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
