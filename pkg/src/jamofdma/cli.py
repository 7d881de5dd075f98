"""
Command-line entry point.

Subcommands
-----------
run
    One scheme on one scenario (random drop or fixture); prints per-user rates.
sweep
    Monte-Carlo sweep of one variable; CSV or a summary table.
analyze
    Jamming thresholds, bounds and optimal powers for every subcarrier.
fixture
    Print the built-in 3-user, 5-subcarrier example channel.

Flags may also come from ``--config FILE`` holding flat ``key=value`` lines
(same names as the long flags); command-line flags win. A relative
``--output`` path is placed under ``$JAMOFDMA_OUTPUT_DIR`` when that is set.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from pathlib import Path

import numpy as np

from .channel_model import (
    EXAMPLE_FIXTURE_TEXT,
    ChannelParseError,
    ScenarioConfig,
    db_to_linear,
    example_fixture,
    generate_channels,
    load_channels,
)
from .harness import SCHEMES, SweepSpec, aggregate, emit_csv, format_summary, run_trials
from .jammer_analysis import analyze_subcarrier

OUTPUT_DIR_ENV = "JAMOFDMA_OUTPUT_DIR"
FIXTURE_NAME = "paper3x5"
SUMRATE_SCHEMES = ("jpa", "jpaso", "epa", "ospwj")
MAXMIN_SCHEMES = ("pfa", "oda", "pfaso", "odaso", "ospwj_fair", "maxmin_ub")


class CliError(Exception):
    """User-facing failure; reported on stderr with exit status 1."""


def _pair(text: str) -> tuple:
    parts = text.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected X,Y, got {text!r}")
    try:
        return float(parts[0]), float(parts[1])
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected X,Y, got {text!r}") from None


def _floats(text: str) -> list:
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _names(text: str) -> list:
    names = [s.strip() for s in text.split(",") if s.strip()]
    unknown = [s for s in names if s not in SCHEMES]
    if unknown or not names:
        raise argparse.ArgumentTypeError(
            f"unknown scheme(s) {unknown}; choose from {', '.join(sorted(SCHEMES))}")
    return names


def parse_grid(text: str, var: str) -> list:
    """Grid values for ``var``.

    ``start:step:stop`` is an inclusive arithmetic range; otherwise a comma
    list (``x,y;x,y`` for jammer positions).
    """
    if var == "jammer_pos":
        return [_pair(p) for p in text.split(";") if p]
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"grid must be start:step:stop, got {text!r}")
        start, step, stop = (float(p) for p in parts)
        if step == 0 or (stop - start) / step < 0:
            raise ValueError(f"grid {text!r} does not reach its stop value")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        values = [start + i * step for i in range(count)]
    else:
        values = [float(v) for v in text.split(",")]
    if var == "num_users":
        return [int(round(v)) for v in values]
    return values


def _add_scenario_flags(p: argparse.ArgumentParser):
    p.add_argument("--users", type=int, default=8, help="number of users M")
    p.add_argument("--subcarriers", type=int, default=64, help="number of subcarriers N")
    p.add_argument("--ps-db", type=float, default=15.0, help="source budget P_S/sigma^2 in dB")
    p.add_argument("--pj-db", type=float, default=6.0, help="jammer budget P_J/sigma^2 in dB")
    p.add_argument("--jammer-pos", type=_pair, default=(0.5, 0.5), metavar="X,Y")
    p.add_argument("--weights", type=_floats, default=None, metavar="W1,W2,...")
    p.add_argument("--noise", type=float, default=1.0, help="noise variance sigma^2")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", default=None, help="write data here instead of stdout")
    p.add_argument("--emit", choices=("csv", "summary"), default="summary")
    p.add_argument("--config", default=None, help="key=value file; flags override it")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="jamofdma", description="Jammer-assisted secure OFDMA allocation simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one scheme on one scenario")
    _add_scenario_flags(run)
    run.add_argument("--scheme", choices=sorted(SCHEMES), default=None)
    run.add_argument("--objective", choices=("sumrate", "maxmin"), default="sumrate")
    run.add_argument("--fixture", default=None, help=f"'{FIXTURE_NAME}' or a channel file")

    sweep = sub.add_parser("sweep", help="Monte-Carlo sweep of one variable")
    _add_scenario_flags(sweep)
    sweep.add_argument("--var", choices=("ps_db", "pj_db", "num_users", "jammer_pos"),
                       default="ps_db")
    sweep.add_argument("--grid", required=True, help="start:step:stop or a comma list")
    sweep.add_argument("--trials", type=int, default=500)
    sweep.add_argument("--schemes", "--scheme", type=_names, default=None)
    sweep.add_argument("--objective", choices=("sumrate", "maxmin"), default="sumrate")
    sweep.set_defaults(emit="csv")

    analyze = sub.add_parser("analyze", help="jamming thresholds for a fixture")
    analyze.add_argument("--fixture", default=FIXTURE_NAME)
    analyze.add_argument("--ps-db", type=float, default=10.0,
                         help="total source budget in dB, split equally over subcarriers")
    analyze.add_argument("--output", default=None)
    analyze.add_argument("--config", default=None)

    fixture = sub.add_parser("fixture", help="print the built-in example channel")
    fixture.add_argument("--output", default=None)
    fixture.add_argument("--config", default=None)
    return parser


def read_config(path: str) -> list:
    """Turn ``key=value`` lines into ``--key value`` tokens."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise CliError(f"cannot read config file {path}: {exc.strerror}") from None
    tokens = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise CliError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        tokens += ["--" + key.replace("_", "-"), value]
    return tokens


def _config_path(argv) -> str | None:
    for i, tok in enumerate(argv):
        if tok == "--config" and i + 1 < len(argv):
            return argv[i + 1]
        if tok.startswith("--config="):
            return tok.split("=", 1)[1]
    return None


def _load_fixture(spec: str):
    if spec == FIXTURE_NAME:
        return example_fixture()
    path = Path(spec)
    if not path.is_file():
        raise CliError(f"fixture file not found: {path}")
    try:
        return load_channels(path.read_text())
    except ChannelParseError as exc:
        raise CliError(f"{path}: {exc}") from None


def _scenario(args, ch=None) -> ScenarioConfig:
    s2 = args.noise if ch is None else ch.noise_variance
    kw = dict(num_users=args.users, num_subcarriers=args.subcarriers,
              source_budget=db_to_linear(args.ps_db, s2),
              jammer_budget=db_to_linear(args.pj_db, s2),
              jammer_pos=args.jammer_pos, noise_variance=s2,
              weights=args.weights, rng_seed=args.seed)
    if ch is not None:
        kw.update(num_users=ch.num_users, num_subcarriers=ch.num_subcarriers)
    try:
        return ScenarioConfig(**kw)
    except ValueError as exc:
        raise CliError(str(exc)) from None


def _objective_schemes(objective: str):
    return SUMRATE_SCHEMES if objective == "sumrate" else MAXMIN_SCHEMES


def _write(text: str, output):
    if output is None:
        sys.stdout.write(text)
        return
    path = Path(output)
    base = os.environ.get(OUTPUT_DIR_ENV)
    if base and not path.is_absolute():
        path = Path(base) / path
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as exc:
        raise CliError(f"cannot write {path}: {exc.strerror}") from None
    print(f"wrote {path}", file=sys.stderr)


def cmd_run(args) -> str:
    scheme = args.scheme or _objective_schemes(args.objective)[0]
    if scheme not in _objective_schemes(args.objective):
        raise CliError(f"scheme {scheme} does not optimize objective {args.objective}")
    if args.fixture is not None:
        ch = _load_fixture(args.fixture)
        cfg = _scenario(args, ch)
    else:
        cfg = _scenario(args)
        ch = generate_channels(cfg)
    out = SCHEMES[scheme](ch, cfg)
    alloc = out.allocation
    if args.emit == "csv":
        lines = ["user,rate"] + [f"{m + 1},{r:.6f}" for m, r in enumerate(out.user_rates)]
        return "\n".join(lines) + "\n"
    lines = [f"scheme {scheme}: M={ch.num_users} N={ch.num_subcarriers} "
             f"P_S={cfg.source_budget:.4f} P_J={cfg.jammer_budget:.4f}"]
    lines += [f"  user {m + 1:<3d} rate {r:.6f}" for m, r in enumerate(out.user_rates)]
    lines.append(f"  sum rate  {out.sum_rate:.6f}")
    lines.append(f"  min rate  {out.min_rate:.6f}")
    lines.append(f"  fairness  {out.fairness_index:.6f}")
    lines.append(f"  jammed subcarriers {int(np.sum(alloc.effective_pj > 0))}, "
                 f"jammer power used {float(np.sum(alloc.effective_pj)):.6f}")
    return "\n".join(lines) + "\n"


def cmd_sweep(args) -> str:
    schemes = args.schemes or list(_objective_schemes(args.objective)[:3])
    try:
        grid = parse_grid(args.grid, args.var)
        spec = SweepSpec(args.var, grid, _scenario(args), trials=args.trials,
                         schemes=schemes, master_seed=args.seed)
    except ValueError as exc:
        raise CliError(str(exc)) from None

    def progress(done, total):
        if done % max(1, total // 20) == 0 or done == total:
            print(f"\r{done}/{total} trials", end="" if done < total else "\n",
                  file=sys.stderr)

    records = run_trials(spec, progress=progress if sys.stderr.isatty() else None)
    rows = aggregate(spec, records)
    failed = sum(r.errors for r in rows)
    if failed:
        print(f"warning: {failed} scheme runs failed and were excluded", file=sys.stderr)
    return emit_csv(rows) if args.emit == "csv" else format_summary(rows)


def _fmt(v) -> str:
    if isinstance(v, float) and math.isnan(v):
        return "-"
    if isinstance(v, float) and math.isinf(v):
        return "inf"
    return f"{v:.4f}"


def cmd_analyze(args) -> str:
    ch = _load_fixture(args.fixture)
    P_S = db_to_linear(args.ps_db, ch.noise_variance)
    ps_n = P_S / ch.num_subcarriers
    lines = [f"equal source power per subcarrier: {ps_n:.4f}",
             "",
             "improvement jamming (owner = best source gain)",
             f"{'sub':>4}{'owner':>6}{'eve':>5}{'ps_th':>10}{'pj_th':>10}"
             f"{'pj_opt':>10}{'pj_low':>10}{'pj_up':>10}  feasible"]
    snatch = []
    for n in range(ch.num_subcarriers):
        r = analyze_subcarrier(n, ch, ps_n)
        lines.append(f"{n + 1:>4}{r.owner + 1:>6}{r.eavesdropper + 1:>5}"
                     f"{_fmt(r.ps_threshold):>10}{_fmt(r.pj_threshold_improve):>10}"
                     f"{_fmt(r.pj_opt):>10}{_fmt(r.pj_lower):>10}{_fmt(r.pj_upper):>10}"
                     f"  {'yes' if r.jamming_feasible else 'no'}")
        for k in np.flatnonzero(r.snatchable_by):
            snatch.append(f"{n + 1:>4}{k + 1:>6}{r.owner + 1:>7}"
                          f"{_fmt(r.pj_threshold_snatch[k]):>10}{_fmt(r.snatch_pj_opt[k]):>10}"
                          f"{_fmt(r.snatch_lower[k]):>10}{_fmt(r.snatch_upper[k]):>10}")
    lines += ["", "snatching (weaker user takes the subcarrier from the owner)",
              f"{'sub':>4}{'user':>6}{'owner':>7}{'pj_th':>10}{'pj_opt':>10}"
              f"{'pj_low':>10}{'pj_up':>10}"]
    lines += snatch or ["  none"]
    return "\n".join(lines) + "\n"


def _attach_values(argv) -> list:
    # "--grid -6:3:18" would otherwise read the grid as an option
    out = []
    for tok in argv:
        if out and out[-1] in ("--grid", "--jammer-pos") and tok.startswith("-"):
            out[-1] = f"{out[-1]}={tok}"
        else:
            out.append(tok)
    return out


def main(argv=None) -> int:
    argv = _attach_values(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        cfg_path = _config_path(argv)
        if cfg_path is not None and argv:
            # file values go first so explicit flags override them
            argv = argv[:1] + read_config(cfg_path) + argv[1:]
        args = parser.parse_args(argv)
        if args.command == "run":
            text = cmd_run(args)
        elif args.command == "sweep":
            text = cmd_sweep(args)
        elif args.command == "analyze":
            text = cmd_analyze(args)
        else:
            text = EXAMPLE_FIXTURE_TEXT
        _write(text, args.output)
    except SystemExit as exc:  # argparse usage errors
        return int(exc.code or 0)
    except CliError as exc:
        print(f"jamofdma: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
