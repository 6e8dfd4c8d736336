"""Command-line front end.

Exit codes: 0 when every statistical check passes, 2 when one fails, 1 on
usage errors (bad flags, invalid configuration).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Any, Sequence

from . import harness as hx
from . import quantum as qm
from .errors import TBOSimError
from .protocol import SharedRandomness, run_protocol

EXIT_PASS = 0
EXIT_USAGE = 1
EXIT_FAIL = 2

LEMMA_NS = (1, 2, 3, 7, 17, 31)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # argparse would exit with status 2
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _int_list(text: str) -> list[int]:
    try:
        return [int(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tbosim", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sim = sub.add_parser("simulate", help="run the protocol against the quantum oracle")
    # defaults are None so a config file can fill anything not given inline
    sim.add_argument("--config", type=Path, help="key = value file mirroring the experiment config")
    sim.add_argument("--d", type=int)
    sim.add_argument("--state")
    sim.add_argument("--observables")
    sim.add_argument("--trials", type=int)
    sim.add_argument("--seed", type=int)
    sim.add_argument("--codec")
    sim.add_argument("--mode", choices=hx.MODES)
    sim.add_argument("--n", type=int, help="sphere dimension for abstract-vectors mode")
    sim.add_argument("--jobs", type=int)
    sim.add_argument("--out", type=Path, default=Path("simulate_report"), help="output prefix for .csv/.json")
    sim.add_argument("--transcripts", type=Path, help="also write single-run transcripts as JSON lines")
    sim.add_argument("--transcript-count", type=int, default=100)

    ver = sub.add_parser("verify", help="check the analytic claims numerically")
    ver.add_argument("--suite", choices=("lemma1", "bounds", "distribution", "embedding", "all"), default="all")
    ver.add_argument("--n", type=_int_list, help="sphere dimensions for lemma1")
    ver.add_argument("--samples", type=int, default=1_000_000)
    ver.add_argument("--d", type=_int_list, help="qudit dimensions for embedding/distribution")
    ver.add_argument("--pairs", type=int, help="random triples (embedding) or TBO pairs (distribution)")
    ver.add_argument("--trials", type=int, default=100_000)
    ver.add_argument("--n-max", type=int, default=512)
    ver.add_argument("--seed", type=int, default=0)
    ver.add_argument("--out", type=Path, help="write the JSON report here")

    scan = sub.add_parser("scan", help="communication cost versus qudit dimension")
    scan.add_argument("--d-list", type=_int_list, required=True)
    scan.add_argument("--trials", type=int, default=100_000)
    scan.add_argument("--seed", type=int, default=0)
    scan.add_argument("--codec", default="golomb")
    scan.add_argument("--out", type=Path, help="CSV path (default: stdout)")

    emb = sub.add_parser("embed-check", help="compare embedded dot products with the quantum expectation")
    emb.add_argument("--d", type=int, default=2)
    emb.add_argument("--pairs", type=int, default=100)
    emb.add_argument("--seed", type=int, default=0)
    emb.add_argument("--state-file", type=Path)
    emb.add_argument("--a-file", type=Path)
    emb.add_argument("--b-file", type=Path)
    return parser


def resolve_config(args: argparse.Namespace) -> hx.ExperimentConfig:
    values: dict[str, Any] = {}
    if args.config is not None:
        values.update(hx.parse_config_text(args.config.read_text(encoding="utf-8")))
    for key in ("d", "state", "observables", "trials", "seed", "codec", "mode", "n", "jobs"):
        flag = getattr(args, key)
        if flag is not None:
            values[key] = flag
    config = hx.ExperimentConfig.from_mapping(values)
    config.validate()
    return config


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def cmd_simulate(args: argparse.Namespace) -> int:
    config = resolve_config(args)
    report = hx.estimate_joint_correlation(config)
    prefix = args.out
    _write(prefix.with_suffix(".json"), hx.to_json(report.to_dict()))
    _write(prefix.with_suffix(".csv"), hx.report_to_csv(report))
    if args.transcripts is not None:
        _write(args.transcripts, transcripts_jsonl(config, args.transcript_count))
    s = report.summary
    print(
        f"simulate d={config.d} mode={config.mode} pairs={s['pairs']} "
        f"|z|<=3: {s['correlation_within_3se']}/{s['pairs']} {'PASS' if report.passed else 'FAIL'}"
    )
    for k, p in enumerate(report.pairs):
        line = f"  pair {k}: E_hat={p.correlation_hat:.5f} oracle={p.oracle_correlation:.5f} z={p.z_score:.2f}"
        if config.mode == "postselected":
            line += f" success_rate={p.success_rate:.4f}"
        else:
            line += f" mean_bits={p.mean_message_bits:.3f}"
        print(line)
    return EXIT_PASS if report.passed else EXIT_FAIL


def transcripts_jsonl(config: hx.ExperimentConfig, count: int) -> str:
    """Independent single-run transcripts for the first configured pair."""
    rng = hx.derive_rng(config.seed, 0)
    if config.mode == "abstract-vectors":
        raise TBOSimError("transcripts are only written for the quantum modes")
    state = hx.build_state(config.state, config.d, rng)
    a_obs, b_obs = qm.random_tbo(config.d, rng), qm.random_tbo(config.d, rng)
    a = qm.tsirelson_embed(state, a_obs, "alice")
    b = qm.tsirelson_embed(state, b_obs, "bob")
    codec = config.message_code()
    lines = [
        run_protocol(a, b, SharedRandomness(hx.derive_seed(config.seed, 8, k), a.n), codec).to_json()
        for k in range(count)
    ]
    return "".join(line + "\n" for line in lines)


def cmd_verify(args: argparse.Namespace) -> int:
    suites = ("lemma1", "bounds", "embedding", "distribution") if args.suite == "all" else (args.suite,)
    checks: list[hx.CheckResult] = []
    extra: dict[str, Any] = {}
    if "lemma1" in suites:
        for n in args.n or LEMMA_NS:
            if n < 1:
                raise UsageError(f"--n values must be >= 1, got {n}")
            checks.append(hx.verify_normalization_lemma(n, args.samples, args.seed))
    if "bounds" in suites:
        checks.append(hx.verify_acceptance_bounds(args.n_max))
        checks.append(hx.verify_entropy_bound(range(7, 512)))
    if "embedding" in suites:
        for d in args.d or (2, 4, 6):
            checks.append(hx.verify_embedding(d, args.pairs or 1000, args.seed))
    if "distribution" in suites:
        rows = []
        for d in args.d or (2, 4):
            if d < 2 or d % 2:
                raise UsageError(f"--d values must be even and >= 2, got {d}")
            rows += hx.full_distribution_check(d, args.trials, args.seed, args.pairs or 20)
        extra["distribution"] = rows
        for r in rows:
            checks.append(
                hx.CheckResult(
                    f"distribution d={r['d']} pair={r['pair']}",
                    hx.ANCHOR_DISTRIBUTION,
                    r["p_value"],
                    hx.CHI2_ALPHA,
                    r["pass"],
                    f"chi2={r['chi2']:.3f} c={r['oracle_correlation']:.4f}",
                )
            )
    for c in checks:
        print(c.line())
    ok = all(c.passed for c in checks)
    if args.out is not None:
        doc = {
            "suite": args.suite,
            "seed": args.seed,
            "checks": [vars(c) for c in checks],
            "pass": ok,
            **extra,
        }
        _write(args.out, hx.to_json(doc))
    return EXIT_PASS if ok else EXIT_FAIL


def cmd_scan(args: argparse.Namespace) -> int:
    for d in args.d_list:
        if d < 2 or d % 2:
            raise UsageError(f"--d-list values must be even and >= 2, got {d}")
    if args.trials < 1:
        raise UsageError("--trials must be >= 1")
    rows = hx.scan_dimension(args.d_list, args.trials, args.seed, args.codec)
    text = hx.rows_to_csv(rows, hx.SCAN_COLUMNS)
    if args.out is None:
        sys.stdout.write(text)
    else:
        _write(args.out, text)
        summary = hx.scan_summary(rows)
        print(f"scan spread={summary['spread']:.3f} under_bound={summary['all_under_bound']}")
    return EXIT_PASS


def cmd_embed_check(args: argparse.Namespace) -> int:
    files = (args.state_file, args.a_file, args.b_file)
    if any(f is not None for f in files):
        if not all(f is not None for f in files):
            raise UsageError("--state-file, --a-file and --b-file go together")
        state = qm.PureBipartiteState.from_dict(json.loads(args.state_file.read_text()))
        a_obs = qm.TracelessBinaryObservable.from_dict(json.loads(args.a_file.read_text()))
        b_obs = qm.TracelessBinaryObservable.from_dict(json.loads(args.b_file.read_text()))
        a = qm.tsirelson_embed(state, a_obs, "alice")
        b = qm.tsirelson_embed(state, b_obs, "bob")
        oracle = qm.joint_expectation(state, a_obs, b_obs)
        err = abs(a.dot(b) - oracle)
        doc = {"a": a.coords.tolist(), "b": b.coords.tolist(), "dot": a.dot(b), "oracle": oracle, "abs_err": err}
        print(json.dumps(doc, sort_keys=True))
        return EXIT_PASS if err <= 1e-10 else EXIT_FAIL
    if args.d < 2 or args.d % 2:
        raise UsageError(f"--d must be even and >= 2, got {args.d}")
    check = hx.verify_embedding(args.d, args.pairs, args.seed)
    print(check.line())
    return EXIT_PASS if check.passed else EXIT_FAIL


COMMANDS = {"simulate": cmd_simulate, "verify": cmd_verify, "scan": cmd_scan, "embed-check": cmd_embed_check}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return COMMANDS[args.command](args)
    except (UsageError, TBOSimError, OSError, ValueError) as exc:
        print(f"tbosim: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
