"""Command-line interface.

Subcommands: attack, ablate-squares, ablate-schedule, report. Exit codes:
0 on success, 2 for configuration problems, 3 when the oracle fails.
BBOPT_LOG sets the logging level.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

from . import bench
from .oracle import LossKind, ModelFormatError, OracleUnavailable
from .datasets import DatasetFormatError
from .schedule import NAMED_LISTS

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ORACLE = 3


def _csv_ints(text: str) -> list[int]:
    try:
        return [int(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--model", required=True, help="builtin:PATH or remote:HOST:PORT")
    p.add_argument("--dataset", required=True, help="IMGB dataset file")
    p.add_argument("--eps", type=float, default=0.05)
    p.add_argument("--budget", type=int, default=10000)
    p.add_argument("--loss", choices=["margin", "xent"], default="margin")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default=None, help="output path (records or report)")


def _square_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--squares", type=int, default=None, help="squares per iteration")
    p.add_argument("--p0", type=float, default=None, help="initial pixel fraction")
    p.add_argument("--p-indices", type=_csv_ints, default=None,
                   help="custom halving indices, comma separated")
    p.add_argument("--strict-improve", action="store_true",
                   help="accept candidates only on strict loss decrease")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bbopt",
                                     description="Query-budgeted black-box attack benchmark")
    sub = parser.add_subparsers(dest="command", required=True)

    p_attack = sub.add_parser("attack", help="run one attack over a dataset")
    p_attack.add_argument("--attack", required=True,
                          choices=["bandits", "nes", "square", "zosignsgd"])
    _add_common(p_attack)
    _square_flags(p_attack)
    p_attack.add_argument("--resume", action="store_true",
                          help="continue a partial run recorded in --out")

    p_sq = sub.add_parser("ablate-squares", help="square-count sweep")
    p_sq.add_argument("--k", type=_csv_ints, required=True, help="square counts, e.g. 1,2,4,8,16")
    _add_common(p_sq)
    _square_flags(p_sq)

    p_sched = sub.add_parser("ablate-schedule", help="p-schedule sweep")
    p_sched.add_argument("--lists", required=True,
                         help="comma-separated names (L1,L2,L3) and/or NAME=i1:i2:... customs")
    _add_common(p_sched)
    _square_flags(p_sched)

    p_rep = sub.add_parser("report", help="render a records file")
    p_rep.add_argument("--in", dest="in_path", required=True, help="records JSONL file")
    p_rep.add_argument("--format", choices=["csv", "markdown"], default="csv")
    return parser


def _bench_config(args, attack: str) -> bench.BenchConfig:
    overrides = {}
    if getattr(args, "squares", None) is not None:
        overrides["k_squares"] = args.squares
    if getattr(args, "p0", None) is not None:
        overrides["p0"] = args.p0
    if getattr(args, "p_indices", None) is not None:
        overrides["p_indices"] = args.p_indices
    if getattr(args, "strict_improve", False):
        overrides["strict_improve"] = True
    return bench.BenchConfig(
        attack=attack,
        model=args.model,
        dataset=args.dataset,
        eps=args.eps,
        budget=args.budget,
        loss=LossKind(args.loss),
        seed=args.seed,
        workers=args.workers,
        overrides=overrides,
    )


def _parse_lists(text: str) -> dict[str, list[int]]:
    out: dict[str, list[int]] = {}
    for tok in text.split(","):
        tok = tok.strip()
        if not tok:
            continue
        if "=" in tok:
            name, _, body = tok.partition("=")
            out[name] = [int(i) for i in body.split(":") if i]
        elif tok in NAMED_LISTS:
            out[tok] = list(NAMED_LISTS[tok])
        else:
            raise ValueError(f"unknown schedule list {tok!r}; built-ins are L1, L2, L3")
    if not out:
        raise ValueError("no schedule lists given")
    return out


def _emit(text: str, out_path) -> None:
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("BBOPT_LOG", "WARNING").upper())
    args = build_parser().parse_args(argv)
    try:
        if args.command == "attack":
            cfg = _bench_config(args, args.attack)
            records = bench.run_attack_over_dataset(cfg, out_path=args.out, resume=args.resume)
            row = bench.summarize(records, cfg)
            sys.stdout.write(bench.emit_report([row], "csv"))
        elif args.command == "ablate-squares":
            cfg = _bench_config(args, "square")
            rows = bench.ablation_squares(cfg, args.k)
            _emit(bench.emit_report(rows, "csv"), args.out)
        elif args.command == "ablate-schedule":
            cfg = _bench_config(args, "square")
            rows = bench.ablation_schedule(cfg, _parse_lists(args.lists))
            _emit(bench.emit_report(rows, "csv"), args.out)
        elif args.command == "report":
            meta, records = bench.read_records(args.in_path)
            if not meta:
                raise ValueError(f"{args.in_path} has no metadata header")
            cfg = bench.BenchConfig(
                attack=meta["attack"], model=meta["model"], dataset=meta["dataset"],
                eps=meta["eps"], budget=meta["budget"], loss=LossKind(meta["loss"]),
                seed=meta["seed"], overrides=meta.get("overrides", {}),
            )
            row = bench.summarize(records, cfg)
            sys.stdout.write(bench.emit_report([row], args.format))
        return EXIT_OK
    except OracleUnavailable as exc:
        print(f"oracle failure: {exc}", file=sys.stderr)
        return EXIT_ORACLE
    except (ValueError, ModelFormatError, DatasetFormatError, FileNotFoundError, KeyError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
