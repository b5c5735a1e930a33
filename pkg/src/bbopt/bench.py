"""Benchmark harness: run an attack over a dataset, aggregate, and render reports.

Per-image randomness comes from seed XOR image index, so results do not
depend on how many workers ran the sweep. Records are flushed to a JSON-lines
file as they finish (with a metadata header line) and rewritten in index
order at the end, making long remote runs resumable and reports byte-stable.
"""

from __future__ import annotations

import hashlib
import json
import logging
import threading
from concurrent.futures import FIRST_EXCEPTION, ThreadPoolExecutor, wait
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .attacks import (
    SquareConfig,
    default_config,
    run_attack,
)
from .datasets import Dataset, LabeledImage, load_dataset
from .oracle import (
    LossKind,
    Oracle,
    OracleUnavailable,
    is_adversarial_untargeted,
    load_builtin_model,
    objective_fn,
)
from .remote import remote_oracle
from .rng import RngStream
from .schedule import BASE_ITERATIONS, NAMED_LISTS, PSchedule, rescale_indices
from .tensors import ImageTensor

__all__ = [
    "BenchConfig",
    "RunRecord",
    "SummaryRow",
    "open_oracle",
    "run_attack_over_dataset",
    "summarize",
    "ablation_squares",
    "ablation_schedule",
    "emit_report",
    "read_records",
    "REPORT_ATTACK_ORDER",
]

log = logging.getLogger("bbopt.bench")

REPORT_ATTACK_ORDER = ("bandits", "nes", "square", "zosignsgd")
_DISPLAY_NAMES = {
    "bandits": "Bandits",
    "nes": "NES",
    "square": "Square Attack",
    "zosignsgd": "ZO-signSGD",
}


@dataclass(frozen=True)
class BenchConfig:
    attack: str
    model: str  # "builtin:PATH" or "remote:HOST:PORT"
    dataset: str
    eps: float = 0.05
    budget: int = 10000
    loss: LossKind = LossKind.MARGIN
    seed: int = 0
    workers: int = 1
    # attack-specific knobs; anything unset falls back to stock values
    overrides: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.eps <= 0:
            raise ValueError(f"eps must be positive, got {self.eps}")
        if self.budget < 1:
            raise ValueError(f"budget must be >= 1, got {self.budget}")
        if self.workers < 1:
            raise ValueError(f"workers must be >= 1, got {self.workers}")

    def canonical(self) -> dict:
        return {
            "attack": self.attack,
            "model": self.model,
            "dataset": self.dataset,
            "eps": self.eps,
            "budget": self.budget,
            "loss": self.loss.value,
            "seed": self.seed,
            "overrides": {k: self.overrides[k] for k in sorted(self.overrides)},
        }

    def fingerprint(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:12]


@dataclass(frozen=True)
class RunRecord:
    index: int
    initial_label_correct: bool
    success: bool
    queries: int
    final_loss: float

    def to_json(self) -> dict:
        return {
            "index": self.index,
            "initial_label_correct": self.initial_label_correct,
            "success": self.success,
            "queries": self.queries,
            "final_loss": self.final_loss,
        }

    @classmethod
    def from_json(cls, d: dict) -> "RunRecord":
        return cls(int(d["index"]), bool(d["initial_label_correct"]),
                   bool(d["success"]), int(d["queries"]), float(d["final_loss"]))


@dataclass(frozen=True)
class SummaryRow:
    attack: str
    model: str
    eps: float
    budget: int
    n_evaluated: int
    failure_rate: float
    avg_queries: float | None  # None when no attack succeeded
    seed: int
    config_fingerprint: str


class _SerialGate:
    """Wraps a serial oracle so concurrent workers take turns per query."""

    serial = True

    def __init__(self, inner: Oracle) -> None:
        self._inner = inner
        self._lock = threading.Lock()

    @property
    def num_classes(self):
        return self._inner.num_classes

    def logits(self, image: ImageTensor) -> np.ndarray:
        with self._lock:
            return self._inner.logits(image)


def open_oracle(model: str) -> Oracle:
    """Resolve a "builtin:PATH" or "remote:HOST:PORT" model source."""
    kind, _, rest = model.partition(":")
    if kind == "builtin" and rest:
        return load_builtin_model(rest)
    if kind == "remote" and rest:
        return remote_oracle(rest)
    raise ValueError(f"model must be builtin:PATH or remote:HOST:PORT, got {model!r}")


def build_attack_config(cfg: BenchConfig, image_side: int):
    """Stock config for the chosen attack with CLI overrides applied."""
    base = default_config(cfg.attack, image_side, cfg.budget)
    ov = cfg.overrides
    if cfg.attack == "square":
        p0 = float(ov.get("p0", 0.05))
        if "p_indices" in ov:
            indices = tuple(int(i) for i in ov["p_indices"])
        else:
            indices = tuple(rescale_indices(NAMED_LISTS["L1"], BASE_ITERATIONS, cfg.budget))
        sched = PSchedule(p0=p0, halving_indices=indices, n_total=cfg.budget)
        return SquareConfig(
            p_schedule=sched,
            k_squares=int(ov.get("k_squares", 1)),
            strict_improve=bool(ov.get("strict_improve", False)),
        )
    known = {f.name for f in base.__dataclass_fields__.values()}  # type: ignore[attr-defined]
    kwargs = {k: v for k, v in ov.items() if k in known}
    unknown = set(ov) - known
    if unknown:
        raise ValueError(f"unknown overrides for {cfg.attack}: {sorted(unknown)}")
    return type(base)(**{**{f: getattr(base, f) for f in known}, **kwargs})


def _attack_one(oracle: Oracle, item: LabeledImage, index: int, cfg: BenchConfig,
                attack_cfg) -> RunRecord:
    loss_fn = objective_fn(cfg.loss)
    # classification check on the clean image; deliberately not ledgered so
    # AttackResult.queries stays exactly the attack's own count
    clean_logits = oracle.logits(item.image)
    if is_adversarial_untargeted(clean_logits, item.label):
        return RunRecord(index, False, False, 0, loss_fn(clean_logits, item.label))
    rng = RngStream(cfg.seed ^ index)
    result = run_attack(cfg.attack, oracle, item, cfg.eps, cfg.budget,
                        attack_cfg, rng, loss=cfg.loss)
    return RunRecord(index, True, result.success, result.queries, result.final_loss)


def read_records(path) -> tuple[dict, list[RunRecord]]:
    """Read a records JSONL file; returns (meta, records sorted by index)."""
    meta: dict = {}
    records: list[RunRecord] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            d = json.loads(line)
            if "meta" in d:
                meta = d["meta"]
            else:
                records.append(RunRecord.from_json(d))
    records.sort(key=lambda r: r.index)
    return meta, records


def _write_records(path, meta: dict, records: Iterable[RunRecord]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"meta": meta}, sort_keys=True) + "\n")
        for rec in records:
            fh.write(json.dumps(rec.to_json(), sort_keys=True) + "\n")


def run_attack_over_dataset(cfg: BenchConfig, out_path=None, resume: bool = False,
                            dataset: Dataset | None = None,
                            oracle: Oracle | None = None) -> list[RunRecord]:
    """One RunRecord per dataset image, in dataset order.

    Already-misclassified images are recorded with initial_label_correct =
    False and skipped by the attack. On an oracle failure, finished records
    are flushed to out_path before the error propagates.
    """
    if dataset is None:
        dataset = load_dataset(cfg.dataset)
    if oracle is None:
        oracle = open_oracle(cfg.model)
    if getattr(oracle, "serial", False):
        oracle = _SerialGate(oracle)

    meta = dict(cfg.canonical())
    meta["fingerprint"] = cfg.fingerprint()
    meta["avg_basis"] = "successes"

    done: dict[int, RunRecord] = {}
    if resume and out_path is not None:
        try:
            old_meta, old_records = read_records(out_path)
        except FileNotFoundError:
            old_meta, old_records = {}, []
        if old_meta and old_meta.get("fingerprint") != meta["fingerprint"]:
            raise ValueError("resume file was produced by a different configuration")
        done = {r.index: r for r in old_records}

    if len(dataset) == 0:
        if out_path is not None:
            _write_records(out_path, meta, [])
        return []

    side = min(dataset[0].image.height, dataset[0].image.width)
    attack_cfg = build_attack_config(cfg, side)
    todo = [i for i in range(len(dataset)) if i not in done]

    flush_lock = threading.Lock()
    out_fh = open(out_path, "a" if (resume and done) else "w", encoding="utf-8") if out_path else None
    try:
        if out_fh is not None and not (resume and done):
            out_fh.write(json.dumps({"meta": meta}, sort_keys=True) + "\n")
            out_fh.flush()

        def work(i: int) -> RunRecord:
            rec = _attack_one(oracle, dataset[i], i, cfg, attack_cfg)
            if out_fh is not None:
                with flush_lock:
                    out_fh.write(json.dumps(rec.to_json(), sort_keys=True) + "\n")
                    out_fh.flush()
            with flush_lock:
                done[i] = rec
            return rec

        if cfg.workers == 1 or len(todo) <= 1:
            for i in todo:
                work(i)
        else:
            with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
                futures = [pool.submit(work, i) for i in todo]
                wait(futures, return_when=FIRST_EXCEPTION)
                for fut in futures:
                    if fut.done() and fut.exception() is not None:
                        for other in futures:
                            other.cancel()
                        raise fut.exception()
    except OracleUnavailable:
        log.error("oracle became unavailable; %d/%d records flushed", len(done), len(dataset))
        raise
    finally:
        if out_fh is not None:
            out_fh.close()

    records = [done[i] for i in sorted(done)]
    if out_path is not None:
        # rewrite in index order so identical runs give identical bytes
        _write_records(out_path, meta, records)
    return records


def summarize(records: list[RunRecord], cfg: BenchConfig,
              attack_label: str | None = None) -> SummaryRow:
    """Aggregate to a failure rate and the mean queries of successful runs."""
    evaluated = [r for r in records if r.initial_label_correct]
    if not evaluated:
        raise ValueError("nothing to summarize: no correctly classified images")
    successes = [r for r in evaluated if r.success]
    failure_rate = (len(evaluated) - len(successes)) / len(evaluated)
    avg_queries = float(np.mean([r.queries for r in successes])) if successes else None
    return SummaryRow(
        attack=attack_label or cfg.attack,
        model=cfg.model,
        eps=cfg.eps,
        budget=cfg.budget,
        n_evaluated=len(evaluated),
        failure_rate=failure_rate,
        avg_queries=avg_queries,
        seed=cfg.seed,
        config_fingerprint=cfg.fingerprint(),
    )


def _with_overrides(cfg: BenchConfig, **extra) -> BenchConfig:
    ov = dict(cfg.overrides)
    ov.update(extra)
    return BenchConfig(attack=cfg.attack, model=cfg.model, dataset=cfg.dataset,
                       eps=cfg.eps, budget=cfg.budget, loss=cfg.loss, seed=cfg.seed,
                       workers=cfg.workers, overrides=ov)


def ablation_squares(cfg: BenchConfig, k_list: list[int],
                     dataset: Dataset | None = None,
                     oracle: Oracle | None = None) -> list[SummaryRow]:
    """One summary row per square count, same dataset and seed throughout."""
    if cfg.attack != "square":
        raise ValueError("square-count ablation requires the square attack")
    if any(k < 1 for k in k_list):
        raise ValueError(f"square counts must be >= 1, got {k_list}")
    rows = []
    for k in k_list:
        run_cfg = _with_overrides(cfg, k_squares=int(k))
        records = run_attack_over_dataset(run_cfg, dataset=dataset, oracle=oracle)
        rows.append(summarize(records, run_cfg))
    return rows


def ablation_schedule(cfg: BenchConfig, named_lists: dict[str, list[int]],
                      dataset: Dataset | None = None,
                      oracle: Oracle | None = None) -> list[SummaryRow]:
    """One summary row per halving-index list (built-ins are L1, L2, L3)."""
    if cfg.attack != "square":
        raise ValueError("schedule ablation requires the square attack")
    rows = []
    for name, indices in named_lists.items():
        idx = sorted(int(i) for i in indices)
        if list(indices) != idx:
            raise ValueError(f"index list {name} must be non-decreasing")
        scaled = rescale_indices(idx, BASE_ITERATIONS, cfg.budget)
        run_cfg = _with_overrides(cfg, p_indices=scaled)
        records = run_attack_over_dataset(run_cfg, dataset=dataset, oracle=oracle)
        rows.append(summarize(records, run_cfg))
    return rows


def _fmt_rate(fr: float) -> str:
    return f"{fr * 100:.1f}%"


def _fmt_avg(avg: float | None) -> str:
    return "—" if avg is None else f"{avg:.2f}"


def _ordered(rows: list[SummaryRow]) -> list[SummaryRow]:
    order = {a: i for i, a in enumerate(REPORT_ATTACK_ORDER)}
    return sorted(rows, key=lambda r: (order.get(r.attack, len(order)), r.model))


def emit_report(rows: list[SummaryRow], format: str = "csv") -> str:
    """Deterministic CSV or markdown report; rows sorted into the standard attack order."""
    if not rows:
        raise ValueError("no rows to report")
    rows = _ordered(rows)
    if format == "csv":
        lines = ["attack,model,eps,budget,n_evaluated,failure_rate,avg_queries,seed,config_fingerprint"]
        for r in rows:
            lines.append(
                f"{r.attack},{r.model},{r.eps:g},{r.budget},{r.n_evaluated},"
                f"{_fmt_rate(r.failure_rate)},{_fmt_avg(r.avg_queries)},{r.seed},{r.config_fingerprint}"
            )
        return "\n".join(lines) + "\n"
    if format == "markdown":
        lines = [
            "| Attack | Model | Failure Rate | Avg. Queries |",
            "| --- | --- | --- | --- |",
        ]
        for r in rows:
            name = _DISPLAY_NAMES.get(r.attack, r.attack)
            lines.append(f"| {name} | {r.model} | {_fmt_rate(r.failure_rate)} | {_fmt_avg(r.avg_queries)} |")
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown report format {format!r}")
