"""Campaign orchestration and machine-readable reports.

A campaign repeatedly answers local-robustness queries on one network in
one of four modes -- random or weak seeds, each with or without the
greedy pre-search -- until a time budget runs out or enough
counter-examples are found.  Every run is recorded; reports round-trip
through a CSV of runs plus a JSON summary.
"""

from __future__ import annotations

import csv
import hashlib
import json
import time
from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from pathlib import Path

import numpy as np

from .greedy import GreedyConfig, greedy_search
from .nn import Network, classify, load_network, margin
from .seeding import SeedingConfig, ThresholdState, generate_seed, make_threshold_state, random_sample
from .verifier import VerificationQuery, check_witness, verify_local_robustness

__all__ = [
    "CampaignReport",
    "CampaignSpec",
    "Mode",
    "ReportFormatError",
    "RunRecord",
    "audit_report",
    "report_digest",
    "report_read",
    "report_write",
    "run_campaign",
    "run_query",
]


class ReportFormatError(ValueError):
    """Raised when report files cannot be parsed back."""


class Mode(Enum):
    """Seed selection x pre-analysis choice."""

    R = "r"
    RG = "rg"
    B = "b"
    BG = "bg"

    @property
    def boosted(self) -> bool:
        return self in (Mode.B, Mode.BG)

    @property
    def greedy(self) -> bool:
        return self in (Mode.RG, Mode.BG)


@dataclass
class CampaignSpec:
    """One campaign: network, mode, radius, stop condition and configs.

    Exactly one of ``time_budget`` (seconds) and
    ``target_counterexamples`` must be set.
    """

    net_path: str
    mode: Mode
    delta: float
    time_budget: float | None = None
    target_counterexamples: int | None = None
    per_query_timeout: float = 60.0
    rng_seed: int = 0
    seeding: SeedingConfig = field(default_factory=SeedingConfig)
    greedy_config: GreedyConfig | None = None
    min_box_width: float | None = None

    def __post_init__(self):
        if isinstance(self.mode, str):
            self.mode = Mode(self.mode)
        if (self.time_budget is None) == (self.target_counterexamples is None):
            raise ValueError(
                "set exactly one stop condition: time_budget or target_counterexamples"
            )
        if self.time_budget is not None and self.time_budget < 0:
            raise ValueError("time_budget must be non-negative")
        if self.target_counterexamples is not None and self.target_counterexamples < 0:
            raise ValueError("target_counterexamples must be non-negative")
        if self.delta <= 0:
            raise ValueError("delta must be positive")
        if self.per_query_timeout <= 0:
            raise ValueError("per_query_timeout must be positive")


@dataclass
class RunRecord:
    """One query's worth of campaign accounting."""

    index: int
    mode: str
    seed: tuple[float, ...]
    seed_margin: float
    outcome: str  # sat | unsat | unknown | error
    greedy_found: bool
    witness: tuple[float, ...] | None
    reason: str | None
    time_ms: float


@dataclass
class CampaignReport:
    mode: str
    delta: float
    rng_seed: int
    net_path: str
    records: list[RunRecord] = field(default_factory=list)
    wall_time_s: float = 0.0
    config: dict = field(default_factory=dict)

    @property
    def runs(self) -> int:
        return len(self.records)

    @property
    def sat_total(self) -> int:
        return sum(1 for r in self.records if r.outcome == "sat")

    @property
    def sat_by_greedy(self) -> int:
        return sum(1 for r in self.records if r.outcome == "sat" and r.greedy_found)

    @property
    def rate(self) -> float:
        return self.sat_total / self.runs if self.records else 0.0


def run_query(
    net: Network,
    mode: Mode,
    delta: float,
    *,
    rng: np.random.Generator,
    index: int = 0,
    threshold_state: ThresholdState | None = None,
    greedy_config: GreedyConfig | None = None,
    per_query_timeout: float = 60.0,
    min_box_width: float | None = None,
) -> RunRecord:
    """Seed, optionally pre-search, then verify; errors land in the record.

    A counter-example from the greedy stage settles the run as SAT and
    skips the verifier entirely.
    """
    mode = Mode(mode)
    started = time.perf_counter()
    seed_tuple: tuple[float, ...] = ()
    seed_margin = float("nan")
    outcome = "error"
    greedy_found = False
    witness = None
    reason = None
    try:
        if mode.boosted:
            if threshold_state is None:
                raise ValueError(f"mode {mode.value} needs a threshold state")
            seed, _ = generate_seed(net, threshold_state, rng)
        else:
            seed = random_sample(net, rng)
        seed_tuple = tuple(float(v) for v in seed)
        seed_margin = margin(net, seed)

        decided = False
        if mode.greedy:
            cfg = greedy_config or GreedyConfig.for_radius(delta)
            found = greedy_search(net, seed, delta, cfg)
            if found.found:
                outcome = "sat"
                greedy_found = True
                witness = tuple(float(v) for v in found.counter_example)
                decided = True
        if not decided:
            query = VerificationQuery(
                x0=seed,
                delta=delta,
                label0=classify(net, seed),
                time_budget=per_query_timeout,
                min_box_width=min_box_width,
            )
            verdict = verify_local_robustness(net, query)
            outcome = verdict.kind.value
            reason = verdict.reason
            if verdict.witness is not None:
                witness = tuple(float(v) for v in verdict.witness)
    except Exception as exc:  # noqa: BLE001 - campaign must survive any run
        outcome = "error"
        reason = f"{type(exc).__name__}: {exc}"
    return RunRecord(
        index=index,
        mode=mode.value,
        seed=seed_tuple,
        seed_margin=float(seed_margin),
        outcome=outcome,
        greedy_found=greedy_found,
        witness=witness,
        reason=reason,
        time_ms=(time.perf_counter() - started) * 1000.0,
    )


def run_campaign(spec: CampaignSpec, net: Network | None = None) -> CampaignReport:
    """Loop run_query until the stop condition is met.

    Single-worker and fully sequential: identical spec and seed reproduce
    the same seeds, outcomes and witnesses (recorded times vary).
    """
    if net is None:
        net = load_network(spec.net_path)
    rng = np.random.default_rng(spec.rng_seed)
    threshold_state = None
    if spec.mode.boosted:
        threshold_state = make_threshold_state(net, rng, spec.seeding)
    greedy_cfg = spec.greedy_config or GreedyConfig.for_radius(spec.delta)

    records: list[RunRecord] = []
    sat_total = 0
    started = time.perf_counter()
    index = 0
    while True:
        if spec.target_counterexamples is not None and sat_total >= spec.target_counterexamples:
            break
        if spec.time_budget is not None and time.perf_counter() - started >= spec.time_budget:
            break
        record = run_query(
            net,
            spec.mode,
            spec.delta,
            rng=rng,
            index=index,
            threshold_state=threshold_state,
            greedy_config=greedy_cfg,
            per_query_timeout=spec.per_query_timeout,
            min_box_width=spec.min_box_width,
        )
        records.append(record)
        if record.outcome == "sat":
            sat_total += 1
        index += 1
    return CampaignReport(
        mode=spec.mode.value,
        delta=spec.delta,
        rng_seed=spec.rng_seed,
        net_path=str(spec.net_path),
        records=records,
        wall_time_s=time.perf_counter() - started,
        config=_config_echo(spec),
    )


def _config_echo(spec: CampaignSpec) -> dict:
    echo = {
        "time_budget": spec.time_budget,
        "target_counterexamples": spec.target_counterexamples,
        "per_query_timeout": spec.per_query_timeout,
        "min_box_width": spec.min_box_width,
        "seeding": asdict(spec.seeding),
    }
    if spec.greedy_config is not None:
        echo["greedy"] = asdict(spec.greedy_config)
    else:
        echo["greedy"] = None
    return echo


def audit_report(net: Network, report: CampaignReport) -> None:
    """Re-validate every stored SAT witness; raises on the first failure."""
    for record in report.records:
        if record.outcome != "sat":
            continue
        if record.witness is None:
            raise ReportFormatError(f"run {record.index}: SAT without witness")
        query = VerificationQuery(
            x0=np.array(record.seed),
            delta=report.delta,
            label0=classify(net, np.array(record.seed)),
        )
        if not check_witness(net, query, np.array(record.witness)):
            raise ReportFormatError(f"run {record.index}: witness failed re-validation")


# ---------------------------------------------------------------------------
# Report files: runs.csv (one row per run) + summary.json (aggregates).
# ---------------------------------------------------------------------------

_CSV_COLUMNS = [
    "index",
    "mode",
    "seed",
    "seed_margin",
    "outcome",
    "greedy_found",
    "witness",
    "reason",
    "time_ms",
]


def _pack_floats(values) -> str:
    return " ".join(repr(float(v)) for v in values)


def _unpack_floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split())


def report_write(report: CampaignReport, out_dir) -> Path:
    """Write runs.csv and summary.json under ``out_dir``; returns the dir."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "runs.csv", "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(_CSV_COLUMNS)
        for r in report.records:
            writer.writerow(
                [
                    r.index,
                    r.mode,
                    _pack_floats(r.seed),
                    repr(r.seed_margin),
                    r.outcome,
                    int(r.greedy_found),
                    _pack_floats(r.witness) if r.witness is not None else "",
                    r.reason if r.reason is not None else "",
                    repr(r.time_ms),
                ]
            )
    summary = {
        "mode": report.mode,
        "delta": report.delta,
        "rng_seed": report.rng_seed,
        "net_path": report.net_path,
        "runs": report.runs,
        "sat_total": report.sat_total,
        "sat_by_greedy": report.sat_by_greedy,
        "rate": report.rate,
        "wall_time_s": report.wall_time_s,
        "config": report.config,
    }
    with open(out / "summary.json", "w", encoding="utf-8") as handle:
        json.dump(summary, handle, indent=2, sort_keys=True)
        handle.write("\n")
    return out


def report_read(out_dir) -> CampaignReport:
    """Read a report back; inverse of report_write."""
    out = Path(out_dir)
    try:
        with open(out / "summary.json", encoding="utf-8") as handle:
            summary = json.load(handle)
    except (OSError, json.JSONDecodeError) as exc:
        raise ReportFormatError(f"cannot read summary: {exc}") from None
    records: list[RunRecord] = []
    try:
        with open(out / "runs.csv", newline="", encoding="utf-8") as handle:
            reader = csv.reader(handle)
            header = next(reader, None)
            if header != _CSV_COLUMNS:
                raise ReportFormatError(f"unexpected CSV header {header}")
            for row in reader:
                if len(row) != len(_CSV_COLUMNS):
                    raise ReportFormatError(f"bad CSV row: {row}")
                records.append(
                    RunRecord(
                        index=int(row[0]),
                        mode=row[1],
                        seed=_unpack_floats(row[2]),
                        seed_margin=float(row[3]),
                        outcome=row[4],
                        greedy_found=bool(int(row[5])),
                        witness=_unpack_floats(row[6]) if row[6] else None,
                        reason=row[7] if row[7] else None,
                        time_ms=float(row[8]),
                    )
                )
    except OSError as exc:
        raise ReportFormatError(f"cannot read runs: {exc}") from None
    except ValueError as exc:
        raise ReportFormatError(f"malformed runs.csv: {exc}") from None
    report = CampaignReport(
        mode=summary.get("mode", ""),
        delta=float(summary.get("delta", 0.0)),
        rng_seed=int(summary.get("rng_seed", 0)),
        net_path=summary.get("net_path", ""),
        records=records,
        wall_time_s=float(summary.get("wall_time_s", 0.0)),
        config=summary.get("config", {}),
    )
    for key in ("runs", "sat_total", "sat_by_greedy"):
        if key in summary and summary[key] != getattr(report, key):
            raise ReportFormatError(
                f"summary {key}={summary[key]} disagrees with runs.csv"
            )
    return report


def report_digest(report: CampaignReport) -> str:
    """Hash of the deterministic report content.

    Wall-clock fields are excluded: they are the only part of a
    single-worker campaign that varies between identical runs.
    """
    payload = {
        "mode": report.mode,
        "delta": report.delta,
        "rng_seed": report.rng_seed,
        "net_path": report.net_path,
        "config": report.config,
        "records": [
            {
                "index": r.index,
                "mode": r.mode,
                "seed": [repr(v) for v in r.seed],
                "seed_margin": repr(r.seed_margin),
                "outcome": r.outcome,
                "greedy_found": r.greedy_found,
                "witness": [repr(v) for v in r.witness] if r.witness is not None else None,
                "reason": r.reason,
            }
            for r in report.records
        ],
    }
    blob = json.dumps(payload, sort_keys=True).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()


def repeat_campaign(spec: CampaignSpec, repeats: int) -> list[CampaignReport]:
    """Run ``repeats`` campaigns with consecutive derived seeds."""
    if repeats < 1:
        raise ValueError("repeats must be positive")
    reports = []
    net = load_network(spec.net_path)
    for i in range(repeats):
        reports.append(run_campaign(replace(spec, rng_seed=spec.rng_seed + i), net=net))
    return reports
