"""Monte-Carlo experiments over the streaming tester.

CSV schema (one row per trial and hypothesis)::

    trial,hypothesis,distance,decision,samples,peak_words,ms

``hypothesis`` is ``null`` or ``alt``; ``distance`` is the exact Kolmogorov
distance of the sampled model from the reference.  ``ms`` is left empty
unless the plan asks for timing, so the file is reproducible byte for byte.
After the trial rows come one ``summary`` row per hypothesis, whose
``decision`` field holds ``reject_rate=...`` (null) or ``accept_rate=...``
(alternatives), ``samples`` the mean sample count and ``peak_words`` the
maximum peak.
"""

from __future__ import annotations

import csv
import io
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from ..reference import exact_kdistance, model_from_dict
from ..sketch import (
    BOOKKEEPING_WORDS,
    Decision,
    TesterConfig,
    amplified_test,
)
from ..streams import ModelStream

CSV_COLUMNS = ("trial", "hypothesis", "distance", "decision", "samples", "peak_words", "ms")


def memory_report(config: TesterConfig) -> int:
    """Predicted peak live words: per level the counters and cached boundaries, plus bookkeeping."""
    return config.levels * (2 * config.batch_size + 1) + BOOKKEEPING_WORDS


@dataclass
class Hypothesis:
    label: str  # "null" or "alt"
    model: Any
    distance: float


@dataclass
class ExperimentPlan:
    config: TesterConfig
    null_model: Any
    alt_models: list[tuple[Any, float]] = field(default_factory=list)
    trials: int = 100
    base_seed: int = 0
    output_path: str | None = None
    record_timing: bool = False

    def seed(self, trial_index: int) -> int:
        return self.base_seed + trial_index

    def hypotheses(self) -> list[Hypothesis]:
        out = [Hypothesis("null", self.null_model, 0.0)]
        out.extend(Hypothesis("alt", m, d) for m, d in self.alt_models)
        return out

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> "ExperimentPlan":
        cfg = TesterConfig(**raw["config"])
        null = model_from_dict(raw["null_model"])
        alts = []
        for entry in raw.get("alt_models", []):
            model = model_from_dict(entry["model"] if "model" in entry else entry)
            dist = entry.get("distance") if "model" in entry else None
            if dist is None:
                dist = exact_kdistance(model, null)
            alts.append((model, float(dist)))
        return cls(
            config=cfg,
            null_model=null,
            alt_models=alts,
            trials=int(raw.get("trials", 100)),
            base_seed=int(raw.get("base_seed", 0)),
            output_path=raw.get("output_path"),
            record_timing=bool(raw.get("record_timing", False)),
        )

    @classmethod
    def load(cls, path: str) -> "ExperimentPlan":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


@dataclass
class TrialReport:
    trial_index: int
    hypothesis: str
    distance: float
    decision: Decision
    samples_consumed: int
    peak_live_words: int
    wall_time_ms: float | None = None

    def row(self) -> list[str]:
        ms = "" if self.wall_time_ms is None else f"{self.wall_time_ms:.3f}"
        return [
            str(self.trial_index),
            self.hypothesis,
            f"{self.distance:.6g}",
            str(self.decision),
            str(self.samples_consumed),
            str(self.peak_live_words),
            ms,
        ]


def run_trial(config: TesterConfig, reference, hyp: Hypothesis, trial_index: int, seed: int,
              record_timing: bool = False) -> TrialReport:
    # every hypothesis of a trial reuses the trial seed (common random numbers)
    stream = ModelStream(hyp.model, np.random.default_rng(seed))
    start = time.perf_counter()
    report = amplified_test(config, reference, stream)
    elapsed = (time.perf_counter() - start) * 1e3
    return TrialReport(
        trial_index=trial_index,
        hypothesis=hyp.label,
        distance=hyp.distance,
        decision=report.verdict.decision,
        samples_consumed=report.samples_consumed,
        peak_live_words=report.peak_live_words,
        wall_time_ms=elapsed if record_timing else None,
    )


def _trial_job(args) -> list[TrialReport]:
    plan, index = args
    return [
        run_trial(plan.config, plan.null_model, h, index, plan.seed(index), plan.record_timing)
        for h in plan.hypotheses()
    ]


def run_trials(plan: ExperimentPlan, workers: int = 1) -> list[TrialReport]:
    """Run every trial; results come back ordered by trial index, then hypothesis."""
    jobs = [(plan, i) for i in range(plan.trials)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_trial_job, jobs))
    else:
        chunks = [_trial_job(job) for job in jobs]
    return [r for chunk in chunks for r in chunk]


@dataclass
class HypothesisSummary:
    hypothesis: str
    distance: float
    trials: int
    rejections: int
    mean_samples: float
    max_peak_words: int

    @property
    def reject_rate(self) -> float:
        return self.rejections / self.trials

    @property
    def error_rate(self) -> float:
        """Type-I rate for the null, type-II (acceptance) rate for alternatives."""
        return self.reject_rate if self.hypothesis == "null" else 1.0 - self.reject_rate

    def row(self) -> list[str]:
        key = "reject_rate" if self.hypothesis == "null" else "accept_rate"
        return [
            "summary",
            self.hypothesis,
            f"{self.distance:.6g}",
            f"{key}={self.error_rate:.4f}",
            f"{self.mean_samples:.1f}",
            str(self.max_peak_words),
            "",
        ]


def summarize(reports: Sequence[TrialReport]) -> list[HypothesisSummary]:
    groups: dict[tuple[str, float], list[TrialReport]] = {}
    for r in reports:
        groups.setdefault((r.hypothesis, r.distance), []).append(r)
    out = []
    for (label, dist), rows in groups.items():
        out.append(
            HypothesisSummary(
                hypothesis=label,
                distance=dist,
                trials=len(rows),
                rejections=sum(r.decision is Decision.REJECT for r in rows),
                mean_samples=float(np.mean([r.samples_consumed for r in rows])),
                max_peak_words=max(r.peak_live_words for r in rows),
            )
        )
    return out


def render_csv(reports: Sequence[TrialReport], summaries: Sequence[HypothesisSummary]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in reports:
        writer.writerow(r.row())
    for s in summaries:
        writer.writerow(s.row())
    return buf.getvalue()


@dataclass
class ExperimentResult:
    reports: list[TrialReport]
    summaries: list[HypothesisSummary]
    csv_text: str


def run_experiment(plan: ExperimentPlan, output_path: str | None = None,
                   workers: int = 1) -> ExperimentResult:
    """Run the plan and write its CSV to ``output_path`` (or the plan's own path)."""
    reports = run_trials(plan, workers=workers)
    summaries = summarize(reports)
    text = render_csv(reports, summaries)
    path = output_path or plan.output_path
    if path:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return ExperimentResult(reports, summaries, text)
