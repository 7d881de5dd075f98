"""
Monte-Carlo sweeps over scenario parameters.

Every trial draws its channel from ``SeedSequence([master_seed, trial])``,
so all schemes and all grid points see the same user drops for a given
trial index (common random numbers) and reruns are byte-identical.
"""

from __future__ import annotations

import csv
import io
import math
import traceback
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .asymptotic import maxmin_upper_bound
from .channel_model import ScenarioConfig, db_to_linear, generate_channels
from .maxmin import oda, odaso, ospwj_fair, pfa, pfaso
from .rate_max import epa_rate, jpa, jpaso, ospwj
from .secure_rate import fairness_gap

__all__ = [
    "SCHEMES",
    "SWEEP_VARIABLES",
    "CSV_HEADER",
    "SweepSpec",
    "TrialRecord",
    "AggregateRow",
    "trial_rng",
    "run_trials",
    "aggregate",
    "run_sweep",
    "rank_averaged_fairness",
    "emit_csv",
    "parse_csv",
    "format_summary",
]

SCHEMES: dict = {
    "jpa": jpa,
    "jpaso": jpaso,
    "epa": epa_rate,
    "ospwj": ospwj,
    "pfa": pfa,
    "oda": oda,
    "pfaso": pfaso,
    "odaso": odaso,
    "ospwj_fair": ospwj_fair,
    "maxmin_ub": maxmin_upper_bound,
}

SWEEP_VARIABLES = ("ps_db", "pj_db", "num_users", "jammer_pos")
CSV_HEADER = ["sweep_var", "value", "scheme", "mean_sum_rate", "mean_fairness",
              "mean_min_rate", "trials", "stderr"]


def _format_value(value) -> str:
    if isinstance(value, (tuple, list)):
        return ";".join(f"{float(v):.6f}" for v in value)
    return f"{float(value):.6f}"


def _parse_value(text: str):
    if ";" in text:
        return tuple(float(v) for v in text.split(";"))
    return float(text)


@dataclass
class SweepSpec:
    """One swept variable, its grid, and everything held fixed."""

    swept_variable: str
    grid: Sequence
    fixed: ScenarioConfig = field(default_factory=ScenarioConfig)
    trials: int = 500
    schemes: Sequence[str] = ("jpa", "jpaso", "epa")
    master_seed: int = 0

    def __post_init__(self):
        if self.swept_variable not in SWEEP_VARIABLES:
            raise ValueError(f"swept_variable must be one of {SWEEP_VARIABLES}")
        self.grid = list(self.grid)
        if not self.grid:
            raise ValueError("grid must be non-empty")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        unknown = [s for s in self.schemes if s not in SCHEMES]
        if unknown:
            raise ValueError(f"unknown schemes {unknown}; available: {sorted(SCHEMES)}")
        self.schemes = list(self.schemes)

    def config_for(self, value) -> ScenarioConfig:
        cfg = self.fixed
        s2 = cfg.noise_variance
        if self.swept_variable == "ps_db":
            return cfg.replace(source_budget=db_to_linear(float(value), s2))
        if self.swept_variable == "pj_db":
            return cfg.replace(jammer_budget=db_to_linear(float(value), s2))
        if self.swept_variable == "num_users":
            return cfg.replace(num_users=int(value))
        return cfg.replace(jammer_pos=tuple(value))


@dataclass
class TrialRecord:
    value: object
    scheme: str
    trial: int
    sum_rate: float = math.nan
    fairness: float = math.nan
    min_rate: float = math.nan
    sorted_rates: Optional[np.ndarray] = None
    error: Optional[str] = None


@dataclass
class AggregateRow:
    sweep_var: str
    value: object
    scheme: str
    mean_sum_rate: float
    mean_fairness: float
    mean_min_rate: float
    trials: int
    stderr: float
    errors: int = 0

    def __post_init__(self):
        if not self.stderr >= 0 and not math.isnan(self.stderr):
            raise ValueError("stderr must be non-negative")

    def csv_fields(self) -> list:
        return [self.sweep_var, _format_value(self.value), self.scheme,
                f"{self.mean_sum_rate:.6f}", f"{self.mean_fairness:.6f}",
                f"{self.mean_min_rate:.6f}", str(self.trials), f"{self.stderr:.6f}"]


def trial_rng(master_seed: int, trial: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([master_seed, trial]))


def run_trials(spec: SweepSpec, schemes: Optional[dict] = None,
               progress: Optional[Callable[[int, int], None]] = None) -> list:
    """Run every (grid value, trial, scheme) and return the raw trial records.

    A scheme raising on one trial produces a record with ``error`` set; the
    sweep carries on.
    """
    table = SCHEMES if schemes is None else schemes
    records = []
    total = len(spec.grid) * spec.trials
    done = 0
    for value in spec.grid:
        cfg = spec.config_for(value)
        for trial in range(spec.trials):
            ch = generate_channels(cfg, trial_rng(spec.master_seed, trial))
            for name in spec.schemes:
                try:
                    out = table[name](ch, cfg)
                    rates = np.sort(out.user_rates)
                    records.append(TrialRecord(
                        value, name, trial, float(rates.sum()),
                        1.0 - fairness_gap(rates), float(rates[0]), rates))
                except Exception as exc:  # isolate pathological draws
                    records.append(TrialRecord(
                        value, name, trial,
                        error=f"{type(exc).__name__}: {exc}\n{traceback.format_exc(limit=3)}"))
            done += 1
            if progress is not None:
                progress(done, total)
    return records


def _key(value):
    return tuple(value) if isinstance(value, (tuple, list)) else (float(value),)


def aggregate(spec: SweepSpec, records) -> list:
    """Reduce trial records to one row per (grid value, scheme), in trial order."""
    rows = []
    for value in spec.grid:
        for name in sorted(spec.schemes):
            recs = sorted((r for r in records if r.scheme == name and _key(r.value) == _key(value)),
                          key=lambda r: r.trial)
            ok = [r for r in recs if r.error is None]
            n = len(ok)
            if n:
                sr = np.array([r.sum_rate for r in ok])
                stderr = float(sr.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
                row = AggregateRow(spec.swept_variable, value, name, float(sr.mean()),
                                   float(np.mean([r.fairness for r in ok])),
                                   float(np.mean([r.min_rate for r in ok])), n, stderr,
                                   len(recs) - n)
            else:
                row = AggregateRow(spec.swept_variable, value, name, math.nan, math.nan,
                                   math.nan, 0, 0.0, len(recs))
            rows.append(row)
    return rows


def run_sweep(spec: SweepSpec, schemes: Optional[dict] = None) -> list:
    return aggregate(spec, run_trials(spec, schemes))


def rank_averaged_fairness(records, value, scheme: str) -> float:
    """Fairness index of the rank-wise mean of the sorted rate vectors."""
    rates = [r.sorted_rates for r in records
             if r.error is None and r.scheme == scheme and _key(r.value) == _key(value)]
    if not rates:
        return math.nan
    return 1.0 - fairness_gap(np.mean(np.vstack(rates), axis=0))


def emit_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        w.writerow(r.csv_fields())
    return buf.getvalue()


def parse_csv(text: str) -> list:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header != CSV_HEADER:
        raise ValueError(f"unexpected CSV header {header}")
    rows = []
    for rec in reader:
        if not rec:
            continue
        rows.append(AggregateRow(rec[0], _parse_value(rec[1]), rec[2], float(rec[3]),
                                 float(rec[4]), float(rec[5]), int(rec[6]), float(rec[7])))
    return rows


def format_summary(rows) -> str:
    """Fixed-width table of the aggregate rows."""
    lines = [f"{'var':<11}{'value':>20} {'scheme':<11}{'sum_rate':>12}{'fairness':>10}"
             f"{'min_rate':>10}{'trials':>8}{'stderr':>10}"]
    for r in rows:
        flag = f"  ({r.errors} failed)" if r.errors else ""
        lines.append(f"{r.sweep_var:<11}{_format_value(r.value):>20} {r.scheme:<11}"
                     f"{r.mean_sum_rate:>12.4f}{r.mean_fairness:>10.4f}{r.mean_min_rate:>10.4f}"
                     f"{r.trials:>8d}{r.stderr:>10.4f}{flag}")
    return "\n".join(lines) + "\n"
