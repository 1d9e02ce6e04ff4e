"""Call-detail-record parsing and dataset labeling.

Input CSV needs a header with at least source_id, timestamp, duration;
an optional label column carries explicit SPIT/NONSPIT tags (case
insensitive).  Files must be all-labeled or all-unlabeled; unlabeled
datasets get their SPIT pool from the short-call selection rule.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from typing import Iterable, Optional

import numpy as np

from .errors import FormatError, LabelingError, ParameterError
from .models import KlInfo, ExponentialPair, build_surrogate_model, kl_numbers
from .sprt import Verdict

__all__ = [
    "CallRecord",
    "RowError",
    "ParseResult",
    "LabeledDataset",
    "parse_cdr",
    "label_by_duration_rule",
    "label_explicit",
    "dataset_to_models",
    "dataset_manifest",
    "DEFAULT_THRESHOLD_S",
    "DEFAULT_FRACTION",
]

REQUIRED_COLUMNS = ("source_id", "timestamp", "duration")
DEFAULT_THRESHOLD_S = 80.0
DEFAULT_FRACTION = 0.20


@dataclass(frozen=True)
class CallRecord:
    source_id: str
    timestamp: int
    duration: float
    label: Optional[Verdict] = None

    def __post_init__(self):
        if not isinstance(self.source_id, str) or not self.source_id:
            raise ParameterError("source_id must be a non-empty string")
        if not isinstance(self.timestamp, int):
            raise ParameterError(f"timestamp must be an integer, got {self.timestamp!r}")
        if not (isinstance(self.duration, (int, float)) and math.isfinite(self.duration)
                and self.duration >= 0):
            raise ParameterError(f"duration must be finite and >= 0, got {self.duration!r}")
        object.__setattr__(self, "duration", float(self.duration))
        if self.label is not None and self.label not in (Verdict.SPIT, Verdict.NONSPIT):
            raise ParameterError(f"label must be SPIT or NONSPIT, got {self.label!r}")


@dataclass(frozen=True)
class RowError:
    line: int
    message: str


@dataclass(frozen=True)
class ParseResult:
    records: tuple
    errors: tuple

    @property
    def n_skipped(self) -> int:
        return len(self.errors)


def _parse_timestamp(text: str) -> int:
    try:
        return int(text)
    except ValueError:
        value = float(text)  # ValueError propagates to the row handler
        if not value.is_integer():
            raise ValueError(f"timestamp {text!r} is not an integer")
        return int(value)


_LABEL_TOKENS = {"SPIT": Verdict.SPIT, "NONSPIT": Verdict.NONSPIT}


def parse_cdr(stream: Iterable[str]) -> ParseResult:
    """Parse CSV call records from an open text stream.

    Malformed rows are skipped and reported with their line numbers; a
    missing required column, a missing header, or a file mixing labeled and
    unlabeled rows is a hard FormatError.
    """
    reader = csv.DictReader(stream)
    if reader.fieldnames is None:
        raise FormatError("no header row; expected source_id,timestamp,duration[,label]")
    fields = [f.strip() for f in reader.fieldnames]
    missing = [c for c in REQUIRED_COLUMNS if c not in fields]
    if missing:
        raise FormatError(f"missing required column(s): {', '.join(missing)}")
    has_label_column = "label" in fields

    records: list[CallRecord] = []
    errors: list[RowError] = []
    n_labeled = 0
    for row in reader:
        line = reader.line_num
        try:
            raw = {k.strip(): (v.strip() if isinstance(v, str) else v)
                   for k, v in row.items() if k is not None}
            label = None
            if has_label_column:
                token = (raw.get("label") or "").upper()
                if token:
                    if token not in _LABEL_TOKENS:
                        raise ValueError(f"unknown label {raw.get('label')!r}")
                    label = _LABEL_TOKENS[token]
            record = CallRecord(
                source_id=raw.get("source_id") or "",
                timestamp=_parse_timestamp(raw.get("timestamp") or ""),
                duration=float(raw.get("duration") or ""),
                label=label,
            )
        except (ValueError, ParameterError) as exc:
            errors.append(RowError(line=line, message=str(exc)))
            continue
        if record.label is not None:
            n_labeled += 1
        records.append(record)

    if 0 < n_labeled < len(records):
        raise FormatError(
            f"file mixes labeled and unlabeled rows ({n_labeled} of {len(records)} labeled)")
    return ParseResult(records=tuple(records), errors=tuple(errors))


@dataclass(frozen=True)
class LabeledDataset:
    """Disjoint SPIT/NONSPIT partitions of the parsed records."""

    spit: tuple
    nonspit: tuple
    rule: str

    def __post_init__(self):
        if not self.spit or not self.nonspit:
            raise LabelingError("both classes must be non-empty after labeling")

    @property
    def spit_durations(self) -> np.ndarray:
        return np.array([r.duration for r in self.spit], dtype=np.float64)

    @property
    def nonspit_durations(self) -> np.ndarray:
        return np.array([r.duration for r in self.nonspit], dtype=np.float64)


def label_by_duration_rule(records, threshold_s: float = DEFAULT_THRESHOLD_S,
                           fraction: float = DEFAULT_FRACTION,
                           seed: int = 0) -> LabeledDataset:
    """Short-call selection rule.

    Of the records with duration strictly below threshold_s, a seeded
    uniform sample (without replacement, floor(fraction * count) many)
    becomes the SPIT class; everything else is NON-SPIT.  Selection is
    global across all sources.
    """
    records = list(records)
    if not records:
        raise LabelingError("no records to label")
    if not (0.0 < fraction <= 1.0):
        raise ParameterError(f"fraction must lie in (0, 1], got {fraction!r}")
    if not (math.isfinite(threshold_s) and threshold_s > 0):
        raise ParameterError(f"threshold_s must be positive, got {threshold_s!r}")

    short_idx = [i for i, r in enumerate(records) if r.duration < threshold_s]
    if not short_idx:
        raise LabelingError(f"no records with duration below {threshold_s:g} s")
    k = math.floor(fraction * len(short_idx))
    rng = np.random.default_rng(seed)
    chosen = rng.choice(len(short_idx), size=k, replace=False)
    spit_positions = {short_idx[int(c)] for c in chosen}

    spit, nonspit = [], []
    for i, r in enumerate(records):
        if i in spit_positions:
            spit.append(replace(r, label=Verdict.SPIT))
        else:
            nonspit.append(replace(r, label=Verdict.NONSPIT))
    rule = (f"duration<{threshold_s:g}s fraction={fraction:g} seed={seed} "
            f"selected={len(spit)}/{len(short_idx)}")
    return LabeledDataset(spit=tuple(spit), nonspit=tuple(nonspit), rule=rule)


def label_explicit(records) -> LabeledDataset:
    """Honor labels already carried by the records."""
    spit, nonspit = [], []
    for r in records:
        if r.label == Verdict.SPIT:
            spit.append(r)
        elif r.label == Verdict.NONSPIT:
            nonspit.append(r)
        else:
            raise LabelingError(f"record from {r.source_id!r} has no label")
    return LabeledDataset(spit=tuple(spit), nonspit=tuple(nonspit),
                          rule="explicit labels")


def dataset_to_models(dataset: LabeledDataset) -> tuple[ExponentialPair, KlInfo]:
    """Fit one exponential rate per class and compute the information numbers."""
    pair = build_surrogate_model(dataset.spit_durations, dataset.nonspit_durations)
    return pair, kl_numbers(pair)


def dataset_manifest(dataset: LabeledDataset, pair: ExponentialPair, kl: KlInfo) -> dict:
    """JSON-ready summary of a labeled, fitted dataset."""
    return {
        "n_spit": len(dataset.spit),
        "n_nonspit": len(dataset.nonspit),
        "mean_spit_s": float(np.mean(dataset.spit_durations)),
        "mean_nonspit_s": float(np.mean(dataset.nonspit_durations)),
        "lambda0": pair.lambda0,
        "lambda1": pair.lambda1,
        "kappa0": kl.kappa0,
        "kappa1": kl.kappa1,
        "role_inverted": pair.role_inverted,
        "rule": dataset.rule,
    }
