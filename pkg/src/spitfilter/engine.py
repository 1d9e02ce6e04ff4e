"""Multi-source filtering engine.

Each source gets its own sequential test.  Requests are accepted while the
source is under observation or cleared, and blocked forever once the source
is condemned; durations only arrive for accepted calls.  State snapshots to
a versioned flat file for restart.
"""

from __future__ import annotations

import csv
import enum
import io
import math
import threading
from dataclasses import dataclass, field
from typing import Mapping, Union

from .errors import ParameterError, ProtocolError, SnapshotError
from .models import ExponentialPair, log_likelihood_ratio
from .planning import CostSpec
from .sprt import AccuracySpec, SprtState, Verdict, update

__all__ = ["EngineAction", "SourceSlot", "LossLedger", "FilterEngine", "SNAPSHOT_HEADER"]

SNAPSHOT_HEADER = "# spitfilter-snapshot v1"

_STATUS_TEXT = {Verdict.CONTINUE: "OBSERVING", Verdict.SPIT: "SPIT", Verdict.NONSPIT: "NONSPIT"}
_TEXT_STATUS = {v: k for k, v in _STATUS_TEXT.items()}


class EngineAction(enum.Enum):
    ACCEPT = "ACCEPT"
    BLOCK = "BLOCK"


@dataclass
class SourceSlot:
    """Per-source test state plus accept/block accounting.

    pending counts accepted calls whose completion has not arrived yet; it
    is runtime-only and not persisted.
    """

    state: SprtState = field(default_factory=SprtState)
    accepted: int = 0
    blocked: int = 0
    pending: int = 0


@dataclass(frozen=True)
class LossLedger:
    realized_loss: float
    mistakes: int
    per_source: dict


def _as_truth(value: Union[Verdict, str], source_id: str) -> Verdict:
    if isinstance(value, str):
        value = _TEXT_STATUS.get(value.upper(), None)
    if value not in (Verdict.SPIT, Verdict.NONSPIT):
        raise ParameterError(f"truth for {source_id!r} must be SPIT or NONSPIT")
    return value


class FilterEngine:
    """Observe-then-commit policy over per-source sequential tests.

    All sources share one model and one accuracy spec.  Methods are
    serialized by an internal lock, so callers may invoke them from multiple
    threads; per-slot reads always see a consistent snapshot.
    """

    def __init__(self, model: ExponentialPair, spec: AccuracySpec):
        self._model = model
        self._spec = spec
        self._slots: dict[str, SourceSlot] = {}
        self._lock = threading.RLock()

    @property
    def model(self) -> ExponentialPair:
        return self._model

    @property
    def spec(self) -> AccuracySpec:
        return self._spec

    def on_call_request(self, source_id: str) -> EngineAction:
        """Decide a new outgoing call; unknown sources are auto-registered."""
        self._check_source_id(source_id)
        with self._lock:
            slot = self._slots.get(source_id)
            if slot is None:
                slot = self._slots[source_id] = SourceSlot()
            if slot.state.status == Verdict.SPIT:
                slot.blocked += 1
                return EngineAction.BLOCK
            slot.accepted += 1
            slot.pending += 1
            return EngineAction.ACCEPT

    def on_call_completed(self, source_id: str, duration: float) -> Verdict:
        """Apply the observed duration of an accepted call that just ended.

        Under observation, this advances the test and returns the step
        verdict.  For a source already cleared (or condemned while this call
        was in flight), the observation is discarded and the standing
        verdict returned.  A completion with no outstanding accepted call is
        a protocol error.
        """
        self._check_source_id(source_id)
        if not (isinstance(duration, (int, float)) and math.isfinite(duration)
                and duration >= 0):
            raise ParameterError(f"duration must be finite and >= 0, got {duration!r}")
        with self._lock:
            slot = self._slots.get(source_id)
            if slot is None:
                raise ProtocolError(f"completion for unknown source {source_id!r}")
            if slot.pending <= 0:
                raise ProtocolError(
                    f"completion for {source_id!r} without an outstanding accepted call")
            slot.pending -= 1
            if slot.state.status != Verdict.OBSERVING:
                return slot.state.status
            increment = log_likelihood_ratio(self._model, duration)
            slot.state, verdict = update(slot.state, self._spec, increment)
            return verdict

    def status(self, source_id: str) -> Verdict:
        """Current verdict flag; unknown sources read as OBSERVING."""
        self._check_source_id(source_id)
        with self._lock:
            slot = self._slots.get(source_id)
            return Verdict.OBSERVING if slot is None else slot.state.status

    def slot_view(self, source_id: str) -> SourceSlot:
        """Consistent copy of one slot's state and counters."""
        self._check_source_id(source_id)
        with self._lock:
            slot = self._slots.get(source_id)
            if slot is None:
                raise ParameterError(f"unknown source {source_id!r}")
            return SourceSlot(state=slot.state, accepted=slot.accepted,
                              blocked=slot.blocked, pending=slot.pending)

    def source_ids(self) -> list[str]:
        with self._lock:
            return sorted(self._slots)

    def reset_source(self, source_id: str) -> None:
        """Operator action: restart the test for one source.

        Counters stay (they are historical); in-flight completions are
        dropped, so a completion arriving after a reset is a protocol error.
        """
        self._check_source_id(source_id)
        with self._lock:
            slot = self._slots.get(source_id)
            if slot is None:
                raise ParameterError(f"unknown source {source_id!r}")
            slot.state = SprtState()
            slot.pending = 0

    def settle_loss(self, truth: Mapping[str, Union[Verdict, str]],
                    cost: CostSpec) -> LossLedger:
        """Price the realized decisions against ground truth.

        A SPIT source costs c0 per call it got accepted; a NON-SPIT source
        costs c1 per call it got blocked.  truth must cover every source the
        engine has seen.
        """
        with self._lock:
            per_source: dict[str, float] = {}
            mistakes = 0
            for source_id in sorted(self._slots):
                slot = self._slots[source_id]
                if source_id not in truth:
                    raise ParameterError(f"truth map is missing source {source_id!r}")
                t = _as_truth(truth[source_id], source_id)
                if t == Verdict.SPIT:
                    per_source[source_id] = cost.c0 * slot.accepted
                    if slot.state.status == Verdict.NONSPIT:
                        mistakes += 1
                else:
                    per_source[source_id] = cost.c1 * slot.blocked
                    if slot.state.status == Verdict.SPIT:
                        mistakes += 1
            return LossLedger(
                realized_loss=math.fsum(per_source.values()),
                mistakes=mistakes,
                per_source=per_source,
            )

    # --- persistence ---------------------------------------------------

    def save_snapshot(self, destination) -> None:
        """Write one line per source: id, log ratio, t, status, counters.

        destination is a path or an open text file.  Floats are serialized
        with repr() so a restore reproduces them bit for bit.
        """
        with self._lock:
            rows = [
                (sid,
                 repr(float(slot.state.log_lambda)),
                 slot.state.t,
                 _STATUS_TEXT[slot.state.status],
                 slot.accepted,
                 slot.blocked)
                for sid, slot in sorted(self._slots.items())
            ]
        text = io.StringIO()
        text.write(SNAPSHOT_HEADER + "\n")
        writer = csv.writer(text, lineterminator="\n")
        writer.writerows(rows)
        payload = text.getvalue()
        if hasattr(destination, "write"):
            destination.write(payload)
        else:
            with open(destination, "w", encoding="utf-8", newline="") as fh:
                fh.write(payload)

    @classmethod
    def restore(cls, source, model: ExponentialPair, spec: AccuracySpec) -> "FilterEngine":
        """Rebuild an engine from a snapshot (path or open text file).

        The model and spec are not stored in the snapshot; pass the same
        ones the snapshot was taken under.
        """
        if hasattr(source, "read"):
            payload = source.read()
        else:
            with open(source, "r", encoding="utf-8", newline="") as fh:
                payload = fh.read()
        lines = payload.splitlines()
        if not lines or lines[0].strip() != SNAPSHOT_HEADER:
            raise SnapshotError(
                f"bad or missing snapshot header; expected {SNAPSHOT_HEADER!r}")
        engine = cls(model, spec)
        reader = csv.reader(lines[1:])
        for row in reader:
            if not row:
                continue
            if len(row) != 6:
                raise SnapshotError(f"snapshot row needs 6 fields, got {len(row)}: {row!r}")
            sid, log_lambda, t, status_text, accepted, blocked = row
            try:
                state = SprtState(log_lambda=float(log_lambda), t=int(t),
                                  status=_TEXT_STATUS[status_text])
                slot = SourceSlot(state=state, accepted=int(accepted), blocked=int(blocked))
            except (ValueError, KeyError) as exc:
                raise SnapshotError(f"unreadable snapshot row {row!r}: {exc}") from exc
            if not sid:
                raise SnapshotError("snapshot row has an empty source id")
            if slot.accepted < state.t:
                raise SnapshotError(f"source {sid!r}: accepted < observations")
            if slot.blocked > 0 and state.status != Verdict.SPIT:
                raise SnapshotError(f"source {sid!r}: blocked calls without a SPIT verdict")
            if sid in engine._slots:
                raise SnapshotError(f"duplicate source {sid!r} in snapshot")
            engine._slots[sid] = slot
        return engine

    @staticmethod
    def _check_source_id(source_id: str) -> None:
        if not isinstance(source_id, str) or not source_id:
            raise ParameterError("source_id must be a non-empty string")
