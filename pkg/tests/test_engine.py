import io
import threading

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spitfilter.engine import EngineAction, FilterEngine, SNAPSHOT_HEADER
from spitfilter.errors import ParameterError, ProtocolError, SnapshotError
from spitfilter.models import ExponentialPair
from spitfilter.planning import CostSpec
from spitfilter.sprt import Verdict, make_accuracy, replay

PAIR = ExponentialPair(lambda0=1.0, lambda1=0.1)   # short SPIT calls, rate 1 vs 0.1
SPEC = make_accuracy(0.01, 0.01)

SHORT = 0.01   # strong SPIT evidence per call
LONG = 30.0    # strong NON-SPIT evidence per call


def _engine():
    return FilterEngine(PAIR, SPEC)


def _feed(engine, source, durations):
    actions = []
    for d in durations:
        action = engine.on_call_request(source)
        actions.append(action)
        if action is EngineAction.ACCEPT:
            engine.on_call_completed(source, d)
    return actions


def test_new_source_is_observed_and_accepted():
    engine = _engine()
    assert engine.status("fresh") is Verdict.OBSERVING
    assert engine.on_call_request("fresh") is EngineAction.ACCEPT
    slot = engine.slot_view("fresh")
    assert slot.accepted == 1 and slot.blocked == 0 and slot.pending == 1


def test_source_condemned_then_blocked():
    engine = _engine()
    actions = _feed(engine, "robo", [SHORT] * 10)
    assert engine.status("robo") is Verdict.SPIT
    blocked_in_feed = actions.count(EngineAction.BLOCK)
    assert blocked_in_feed > 0
    assert engine.on_call_request("robo") is EngineAction.BLOCK
    slot = engine.slot_view("robo")
    assert slot.blocked == blocked_in_feed + 1
    assert slot.accepted == slot.state.t  # every accepted call was observed


def test_source_cleared_keeps_flowing():
    engine = _engine()
    _feed(engine, "human", [LONG] * 10)
    assert engine.status("human") is Verdict.NONSPIT
    assert engine.on_call_request("human") is EngineAction.ACCEPT
    t_before = engine.slot_view("human").state.t
    engine.on_call_completed("human", LONG)  # discarded, verdict stands
    assert engine.slot_view("human").state.t == t_before


def test_completion_protocol_errors():
    engine = _engine()
    with pytest.raises(ProtocolError):
        engine.on_call_completed("ghost", 1.0)
    engine.on_call_request("a")
    engine.on_call_completed("a", 5.0)
    with pytest.raises(ProtocolError):
        engine.on_call_completed("a", 5.0)  # nothing outstanding
    with pytest.raises(ParameterError):
        engine.on_call_completed("a", -1.0)
    with pytest.raises(ParameterError):
        engine.on_call_request("")


def test_multiple_outstanding_calls():
    engine = _engine()
    engine.on_call_request("s")
    engine.on_call_request("s")
    engine.on_call_completed("s", 5.0)
    engine.on_call_completed("s", 5.0)
    assert engine.slot_view("s").pending == 0


def test_in_flight_completion_after_verdict_is_discarded():
    engine = _engine()
    _feed(engine, "s", [SHORT] * 9)
    if engine.status("s") is Verdict.OBSERVING:
        engine.on_call_request("s")
        _ = [engine.on_call_completed("s", SHORT)]
    assert engine.status("s") is Verdict.SPIT
    # an extra request while condemned is blocked, so no completion may follow
    assert engine.on_call_request("s") is EngineAction.BLOCK
    with pytest.raises(ProtocolError):
        engine.on_call_completed("s", SHORT)


def test_reset_source():
    engine = _engine()
    _feed(engine, "s", [SHORT] * 10)
    blocked_before = engine.slot_view("s").blocked
    engine.on_call_request("s")  # blocked
    engine.reset_source("s")
    assert engine.status("s") is Verdict.OBSERVING
    slot = engine.slot_view("s")
    assert slot.state.t == 0
    assert slot.blocked == blocked_before + 1  # history kept
    assert slot.pending == 0
    with pytest.raises(ParameterError):
        engine.reset_source("nope")


def test_source_ids_sorted():
    engine = _engine()
    for sid in ("zeta", "alpha", "mid"):
        engine.on_call_request(sid)
    assert engine.source_ids() == ["alpha", "mid", "zeta"]


def test_settle_loss():
    engine = _engine()
    _feed(engine, "spitter", [SHORT] * 12)     # condemned after a few calls
    _feed(engine, "caller", [LONG] * 12)       # cleared, all accepted
    cost = CostSpec(c0=2.0, c1=7.0, n_calls=100)

    ledger = engine.settle_loss({"spitter": "SPIT", "caller": Verdict.NONSPIT}, cost)
    spit_slot = engine.slot_view("spitter")
    assert ledger.per_source["spitter"] == 2.0 * spit_slot.accepted
    assert ledger.per_source["caller"] == 0.0   # nothing blocked
    assert ledger.realized_loss == sum(ledger.per_source.values())
    assert ledger.mistakes == 0

    # inverted truth: both decisions become mistakes
    flipped = engine.settle_loss({"spitter": "NONSPIT", "caller": "SPIT"}, cost)
    assert flipped.mistakes == 2

    with pytest.raises(ParameterError):
        engine.settle_loss({"spitter": "SPIT"}, cost)
    with pytest.raises(ParameterError):
        engine.settle_loss({"spitter": "SPIT", "caller": "MAYBE"}, cost)


def test_snapshot_round_trip_path_and_stream(tmp_path):
    engine = _engine()
    _feed(engine, "a", [SHORT] * 10)
    _feed(engine, "b", [LONG] * 10)
    _feed(engine, "c", [5.0, 2.0, 3.0])

    path = tmp_path / "snap.csv"
    engine.save_snapshot(path)
    restored = FilterEngine.restore(path, PAIR, SPEC)
    assert restored.source_ids() == engine.source_ids()
    for sid in engine.source_ids():
        orig, back = engine.slot_view(sid), restored.slot_view(sid)
        assert back.state == orig.state          # bit-exact log ratio
        assert back.accepted == orig.accepted
        assert back.blocked == orig.blocked
        assert back.pending == 0                 # in-flight never survives

    buf = io.StringIO()
    engine.save_snapshot(buf)
    assert buf.getvalue().startswith(SNAPSHOT_HEADER + "\n")
    again = FilterEngine.restore(io.StringIO(buf.getvalue()), PAIR, SPEC)
    assert again.source_ids() == engine.source_ids()


def test_restored_engine_continues_identically():
    stream = list(np.random.default_rng(3).exponential(8.0, 40))
    whole = _engine()
    _feed(whole, "s", stream)

    first = _engine()
    _feed(first, "s", stream[:17])
    buf = io.StringIO()
    first.save_snapshot(buf)
    second = FilterEngine.restore(io.StringIO(buf.getvalue()), PAIR, SPEC)
    _feed(second, "s", stream[17:])

    assert second.slot_view("s").state == whole.slot_view("s").state
    assert second.slot_view("s").accepted == whole.slot_view("s").accepted
    assert second.slot_view("s").blocked == whole.slot_view("s").blocked


@pytest.mark.parametrize("payload", [
    "not a header\na,0.0,0,OBSERVING,0,0\n",
    SNAPSHOT_HEADER + "\na,0.0,0,OBSERVING,0\n",          # five fields
    SNAPSHOT_HEADER + "\na,0.0,0,SLEEPING,0,0\n",         # unknown status
    SNAPSHOT_HEADER + "\na,zero,0,OBSERVING,0,0\n",       # unreadable float
    SNAPSHOT_HEADER + "\na,0.0,5,OBSERVING,3,0\n",        # accepted < observations
    SNAPSHOT_HEADER + "\na,0.0,0,OBSERVING,0,2\n",        # blocked without verdict
    SNAPSHOT_HEADER + "\n,0.0,0,OBSERVING,0,0\n",         # empty id
    SNAPSHOT_HEADER + "\na,0.0,1,OBSERVING,1,0\na,0.0,1,OBSERVING,1,0\n",
])
def test_restore_rejects_corrupt_snapshots(payload):
    with pytest.raises(SnapshotError):
        FilterEngine.restore(io.StringIO(payload), PAIR, SPEC)


def test_engine_is_thread_safe():
    engine = _engine()
    errors = []

    def worker(idx):
        rng = np.random.default_rng(idx)
        try:
            for _ in range(300):
                sid = f"src{idx % 4}"
                if engine.on_call_request(sid) is EngineAction.ACCEPT:
                    engine.on_call_completed(sid, float(rng.exponential(5.0)))
        except Exception as exc:  # pragma: no cover
            errors.append(exc)

    threads = [threading.Thread(target=worker, args=(i,)) for i in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert not errors
    total = sum(engine.slot_view(s).accepted + engine.slot_view(s).blocked
                for s in engine.source_ids())
    assert total == 8 * 300


durations_strategy = st.lists(
    st.floats(min_value=0.0, max_value=100.0, allow_nan=False), min_size=0, max_size=60)


@settings(max_examples=150, deadline=None)
@given(durations=durations_strategy)
def test_engine_agrees_with_replay(durations):
    engine = _engine()
    _feed(engine, "s", durations)
    if not durations:
        assert engine.status("s") is Verdict.OBSERVING
        return

    verdict, consumed = replay(durations, PAIR, SPEC)
    slot = engine.slot_view("s")
    assert slot.state.status == verdict
    assert slot.state.t == consumed
    if verdict is Verdict.SPIT:
        assert slot.accepted == consumed
        assert slot.blocked == len(durations) - consumed
    else:
        assert slot.accepted == len(durations)
        assert slot.blocked == 0
