import json

import chansel


def test_fixture_listing():
    names = chansel.list_fixtures()
    assert "travel-agency" in names
    assert "raft-leader" in names


def test_conformance_good_and_faulty():
    assert chansel.check_fixture("travel-agency") == []
    diags = chansel.check_fixture("travel-agency-faulty")
    assert diags, "the mutant must fail"
    assert any(d["kind"] == "ShapeMismatch" for d in diags)


def test_type_roundtrip():
    printed = chansel.fixture_type("travel-agency")
    assert chansel.canonical_type(printed) == printed
    assert chansel.well_formed(printed) == []


def test_run_example_is_deterministic():
    a = chansel.run_example("travel-agency", engine="sim", seed=7)
    b = chansel.run_example("travel-agency", engine="sim", seed=7)
    assert a["trace"] == b["trace"]
    assert a["faults"] == 0
    header = json.loads(a["trace"].splitlines()[0])
    assert header["schema"] == "chansel-trace"


def test_timer_example_has_one_expiry():
    res = chansel.run_example("timer", engine="sim", seed=0)
    lines = [json.loads(l) for l in res["trace"].splitlines()[1:]]
    expiries = [e for e in lines if e.get("label") == "TimerExpired" and e["kind"] == "Send"]
    assert len(expiries) == 1
    assert expiries[0]["time"] == 190


def test_raft_cluster_is_safe_and_elects():
    r = chansel.run_raft(nodes=3, seed=0, max_ticks=15000)
    assert r["safe"]
    assert r["leader_elected"]
    kinds = {e["kind"] for e in r["election_events"]}
    assert "LeaderElected" in kinds


def test_poll_order_is_a_permutation():
    order = chansel.poll_order(8, 123, 4)
    assert sorted(order) == list(range(8))
    assert chansel.poll_order(8, 123, 4) == order
