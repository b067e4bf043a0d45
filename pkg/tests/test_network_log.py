import random

import pytest

from src.database.models import Link
from src.database.network_log import NetworkLog
from src.services.errors import UnknownLink


@pytest.fixture
def log():
    return NetworkLog([
        Link(link_id="L1", a="R1", b="R2", capacity=100, latency=5),
        Link(link_id="L2", a="R2", b="R3", capacity=60, latency=5),
    ])


def brute_force_peak(reservations, start, end):
    # Integer windows: checking every whole instant is exact
    return max(
        (sum(bw for bw, s, e in reservations if s <= t < e) for t in range(start, end)),
        default=0,
    )


def test_empty_log_has_full_capacity(log):
    assert log.query_capacity(["L1", "L2"], 0, 100) == 60
    assert log.query_capacity([], 0, 100) == float("inf")


def test_windows_are_half_open(log):
    log.commit("a", ["L1"], ["pdl-0006"], 70, 10, 20)

    assert log.available("L1", 20, 30) == 100
    assert log.available("L1", 0, 10) == 100
    assert log.available("L1", 19, 21) == 30


def test_peak_counts_overlapping_reservations(log):
    log.commit("a", ["L1"], [], 30, 0, 50)
    log.commit("b", ["L1"], [], 40, 40, 90)
    log.commit("c", ["L1"], [], 20, 60, 100)

    assert log.peak_load("L1", 0, 100) == 70
    assert log.peak_load("L1", 50, 100) == 60
    assert log.peak_load("L1", 90, 100) == 20


def test_peak_matches_brute_force_sweep():
    rng = random.Random(11)
    for _ in range(50):
        log = NetworkLog([Link(link_id="L", a="A", b="B", capacity=1000, latency=1)])
        reservations = []
        for i in range(rng.randint(0, 12)):
            start = rng.randint(0, 80)
            end = start + rng.randint(1, 30)
            bandwidth = rng.randint(1, 50)
            log.commit(f"r{i}", ["L"], [], bandwidth, start, end)
            reservations.append((bandwidth, start, end))
        for _ in range(10):
            start = rng.randint(0, 100)
            end = start + rng.randint(1, 30)
            assert log.peak_load("L", start, end) == brute_force_peak(reservations, start, end)


def test_release_truncates_but_keeps_history(log):
    log.commit("a", ["L1", "L2"], ["pdl-0006", "pdl-0007"], 50, 0, 100)
    log.release("a", 40)

    assert log.load_at("L1", 39) == 50
    assert log.load_at("L1", 40) == 0
    assert log.device_load_at("pdl-0006", 10) == 50
    assert log.device_load_at("pdl-0006", 60) == 0
    assert [(r.start, r.end) for r in log.history("L2")] == [(0, 40)]


def test_release_before_start_empties_reservation(log):
    log.commit("a", ["L1"], [], 50, 30, 60)
    log.release("a", 10)
    assert log.peak_load("L1", 0, 100) == 0


def test_unknown_link(log):
    with pytest.raises(UnknownLink):
        log.query_capacity(["L9"], 0, 10)
    with pytest.raises(UnknownLink):
        log.commit("a", ["L1", "L9"], [], 10, 0, 10)
    # Nothing was committed on L1 by the failed call
    assert log.load_at("L1", 5) == 0
