import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from combsteer.config import override_tolerances
from combsteer.exceptions import IllConditionedError, LabelError, PartitionError, UnphysicalStateError
from combsteer.gaussian import (
    Bipartition,
    CovarianceMatrix,
    direct_sum,
    random_physical_cm,
    squeezed_vacuum,
    thermal,
    two_mode_squeezed_vacuum,
    vacuum,
)
from combsteer.steering import (
    Direction,
    classify_direction,
    count_bipartitions,
    enumerate_bipartitions,
    loss_scan,
    split_stats,
    steering,
    steering_many,
    steering_spectrum,
    steering_value,
)

seeds = st.integers(min_value=0, max_value=2**32 - 1)


@pytest.fixture(scope="module")
def tmsv_in_vacuum():
    return direct_sum(two_mode_squeezed_vacuum(0.5), vacuum(2))


# -- steering --------------------------------------------------------------


def test_vacuum_has_no_steering():
    r = steering(vacuum(2), Bipartition([0], [1]))
    assert r.value == 0.0 and not r.steerable
    assert r.spectrum == pytest.approx((1.0,))


@pytest.mark.parametrize("part", [([0], [1]), ([1], [0])])
def test_tmsv_value(part):
    r = steering(two_mode_squeezed_vacuum(0.5), Bipartition(*part))
    assert r.value == pytest.approx(0.433781, abs=1e-6)
    assert r.value == pytest.approx(oracles.tmsv_value(0.5), abs=1e-12)
    assert r.steerable


def test_value_recomputable_from_spectrum(rng):
    for _ in range(10):
        cm = random_physical_cm(4, rng, max_squeezing=1.5, max_thermal=1.2)
        r = steering(cm, Bipartition([0, 2], [1, 3]))
        assert r.value >= 0
        assert abs(r.value - steering_value(r.spectrum)) <= 1e-12
        assert list(r.spectrum) == sorted(r.spectrum)


def test_matches_bruteforce_oracle(rng):
    for _ in range(20):
        cm = random_physical_cm(5, rng, max_squeezing=1.2, max_thermal=1.3)
        for part in ([(0,), (1, 2)], [(3, 1), (4,)], [(0, 1, 2), (3, 4)]):
            want = oracles.steering_value(cm.matrix, *part)
            assert steering(cm, Bipartition(*part)).value == pytest.approx(want, abs=1e-10)


def test_rejects_unphysical_state():
    with pytest.raises(UnphysicalStateError):
        steering(CovarianceMatrix(np.diag([0.5, 0.5, 1, 1])), Bipartition([0], [1]))


def test_ill_conditioned_steering_block():
    sigma = np.diag([1e-7, 1e7, 1.0, 1.0])
    with pytest.raises(IllConditionedError):
        steering(CovarianceMatrix(sigma), Bipartition([0], [1]))
    results = steering_many(CovarianceMatrix(sigma), [Bipartition([0], [1]), Bipartition([1], [0])])
    assert results[0].error and math.isnan(results[0].value) and not results[0].steerable
    assert results[1].error is None and results[1].value == 0.0


@settings(max_examples=30, deadline=None)
@given(seeds, st.integers(2, 5))
def test_products_of_single_modes_never_steer(seed, n):
    rng = np.random.default_rng(seed)
    cm = direct_sum(*(random_physical_cm(1, rng, max_squeezing=2.0) for _ in range(n)))
    for r in steering_many(cm, enumerate_bipartitions(n, "pairs")):
        assert r.value == 0.0


@settings(max_examples=25, deadline=None)
@given(seeds, st.integers(3, 6))
def test_steering_party_extension_is_monotone(seed, n):
    rng = np.random.default_rng(seed)
    cm = random_physical_cm(n, rng, max_squeezing=1.0, max_thermal=1.3)
    parts = enumerate_bipartitions(n, "pairs")
    value = {p: r.value for p, r in zip(parts, steering_many(cm, parts))}
    for p in parts:
        for extra in range(n):
            if extra in p.steering or extra in p.steered:
                continue
            bigger = Bipartition(tuple(sorted(p.steering + (extra,))), p.steered)
            assert value[p] <= value[bigger] + 1e-9


# -- enumeration -----------------------------------------------------------


def test_enumeration_examples():
    assert len(enumerate_bipartitions(16, "full")) == 65534
    assert len(enumerate_bipartitions(4, "disjoint_pairs")) == 50
    assert enumerate_bipartitions(2, "full") == [Bipartition([0], [1]), Bipartition([1], [0])]
    with pytest.raises(PartitionError):
        enumerate_bipartitions(1)
    with pytest.raises(ValueError):
        enumerate_bipartitions(3, "bogus")


@pytest.mark.parametrize("n", range(2, 11))
def test_enumeration_against_bruteforce(n):
    for mode in ("full", "disjoint_pairs"):
        got = [(p.steering, p.steered) for p in enumerate_bipartitions(n, mode)]
        if n <= 8:
            assert got == oracles.all_bipartitions(n, mode)
        assert len(got) == count_bipartitions(n, mode)
    assert count_bipartitions(n, "full") == 2**n - 2
    assert count_bipartitions(n, "pairs") == 3**n - 2 ** (n + 1) + 1


# -- spectrum --------------------------------------------------------------


def test_spectrum_of_vacuum():
    report = steering_spectrum(vacuum(4), "full")
    assert len(report.results) == 14 and not np.any(report.values)
    for s in report.stats.values():
        assert s.minimum == s.maximum == s.whisker_low == s.whisker_high == 0.0
    assert sum(s.count for s in report.stats.values()) == 14


def test_spectrum_tmsv_in_vacuum(tmsv_in_vacuum):
    report = steering_spectrum(tmsv_in_vacuum, "pairs")
    assert len(report.results) == 50
    for r in report.results:
        separated = (0 in r.partition.steering and 1 in r.partition.steered) or (
            1 in r.partition.steering and 0 in r.partition.steered
        )
        assert r.steerable == separated
        if separated:
            assert r.value == pytest.approx(oracles.tmsv_value(0.5), abs=1e-10)


def test_spectrum_serial_equals_parallel(comb_states):
    cm = comb_states[8]
    serial = steering_spectrum(cm, "pairs", n_jobs=1)
    parallel = steering_spectrum(cm, "pairs", n_jobs=2)
    assert serial == parallel


def test_spectrum_stats_recomputable(comb_states):
    report = steering_spectrum(comb_states[4], "full")
    for (m, n), s in report.stats.items():
        vals = [r.value for r in report.results if len(r.partition.steering) == m]
        assert s.count == len(vals)
        assert s.median == pytest.approx(np.median(vals))
        assert s.mean == pytest.approx(np.mean(vals))
        assert s.whisker_low >= s.minimum and s.whisker_high <= s.maximum


def test_split_stats_percentile_whiskers():
    s = split_stats(np.arange(101.0), whisker=(1.5, 98.5))
    assert s.whisker_low == pytest.approx(1.5) and s.whisker_high == pytest.approx(98.5)
    assert split_stats([1.0, math.nan]).n_failed == 1


def test_comb_spectrum_peaks_at_even_split(comb_states):
    report = steering_spectrum(comb_states[16], "full")
    assert len(report.results) == 65534
    best = report.best()
    assert len(best.partition.steering) == len(best.partition.steered) == 8


# -- loss scan -------------------------------------------------------------


def test_loss_scan_without_removal_matches_spectrum(comb_states):
    scan = loss_scan(comb_states[4], [])
    assert len(scan.steps) == 1
    assert scan.steps[0].spectrum == steering_spectrum(comb_states[4], "full")


def test_loss_scan_vacuum():
    scan = loss_scan(vacuum(4), [0])
    assert scan.steps[0].n_partitions == 6 and scan.steps[0].n_steerable == 0


def test_loss_scan_errors():
    with pytest.raises(LabelError):
        loss_scan(vacuum(4, list("ABCD")), ["Z"])
    with pytest.raises(LabelError):
        loss_scan(vacuum(4, list("ABCD")), ["A", "A"])
    with pytest.raises(PartitionError):
        loss_scan(vacuum(3), [0, 1])


def test_comb_loss_scan(comb_states):
    removal = ["a11", "a12", "a21", "a22", "b11", "b12"]
    scan = loss_scan(comb_states[16], removal)
    assert len(scan.steps) == 6
    for k, step in enumerate(scan.steps, 1):
        assert step.removed == tuple(removal[:k])
        assert step.remaining == 16 - k
        assert 0 < step.n_steerable <= 2**step.remaining - 2
    counts = scan.steerable_counts
    assert all(a >= b for a, b in zip(counts, counts[1:]))


# -- direction -------------------------------------------------------------


def test_classify_direction_examples():
    assert classify_direction(0.1382, 0) is Direction.ONE_WAY_FORWARD
    assert classify_direction(0, 0) is Direction.NO_STEERING
    assert classify_direction(0.433781, 0.433781) is Direction.TWO_WAY
    assert classify_direction(0, 0.2) is Direction.ONE_WAY_BACKWARD


def test_classify_direction_threshold_and_symmetry():
    assert classify_direction(5e-10, 0) is Direction.NO_STEERING
    with override_tolerances(steer_epsilon=1e-12):
        assert classify_direction(5e-10, 0) is Direction.ONE_WAY_FORWARD
    for f, b in [(0.3, 0.0), (0.0, 0.3), (0.1, 0.2), (0.0, 0.0)]:
        swapped = {
            Direction.ONE_WAY_FORWARD: Direction.ONE_WAY_BACKWARD,
            Direction.ONE_WAY_BACKWARD: Direction.ONE_WAY_FORWARD,
        }
        d = classify_direction(f, b)
        assert classify_direction(b, f) is swapped.get(d, d)


def test_classify_direction_rejects_negative():
    with pytest.raises(ValueError):
        classify_direction(-0.1, 0)
    with pytest.raises(ValueError):
        classify_direction(0, math.nan)


def test_one_way_with_thermal_noise():
    # excess noise on mode 1: mode 1 still steers mode 0, not the reverse
    sigma = two_mode_squeezed_vacuum(0.3).matrix.copy()
    sigma[2:, 2:] += 0.6 * np.eye(2)
    cm = CovarianceMatrix(sigma)
    f = steering(cm, Bipartition([0], [1])).value
    b = steering(cm, Bipartition([1], [0])).value
    assert f == 0.0
    a, c = math.cosh(0.6), math.sinh(0.6)
    assert b == pytest.approx(-math.log(a - c**2 / (a + 0.6)), abs=1e-12)
    assert classify_direction(f, b) is Direction.ONE_WAY_BACKWARD
    assert steering(direct_sum(thermal(2.0), squeezed_vacuum(0.4)), Bipartition([0], [1])).value == 0
