"""Gaussian EPR steerability and the scans built on it.

The steerability of party ``n`` by party ``m`` is computed from the
symplectic spectrum ``nu`` of the Schur complement
``N - C.T M^-1 C`` as ``max(0, -sum(ln nu_i for nu_i < 1))`` in nats.
"""

from __future__ import annotations

import dataclasses
import enum
import math
from collections import defaultdict
from typing import Sequence

import numpy as np

from .config import get_tolerances
from .exceptions import LabelError, PartitionError
from .gaussian import (
    Bipartition,
    CovarianceMatrix,
    _quadrature_indices,
    _schur_batch,
    _spectra_batch,
    schur_complement,
    select_modes,
    split_blocks,
    symplectic_eigenvalues,
    validate,
)

__all__ = [
    "SteeringResult",
    "SplitStats",
    "SteeringSpectrumReport",
    "LossStep",
    "LossScanReport",
    "Direction",
    "steering_value",
    "steering",
    "steering_many",
    "enumerate_bipartitions",
    "count_bipartitions",
    "steering_spectrum",
    "loss_scan",
    "classify_direction",
]

# Batch size for vectorized evaluation. Fixed so results never depend on
# the degree of parallelism.
_CHUNK = 4096


@dataclasses.dataclass(frozen=True)
class SteeringResult:
    """Steerability of one bipartition.

    ``value`` is NaN and ``error`` is set when the partition could not be
    evaluated (scans record such failures instead of aborting).
    """

    partition: Bipartition
    value: float
    spectrum: tuple[float, ...]
    steerable: bool
    error: str | None = None

    def as_dict(self, labels=None) -> dict:
        out = {
            "steering": list(self.partition.steering),
            "steered": list(self.partition.steered),
            "value": None if math.isnan(self.value) else self.value,
            "spectrum": list(self.spectrum),
            "steerable": self.steerable,
        }
        if labels is not None:
            out["partition"] = self.partition.describe(labels)
        if self.error is not None:
            out["error"] = self.error
        return out


def steering_value(spectrum) -> float:
    """``max(0, -sum ln nu_i)`` over the symplectic eigenvalues below one."""
    nu = np.asarray(spectrum, dtype=float)
    return max(0.0, -float(np.sum(np.log(nu[nu < 1]))))


def _make_result(part, spectrum, error=None) -> SteeringResult:
    if error is not None:
        return SteeringResult(part, math.nan, (), False, error)
    value = steering_value(spectrum)
    return SteeringResult(
        part,
        value,
        tuple(float(v) for v in spectrum),
        value > get_tolerances().steer_epsilon,
    )


def _evaluate_group(matrix: np.ndarray, parts: Sequence[Bipartition]) -> list[SteeringResult]:
    """Vectorized evaluation of partitions sharing the same party sizes."""
    a = _quadrature_indices(np.array([p.steering for p in parts]))
    b = _quadrature_indices(np.array([p.steered for p in parts]))
    M = matrix[a[:, :, None], a[:, None, :]]
    N = matrix[b[:, :, None], b[:, None, :]]
    C = matrix[a[:, :, None], b[:, None, :]]
    S, ok = _schur_batch(M, N, C)
    nu = np.full((len(parts), b.shape[1] // 2), np.nan)
    bad = ~ok
    if np.any(ok):
        nu_ok, bad_ok, residue = _spectra_batch(S[ok])
        nu[ok] = nu_ok
        bad[np.flatnonzero(ok)[bad_ok]] = True
    out = []
    for i, part in enumerate(parts):
        if not ok[i]:
            out.append(_make_result(part, None, "ill-conditioned steering block"))
        elif bad[i]:
            out.append(_make_result(part, None, "symplectic eigenvalues failed to pair"))
        else:
            out.append(_make_result(part, nu[i]))
    return out


def _evaluate_chunk(matrix, parts):
    groups = defaultdict(list)
    for i, p in enumerate(parts):
        groups[len(p.steering), len(p.steered)].append(i)
    out = [None] * len(parts)
    for idx in groups.values():
        for i, res in zip(idx, _evaluate_group(matrix, [parts[i] for i in idx])):
            out[i] = res
    return out


def steering_many(
    cm: CovarianceMatrix, partitions: Sequence[Bipartition], n_jobs: int | None = 1
) -> list[SteeringResult]:
    """Evaluate many partitions, in input order.

    Failures are recorded on the individual results. With ``n_jobs > 1`` the
    work is spread over processes with joblib; chunking is fixed, so the
    output is identical for every ``n_jobs``.
    """
    for p in partitions:
        p.check(cm.n_modes)
    chunks = [partitions[i : i + _CHUNK] for i in range(0, len(partitions), _CHUNK)]
    if n_jobs in (None, 1) or len(chunks) <= 1:
        parts_out = [_evaluate_chunk(cm.matrix, c) for c in chunks]
    else:
        from joblib import Parallel, delayed

        tol = get_tolerances()
        parts_out = Parallel(n_jobs=n_jobs)(
            delayed(_evaluate_chunk_with)(tol, cm.matrix, c) for c in chunks
        )
    return [r for chunk in parts_out for r in chunk]


def _evaluate_chunk_with(tol, matrix, parts):
    from .config import override_tolerances

    with override_tolerances(**dataclasses.asdict(tol)):
        return _evaluate_chunk(matrix, parts)


def steering(cm: CovarianceMatrix, part: Bipartition, check: bool = True) -> SteeringResult:
    """Steerability from ``part.steering`` to ``part.steered``.

    Raises :class:`~combsteer.exceptions.IllConditionedError` when the
    steering block cannot be inverted safely.
    """
    if check:
        validate(cm).raise_for_failures()
    part.check(cm.n_modes)
    result = _evaluate_chunk(cm.matrix, [part])[0]
    if result.error is not None:
        # re-run the scalar path for the precise exception
        symplectic_eigenvalues(schur_complement(split_blocks(cm, part)))
    return result


# ---------------------------------------------------------------------------
# Enumeration
# ---------------------------------------------------------------------------


def _modes_of(mask: int) -> tuple[int, ...]:
    return tuple(i for i in range(mask.bit_length()) if mask >> i & 1)


def enumerate_bipartitions(n_modes: int, mode: str = "full") -> list[Bipartition]:
    """All ordered bipartitions in canonical order.

    ``"full"``: the two parties cover every mode (``2**N - 2`` items).
    ``"disjoint_pairs"``: disjoint nonempty parties, not necessarily covering
    (``3**N - 2**(N+1) + 1`` items). Ordering is lexicographic on the bitmask
    of the steering party, then of the steered party; bit ``i`` is mode ``i``.
    """
    if n_modes < 2:
        raise PartitionError("at least two modes are needed for a bipartition")
    full = (1 << n_modes) - 1
    out = []
    if mode == "full":
        for m in range(1, full):
            out.append(Bipartition(_modes_of(m), _modes_of(full ^ m)))
    elif mode in ("disjoint_pairs", "pairs"):
        for m in range(1, full):
            rest = full ^ m
            sub = (0 - rest) & rest  # smallest nonempty submask
            while sub:
                out.append(Bipartition(_modes_of(m), _modes_of(sub)))
                sub = (sub - rest) & rest
    else:
        raise ValueError(f"unknown enumeration mode {mode!r}")
    return out


def count_bipartitions(n_modes: int, mode: str = "full") -> int:
    if n_modes < 2:
        raise PartitionError("at least two modes are needed for a bipartition")
    if mode == "full":
        return 2**n_modes - 2
    if mode in ("disjoint_pairs", "pairs"):
        return 3**n_modes - 2 ** (n_modes + 1) + 1
    raise ValueError(f"unknown enumeration mode {mode!r}")


# ---------------------------------------------------------------------------
# Spectrum report
# ---------------------------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class SplitStats:
    count: int
    n_failed: int
    minimum: float
    q1: float
    median: float
    q3: float
    maximum: float
    mean: float
    whisker_low: float
    whisker_high: float


def split_stats(values, whisker=1.5) -> SplitStats:
    """Box-plot statistics.

    ``whisker`` is either a float ``k`` (Tukey whiskers: the most extreme
    data within ``k * IQR`` of the box) or a ``(low, high)`` pair of
    percentiles.
    """
    values = np.asarray(values, dtype=float)
    finite = values[~np.isnan(values)]
    n_failed = int(values.size - finite.size)
    if finite.size == 0:
        nan = math.nan
        return SplitStats(int(values.size), n_failed, *([nan] * 8))
    q1, med, q3 = np.percentile(finite, [25, 50, 75])
    if isinstance(whisker, (tuple, list)):
        lo, hi = np.percentile(finite, whisker)
    else:
        iqr = q3 - q1
        lo = finite[finite >= q1 - whisker * iqr].min()
        hi = finite[finite <= q3 + whisker * iqr].max()
    return SplitStats(
        int(values.size),
        n_failed,
        float(finite.min()),
        float(q1),
        float(med),
        float(q3),
        float(finite.max()),
        float(finite.mean()),
        float(lo),
        float(hi),
    )


@dataclasses.dataclass(frozen=True)
class SteeringSpectrumReport:
    """Per-partition results plus box-plot statistics per party-size pair."""

    n_modes: int
    mode: str
    labels: tuple[str, ...]
    results: tuple[SteeringResult, ...]
    stats: dict  # (|m|, |n|) -> SplitStats, sorted by key

    @property
    def values(self) -> np.ndarray:
        return np.array([r.value for r in self.results])

    @property
    def n_steerable(self) -> int:
        return sum(r.steerable for r in self.results)

    @property
    def n_failed(self) -> int:
        return sum(r.error is not None for r in self.results)

    def best(self) -> SteeringResult:
        return max(
            (r for r in self.results if r.error is None), key=lambda r: r.value
        )

    def as_dict(self, include_results=True) -> dict:
        out = {
            "n_modes": self.n_modes,
            "mode": self.mode,
            "labels": list(self.labels),
            "n_partitions": len(self.results),
            "n_steerable": self.n_steerable,
            "n_failed": self.n_failed,
            "stats": [
                {"steering_size": k[0], "steered_size": k[1], **dataclasses.asdict(v)}
                for k, v in self.stats.items()
            ],
        }
        if include_results:
            out["results"] = [r.as_dict(self.labels) for r in self.results]
        return out


def steering_spectrum(
    cm: CovarianceMatrix,
    mode: str = "full",
    n_jobs: int | None = 1,
    whisker=1.5,
    partitions: Sequence[Bipartition] | None = None,
) -> SteeringSpectrumReport:
    """Steerability of every enumerated bipartition of ``cm``."""
    validate(cm).raise_for_failures()
    if partitions is None:
        partitions = enumerate_bipartitions(cm.n_modes, mode)
    results = steering_many(cm, partitions, n_jobs=n_jobs)
    grouped = defaultdict(list)
    for r in results:
        grouped[len(r.partition.steering), len(r.partition.steered)].append(r.value)
    stats = {k: split_stats(grouped[k], whisker) for k in sorted(grouped)}
    return SteeringSpectrumReport(cm.n_modes, mode, cm.mode_labels, tuple(results), stats)


# ---------------------------------------------------------------------------
# Mode-loss scan
# ---------------------------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class LossStep:
    removed: tuple[str, ...]
    remaining: int
    n_partitions: int
    n_steerable: int
    spectrum: SteeringSpectrumReport


@dataclasses.dataclass(frozen=True)
class LossScanReport:
    removal_sequence: tuple[str, ...]
    steps: tuple[LossStep, ...]

    @property
    def steerable_counts(self) -> list[int]:
        return [s.n_steerable for s in self.steps]

    def as_dict(self, include_results=False) -> dict:
        return {
            "removal_sequence": list(self.removal_sequence),
            "steps": [
                {
                    "removed": list(s.removed),
                    "remaining": s.remaining,
                    "n_partitions": s.n_partitions,
                    "n_steerable": s.n_steerable,
                    "spectrum": s.spectrum.as_dict(include_results),
                }
                for s in self.steps
            ],
        }


def loss_scan(
    cm: CovarianceMatrix, removal_sequence: Sequence, n_jobs: int | None = 1
) -> LossScanReport:
    """Steering spectrum after discarding the first k modes of the sequence.

    One step per prefix ``k = 1 .. len(removal_sequence)``. An empty sequence
    gives a single step equal to the plain spectrum.
    """
    labels = cm.mode_labels
    removal = [labels[cm.index(key)] for key in removal_sequence]
    if len(set(removal)) != len(removal):
        raise LabelError("removal sequence repeats a mode")
    if len(removal) > cm.n_modes - 2:
        raise PartitionError("at least two modes must remain")
    prefixes = [removal[:k] for k in range(1, len(removal) + 1)] or [[]]
    steps = []
    for gone in prefixes:
        keep = [lab for lab in labels if lab not in gone]
        reduced = select_modes(cm, keep) if gone else cm
        report = steering_spectrum(reduced, "full", n_jobs=n_jobs)
        steps.append(
            LossStep(tuple(gone), reduced.n_modes, len(report.results), report.n_steerable, report)
        )
    return LossScanReport(tuple(removal), tuple(steps))


# ---------------------------------------------------------------------------
# Direction
# ---------------------------------------------------------------------------


class Direction(str, enum.Enum):
    NO_STEERING = "NoSteering"
    ONE_WAY_FORWARD = "OneWayForward"
    ONE_WAY_BACKWARD = "OneWayBackward"
    TWO_WAY = "TwoWay"


def classify_direction(g_forward: float, g_backward: float, epsilon: float | None = None) -> Direction:
    """Classify a pair of opposite steerabilities."""
    if g_forward < 0 or g_backward < 0 or math.isnan(g_forward) or math.isnan(g_backward):
        raise ValueError("steerabilities must be nonnegative numbers")
    eps = get_tolerances().steer_epsilon if epsilon is None else epsilon
    fwd, bwd = g_forward > eps, g_backward > eps
    if fwd and bwd:
        return Direction.TWO_WAY
    if fwd:
        return Direction.ONE_WAY_FORWARD
    if bwd:
        return Direction.ONE_WAY_BACKWARD
    return Direction.NO_STEERING
