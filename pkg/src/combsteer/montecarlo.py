"""Monte Carlo error bars from squeezing-level uncertainty."""

from __future__ import annotations

import dataclasses

import numpy as np

from .comb import MAX_SQUEEZING_DB
from .config import get_tolerances
from .exceptions import ModelError
from .gaussian import Bipartition, _quadrature_indices, _schur_batch, _spectra_batch

__all__ = ["UncertaintyEstimate", "monte_carlo_uncertainty", "sample_squeezing"]

_BATCH = 1024


@dataclasses.dataclass(frozen=True)
class UncertaintyEstimate:
    mean: float
    std: float
    n_samples: int
    seed: int
    n_unphysical_rejected: int

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


def sample_squeezing(base_db, noise_db, n_samples: int, seed: int) -> np.ndarray:
    """(n_samples, K) squeezing draws, one independent stream per sample.

    Sample ``i`` comes from ``SeedSequence(seed, spawn_key=(i,))``, so any
    subset or reordering of samples can be regenerated exactly.
    """
    base = np.asarray(base_db, dtype=float)
    noise = np.broadcast_to(np.asarray(noise_db, dtype=float), base.shape)
    out = np.empty((n_samples, base.size))
    for i in range(n_samples):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(i,)))
        out[i] = base + noise * rng.standard_normal(base.size)
    return out


def _physical(sigmas: np.ndarray) -> np.ndarray:
    nu, bad, _ = _spectra_batch(sigmas)
    ok = ~bad & np.all(nu >= 1 - get_tolerances().physicality, axis=1)
    return ok & np.all(np.linalg.eigvalsh(sigmas) > 0, axis=1)


def _steering_batch(sigmas: np.ndarray, part: Bipartition):
    """Steerability of one partition across a stack of states, plus a success mask."""
    a = _quadrature_indices(part.steering)
    b = _quadrature_indices(part.steered)
    S, ok = _schur_batch(
        sigmas[:, a[:, None], a], sigmas[:, b[:, None], b], sigmas[:, a[:, None], b]
    )
    values = np.full(len(sigmas), np.nan)
    if np.any(ok):
        nu, bad, _ = _spectra_batch(S[ok])
        logs = np.where(nu < 1, np.log(np.where(nu < 1, nu, 1.0)), 0.0)
        g = np.maximum(0.0, -logs.sum(axis=1))
        g[bad] = np.nan
        values[ok] = g
    return values, ~np.isnan(values)


def monte_carlo_uncertainty(
    model,
    part: Bipartition,
    noise,
    n_samples: int = 1000,
    seed: int = 0,
) -> UncertaintyEstimate:
    """Mean and sample s.d. of the steerability under squeezing noise.

    Each eigenmode's squeezing (dB) gets an independent Gaussian kick of
    s.d. ``noise`` (scalar or one per eigenmode). Draws that leave the
    allowed squeezing range or give an unphysical state are rejected and
    counted. ``model`` is anything with ``squeezing_db`` and
    ``covariance_batch``.
    """
    n_samples = int(n_samples)
    if n_samples < 2:
        raise ValueError("n_samples must be at least 2")
    base = np.asarray(model.squeezing_db, dtype=float)
    noise = np.broadcast_to(np.asarray(noise, dtype=float), base.shape)
    if np.any(noise < 0) or np.any(np.isnan(noise)):
        raise ValueError("noise must be nonnegative")
    draws = sample_squeezing(base, noise, n_samples, seed)

    values, rejected = [], 0
    in_range = np.all(np.abs(draws) <= MAX_SQUEEZING_DB, axis=1)
    rejected += int(np.sum(~in_range))
    draws = draws[in_range]
    for start in range(0, len(draws), _BATCH):
        sigmas = model.covariance_batch(draws[start : start + _BATCH])
        if start == 0:
            part.check(sigmas.shape[-1] // 2)
        sigmas = sigmas[_physical(sigmas)]
        g, ok = _steering_batch(sigmas, part)
        rejected += int(min(_BATCH, len(draws) - start) - np.sum(ok))
        values.extend(g[ok].tolist())
    if not values:
        raise ModelError("every Monte Carlo sample was rejected")
    v = np.asarray(values)
    if np.all(v == v[0]):
        mean, std = float(v[0]), 0.0
    else:
        mean, std = float(v.mean()), float(v.std(ddof=1))
    return UncertaintyEstimate(mean, std, n_samples, int(seed), rejected)
