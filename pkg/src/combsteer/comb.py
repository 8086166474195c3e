"""Covariance matrices of a multimode squeezed frequency comb.

The comb is a set of independently squeezed eigenmodes (Hermite-Gauss
spectral profiles). Homodyne detection with a shaped local oscillator
projects it onto flat-top spectral bands ("pixels") of equal width. With
``c[k, b]`` the overlap of eigenmode ``k`` with band ``b``, the band-basis
covariance matrix is

    sigma = I + T.T (Sigma_eig - I) T,   T = c (x) I_2

followed by uniform loss ``sigma -> eta sigma + (1 - eta) I``. The part of a
band mode orthogonal to every eigenmode is in vacuum.

Bands are labelled ``A..D`` (4 pixels), ``a1, a2, ..., d2`` (8) and
``a11, a12, a21, a22, ..., d22`` (16).
"""

from __future__ import annotations

import dataclasses
import functools
import math
import re
from typing import Sequence

import numpy as np

from .exceptions import LabelError, ModelError, PartitionError
from .gaussian import Bipartition, CovarianceMatrix, ModeMap, apply_mode_map, validate
from .steering import (
    SteeringSpectrumReport,
    enumerate_bipartitions,
    steering_many,
    steering_spectrum,
)

__all__ = [
    "EigenmodeSpec",
    "CombModel",
    "ExplicitModeModel",
    "two_mode_squeezed_model",
    "default_model",
    "one_way_model",
    "ONE_WAY_PARTIES",
    "single_eigenmode_model",
    "pixel_labels",
    "band_pixels",
    "coarsening_map",
    "eigenmode_profiles",
    "pixel_overlap_matrix",
    "simulate_cm",
    "lift_covariance",
    "ResolutionTable",
    "resolution_table",
    "EigenmodeComparison",
    "single_eigenmode_comparison",
    "asymmetric_resolution_cm",
]

ALLOWED_PIXELS = (4, 8, 16)
MAX_SQUEEZING_DB = 20.0
PROFILE_LEAK_LIMIT = 1e-6
DEFAULT_PROVENANCE = (
    "calibration choice, not measured data: 8 Hermite-Gauss eigenmodes, "
    "squeezing -5 dB decaying linearly to -0.3 dB, alternating x/p squeezing, "
    "1 dB excess antisqueezing, 15% loss"
)
ONE_WAY_PROVENANCE = (
    "calibration choice tuned for one-way steering: 8 Hermite-Gauss eigenmodes "
    "at -5 dB, alternating x/p squeezing, 1 dB excess antisqueezing, no loss"
)


# ---------------------------------------------------------------------------
# Model types
# ---------------------------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class EigenmodeSpec:
    """One independently squeezed eigenmode.

    Parameters
    ----------
    order : int
        Hermite-Gauss index of the spectral profile.
    squeezing_db : float
        Variance of the squeezed quadrature in dB relative to shot noise;
        negative means squeezed.
    width : float
        Profile scale in the units of the model's spectral support.
    phase : float
        0 squeezes x, pi/2 squeezes p.
    """

    order: int
    squeezing_db: float
    width: float = 0.17
    phase: float = 0.0

    def __post_init__(self):
        if int(self.order) != self.order or self.order < 0:
            raise ModelError(f"eigenmode order must be a nonnegative integer, got {self.order}")
        object.__setattr__(self, "order", int(self.order))
        if not abs(self.squeezing_db) <= MAX_SQUEEZING_DB:
            raise ModelError(f"|squeezing_db| must be <= {MAX_SQUEEZING_DB} dB")
        if not self.width > 0:
            raise ModelError("eigenmode width must be positive")
        if not (math.isclose(self.phase, 0.0) or math.isclose(self.phase, math.pi / 2)):
            raise ModelError("eigenmode phase must be 0 or pi/2")


def _quadrature_variances(squeezing_db, excess_db, phases):
    """(K, 2) eigenmode variances ``[V_x, V_p]``."""
    s = np.asarray(squeezing_db, dtype=float)
    e = np.broadcast_to(np.asarray(excess_db, dtype=float), s.shape)
    squeezed = 10.0 ** (s / 10.0)
    anti = 10.0 ** ((-s + e) / 10.0)
    rotated = np.isclose(np.broadcast_to(phases, s.shape), math.pi / 2)
    return np.stack(
        [np.where(rotated, anti, squeezed), np.where(rotated, squeezed, anti)], axis=-1
    )


def lift_covariance(overlaps, variances, efficiency=1.0) -> np.ndarray:
    """Band covariance ``I + T.T (Sigma - I) T`` after uniform loss.

    ``overlaps`` is (K, P); ``variances`` is (..., K, 2) and may carry
    leading batch dimensions.
    """
    c = np.asarray(overlaps, dtype=float)
    v = np.asarray(variances, dtype=float)
    P = c.shape[1]
    out = np.zeros(v.shape[:-2] + (2 * P, 2 * P))
    for q in (0, 1):
        block = np.einsum("kb,...k,kd->...bd", c, v[..., q] - 1.0, c)
        out[..., q::2, q::2] = efficiency * block
    out += np.eye(2 * P)
    return out


@dataclasses.dataclass(frozen=True)
class CombModel:
    """Squeezed frequency comb plus detection settings.

    Parameters
    ----------
    eigenmodes : sequence of EigenmodeSpec
    n_pixels : {4, 8, 16}
        Number of equal-width spectral bands.
    grid : int
        Frequency samples across the support; must be a multiple of
        ``n_pixels`` and at least ``16 * n_pixels``.
    support : (float, float)
        Spectral interval covered by the bands.
    efficiency : float
        Uniform detection efficiency in (0, 1].
    antisqueezing_excess_db : float or sequence of float
        Extra antisqueezing per eigenmode (impurity), >= 0.
    """

    eigenmodes: tuple[EigenmodeSpec, ...] = ()
    n_pixels: int = 16
    grid: int = 1024
    support: tuple[float, float] = (-1.0, 1.0)
    efficiency: float = 1.0
    antisqueezing_excess_db: float | tuple[float, ...] = 0.0

    def __post_init__(self):
        modes = tuple(
            m if isinstance(m, EigenmodeSpec) else EigenmodeSpec(**m) for m in self.eigenmodes
        )
        object.__setattr__(self, "eigenmodes", modes)
        object.__setattr__(self, "support", tuple(float(x) for x in self.support))
        excess = self.antisqueezing_excess_db
        if np.ndim(excess):
            excess = tuple(float(x) for x in excess)
            if len(excess) != len(modes):
                raise ModelError("one antisqueezing excess per eigenmode required")
        else:
            excess = float(excess)
        object.__setattr__(self, "antisqueezing_excess_db", excess)
        if np.any(np.asarray(excess) < 0):
            raise ModelError("antisqueezing excess must be nonnegative")
        if self.n_pixels not in ALLOWED_PIXELS:
            raise ModelError(f"n_pixels must be one of {ALLOWED_PIXELS}, got {self.n_pixels}")
        if self.grid % self.n_pixels or self.grid < 16 * self.n_pixels:
            raise ModelError("grid must be a multiple of n_pixels and >= 16 * n_pixels")
        if not self.support[0] < self.support[1]:
            raise ModelError("support must be an increasing interval")
        if not 0 < self.efficiency <= 1:
            raise ModelError("efficiency must lie in (0, 1]")
        orders = [m.order for m in modes]
        if len(set(orders)) != len(orders):
            raise ModelError(f"duplicate eigenmode orders {orders}")

    # -- derived ----------------------------------------------------------

    @property
    def n_eigenmodes(self) -> int:
        return len(self.eigenmodes)

    @property
    def squeezing_db(self) -> np.ndarray:
        return np.array([m.squeezing_db for m in self.eigenmodes])

    @property
    def phases(self) -> np.ndarray:
        return np.array([m.phase for m in self.eigenmodes])

    @property
    def labels(self) -> tuple[str, ...]:
        return pixel_labels(self.n_pixels)

    def with_pixels(self, n_pixels: int) -> "CombModel":
        return dataclasses.replace(self, n_pixels=n_pixels)

    def with_squeezing(self, squeezing_db) -> "CombModel":
        modes = tuple(
            dataclasses.replace(m, squeezing_db=float(s))
            for m, s in zip(self.eigenmodes, squeezing_db, strict=True)
        )
        return dataclasses.replace(self, eigenmodes=modes)

    def keep_eigenmodes(self, which: Sequence[int]) -> "CombModel":
        excess = self.antisqueezing_excess_db
        if isinstance(excess, tuple):
            excess = tuple(excess[i] for i in which)
        return dataclasses.replace(
            self,
            eigenmodes=tuple(self.eigenmodes[i] for i in which),
            antisqueezing_excess_db=excess,
        )

    def overlaps(self) -> np.ndarray:
        return pixel_overlap_matrix(self)

    def covariance_batch(self, squeezing_db) -> np.ndarray:
        """Band covariance matrices for a (..., K) array of squeezing values."""
        v = _quadrature_variances(squeezing_db, self.antisqueezing_excess_db, self.phases)
        return lift_covariance(self.overlaps(), v, self.efficiency)

    def covariance(self) -> CovarianceMatrix:
        return simulate_cm(self)


@dataclasses.dataclass(frozen=True)
class ExplicitModeModel:
    """Eigenmodes given directly by their overlaps with the detected modes.

    Useful for analytic test states: a two-mode squeezed vacuum is two
    eigenmodes, one squeezed in x and one in p, with overlaps
    ``[[1, 1], [1, -1]] / sqrt(2)``.
    """

    overlaps_matrix: tuple[tuple[float, ...], ...]
    squeezing_db: tuple[float, ...]
    phases: tuple[float, ...] = ()
    efficiency: float = 1.0
    antisqueezing_excess_db: float = 0.0
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        c = np.atleast_2d(np.asarray(self.overlaps_matrix, dtype=float))
        object.__setattr__(self, "overlaps_matrix", tuple(map(tuple, c.tolist())))
        object.__setattr__(self, "squeezing_db", tuple(float(s) for s in self.squeezing_db))
        phases = tuple(float(p) for p in self.phases) or (0.0,) * len(self.squeezing_db)
        object.__setattr__(self, "phases", phases)
        if c.shape[0] != len(self.squeezing_db) or len(phases) != c.shape[0]:
            raise ModelError("one squeezing value and phase per eigenmode row required")
        if np.any(np.abs(self.squeezing_db) > MAX_SQUEEZING_DB):
            raise ModelError(f"|squeezing_db| must be <= {MAX_SQUEEZING_DB} dB")
        if np.linalg.norm(c, 2) > 1 + 1e-10:
            raise ModelError("overlap matrix must be a contraction (singular values <= 1)")
        if not 0 < self.efficiency <= 1:
            raise ModelError("efficiency must lie in (0, 1]")
        if self.antisqueezing_excess_db < 0:
            raise ModelError("antisqueezing excess must be nonnegative")
        if self.labels is not None:
            object.__setattr__(self, "labels", tuple(self.labels))

    @property
    def n_eigenmodes(self) -> int:
        return len(self.squeezing_db)

    def with_squeezing(self, squeezing_db) -> "ExplicitModeModel":
        return dataclasses.replace(self, squeezing_db=tuple(squeezing_db))

    def overlaps(self) -> np.ndarray:
        return np.asarray(self.overlaps_matrix)

    def covariance_batch(self, squeezing_db) -> np.ndarray:
        v = _quadrature_variances(squeezing_db, self.antisqueezing_excess_db, self.phases)
        return lift_covariance(self.overlaps(), v, self.efficiency)

    def covariance(self) -> CovarianceMatrix:
        cm = CovarianceMatrix(self.covariance_batch(self.squeezing_db), self.labels)
        validate(cm).raise_for_failures()
        return cm


def two_mode_squeezed_model(r: float) -> ExplicitModeModel:
    """Two-mode squeezed vacuum with parameter ``r`` as a two-eigenmode model."""
    db = -20.0 * r / math.log(10.0)
    h = 1.0 / math.sqrt(2.0)
    return ExplicitModeModel(
        ((h, h), (h, -h)), (db, db), (0.0, math.pi / 2), labels=("0", "1")
    )


def _alternating(magnitudes, width):
    # odd orders squeezed in p: mirror-image bands become EPR-correlated
    return tuple(
        EigenmodeSpec(order=k, squeezing_db=-float(s), width=width,
                      phase=math.pi / 2 if k % 2 else 0.0)
        for k, s in enumerate(magnitudes)
    )


def default_model(n_pixels: int = 16) -> CombModel:
    """Default comb fixture; every number here is a calibration choice.

    Eight eigenmodes with squeezing falling linearly from -5 dB to -0.3 dB,
    1 dB excess antisqueezing and 85% detection efficiency. The width is
    the largest that keeps the order-7 profile inside the support.
    """
    return CombModel(
        eigenmodes=_alternating(np.linspace(5.0, 0.3, 8), 0.17),
        n_pixels=n_pixels,
        efficiency=0.85,
        antisqueezing_excess_db=1.0,
    )


def one_way_model(n_pixels: int = 16) -> CombModel:
    """Fixture tuned for one-way steering under asymmetric resolution.

    Eight equally squeezed (-5 dB) eigenmodes, lossless detection and 1 dB
    excess antisqueezing. With bands ``a2`` and ``d1`` merged and ``B``,
    ``C`` resolved into 16-pixel bands, the merged party steers the
    resolved one but not the reverse.
    """
    return CombModel(
        eigenmodes=_alternating(np.full(8, 5.0), 0.17),
        n_pixels=n_pixels,
        efficiency=1.0,
        antisqueezing_excess_db=1.0,
    )


ONE_WAY_PARTIES = (("a2", "d1"), ("B", "C"))


# ---------------------------------------------------------------------------
# Labels and mode maps
# ---------------------------------------------------------------------------


def pixel_labels(n_pixels: int) -> tuple[str, ...]:
    letters = "abcd"
    if n_pixels == 4:
        return tuple(ch.upper() for ch in letters)
    if n_pixels == 8:
        return tuple(f"{ch}{i}" for ch in letters for i in (1, 2))
    if n_pixels == 16:
        return tuple(f"{ch}{i}{j}" for ch in letters for i in (1, 2) for j in (1, 2))
    raise ModelError(f"no label scheme for {n_pixels} pixels")


_LABEL_RE = re.compile(r"^([A-Da-d])([12]?)([12]?)$")


def band_pixels(label: str, n_pixels: int = 16) -> tuple[int, ...]:
    """Indices of the ``n_pixels``-resolution pixels covered by a band label.

    ``"B"`` at 16 pixels is ``(4, 5, 6, 7)``; ``"b2"`` is ``(6, 7)``.
    """
    match = _LABEL_RE.match(str(label))
    if not match or (match.group(3) and not match.group(2)):
        raise LabelError(f"not a band label: {label!r}")
    letter, d1, d2 = match.groups()
    if letter.isupper() and (d1 or d2):
        raise LabelError(f"not a band label: {label!r}")
    depth = 1 + bool(d1) + bool(d2)
    width = {1: 4, 2: 8, 3: 16}[depth]
    if width > n_pixels:
        raise LabelError(f"label {label!r} is finer than {n_pixels} pixels")
    index = "abcd".index(letter.lower())
    if d1:
        index = 2 * index + int(d1) - 1
    if d2:
        index = 2 * index + int(d2) - 1
    per = n_pixels // width
    return tuple(range(index * per, (index + 1) * per))


def coarsening_map(n_from: int, n_to: int) -> ModeMap:
    """Merge consecutive pixels, ``n_from`` bands into ``n_to``."""
    if n_from % n_to:
        raise ModelError(f"cannot coarsen {n_from} pixels into {n_to}")
    k = n_from // n_to
    groups = [range(b * k, (b + 1) * k) for b in range(n_to)]
    return ModeMap.merge(groups, n_from, pixel_labels(n_to))


# ---------------------------------------------------------------------------
# Profiles and overlaps
# ---------------------------------------------------------------------------


def _hermite_functions(n_max: int, t: np.ndarray) -> np.ndarray:
    """Orthonormal Hermite functions ``h_0 .. h_n_max`` at ``t``."""
    h = np.zeros((n_max + 1,) + t.shape)
    h[0] = np.pi**-0.25 * np.exp(-0.5 * t**2)
    if n_max >= 1:
        h[1] = np.sqrt(2.0) * t * h[0]
    for k in range(1, n_max):
        h[k + 1] = np.sqrt(2.0 / (k + 1)) * t * h[k] - np.sqrt(k / (k + 1)) * h[k - 1]
    return h


def _grid(grid: int, support) -> tuple[np.ndarray, float]:
    a, b = support
    step = (b - a) / grid
    return a + (np.arange(grid) + 0.5) * step, step


def _profile(spec: EigenmodeSpec, x: np.ndarray, center: float) -> np.ndarray:
    t = (x - center) / spec.width
    return _hermite_functions(spec.order, t)[spec.order] / np.sqrt(spec.width)


def _leakage(spec: EigenmodeSpec, support) -> float:
    """Continuous profile mass outside the support."""
    a, b = support
    nodes, weights = np.polynomial.legendre.leggauss(512)
    x = 0.5 * (b - a) * nodes + 0.5 * (a + b)
    inside = 0.5 * (b - a) * np.sum(weights * _profile(spec, x, 0.5 * (a + b)) ** 2)
    return max(0.0, 1.0 - inside)


@functools.lru_cache(maxsize=64)
def _profiles_cached(modes, grid, support):
    x, step = _grid(grid, support)
    center = 0.5 * (support[0] + support[1])
    if not modes:
        return np.zeros((0, grid))
    for spec in modes:
        leak = _leakage(spec, support)
        if leak > PROFILE_LEAK_LIMIT:
            raise ModelError(
                f"eigenmode of order {spec.order} with width {spec.width} leaks "
                f"{leak:.2g} of its mass outside the support"
            )
    raw = np.array([_profile(spec, x, center) for spec in modes]) * np.sqrt(step)
    q, r = np.linalg.qr(raw.T)
    q = q * np.sign(np.diag(r))
    out = q.T / np.sqrt(step)
    out.setflags(write=False)
    return out


def _profile_key(model: CombModel):
    return (
        tuple(dataclasses.replace(m, squeezing_db=0.0, phase=0.0) for m in model.eigenmodes),
        model.grid,
        model.support,
    )


def eigenmode_profiles(model: CombModel) -> np.ndarray:
    """(K, grid) eigenmode profiles, orthonormal on the grid.

    Hermite-Gauss functions centred on the support are sampled at cell
    centres and Gram-Schmidt orthonormalized in the listed order.
    """
    return _profiles_cached(*_profile_key(model))


def band_modes(model: CombModel) -> np.ndarray:
    """(P, grid) normalized flat-top band modes."""
    return _band_modes(model.grid, model.support, model.n_pixels)


def _band_modes(grid, support, n_pixels):
    _, step = _grid(grid, support)
    per = grid // n_pixels
    u = np.zeros((n_pixels, grid))
    for b in range(n_pixels):
        u[b, b * per : (b + 1) * per] = 1.0 / np.sqrt(per * step)
    return u


@functools.lru_cache(maxsize=64)
def _overlaps_cached(key, n_pixels):
    _, grid, support = key
    _, step = _grid(grid, support)
    out = _profiles_cached(*key) @ _band_modes(grid, support, n_pixels).T * step
    out.setflags(write=False)
    return out


def pixel_overlap_matrix(model: CombModel) -> np.ndarray:
    """(K, P) overlaps of eigenmodes with the normalized band modes."""
    return _overlaps_cached(_profile_key(model), model.n_pixels)


def simulate_cm(model: CombModel) -> CovarianceMatrix:
    """Band-basis covariance matrix of the comb, labelled by band."""
    sigma = model.covariance_batch(model.squeezing_db)
    cm = CovarianceMatrix(sigma, model.labels)
    validate(cm).raise_for_failures()
    return cm


# ---------------------------------------------------------------------------
# Resolution studies
# ---------------------------------------------------------------------------


def _band_groups_to_pixels(bands: Sequence[int], n_pixels: int) -> tuple[int, ...]:
    per = n_pixels // 4
    return tuple(p for b in bands for p in range(b * per, (b + 1) * per))


@dataclasses.dataclass(frozen=True)
class ResolutionTable:
    """Steerability of four-band partitions measured at several resolutions.

    ``values[i, j]`` is the steerability of ``partitions[i]`` (indices of
    bands A..D) when each band is resolved into ``resolutions[j] / 4``
    pixels.
    """

    partitions: tuple[Bipartition, ...]
    resolutions: tuple[int, ...]
    values: np.ndarray

    def column(self, n_pixels: int) -> np.ndarray:
        return self.values[:, self.resolutions.index(n_pixels)]

    def describe(self, i: int) -> str:
        return self.partitions[i].describe(pixel_labels(4))


def resolution_table(
    model: CombModel,
    resolutions: Sequence[int] = (4, 8, 16),
    partitions: Sequence[Bipartition] | None = None,
) -> ResolutionTable:
    """Band-aligned partitions (default: all 50 disjoint pairs of A..D)."""
    if partitions is None:
        partitions = enumerate_bipartitions(4, "disjoint_pairs")
    values = np.zeros((len(partitions), len(resolutions)))
    for j, res in enumerate(resolutions):
        cm = simulate_cm(model.with_pixels(res))
        parts = [
            Bipartition(
                _band_groups_to_pixels(p.steering, res), _band_groups_to_pixels(p.steered, res)
            )
            for p in partitions
        ]
        values[:, j] = [r.value for r in steering_many(cm, parts)]
    return ResolutionTable(tuple(partitions), tuple(resolutions), values)


@dataclasses.dataclass(frozen=True)
class EigenmodeComparison:
    full: SteeringSpectrumReport
    single: SteeringSpectrumReport
    kept_eigenmode: int

    @property
    def deltas(self) -> np.ndarray:
        """Per-partition ``G_full - G_single``."""
        return self.full.values - self.single.values


def single_eigenmode_model(
    model: CombModel, n_pixels: int | None = None, maintain_squeezing: bool = True
):
    """The most-squeezed eigenmode alone, as seen at ``n_pixels`` resolution.

    With ``maintain_squeezing`` the eigenmode is replaced by the
    normalized projection of its profile onto the band modes, so the
    detected squeezing level is the same at every resolution and only the
    mode shape changes. Otherwise the eigenmode keeps its profile and
    loses the weight the band basis cannot represent.
    """
    if model.n_eigenmodes == 0:
        raise ModelError("model has no eigenmodes")
    n_pixels = model.n_pixels if n_pixels is None else n_pixels
    keep = int(np.argmin(model.squeezing_db))
    single = model.with_pixels(n_pixels).keep_eigenmodes([keep])
    if not maintain_squeezing:
        return single
    c = single.overlaps()[0]
    norm = np.linalg.norm(c)
    if norm == 0:
        raise ModelError("eigenmode has no weight on the band modes")
    excess = single.antisqueezing_excess_db
    return ExplicitModeModel(
        (tuple(c / norm),),
        tuple(single.squeezing_db),
        tuple(single.phases),
        efficiency=model.efficiency,
        antisqueezing_excess_db=excess[0] if isinstance(excess, tuple) else excess,
        labels=single.labels,
    )


def single_eigenmode_comparison(
    model: CombModel, mode: str = "full", partitions=None, n_jobs=1,
    maintain_squeezing: bool = False,
) -> EigenmodeComparison:
    """Steering spectra of the model and of its most-squeezed eigenmode alone."""
    single = single_eigenmode_model(model, maintain_squeezing=maintain_squeezing)
    kw = dict(mode=mode, partitions=partitions, n_jobs=n_jobs)
    return EigenmodeComparison(
        steering_spectrum(simulate_cm(model), **kw),
        steering_spectrum(single.covariance(), **kw),
        int(np.argmin(model.squeezing_db)),
    )


def asymmetric_resolution_cm(
    model: CombModel,
    coarse_party: Sequence[str],
    fine_party: Sequence[str],
    fine_pixels: int = 16,
) -> tuple[CovarianceMatrix, Bipartition | None]:
    """Mixed-resolution state: coarse bands merged, everything else per pixel.

    Each label of ``coarse_party`` becomes one merged mode; each label of
    ``fine_party`` is expanded into its individual ``fine_pixels`` pixels.
    Pixels outside both parties stay resolved. Returns the state (modes in
    spectral order) and the ``coarse -> fine`` bipartition, or ``None``
    when a party is empty.
    """
    fine_model = model.with_pixels(fine_pixels)
    fine_labels = pixel_labels(fine_pixels)
    coarse_groups = [band_pixels(lab, fine_pixels) for lab in coarse_party]
    fine_sets = [band_pixels(lab, fine_pixels) for lab in fine_party]
    owner = {}
    for gi, group in enumerate(coarse_groups):
        for p in group:
            if p in owner:
                raise PartitionError(f"coarse bands overlap at pixel {fine_labels[p]}")
            owner[p] = gi
    fine_pixels_set = set()
    for group in fine_sets:
        for p in group:
            if p in owner:
                raise PartitionError(f"coarse and fine parties overlap at pixel {fine_labels[p]}")
            fine_pixels_set.add(p)

    rows, labels, steering, steered = [], [], [], []
    done = set()
    for p in range(fine_pixels):
        if p in owner:
            gi = owner[p]
            if gi in done:
                continue
            done.add(gi)
            steering.append(len(rows))
            rows.append(coarse_groups[gi])
            labels.append(str(coarse_party[gi]))
        else:
            if p in fine_pixels_set:
                steered.append(len(rows))
            rows.append((p,))
            labels.append(fine_labels[p])
    mode_map = ModeMap.merge(rows, fine_pixels, labels)
    cm = apply_mode_map(simulate_cm(fine_model), mode_map)
    part = Bipartition(steering, steered) if steering and steered else None
    return cm, part
