"""Gaussian EPR steering of multimode squeezed frequency combs.

The core objects are :class:`CovarianceMatrix` (xpxp ordering, vacuum
variance 1) and :class:`Bipartition`; :func:`steering` evaluates the
steerability between two parties and the scan functions build on it.
:class:`CombModel` simulates band-resolved covariance matrices of a
squeezed comb.
"""

__version__ = "0.1.0"

from .config import Tolerances, get_tolerances, override_tolerances
from .exceptions import (
    CombSteerError,
    DimensionError,
    IllConditionedError,
    LabelError,
    ModelError,
    NotPositiveDefiniteError,
    NumericalDegeneracyError,
    ParseError,
    PartitionError,
    UnphysicalStateError,
)
from .gaussian import (
    Bipartition,
    CovarianceMatrix,
    ModeMap,
    apply_mode_map,
    schur_complement,
    select_modes,
    split_blocks,
    symplectic_eigenvalues,
    two_mode_squeezed_vacuum,
    vacuum,
    validate,
)
from .steering import (
    Direction,
    classify_direction,
    count_bipartitions,
    enumerate_bipartitions,
    loss_scan,
    steering,
    steering_many,
    steering_spectrum,
)
from .monogamy import MonogamyConfig, MonogamyRelation, audit_monogamy, monogamy_sweep
from .comb import (
    CombModel,
    EigenmodeSpec,
    ExplicitModeModel,
    asymmetric_resolution_cm,
    coarsening_map,
    default_model,
    one_way_model,
    simulate_cm,
)
from .montecarlo import UncertaintyEstimate, monte_carlo_uncertainty

__all__ = [name for name in dir() if not name.startswith("_")]
