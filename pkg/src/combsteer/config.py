"""Numerical tolerances shared by every module.

All thresholds live in one :class:`Tolerances` record. Override them for a
block of code with :func:`override_tolerances`; the active record is held in
a context variable so threads and async tasks never see each other's
overrides.
"""

from __future__ import annotations

import contextlib
import contextvars
import dataclasses
import json
from pathlib import Path


@dataclasses.dataclass(frozen=True)
class Tolerances:
    """Tolerance record.

    Attributes
    ----------
    symmetry : float
        Allowed asymmetry relative to the largest entry magnitude.
    orthonormality : float
        Allowed deviation of mode-map rows from orthonormality.
    physicality : float
        Slack on symplectic eigenvalues (``nu >= 1 - physicality``) and on
        positive semidefiniteness.
    pairing : float
        Allowed imaginary residue of the eigenvalues of ``i Omega sigma``.
    condition : float
        Largest condition number accepted for the steering-party block.
    steer_epsilon : float
        Steering values above this count as steerable.
    """

    symmetry: float = 1e-10
    orthonormality: float = 1e-10
    physicality: float = 1e-9
    pairing: float = 1e-8
    condition: float = 1e12
    steer_epsilon: float = 1e-9


_ACTIVE: contextvars.ContextVar[Tolerances] = contextvars.ContextVar(
    "combsteer_tolerances", default=Tolerances()
)


def get_tolerances() -> Tolerances:
    return _ACTIVE.get()


@contextlib.contextmanager
def override_tolerances(**changes):
    """Temporarily replace some tolerance fields.

    >>> with override_tolerances(steer_epsilon=1e-6):
    ...     get_tolerances().steer_epsilon
    1e-06
    """
    token = _ACTIVE.set(dataclasses.replace(_ACTIVE.get(), **changes))
    try:
        yield _ACTIVE.get()
    finally:
        _ACTIVE.reset(token)


def load_tolerances(path) -> dict:
    """Read a JSON tolerance-override file into keyword arguments."""
    data = json.loads(Path(path).read_text())
    known = {f.name for f in dataclasses.fields(Tolerances)}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown tolerance fields: {sorted(unknown)}")
    return {k: float(v) for k, v in data.items()}
