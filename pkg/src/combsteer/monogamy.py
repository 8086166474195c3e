"""Monogamy relations of Gaussian steering.

A configuration is a list of steering groups and a list of steered groups,
each group a tuple of mode indices. The relations differ in which
steerabilities they compare:

=====================  ===================================  ==========================
relation               lhs                                  rhs
=====================  ===================================  ==========================
TypeI, TypeII          0                                    min(G(I1->K), G(I2->K))
CKW (many -> one)      G(I1 u ... u Im -> J)                sum_k G(Ik -> J)
CKW (one -> many)      G(I -> J1 u ... u Jn)                sum_k G(I -> Jk)
TypeIV-steered-sum     G(I -> J1 u ... u Jn)                sum_k G(I -> Jk)
TypeIV-steering-sum    G(I1 u ... u Im -> J)                sum_k G(Ik -> J)
=====================  ===================================  ==========================

A relation is satisfied when ``lhs - rhs >= -steer_epsilon``. TypeI needs a
single-mode steered group. TypeII allows any steered group and is the one
that can fail. CKW uses single modes throughout; TypeIV requires both
sides to hold more than one mode.
"""

from __future__ import annotations

import dataclasses
import enum
import itertools
import re
from typing import Iterator, Sequence

from .config import get_tolerances
from .exceptions import PartitionError
from .gaussian import Bipartition, CovarianceMatrix, validate
from .steering import steering_many

__all__ = [
    "MonogamyRelation",
    "MonogamyConfig",
    "MonogamyReport",
    "audit_monogamy",
    "audit_many",
    "sweep_configurations",
    "monogamy_sweep",
    "parse_config",
]


class MonogamyRelation(str, enum.Enum):
    TYPE_I = "TypeI"
    TYPE_II = "TypeII"
    CKW = "CKW"
    TYPE_IV_STEERED_SUM = "TypeIV-steered-sum"
    TYPE_IV_STEERING_SUM = "TypeIV-steering-sum"


def _relation(relation) -> MonogamyRelation:
    try:
        return MonogamyRelation(relation)
    except ValueError:
        known = ", ".join(r.value for r in MonogamyRelation)
        raise PartitionError(f"unknown monogamy relation {relation!r} (known: {known})") from None


@dataclasses.dataclass(frozen=True)
class MonogamyConfig:
    """Steering groups and steered groups of one monogamy test."""

    steering: tuple[tuple[int, ...], ...]
    steered: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        steering = tuple(tuple(int(i) for i in g) for g in self.steering)
        steered = tuple(tuple(int(i) for i in g) for g in self.steered)
        object.__setattr__(self, "steering", steering)
        object.__setattr__(self, "steered", steered)
        seen = set()
        for g in steering + steered:
            if not g:
                raise PartitionError("monogamy groups must be nonempty")
            if seen & set(g) or len(set(g)) != len(g):
                raise PartitionError(f"monogamy groups overlap: {self}")
            seen |= set(g)

    def modes(self) -> tuple[int, ...]:
        return tuple(sorted(i for g in self.steering + self.steered for i in g))

    def describe(self, labels=None) -> str:
        def name(g):
            return ",".join(str(labels[i]) if labels is not None else str(i) for i in g)

        return "|".join(map(name, self.steering)) + "->" + "|".join(map(name, self.steered))


@dataclasses.dataclass(frozen=True)
class MonogamyReport:
    relation: MonogamyRelation
    configuration: MonogamyConfig
    lhs: float
    rhs: float
    satisfied: bool
    margin: float
    terms: dict = dataclasses.field(default_factory=dict, compare=False)

    def as_dict(self, labels=None) -> dict:
        return {
            "relation": self.relation.value,
            "configuration": self.configuration.describe(labels),
            "lhs": self.lhs,
            "rhs": self.rhs,
            "margin": self.margin,
            "satisfied": self.satisfied,
            "terms": dict(self.terms),
        }


def _union(groups) -> tuple[int, ...]:
    return tuple(sorted(i for g in groups for i in g))


def _terms(relation: MonogamyRelation, config: MonogamyConfig):
    """Check arity; return (lhs partition or None, rhs partitions)."""
    I, J = config.steering, config.steered
    singles = all(len(g) == 1 for g in I + J)
    if relation in (MonogamyRelation.TYPE_I, MonogamyRelation.TYPE_II):
        if len(I) != 2 or len(J) != 1:
            raise PartitionError(f"{relation.value} needs two steering groups and one steered group")
        if relation is MonogamyRelation.TYPE_I and len(J[0]) != 1:
            raise PartitionError("TypeI needs a single-mode steered group")
        return None, [Bipartition(I[0], J[0]), Bipartition(I[1], J[0])]
    if relation is MonogamyRelation.CKW:
        if not singles:
            raise PartitionError("CKW compares single modes")
        if len(I) >= 2 and len(J) == 1:
            return Bipartition(_union(I), J[0]), [Bipartition(g, J[0]) for g in I]
        if len(I) == 1 and len(J) >= 2:
            return Bipartition(I[0], _union(J)), [Bipartition(I[0], g) for g in J]
        raise PartitionError("CKW needs one group on one side and at least two on the other")
    if relation is MonogamyRelation.TYPE_IV_STEERED_SUM:
        if len(I) != 1 or len(J) < 2 or len(I[0]) < 2:
            raise PartitionError(
                "TypeIV-steered-sum needs one multimode steering group and >= 2 steered groups"
            )
        return Bipartition(I[0], _union(J)), [Bipartition(I[0], g) for g in J]
    if len(J) != 1 or len(I) < 2 or len(J[0]) < 2:
        raise PartitionError(
            "TypeIV-steering-sum needs >= 2 steering groups and one multimode steered group"
        )
    return Bipartition(_union(I), J[0]), [Bipartition(g, J[0]) for g in I]


def _report(relation, config, lhs_part, rhs_parts, values) -> MonogamyReport:
    rhs_vals = [values[p] for p in rhs_parts]
    if lhs_part is None:
        lhs, rhs = 0.0, min(rhs_vals)
    else:
        lhs, rhs = values[lhs_part], sum(rhs_vals)
    margin = lhs - rhs
    terms = {p.describe(): values[p] for p in ([lhs_part] if lhs_part else []) + rhs_parts}
    return MonogamyReport(
        relation, config, lhs, rhs, bool(margin >= -get_tolerances().steer_epsilon), margin, terms
    )


def audit_many(
    cm: CovarianceMatrix, relation, configs: Sequence[MonogamyConfig], n_jobs=1
) -> list[MonogamyReport]:
    """Audit several configurations, evaluating each distinct partition once."""
    relation = _relation(relation)
    validate(cm).raise_for_failures()
    plans = [(c, *_terms(relation, c)) for c in configs]
    for c, *_ in plans:
        for i in c.modes():
            if not 0 <= i < cm.n_modes:
                raise PartitionError(f"mode {i} out of range for {cm.n_modes} modes")
    needed = list(dict.fromkeys(p for _, lhs, rhs in plans for p in ([lhs] if lhs else []) + rhs))
    values = {}
    for p, r in zip(needed, steering_many(cm, needed, n_jobs=n_jobs)):
        if r.error is not None:
            raise PartitionError(f"cannot evaluate {p.describe()}: {r.error}")
        values[p] = r.value
    return [_report(relation, c, lhs, rhs, values) for c, lhs, rhs in plans]


def audit_monogamy(cm: CovarianceMatrix, relation, config) -> MonogamyReport:
    """Test one monogamy relation on one configuration.

    ``config`` is a :class:`MonogamyConfig` or a ``(steering_groups,
    steered_groups)`` pair.
    """
    if not isinstance(config, MonogamyConfig):
        config = MonogamyConfig(*config)
    return audit_many(cm, relation, [config])[0]


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------


def _subsets(pool: Sequence[int], sizes) -> Iterator[tuple[int, ...]]:
    """Subsets of ``pool`` with the given sizes, ordered by bitmask."""
    subs = [s for k in sizes for s in itertools.combinations(sorted(pool), k)]
    return iter(sorted(subs, key=lambda s: sum(1 << i for i in s)))


def sweep_configurations(
    n_modes: int, relation, max_group_size: int = 2, steered_sizes=None
) -> Iterator[MonogamyConfig]:
    """Every configuration of ``relation`` with groups of at most ``max_group_size`` modes.

    Unordered pairs of steering groups are listed once. ``steered_sizes``
    restricts the size of the steered group for TypeI/TypeII.
    """
    relation = _relation(relation)
    modes = range(n_modes)
    cap = max(1, int(max_group_size))
    if relation in (MonogamyRelation.TYPE_I, MonogamyRelation.TYPE_II):
        sizes = [1] if relation is MonogamyRelation.TYPE_I else range(1, cap + 1)
        if steered_sizes is not None:
            sizes = [s for s in sizes if s in set(steered_sizes)]
        for K in _subsets(modes, sizes):
            rest = [i for i in modes if i not in K]
            firsts = list(_subsets(rest, range(1, cap + 1)))
            for a, I1 in enumerate(firsts):
                for I2 in firsts[a + 1 :]:
                    if not set(I1) & set(I2):
                        yield MonogamyConfig((I1, I2), (K,))
    elif relation is MonogamyRelation.CKW:
        for j in modes:
            rest = [i for i in modes if i != j]
            for I in _subsets(rest, range(2, cap + 1)):
                yield MonogamyConfig(tuple((i,) for i in I), ((j,),))
        for i in modes:
            rest = [j for j in modes if j != i]
            for J in _subsets(rest, range(2, cap + 1)):
                yield MonogamyConfig(((i,),), tuple((j,) for j in J))
    else:
        for A in _subsets(modes, range(2, cap + 1)):
            rest = [i for i in modes if i not in A]
            for B in _subsets(rest, range(2, cap + 1)):
                if relation is MonogamyRelation.TYPE_IV_STEERED_SUM:
                    yield MonogamyConfig((A,), tuple((j,) for j in B))
                else:
                    yield MonogamyConfig(tuple((i,) for i in A), (B,))


def monogamy_sweep(
    cm: CovarianceMatrix,
    relation,
    max_group_size: int = 2,
    steered_sizes=None,
    n_jobs=1,
    max_configs: int = 200_000,
) -> list[MonogamyReport]:
    """Audit every configuration from :func:`sweep_configurations`."""
    configs = []
    for c in sweep_configurations(cm.n_modes, relation, max_group_size, steered_sizes):
        configs.append(c)
        if len(configs) > max_configs:
            raise PartitionError(
                f"sweep exceeds {max_configs} configurations; lower max_group_size"
            )
    return audit_many(cm, relation, configs, n_jobs=n_jobs)


_GROUP_SPLIT = re.compile(r"\s*\|\s*")


def parse_config(text: str, cm: CovarianceMatrix | None = None) -> MonogamyConfig:
    """Parse ``"C|D->A,B"``: groups split by ``|``, modes by ``,``.

    Modes are labels of ``cm`` when given, else integer indices.
    """
    if text.count("->") != 1:
        raise PartitionError(f"malformed group spec {text!r}: expected one '->'")
    sides = []
    for side in text.split("->"):
        groups = []
        for g in _GROUP_SPLIT.split(side.strip()):
            names = [s.strip() for s in g.split(",")]
            if not g.strip() or not all(names):
                raise PartitionError(f"malformed group spec {text!r}: empty group")
            if cm is not None:
                groups.append(tuple(cm.index(n) for n in names))
            else:
                try:
                    groups.append(tuple(int(n) for n in names))
                except ValueError:
                    raise PartitionError(f"malformed group spec {text!r}") from None
        sides.append(tuple(groups))
    return MonogamyConfig(*sides)
