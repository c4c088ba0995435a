"""The triple form (partial potential, unity variables, weight).

A triple ``(phi_A, B, gamma)`` stands for the full potential
``phi_A (x) gamma * 1_B`` over the domain ``A u B`` without ever storing
the all-ones factor ``1_B``; only the levelsets of the unity variables
are kept.  The algebra below manipulates triples directly so that
products, projections and divisions touching only unity content cost
nothing at the cell level.

Empty-domain partials are canonicalized away at construction: their
single value is folded into the weight, so a "pure unity" triple always
has the scalar-one partial.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import ContractViolationError, DomainError, DomainMismatchError
from .potential import Evidence, Potential, Variable

__all__ = [
    "OpCounter",
    "UnityPotential",
    "up_multiply",
    "up_project",
    "up_divide_update",
    "up_evidence_reduce",
    "materialize",
]


@dataclass
class OpCounter:
    """Tallies of cell-level table operations, split into performed work
    and work skipped thanks to unity bookkeeping."""

    partial_multiplications: int = 0
    partial_divisions: int = 0
    projections: int = 0
    avoided_multiplications: int = 0
    avoided_divisions: int = 0

    def copy(self) -> "OpCounter":
        return dataclasses.replace(self)

    def delta(self, earlier: "OpCounter") -> "OpCounter":
        """Field-wise difference self - earlier."""
        return OpCounter(
            **{
                f.name: getattr(self, f.name) - getattr(earlier, f.name)
                for f in dataclasses.fields(self)
            }
        )

    def merge(self, other: "OpCounter") -> None:
        for f in dataclasses.fields(self):
            setattr(self, f.name, getattr(self, f.name) + getattr(other, f.name))

    @property
    def performed(self) -> int:
        return self.partial_multiplications + self.partial_divisions

    def as_dict(self) -> dict[str, int]:
        return {f.name: getattr(self, f.name) for f in dataclasses.fields(self)}


_SCALAR_ONE = Potential.scalar(1.0)


class UnityPotential:
    """Immutable triple (partial, unity variables, weight)."""

    __slots__ = ("partial", "unity_vars", "weight")

    def __init__(self, partial: Potential, unity_vars: Sequence[Variable] = (), weight: float = 1.0):
        unity_vars = tuple(unity_vars)
        weight = float(weight)
        if weight < 0:
            raise ValueError("weight must be non-negative")
        if partial.is_empty_domain:
            weight *= partial.total_mass()
            partial = _SCALAR_ONE
        names = [v.name for v in unity_vars]
        if len(set(names)) != len(names):
            raise DomainError(f"duplicate unity variables: {names}")
        overlap = set(names) & set(partial.names)
        if overlap:
            raise DomainError(f"unity variables overlap the partial domain: {sorted(overlap)}")
        self.partial = partial
        self.unity_vars = unity_vars
        self.weight = weight

    @classmethod
    def pure(cls, unity_vars: Sequence[Variable] = (), weight: float = 1.0) -> "UnityPotential":
        return cls(_SCALAR_ONE, unity_vars, weight)

    @classmethod
    def of(cls, partial: Potential) -> "UnityPotential":
        return cls(partial, (), 1.0)

    @property
    def is_pure_unity(self) -> bool:
        return self.partial.is_empty_domain

    @property
    def partial_names(self) -> frozenset[str]:
        return frozenset(self.partial.names)

    @property
    def unity_names(self) -> frozenset[str]:
        return frozenset(v.name for v in self.unity_vars)

    @property
    def full_names(self) -> frozenset[str]:
        return self.partial_names | self.unity_names

    def is_null(self) -> bool:
        return self.weight == 0.0 or self.partial.is_null()

    def all_variables(self) -> dict[str, Variable]:
        out = {v.name: v for v in self.partial.domain}
        out.update({v.name: v for v in self.unity_vars})
        return out

    def unity_variable(self, name: str) -> Variable:
        for v in self.unity_vars:
            if v.name == name:
                return v
        raise DomainError(f"{name!r} is not a unity variable here")

    def __repr__(self):
        unity = ",".join(v.name for v in self.unity_vars)
        return f"UnityPotential(partial={list(self.partial.names)}, unity={{{unity}}}, weight={self.weight:g})"


def _levelset_size(variables: Iterable[Variable]) -> int:
    out = 1
    for v in variables:
        out *= v.cardinality
    return out


def _check_levelsets(p: UnityPotential, q: UnityPotential) -> None:
    mine = p.all_variables()
    for name, var in q.all_variables().items():
        known = mine.get(name)
        if known is not None and known.levels != var.levels:
            raise DomainMismatchError(
                f"variable {name!r} has levelsets {known.levels} vs {var.levels}"
            )


def up_multiply(p: UnityPotential, q: UnityPotential, counter: OpCounter | None = None) -> UnityPotential:
    """Triple product: partials multiply, unity variables not claimed by
    either partial stay symbolic, weights multiply.

    When either partial is empty no table product is carried out and an
    avoided multiplication is recorded; otherwise the partial product is
    performed and counted.
    """
    _check_levelsets(p, q)
    a1, a2 = p.partial, q.partial
    if a1.is_empty_domain or a2.is_empty_domain:
        partial = a2 if a1.is_empty_domain else a1
        if counter is not None:
            counter.avoided_multiplications += 1
    else:
        partial = a1.multiply(a2)
        if counter is not None:
            counter.partial_multiplications += 1
    covered = set(a1.names) | set(a2.names)
    unity: list[Variable] = []
    seen: set[str] = set()
    for v in p.unity_vars + q.unity_vars:
        if v.name not in covered and v.name not in seen:
            unity.append(v)
            seen.add(v.name)
    return UnityPotential(partial, tuple(unity), p.weight * q.weight)


def up_project(p: UnityPotential, onto: Iterable[str], counter: OpCounter | None = None) -> UnityPotential:
    """Project the triple onto a subset of its full domain.

    If the target hits the partial, only the partial is marginalized and
    the dropped unity variables contribute their levelset size to the
    weight.  If the target misses the partial entirely, no cell-level
    marginalization happens at all: the result is a pure unity triple
    whose weight absorbs the partial's total mass.
    """
    onto = set(onto)
    unknown = onto - p.full_names
    if unknown:
        raise DomainError(f"cannot project onto {sorted(unknown)}: outside {sorted(p.full_names)}")
    keep_unity = tuple(v for v in p.unity_vars if v.name in onto)
    dropped_unity = [v for v in p.unity_vars if v.name not in onto]
    unity_factor = _levelset_size(dropped_unity)
    a_keep = onto & p.partial_names
    if a_keep and not p.is_pure_unity:
        if a_keep == p.partial_names:
            proj = p.partial
        else:
            proj = p.partial.project(a_keep)
            if counter is not None:
                counter.projections += 1
        return UnityPotential(proj, keep_unity, p.weight * unity_factor)
    weight = p.weight * p.partial.total_mass() * unity_factor
    return UnityPotential(_SCALAR_ONE, keep_unity, weight)


def up_divide_update(p: UnityPotential, message: UnityPotential, counter: OpCounter | None = None) -> UnityPotential:
    """Replace a clique potential by itself divided by the message it
    just sent (``message`` must be ``up_project(p, S)`` for the
    separator ``S``).

    When the whole partial lies inside the separator the quotient is a
    constant over the clique, so no cell-level division happens: the
    result is the pure unity triple over the old full domain.  Otherwise
    the partial is divided by its own projection, which is counted.
    """
    separator = message.full_names
    a1 = p.partial_names
    expected = a1 & separator
    if message.partial_names != expected:
        raise ContractViolationError(
            f"message partial covers {sorted(message.partial_names)}, expected {sorted(expected)}"
        )
    if not message.unity_names <= (p.unity_names | a1):
        raise ContractViolationError("message unity variables are not part of the sender")
    if p.is_null():
        # 0/0 everywhere; the clique stays null and the degenerate mass
        # surfaces at the root.
        if counter is not None:
            counter.avoided_divisions += 1
        return p
    dropped_size = _levelset_size(v for v in p.unity_vars if v.name not in separator)
    if a1 <= separator:
        # The whole partial went into the message, so the quotient is
        # constant over the clique: pure unity, no cell work.
        if counter is not None:
            counter.avoided_divisions += 1
        return UnityPotential(_SCALAR_ONE, p.partial.domain + p.unity_vars, 1.0 / dropped_size)
    if not expected:
        # The partial missed the separator entirely; its mass sits in the
        # message weight and dividing is a rescale of the partial, which
        # the weight absorbs without touching cells.
        if counter is not None:
            counter.avoided_divisions += 1
        weight = 1.0 / (p.partial.total_mass() * dropped_size)
        return UnityPotential(p.partial, p.unity_vars, weight)
    quotient = p.partial.divide(message.partial)
    if counter is not None:
        counter.partial_divisions += 1
    return UnityPotential(quotient, p.unity_vars, 1.0 / dropped_size)


def up_evidence_reduce(p: UnityPotential, ev: Evidence) -> UnityPotential:
    """Evidence-reduce the partial; observed unity variables just drop
    out of the unity set (an all-ones dimension reduces to the factor 1).
    """
    for v in p.unity_vars:
        if v.name in ev and ev.variable(v.name).levels != v.levels:
            raise DomainMismatchError(
                f"evidence variable {v.name!r} disagrees with the unity levelset"
            )
    partial = p.partial.evidence_reduce(ev)
    unity = tuple(v for v in p.unity_vars if v.name not in ev)
    return UnityPotential(partial, unity, p.weight)


def materialize(p: UnityPotential, *, sparse: bool | None = None) -> Potential:
    """Expand the triple into the explicit full potential
    ``partial (x) weight * 1_B``.  Intended for tests, queries and the
    shortcut-free propagation mode; routine message passing never calls
    this."""
    if sparse is None:
        sparse = p.partial.is_sparse
    base = p.partial.to_sparse() if sparse else p.partial.to_dense()
    if p.unity_vars:
        base = base.multiply(Potential.unity(p.unity_vars, sparse=sparse))
    if p.weight != 1.0:
        base = base.scale(p.weight)
    return base
