"""Parameter estimation and smoothing of evidence-inconsistent CPTs.

Maximum-likelihood tables keep their structural zeros and are stored
sparse.  Laplace smoothing adds a pseudo-count everywhere, which makes
every cell positive and forces a dense table.  Unity smoothing runs
just in time instead: only a CPT that the current evidence reduces to
the null potential is replaced, and the replacement is a symbolic
triple, so untouched CPTs keep their zeros and their sparsity.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import TYPE_CHECKING, Mapping, Sequence

import numpy as np

from .errors import ConfigurationError, ContractViolationError, DomainError
from .potential import Evidence, Potential, Variable
from .unity import UnityPotential

if TYPE_CHECKING:  # pragma: no cover
    from .io import DiscreteDataset

__all__ = [
    "SmoothingPolicy",
    "CptCounts",
    "Cpt",
    "count",
    "mle",
    "laplace",
    "unity_smooth",
    "smoothed_child_column",
]

POLICY_KINDS = ("mle-unity", "laplace")


@dataclass(frozen=True)
class SmoothingPolicy:
    """How zero-probability evidence is kept from degenerating the model.

    * ``mle-unity``: plain maximum likelihood at fit time, unity
      smoothing with value ``epsilon`` at evidence-entry time.
    * ``laplace``: pseudo-count ``alpha`` added to every contingency
      cell at fit time; nothing to do at evidence-entry time.
    """

    kind: str = "mle-unity"
    alpha: float = 1.0
    epsilon: float = 1.0

    def __post_init__(self):
        if self.kind not in POLICY_KINDS:
            raise ConfigurationError(f"unknown smoothing policy {self.kind!r}")
        if self.alpha <= 0:
            raise ConfigurationError("alpha must be positive")
        if self.epsilon <= 0:
            raise ConfigurationError("epsilon must be positive")

    @classmethod
    def mle_unity(cls, epsilon: float = 1.0) -> "SmoothingPolicy":
        return cls("mle-unity", epsilon=epsilon)

    @classmethod
    def laplace_policy(cls, alpha: float = 1.0) -> "SmoothingPolicy":
        return cls("laplace", alpha=alpha)


@dataclass(frozen=True)
class CptCounts:
    """Contingency counts n(child level, parent cell); only observed
    pairs are stored, everything else is an implied zero."""

    child: Variable
    parents: tuple[Variable, ...]
    counts: Mapping[tuple[int, tuple[int, ...]], int]

    def __post_init__(self):
        object.__setattr__(self, "parents", tuple(self.parents))
        table = {}
        for (ci, pj), n in dict(self.counts).items():
            n = int(n)
            if n < 0:
                raise ValueError("counts must be non-negative")
            if n:
                table[(ci, tuple(pj))] = n
        object.__setattr__(self, "counts", table)

    def column_total(self, parent_cell: tuple[int, ...]) -> int:
        return sum(n for (ci, pj), n in self.counts.items() if pj == parent_cell)

    def total(self) -> int:
        return sum(self.counts.values())

    def parent_cells(self):
        return itertools.product(*[range(p.cardinality) for p in self.parents])


@dataclass(frozen=True)
class Cpt:
    """A conditional probability table p(child | parents).

    The underlying potential's domain is (child, *parents).  Every
    parent column sums to one, except that maximum-likelihood tables may
    carry all-zero columns for parent cells never seen in the data.
    """

    child: Variable
    parents: tuple[Variable, ...]
    table: Potential

    def __post_init__(self):
        object.__setattr__(self, "parents", tuple(self.parents))
        expected = (self.child.name,) + tuple(p.name for p in self.parents)
        if self.table.names != expected:
            raise DomainError(
                f"CPT table domain {self.table.names} must be (child, *parents) = {expected}"
            )
        col_sums = self.table.project([p.name for p in self.parents])
        for cell, value in col_sums.cells():
            if value != 0.0 and abs(value - 1.0) > 1e-9:
                raise DomainError(
                    f"CPT column {cell} for {self.child.name!r} sums to {value!r}, not 1"
                )

    @property
    def family(self) -> frozenset[str]:
        return frozenset((self.child.name,) + tuple(p.name for p in self.parents))

    def __repr__(self):
        ps = ",".join(p.name for p in self.parents)
        return f"Cpt({self.child.name}|{ps})"


def count(data: "DiscreteDataset", child: str, parents: Sequence[str]) -> CptCounts:
    """Exact contingency counts of (child, parent cell) pairs in the data."""
    child_var = data.variable(child)
    parent_vars = tuple(data.variable(p) for p in parents)
    ccol = data.codes_for(child)
    pcols = [data.codes_for(p) for p in parents]
    table: dict[tuple[int, tuple[int, ...]], int] = {}
    for r in range(data.n_rows):
        key = (int(ccol[r]), tuple(int(col[r]) for col in pcols))
        table[key] = table.get(key, 0) + 1
    return CptCounts(child_var, parent_vars, table)


def mle(counts: CptCounts) -> Cpt:
    """Maximum-likelihood CPT, stored sparse.

    Each seen parent column is normalized by its total; parent cells
    never observed keep an all-zero column, so structural zeros in the
    data survive estimation.
    """
    totals: dict[tuple[int, ...], int] = {}
    for (ci, pj), n in counts.counts.items():
        totals[pj] = totals.get(pj, 0) + n
    entries: dict[tuple[int, ...], float] = {}
    for (ci, pj), n in counts.counts.items():
        entries[(ci,) + pj] = n / totals[pj]
    domain = (counts.child,) + counts.parents
    return Cpt(counts.child, counts.parents, Potential.from_sparse(domain, entries))


def laplace(counts: CptCounts, alpha: float = 1.0) -> Cpt:
    """Laplace-smoothed CPT with pseudo-count ``alpha``, stored dense;
    no zero survives, so sparsity is gone by construction."""
    if alpha <= 0:
        raise ConfigurationError("alpha must be positive")
    child = counts.child
    k = child.cardinality
    domain = (child,) + counts.parents
    cards = tuple(v.cardinality for v in domain)
    arr = np.zeros(cards)
    for (ci, pj), n in counts.counts.items():
        arr[(ci,) + pj] = n
    for pj in counts.parent_cells():
        column = tuple((ci,) + pj for ci in range(k))
        total = sum(arr[c] for c in column)
        for c in column:
            arr[c] = (arr[c] + alpha) / (total + alpha * k)
    return Cpt(child, counts.parents, Potential.from_dense(domain, arr))


def unity_smooth(cpt: Cpt, ev: Evidence, epsilon: float = 1.0) -> UnityPotential:
    """Just-in-time replacement for a CPT the evidence reduced to null.

    Two shapes come out, both tiny:

    * child observed: the reduced CPT is the constant ``epsilon`` over
      the unobserved parents R, kept symbolic as the triple (1, R, eps);
    * child unobserved: the evidence pinned parent columns that were
      never seen, so the child gets the uniform distribution, again
      constant over R.

    The replacement's memory footprint is the levelset metadata of R,
    not a table over R.
    """
    if epsilon <= 0:
        raise ConfigurationError("epsilon must be positive")
    reduced = cpt.table.evidence_reduce(ev)
    if not reduced.is_null():
        raise ContractViolationError(
            f"unity smoothing called on {cpt!r} but the evidence does not null it"
        )
    remainder = tuple(p for p in cpt.parents if p.name not in ev)
    if cpt.child.name in ev:
        return UnityPotential.pure(remainder, epsilon)
    k = cpt.child.cardinality
    uniform = Potential.from_dense((cpt.child,), [1.0 / k] * k)
    if cpt.table.is_sparse:
        uniform = uniform.to_sparse()
    return UnityPotential(uniform, remainder, 1.0)


def smoothed_child_column(cpt: Cpt, parent_cell: Mapping[str, str], epsilon: float) -> Potential:
    """Smoothed child distribution for one fully specified parent cell.

    A never-seen column becomes uniform.  Otherwise zero cells get
    ``epsilon`` and positive cells are scaled by (1 - epsilon * #zeros),
    which keeps the column summing to one.  The scaled form is only a
    probability vector for epsilon < 1 / #zeros; no clamping is applied,
    so a larger epsilon drives positive cells negative and is rejected
    by the potential constructor.
    """
    if epsilon <= 0:
        raise ConfigurationError("epsilon must be positive")
    missing = {p.name for p in cpt.parents} - set(parent_cell)
    if missing:
        raise DomainError(f"parent cell must pin every parent; missing {sorted(missing)}")
    ev = Evidence([(p, parent_cell[p.name]) for p in cpt.parents])
    column = cpt.table.evidence_reduce(ev).to_dense()
    values = column.values_flat()
    if not values.any():
        k = cpt.child.cardinality
        return Potential.from_dense((cpt.child,), [1.0 / k] * k)
    zeros = values == 0.0
    out = values * (1.0 - epsilon * int(zeros.sum()))
    out[zeros] = epsilon
    return Potential.from_dense((cpt.child,), out)
