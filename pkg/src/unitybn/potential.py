"""Discrete potentials over named variables, in dense and sparse form.

A potential is a non-negative function over the joint levelset of an
ordered set of variables.  Two physical representations are supported:

* dense: one value per cell, stored as a numpy array with one axis per
  domain variable.  The flat enumeration order has the first domain
  variable varying fastest (column-major over the ordered domain).
* sparse: only the nonzero cells, keyed by tuples of level indices.
  The exposed entry list is sorted lexicographically by those tuples.

All operations return new potentials; instances are immutable and safe
to share across threads.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from .errors import (
    DegenerateModelError,
    DomainError,
    DomainMismatchError,
    UndefinedDivisionError,
)

__all__ = ["Variable", "Cell", "Evidence", "Potential"]


@dataclass(frozen=True)
class Variable:
    """A discrete variable: a name plus its ordered levelset."""

    name: str
    levels: tuple[str, ...]

    def __post_init__(self):
        if not self.name:
            raise ValueError("variable name must be non-empty")
        levels = tuple(self.levels)
        object.__setattr__(self, "levels", levels)
        if not levels:
            raise ValueError(f"variable {self.name!r} has an empty levelset")
        if len(set(levels)) != len(levels):
            raise ValueError(f"variable {self.name!r} has duplicate levels")

    @property
    def cardinality(self) -> int:
        return len(self.levels)

    def level_index(self, label: str) -> int:
        try:
            return self.levels.index(label)
        except ValueError:
            raise DomainError(
                f"level {label!r} is not in the levelset of {self.name!r}"
            ) from None

    def __repr__(self):
        return f"Variable({self.name!r}, levels={list(self.levels)!r})"


@dataclass(frozen=True)
class Cell:
    """One full assignment of levels to a set of variables."""

    assignment: tuple[tuple[str, str], ...]

    @classmethod
    def of(cls, mapping: Mapping[str, str], variables: Iterable[Variable] | None = None) -> "Cell":
        """Build a cell from a name->level mapping, optionally validating
        each level against the declared levelsets."""
        if variables is not None:
            by_name = {v.name: v for v in variables}
            for name, level in mapping.items():
                if name not in by_name:
                    raise DomainError(f"unknown variable {name!r} in cell")
                by_name[name].level_index(level)
        return cls(tuple(sorted(mapping.items())))

    def as_dict(self) -> dict[str, str]:
        return dict(self.assignment)

    def __getitem__(self, name: str) -> str:
        for n, level in self.assignment:
            if n == name:
                return level
        raise KeyError(name)

    def __contains__(self, name: str) -> bool:
        return any(n == name for n, _ in self.assignment)


class Evidence:
    """Observed levels for a set of variables.

    Levels are validated against each variable's levelset on
    construction; observing a level outside the declared levelset is
    rejected outright.
    """

    __slots__ = ("_vars", "_levels")

    def __init__(self, assignments: Mapping[Variable, str] | Iterable[tuple[Variable, str]] = ()):
        items = assignments.items() if isinstance(assignments, Mapping) else assignments
        var_map: dict[str, Variable] = {}
        level_map: dict[str, str] = {}
        for var, level in items:
            if var.name in var_map:
                raise DomainError(f"duplicate evidence on variable {var.name!r}")
            var.level_index(level)
            var_map[var.name] = var
            level_map[var.name] = level
        self._vars = var_map
        self._levels = level_map

    @classmethod
    def empty(cls) -> "Evidence":
        return cls(())

    @property
    def names(self) -> frozenset[str]:
        return frozenset(self._levels)

    def variables(self) -> tuple[Variable, ...]:
        return tuple(self._vars.values())

    def level_of(self, name: str) -> str:
        return self._levels[name]

    def variable(self, name: str) -> Variable:
        return self._vars[name]

    def items(self) -> Iterator[tuple[Variable, str]]:
        for name, var in self._vars.items():
            yield var, self._levels[name]

    def __contains__(self, name: str) -> bool:
        return name in self._levels

    def __len__(self) -> int:
        return len(self._levels)

    def __repr__(self):
        inner = ", ".join(f"{n}={l}" for n, l in sorted(self._levels.items()))
        return f"Evidence({inner})"


def _as_index_cell(domain: tuple[Variable, ...], cell) -> tuple[int, ...]:
    """Normalize a cell given as index tuple, Cell, or name->level mapping."""
    if isinstance(cell, tuple):
        if len(cell) != len(domain):
            raise DomainError(f"cell arity {len(cell)} does not match domain size {len(domain)}")
        out = []
        for var, item in zip(domain, cell):
            if isinstance(item, str):
                out.append(var.level_index(item))
            else:
                idx = int(item)
                if not 0 <= idx < var.cardinality:
                    raise DomainError(f"level index {idx} out of range for {var.name!r}")
                out.append(idx)
        return tuple(out)
    if isinstance(cell, Cell):
        cell = cell.as_dict()
    if isinstance(cell, Mapping):
        return tuple(var.level_index(cell[var.name]) for var in domain)
    raise TypeError(f"cannot interpret cell {cell!r}")


class Potential:
    """A non-negative table over an ordered variable domain."""

    __slots__ = ("domain", "_dense", "_sparse", "_by_name")

    def __init__(self, domain: Sequence[Variable], *, dense=None, sparse=None):
        domain = tuple(domain)
        names = [v.name for v in domain]
        if len(set(names)) != len(names):
            raise DomainError(f"duplicate variable names in domain: {names}")
        self.domain = domain
        self._by_name = {v.name: i for i, v in enumerate(domain)}
        self._dense = dense
        self._sparse = sparse

    # -- constructors --------------------------------------------------

    @classmethod
    def from_dense(cls, domain: Sequence[Variable], values) -> "Potential":
        """Dense potential from a flat value sequence (first domain
        variable varying fastest) or an already-shaped array."""
        domain = tuple(domain)
        cards = tuple(v.cardinality for v in domain)
        arr = np.asarray(values, dtype=float)
        if arr.shape == cards and arr.ndim == len(cards):
            pass
        else:
            size = int(np.prod(cards)) if cards else 1
            flat = arr.reshape(-1)
            if flat.size != size:
                raise DomainError(f"expected {size} values for domain {[v.name for v in domain]}, got {flat.size}")
            arr = flat.reshape(cards, order="F") if cards else flat.reshape(())
        if (arr < 0).any():
            raise ValueError("potential values must be non-negative")
        arr = arr.copy()
        arr.setflags(write=False)
        return cls(domain, dense=arr)

    @classmethod
    def from_sparse(cls, domain: Sequence[Variable], entries) -> "Potential":
        """Sparse potential from (cell, value) pairs.  Cells may be index
        tuples, label tuples, or name->level mappings.  Exact zeros are
        dropped; negative values are rejected."""
        domain = tuple(domain)
        items = entries.items() if isinstance(entries, Mapping) else entries
        table: dict[tuple[int, ...], float] = {}
        for cell, value in items:
            value = float(value)
            if value < 0:
                raise ValueError("potential values must be non-negative")
            if value == 0.0:
                continue
            key = _as_index_cell(domain, cell)
            if key in table:
                raise DomainError(f"duplicate sparse cell {key}")
            table[key] = value
        return cls(domain, sparse=table)

    @classmethod
    def unity(cls, domain: Sequence[Variable], *, sparse: bool = False) -> "Potential":
        domain = tuple(domain)
        if sparse:
            cards = [range(v.cardinality) for v in domain]
            return cls(domain, sparse={cell: 1.0 for cell in itertools.product(*cards)})
        cards = tuple(v.cardinality for v in domain)
        arr = np.ones(cards, dtype=float)
        arr.setflags(write=False)
        return cls(domain, dense=arr)

    @classmethod
    def null(cls, domain: Sequence[Variable], *, sparse: bool = False) -> "Potential":
        domain = tuple(domain)
        if sparse:
            return cls(domain, sparse={})
        cards = tuple(v.cardinality for v in domain)
        arr = np.zeros(cards, dtype=float)
        arr.setflags(write=False)
        return cls(domain, dense=arr)

    @classmethod
    def scalar(cls, value: float, *, sparse: bool = False) -> "Potential":
        """Empty-domain potential carrying a single value."""
        if sparse:
            return cls((), sparse={(): float(value)} if value != 0.0 else {})
        return cls.from_dense((), [value])

    # -- structure -----------------------------------------------------

    @property
    def is_sparse(self) -> bool:
        return self._sparse is not None

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.domain)

    @property
    def cards(self) -> tuple[int, ...]:
        return tuple(v.cardinality for v in self.domain)

    @property
    def size(self) -> int:
        out = 1
        for v in self.domain:
            out *= v.cardinality
        return out

    @property
    def is_empty_domain(self) -> bool:
        return not self.domain

    def is_null(self) -> bool:
        if self.is_sparse:
            return not self._sparse
        return not self._dense.any()

    def variable(self, name: str) -> Variable:
        return self.domain[self._by_name[name]]

    def __contains__(self, name: str) -> bool:
        return name in self._by_name

    def nnz(self) -> int:
        if self.is_sparse:
            return len(self._sparse)
        return int(np.count_nonzero(self._dense))

    def entries(self) -> list[tuple[tuple[int, ...], float]]:
        """Nonzero cells as (index tuple, value), sorted lexicographically."""
        if self.is_sparse:
            return sorted(self._sparse.items())
        out = []
        for key in itertools.product(*[range(c) for c in self.cards]):
            v = float(self._dense[key])
            if v != 0.0:
                out.append((key, v))
        return out

    def values_flat(self) -> np.ndarray:
        """Dense value vector, first domain variable varying fastest."""
        return self._dense_array().ravel(order="F").copy()

    def value_at(self, cell) -> float:
        """Cell value; the cell must assign a level to every domain variable."""
        key = _as_index_cell(self.domain, cell)
        if self.is_sparse:
            return self._sparse.get(key, 0.0)
        return float(self._dense[key])

    def cells(self) -> Iterator[tuple[dict[str, str], float]]:
        """All cells as (name->level dict, value), in enumeration order
        (first variable fastest); sparse potentials yield nonzero cells
        in sorted order."""
        if self.is_sparse:
            for key, value in self.entries():
                yield {v.name: v.levels[i] for v, i in zip(self.domain, key)}, value
            return
        cards = self.cards
        for rev in itertools.product(*[range(c) for c in reversed(cards)]):
            key = rev[::-1]
            yield {v.name: v.levels[i] for v, i in zip(self.domain, key)}, float(self._dense[key])

    def _dense_array(self) -> np.ndarray:
        if not self.is_sparse:
            return self._dense
        arr = np.zeros(self.cards, dtype=float)
        for key, value in self._sparse.items():
            arr[key] = value
        return arr

    def _check_compatible(self, other: "Potential") -> None:
        for name in self._by_name:
            if name in other._by_name:
                a = self.variable(name)
                b = other.variable(name)
                if a.levels != b.levels:
                    raise DomainMismatchError(
                        f"variable {name!r} has levelsets {a.levels} vs {b.levels}"
                    )

    def _aligned(self, result_domain: tuple[Variable, ...]) -> np.ndarray:
        """Dense view broadcastable over result_domain's axes."""
        arr = self._dense_array()
        order = [v.name for v in result_domain if v.name in self._by_name]
        perm = [self._by_name[name] for name in order]
        arr = np.transpose(arr, perm)
        shape = tuple(v.cardinality if v.name in self._by_name else 1 for v in result_domain)
        return arr.reshape(shape)

    # -- algebra ---------------------------------------------------------

    def multiply(self, other: "Potential") -> "Potential":
        """Cell-wise product over the union domain.

        The result is sparse only if both operands are sparse; its domain
        keeps this potential's variable order followed by the other's
        extra variables.
        """
        self._check_compatible(other)
        extra = tuple(v for v in other.domain if v.name not in self._by_name)
        result_domain = self.domain + extra
        if self.is_sparse and other.is_sparse:
            shared = [n for n in other.names if n in self._by_name]
            self_pos = [self._by_name[n] for n in shared]
            other_pos = [other._by_name[n] for n in shared]
            rest_pos = [other._by_name[v.name] for v in extra]
            index: dict[tuple[int, ...], list[tuple[tuple[int, ...], float]]] = {}
            for cell, value in other._sparse.items():
                key = tuple(cell[p] for p in other_pos)
                index.setdefault(key, []).append((tuple(cell[p] for p in rest_pos), value))
            out: dict[tuple[int, ...], float] = {}
            for cell, value in self._sparse.items():
                key = tuple(cell[p] for p in self_pos)
                for rest, w in index.get(key, ()):
                    out[cell + rest] = value * w
            return Potential(result_domain, sparse=out)
        a = self._aligned(result_domain)
        b = other._aligned(result_domain)
        arr = a * b
        arr.setflags(write=False)
        return Potential(result_domain, dense=arr)

    def divide(self, other: "Potential") -> "Potential":
        """Cell-wise quotient with the convention 0/0 := 0.

        A nonzero numerator over a zero denominator raises
        UndefinedDivisionError.  Message passing only ever divides by a
        projection of the dividend, so the divisor domain is normally a
        subset of this potential's domain.
        """
        self._check_compatible(other)
        subset = all(n in self._by_name for n in other.names)
        if subset and self.is_sparse and other.is_sparse:
            pos = [self._by_name[n] for n in other.names]
            out: dict[tuple[int, ...], float] = {}
            for cell, value in self._sparse.items():
                den = other._sparse.get(tuple(cell[p] for p in pos), 0.0)
                if den == 0.0:
                    raise UndefinedDivisionError(
                        f"nonzero cell {cell} divided by zero over {other.names}"
                    )
                out[cell] = value / den
            return Potential(self.domain, sparse=out)
        extra = tuple(v for v in other.domain if v.name not in self._by_name)
        result_domain = self.domain + extra
        num = np.broadcast_to(self._aligned(result_domain), tuple(v.cardinality for v in result_domain))
        den = np.broadcast_to(other._aligned(result_domain), num.shape)
        zero_den = den == 0.0
        if (zero_den & (num != 0.0)).any():
            raise UndefinedDivisionError("nonzero cell divided by zero")
        arr = np.zeros(num.shape)
        keep = ~zero_den
        np.divide(num, den, out=arr, where=keep)
        arr.setflags(write=False)
        return Potential(result_domain, dense=arr)

    def project(self, onto: Iterable[str]) -> "Potential":
        """Sum out every variable not in `onto` (which must be a subset
        of the domain).  Projecting onto the full domain is the identity;
        projecting onto the empty set yields the scalar total mass."""
        onto = set(onto)
        unknown = onto - set(self.names)
        if unknown:
            raise DomainError(f"cannot project onto {sorted(unknown)}: not in domain {list(self.names)}")
        if onto == set(self.names):
            return self
        result_domain = tuple(v for v in self.domain if v.name in onto)
        if self.is_sparse:
            keep = [self._by_name[v.name] for v in result_domain]
            out: dict[tuple[int, ...], float] = {}
            for cell, value in self._sparse.items():
                key = tuple(cell[p] for p in keep)
                out[key] = out.get(key, 0.0) + value
            return Potential(result_domain, sparse=out)
        axes = tuple(i for i, v in enumerate(self.domain) if v.name not in onto)
        arr = self._dense.sum(axis=axes)
        arr = np.asarray(arr)
        arr.setflags(write=False)
        return Potential(result_domain, dense=arr)

    def evidence_reduce(self, ev: Evidence) -> "Potential":
        """Zero out cells disagreeing with the evidence, then drop the
        observed dimensions.  Evidence on variables outside the domain is
        ignored.  A null result signals evidence this potential rules out."""
        hit = [name for name in self.names if name in ev]
        if not hit:
            return self
        for name in hit:
            mine = self.variable(name)
            if mine.levels != ev.variable(name).levels:
                raise DomainMismatchError(
                    f"evidence variable {name!r} disagrees with the potential's levelset"
                )
        result_domain = tuple(v for v in self.domain if v.name not in ev)
        if self.is_sparse:
            pos = {self._by_name[name]: self.variable(name).level_index(ev.level_of(name)) for name in hit}
            keep = [i for i in range(len(self.domain)) if i not in pos]
            out: dict[tuple[int, ...], float] = {}
            for cell, value in self._sparse.items():
                if all(cell[p] == lvl for p, lvl in pos.items()):
                    out[tuple(cell[p] for p in keep)] = value
            return Potential(result_domain, sparse=out)
        slicer = tuple(
            self.variable(v.name).level_index(ev.level_of(v.name)) if v.name in ev else slice(None)
            for v in self.domain
        )
        arr = np.asarray(self._dense[slicer])
        arr = arr.copy()
        arr.setflags(write=False)
        return Potential(result_domain, dense=arr)

    def total_mass(self) -> float:
        if self.is_sparse:
            return float(sum(self._sparse.values()))
        return float(self._dense.sum())

    def normalize(self) -> tuple["Potential", float]:
        """Scale to total mass one; returns (normalized, constant)."""
        mass = self.total_mass()
        if mass == 0.0:
            raise DegenerateModelError("cannot normalize a null potential")
        return self.scale(1.0 / mass), mass

    def scale(self, factor: float) -> "Potential":
        factor = float(factor)
        if factor < 0:
            raise ValueError("scale factor must be non-negative")
        if self.is_sparse:
            if factor == 0.0:
                return Potential(self.domain, sparse={})
            return Potential(self.domain, sparse={k: v * factor for k, v in self._sparse.items()})
        arr = self._dense * factor
        arr.setflags(write=False)
        return Potential(self.domain, dense=arr)

    # -- representation -------------------------------------------------

    def to_dense(self) -> "Potential":
        if not self.is_sparse:
            return self
        arr = self._dense_array()
        arr.setflags(write=False)
        return Potential(self.domain, dense=arr)

    def to_sparse(self) -> "Potential":
        if self.is_sparse:
            return self
        out: dict[tuple[int, ...], float] = {}
        for key in itertools.product(*[range(c) for c in self.cards]):
            v = float(self._dense[key])
            if v != 0.0:
                out[key] = v
        return Potential(self.domain, sparse=out)

    def same_table(self, other: "Potential", *, rel: float = 0.0, abs_tol: float = 0.0) -> bool:
        """Value equality over the shared domain, representation-blind.

        Domains must contain the same variables (any order).  With the
        default tolerances the comparison is exact.
        """
        if set(self.names) != set(other.names):
            return False
        self._check_compatible(other)
        a = self._dense_array()
        perm = [other._by_name[v.name] for v in self.domain]
        b = np.transpose(other._dense_array(), perm) if other.domain else other._dense_array()
        if rel == 0.0 and abs_tol == 0.0:
            return bool(np.array_equal(a, b))
        return bool(np.allclose(a, b, rtol=rel, atol=abs_tol))

    def __repr__(self):
        kind = "sparse" if self.is_sparse else "dense"
        return f"Potential({list(self.names)}, {kind}, nnz={self.nnz()}/{self.size})"
