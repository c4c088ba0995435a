"""A Bayesian network: a DAG plus one CPT per variable."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

from .errors import DomainError, DomainMismatchError
from .estimation import Cpt
from .graph import Dag
from .potential import Variable

__all__ = ["BayesianNetwork"]


@dataclass(frozen=True)
class BayesianNetwork:
    """Joint distribution factorized as the product of p(X | parents(X))
    over the DAG.  Construction checks that every CPT matches its node's
    parent set and that levelsets agree everywhere."""

    dag: Dag
    cpts: Mapping[str, Cpt]

    def __post_init__(self):
        object.__setattr__(self, "cpts", dict(self.cpts))
        if self.dag.variables is None:
            raise DomainError("the DAG must carry levelsets")
        if set(self.cpts) != set(self.dag.nodes):
            missing = set(self.dag.nodes) - set(self.cpts)
            extra = set(self.cpts) - set(self.dag.nodes)
            raise DomainError(f"CPTs do not match DAG nodes (missing {sorted(missing)}, extra {sorted(extra)})")
        for name, cpt in self.cpts.items():
            if cpt.child.name != name:
                raise DomainError(f"CPT stored under {name!r} has child {cpt.child.name!r}")
            declared = self.dag.parents[name]
            actual = tuple(p.name for p in cpt.parents)
            if actual != declared:
                raise DomainError(
                    f"CPT for {name!r} conditions on {actual}, DAG declares {declared}"
                )
            for var in (cpt.child,) + cpt.parents:
                known = self.dag.variables[var.name]
                if known.levels != var.levels:
                    raise DomainMismatchError(
                        f"variable {var.name!r} has levelsets {var.levels} vs {known.levels}"
                    )

    @property
    def variables(self) -> tuple[Variable, ...]:
        return tuple(self.dag.variables[n] for n in self.dag.nodes)

    def variable(self, name: str) -> Variable:
        if name not in self.dag.variables:
            raise DomainError(f"unknown variable {name!r}")
        return self.dag.variables[name]

    def __repr__(self):
        return f"BayesianNetwork({len(self.cpts)} variables)"
