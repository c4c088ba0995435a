"""Collect/distribute message passing over a junction tree.

Two engines share one schedule:

* the shortcut engine (``up_enabled=True``) keeps every clique as a
  triple and skips cell-level work whenever unity content or weights
  make it unnecessary, recording each skip as avoided work;
* the materialized engine (``up_enabled=False``) expands every triple
  into an explicit table at the start of collect (populating all-ones
  factors and performing the weight-scaling products) and then runs the
  same messages as plain table operations.

Both produce identical posteriors; only the counters differ.  The
skip/perform bookkeeping is symmetric: everything the shortcut engine
records as avoided, the materialized engine performs, so the avoided +
performed total of one run equals the performed total of the other.

Scenario tags on trace events name the four kinds of shortcut:
``i``   a message update needed no partial multiplication,
``ii``  a sender update needed no partial division,
``iii`` a performed product left its unity remainder symbolic,
``iv``  a smoothed replacement CPT was never materialized.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    DegenerateModelError,
    DomainError,
    DomainMismatchError,
    PhaseError,
    QueryError,
)
from .estimation import SmoothingPolicy, unity_smooth
from .graph import JunctionTree
from .potential import Evidence, Potential
from .unity import (
    OpCounter,
    UnityPotential,
    materialize,
    up_divide_update,
    up_multiply,
    up_project,
)

__all__ = [
    "Message",
    "TraceEvent",
    "PropagationState",
    "initialize",
    "collect",
    "distribute",
    "propagate",
    "query_marginal",
    "prob_evidence",
    "predict_class",
    "format_trace",
]


@dataclass(frozen=True)
class Message:
    """A payload passed over a separator; the payload's domain is the
    evidence-reduced separator."""

    separator: frozenset[str]
    payload: object  # UnityPotential (shortcut engine) or Potential (materialized)


@dataclass(frozen=True)
class TraceEvent:
    phase: str
    kind: str  # "smooth" | "materialize" | "message" | "normalize"
    clique: int | None = None
    sender: int | None = None
    receiver: int | None = None
    separator: tuple[str, ...] | None = None
    projection: str | None = None  # "performed" | "skipped"
    multiplication: str | None = None  # "performed" | "avoided"
    division: str | None = None
    tags: tuple[str, ...] = ()

    def format(self) -> str:
        parts = [self.phase, self.kind]
        if self.kind == "message":
            parts.append(f"{self.sender}->{self.receiver}")
            parts.append("sep=" + (",".join(self.separator) if self.separator else "-"))
        elif self.clique is not None:
            parts.append(f"clique={self.clique}")
        for label, value in (
            ("proj", self.projection),
            ("mult", self.multiplication),
            ("div", self.division),
        ):
            if value is not None:
                parts.append(f"{label}={value}")
        if self.tags:
            parts.append("tags=" + ",".join(self.tags))
        return " ".join(parts)


class PropagationState:
    """Mutable state of one propagation run over an immutable tree."""

    def __init__(
        self,
        tree: JunctionTree,
        evidence: Evidence,
        policy: SmoothingPolicy,
        *,
        up_enabled: bool = True,
        track_weights: bool = True,
    ):
        self.tree = tree
        self.evidence = evidence
        self.policy = policy
        self.up_enabled = up_enabled
        self.track_weights = track_weights
        self.potentials: list[UnityPotential] = []
        self.tables: list[Potential] | None = None
        self.separators: dict[tuple[int, int], Message] = {}
        self.eta: float | None = None
        self.eta_smoothed: bool = False
        self.smoothed: list[tuple[str, int]] = []
        self.phase = "new"
        self.phase_counters: dict[str, OpCounter] = {}
        self.trace: list[TraceEvent] = []
        self.timings_ns: dict[str, int] = {}
        # rooted orientation, shared by both passes
        self._parent: dict[int, int] = {}
        self._children: dict[int, list[int]] = {i: [] for i in range(len(tree.cliques))}
        self._roots: list[int] = []
        self._sep_by_edge: dict[frozenset[int], frozenset[str]] = {
            frozenset((a, b)): sep for a, b, sep in tree.edges
        }
        for comp in tree.components():
            root = tree.root if tree.root in comp else comp[0]
            self._roots.append(root)
            seen = {root}
            stack = [root]
            while stack:
                i = stack.pop()
                for j, _ in self.tree.neighbors(i):
                    if j not in seen:
                        seen.add(j)
                        self._parent[j] = i
                        self._children[i].append(j)
                        stack.append(j)
        self._roots.sort()

    @property
    def counters(self) -> OpCounter:
        total = OpCounter()
        for c in self.phase_counters.values():
            total.merge(c)
        return total

    def separator_between(self, i: int, j: int) -> frozenset[str]:
        try:
            return self._sep_by_edge[frozenset((i, j))]
        except KeyError:
            raise DomainError(f"no tree edge between cliques {i} and {j}") from None

    def reduced_separator(self, i: int, j: int) -> frozenset[str]:
        return self.separator_between(i, j) - self.evidence.names

    def reduced_clique(self, i: int) -> frozenset[str]:
        return self.tree.cliques[i] - self.evidence.names

    def collect_order(self) -> list[tuple[int, int]]:
        """(sender, receiver) pairs, children before parents."""
        out: list[tuple[int, int]] = []

        def visit(i: int):
            for j in sorted(self._children[i]):
                visit(j)
                out.append((j, i))

        for root in self._roots:
            visit(root)
        return out

    def distribute_order(self) -> list[tuple[int, int]]:
        """(sender, receiver) pairs, parents before children."""
        out: list[tuple[int, int]] = []

        def visit(i: int):
            for j in sorted(self._children[i]):
                out.append((i, j))
                visit(j)

        for root in self._roots:
            visit(root)
        return out


def initialize(
    tree: JunctionTree,
    evidence: Evidence,
    policy: SmoothingPolicy,
    *,
    up_enabled: bool = True,
    track_weights: bool = True,
) -> PropagationState:
    """Evidence-reduce every assigned CPT, smooth the ones the evidence
    nulls out (mle-unity policy only), and combine each clique's CPTs
    into its triple.  Unity variables are extended to cover the whole
    evidence-reduced clique, and accumulated scalar weight is folded
    into the partial table when there is one."""
    if tree.assignments is None:
        raise DomainError("assign CPTs to cliques before propagating")
    for var, _level in evidence.items():
        known = tree.variables.get(var.name)
        if known is None:
            raise QueryError(f"evidence on unknown variable {var.name!r}")
        if known.levels != var.levels:
            raise DomainMismatchError(
                f"evidence variable {var.name!r} disagrees with the model's levelset"
            )
    t0 = time.perf_counter_ns()
    state = PropagationState(
        tree, evidence, policy, up_enabled=up_enabled, track_weights=track_weights
    )
    counters = OpCounter()
    state.phase_counters["initialize"] = counters
    for i, cpts in enumerate(tree.assignments):
        triples: list[UnityPotential] = []
        for cpt in cpts:
            reduced = cpt.table.evidence_reduce(evidence)
            if reduced.is_null():
                if policy.kind != "mle-unity":
                    raise DegenerateModelError(
                        f"evidence is impossible for p({cpt.child.name} | "
                        f"{', '.join(p.name for p in cpt.parents)}) and policy "
                        f"{policy.kind!r} has no query-time smoothing"
                    )
                triples.append(unity_smooth(cpt, evidence, policy.epsilon))
                state.smoothed.append((cpt.child.name, i))
                state.trace.append(
                    TraceEvent("initialize", "smooth", clique=i, multiplication="avoided", tags=("iv",))
                )
            else:
                triples.append(UnityPotential.of(reduced))
        if triples:
            psi = triples[0]
            for t in triples[1:]:
                psi = up_multiply(psi, t, counters)
        else:
            psi = UnityPotential.pure()
        missing = tuple(
            tree.variables[n]
            for n in sorted(state.reduced_clique(i))
            if n not in psi.full_names
        )
        psi = UnityPotential(psi.partial, psi.unity_vars + missing, psi.weight)
        if not track_weights:
            psi = UnityPotential(psi.partial, psi.unity_vars, 1.0)
        elif not psi.is_pure_unity and psi.weight != 1.0:
            psi = UnityPotential(psi.partial.scale(psi.weight), psi.unity_vars, 1.0)
        state.potentials.append(psi)
    state.eta_smoothed = bool(state.smoothed)
    state.phase = "initialized"
    state.timings_ns["initialize"] = time.perf_counter_ns() - t0
    return state


def _materialization_work(psi: UnityPotential) -> tuple[int, bool]:
    """(number of table products a materialization costs, whether the
    weight-scaling product is among them)."""
    ops = 0
    scaling = False
    if not psi.is_pure_unity and psi.unity_vars:
        ops += 1
    if psi.weight != 1.0 and psi.full_names:
        ops += 1
        scaling = True
    return ops, scaling


def collect(state: PropagationState) -> PropagationState:
    """Inward pass: every clique sends its separator projection toward
    the root, receivers absorb the message, senders divide it out, and
    each component root is normalized.  The pre-normalization mass is
    the probability of the evidence (product over components)."""
    if state.phase != "initialized":
        raise PhaseError(f"collect requires an initialized state, not {state.phase!r}")
    t0 = time.perf_counter_ns()
    counters = OpCounter()
    state.phase_counters["collect"] = counters
    if state.up_enabled:
        _collect_shortcut(state, counters)
    else:
        _collect_materialized(state, counters)
    state.phase = "collected"
    state.timings_ns["collect"] = time.perf_counter_ns() - t0
    return state


def _collect_shortcut(state: PropagationState, counters: OpCounter) -> None:
    smoothed_cliques = {i for _, i in state.smoothed}
    for i, psi in enumerate(state.potentials):
        ops, scaling = _materialization_work(psi)
        if ops:
            counters.avoided_multiplications += ops
            tags = ("iv",) if scaling and i in smoothed_cliques else ("i",)
            state.trace.append(
                TraceEvent("collect", "materialize", clique=i, multiplication="avoided", tags=tags)
            )
    for sender, receiver in state.collect_order():
        sep = state.reduced_separator(sender, receiver)
        before = counters.copy()
        msg = up_project(state.potentials[sender], sep, counters)
        proj = "performed" if counters.projections > before.projections else "skipped"
        updated = up_multiply(state.potentials[receiver], msg, counters)
        performed_mult = counters.partial_multiplications > before.partial_multiplications
        state.potentials[receiver] = updated
        state.potentials[sender] = up_divide_update(state.potentials[sender], msg, counters)
        performed_div = counters.partial_divisions > before.partial_divisions
        tags = []
        if not performed_mult:
            tags.append("i")
        elif updated.unity_vars:
            tags.append("iii")
        if not performed_div:
            tags.append("ii")
        state.trace.append(
            TraceEvent(
                "collect",
                "message",
                sender=sender,
                receiver=receiver,
                separator=tuple(sorted(sep)),
                projection=proj,
                multiplication="performed" if performed_mult else "avoided",
                division="performed" if performed_div else "avoided",
                tags=tuple(tags),
            )
        )
    eta = 1.0
    for root in state._roots:
        psi = state.potentials[root]
        mass = psi.weight * psi.partial.total_mass()
        for v in psi.unity_vars:
            mass *= v.cardinality
        if mass == 0.0:
            raise DegenerateModelError(
                "the evidence has zero probability under this model "
                "(zero mass at the root after collect)"
            )
        if mass != 1.0:
            if psi.full_names:
                counters.avoided_divisions += 1
                state.trace.append(
                    TraceEvent("collect", "normalize", clique=root, division="avoided")
                )
            state.potentials[root] = UnityPotential(
                psi.partial, psi.unity_vars, psi.weight / mass
            )
        eta *= mass
    state.eta = eta if state.track_weights else None


def _collect_materialized(state: PropagationState, counters: OpCounter) -> None:
    tables: list[Potential] = []
    for i, psi in enumerate(state.potentials):
        ops, _ = _materialization_work(psi)
        if ops:
            counters.partial_multiplications += ops
            state.trace.append(
                TraceEvent("collect", "materialize", clique=i, multiplication="performed")
            )
        tables.append(materialize(psi))
    state.tables = tables
    for sender, receiver in state.collect_order():
        sep = state.reduced_separator(sender, receiver)
        table = tables[sender]
        if sep == set(table.names):
            msg = table
            proj = "skipped"
        else:
            msg = table.project(sep)
            counters.projections += 1
            proj = "performed"
        tables[receiver] = tables[receiver].multiply(msg)
        counters.partial_multiplications += 1
        tables[sender] = table.divide(msg)
        counters.partial_divisions += 1
        state.trace.append(
            TraceEvent(
                "collect",
                "message",
                sender=sender,
                receiver=receiver,
                separator=tuple(sorted(sep)),
                projection=proj,
                multiplication="performed",
                division="performed",
            )
        )
    eta = 1.0
    for root in state._roots:
        mass = tables[root].total_mass()
        if mass == 0.0:
            raise DegenerateModelError(
                "the evidence has zero probability under this model "
                "(zero mass at the root after collect)"
            )
        if mass != 1.0:
            if tables[root].domain:
                counters.partial_divisions += 1
                state.trace.append(
                    TraceEvent("collect", "normalize", clique=root, division="performed")
                )
            tables[root] = tables[root].scale(1.0 / mass)
        eta *= mass
    state.eta = eta if state.track_weights else None


def distribute(state: PropagationState) -> PropagationState:
    """Outward pass: each clique passes its separator projection to its
    children, which absorb it; separator potentials record the messages.
    Afterwards every clique and separator holds the conditional
    distribution of its evidence-reduced variables given the evidence."""
    if state.phase != "collected":
        raise PhaseError(f"distribute requires a collected state, not {state.phase!r}")
    t0 = time.perf_counter_ns()
    counters = OpCounter()
    state.phase_counters["distribute"] = counters
    for sender, receiver in state.distribute_order():
        sep = state.reduced_separator(sender, receiver)
        edge = (min(sender, receiver), max(sender, receiver))
        if state.up_enabled:
            before = counters.copy()
            msg = up_project(state.potentials[sender], sep, counters)
            proj = "performed" if counters.projections > before.projections else "skipped"
            updated = up_multiply(state.potentials[receiver], msg, counters)
            performed_mult = counters.partial_multiplications > before.partial_multiplications
            state.potentials[receiver] = updated
            tags = []
            if not performed_mult:
                tags.append("i")
            elif updated.unity_vars:
                tags.append("iii")
            state.trace.append(
                TraceEvent(
                    "distribute",
                    "message",
                    sender=sender,
                    receiver=receiver,
                    separator=tuple(sorted(sep)),
                    projection=proj,
                    multiplication="performed" if performed_mult else "avoided",
                    tags=tuple(tags),
                )
            )
        else:
            table = state.tables[sender]
            if sep == set(table.names):
                msg = table
                proj = "skipped"
            else:
                msg = table.project(sep)
                counters.projections += 1
                proj = "performed"
            state.tables[receiver] = state.tables[receiver].multiply(msg)
            counters.partial_multiplications += 1
            state.trace.append(
                TraceEvent(
                    "distribute",
                    "message",
                    sender=sender,
                    receiver=receiver,
                    separator=tuple(sorted(sep)),
                    projection=proj,
                    multiplication="performed",
                )
            )
        state.separators[edge] = Message(frozenset(sep), msg)
    state.phase = "distributed"
    state.timings_ns["distribute"] = time.perf_counter_ns() - t0
    return state


def propagate(
    tree: JunctionTree,
    evidence: Evidence,
    policy: SmoothingPolicy,
    *,
    up_enabled: bool = True,
    track_weights: bool = True,
) -> PropagationState:
    """initialize + collect + distribute in one call."""
    state = initialize(
        tree, evidence, policy, up_enabled=up_enabled, track_weights=track_weights
    )
    collect(state)
    distribute(state)
    return state


def query_marginal(state: PropagationState, names: Sequence[str]) -> Potential:
    """Normalized posterior over `names` given the evidence.

    The variables must live together in some clique (after a full
    propagation) or in the root clique (after collect only); evidence
    variables are degenerate and rejected."""
    target = set(names)
    if not target:
        raise QueryError("empty query")
    for n in target:
        if n not in state.tree.variables:
            raise QueryError(f"unknown variable {n!r}")
        if n in state.evidence:
            raise QueryError(f"{n!r} is an evidence variable; its posterior is degenerate")
    if state.phase == "collected":
        if not target <= state.reduced_clique(state.tree.root):
            raise PhaseError(
                "after collect only root-clique variables can be queried; run distribute"
            )
        idx = state.tree.root
    elif state.phase == "distributed":
        candidates = [
            i for i in range(len(state.tree.cliques)) if target <= state.reduced_clique(i)
        ]
        if not candidates:
            raise QueryError(
                f"variables {sorted(target)} share no clique; joint queries across "
                "cliques are not supported"
            )
        idx = candidates[0]
    else:
        raise PhaseError(f"cannot query in phase {state.phase!r}")
    if state.up_enabled:
        pot = materialize(up_project(state.potentials[idx], target))
    else:
        pot = state.tables[idx].project(target)
    return pot.normalize()[0]


def prob_evidence(state: PropagationState) -> float:
    """The normalization constant recorded at collect.  When any CPT was
    unity-smoothed this is scaled by the smoothing value and is not a
    true probability; check ``state.eta_smoothed``."""
    if state.phase not in ("collected", "distributed"):
        raise PhaseError("probability of evidence is available after collect")
    if state.eta is None:
        raise QueryError("weights were neglected for this run; eta was not tracked")
    return state.eta


def predict_class(
    tree: JunctionTree,
    observation: Evidence,
    class_var: str,
    policy: SmoothingPolicy,
    *,
    up_enabled: bool = True,
) -> str:
    """Collect-only Bayes classification: enter the observation, collect
    to the root (which must contain the class variable), and return the
    class level with the highest posterior.  Ties go to the lowest
    level index."""
    if class_var not in tree.variables:
        raise QueryError(f"unknown class variable {class_var!r}")
    if class_var in observation:
        raise QueryError("the class variable is observed; nothing to predict")
    if class_var not in tree.cliques[tree.root]:
        raise QueryError("the root clique must contain the class variable")
    state = initialize(tree, observation, policy, up_enabled=up_enabled)
    collect(state)
    posterior = query_marginal(state, [class_var])
    values = posterior.to_dense().values_flat()
    return tree.variables[class_var].levels[int(np.argmax(values))]


def format_trace(state: PropagationState) -> str:
    """Line-per-event dump of the run's messages and shortcuts."""
    return "\n".join(event.format() for event in state.trace)
