"""Harnesses: posterior queries, cross-validated prediction error, and
the shortcut-vs-materialized propagation benchmarks.

Every random choice (evidence sampling, fold assignment) flows from the
run seed through keyed SeedSequences, so one config reproduces the same
runs bit for bit; wall-clock fields are the only nondeterministic parts
of a report.
"""

from __future__ import annotations

import hashlib
import time
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import ConfigurationError, DegenerateModelError, QueryError
from .estimation import SmoothingPolicy
from .graph import Dag, JunctionTree, compile_model
from .io import DiscreteDataset, fit
from .model import BayesianNetwork
from .potential import Evidence
from .propagation import (
    collect,
    distribute,
    initialize,
    predict_class,
    query_marginal,
)

__all__ = [
    "RunConfig",
    "BenchRecord",
    "tree_summary",
    "run_query",
    "run_crossval",
    "run_bench_propagation",
    "run_bench_network",
]


@dataclass
class RunConfig:
    """Knobs shared by the harnesses; the seed fully determines fold
    assignment and evidence sampling."""

    policy: SmoothingPolicy = field(default_factory=SmoothingPolicy)
    up_enabled: bool = True
    seed: int = 0
    q_min: int | None = None
    q_max: int | None = None
    q_step: int | None = None
    folds: int = 10
    repetitions: int = 200
    assign: str = "smallest"

    def policy_dict(self) -> dict:
        return {
            "kind": self.policy.kind,
            "alpha": self.policy.alpha,
            "epsilon": self.policy.epsilon,
        }


@dataclass
class BenchRecord:
    """One timed propagation: a (q, repetition, mode) cell."""

    q: int
    repetition: int
    mode: str  # "up" | "no-up"
    elapsed_ns: int
    counters: dict[str, int]
    eta: float | None
    eta_smoothed: bool
    degenerate: bool

    def as_dict(self) -> dict:
        return {
            "q": self.q,
            "repetition": self.repetition,
            "mode": self.mode,
            "elapsed_ns": self.elapsed_ns,
            "eta": self.eta,
            "eta_smoothed": self.eta_smoothed,
            "degenerate": self.degenerate,
            **self.counters,
        }


def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=tuple(key)))


def tree_summary(jt: JunctionTree) -> dict:
    unity = jt.unity_clique_indices() if jt.assignments is not None else ()
    return {
        "cliques": len(jt.cliques),
        "unity_cliques": len(unity),
        "max_clique_vars": max(len(c) for c in jt.cliques),
        "max_unity_clique_vars": max((len(jt.cliques[i]) for i in unity), default=0),
        "root": jt.root,
    }


def _evidence_from_map(bn: BayesianNetwork, mapping: Mapping[str, str]) -> Evidence:
    return Evidence([(bn.variable(name), level) for name, level in mapping.items()])


def run_query(
    bn: BayesianNetwork,
    evidence: Mapping[str, str],
    config: RunConfig,
) -> dict:
    """Full propagation and all single-variable posteriors."""
    jt = compile_model(bn, assign=config.assign)
    ev = _evidence_from_map(bn, evidence)
    state = initialize(jt, ev, config.policy, up_enabled=config.up_enabled)
    collect(state)
    distribute(state)
    marginals: dict[str, dict[str, float]] = {}
    for name in bn.dag.nodes:
        if name in ev:
            continue
        post = query_marginal(state, [name]).to_dense()
        var = bn.variable(name)
        marginals[name] = {
            level: float(v) for level, v in zip(var.levels, post.values_flat())
        }
    return {
        "command": "query",
        "policy": config.policy_dict(),
        "up_enabled": config.up_enabled,
        "assign": config.assign,
        "evidence": dict(evidence),
        "eta": state.eta,
        "eta_smoothed": state.eta_smoothed,
        "smoothed_cpts": sorted(name for name, _ in state.smoothed),
        "marginals": marginals,
        "counters": {
            phase: c.as_dict() for phase, c in state.phase_counters.items()
        },
        "counters_total": state.counters.as_dict(),
        "timings_ns": dict(state.timings_ns),
        "tree": tree_summary(jt),
    }


def _resolve_q_values(config: RunConfig, n_vars: int, default_step: int) -> list[int]:
    q_min = 2 if config.q_min is None else config.q_min
    q_max = n_vars - 1 if config.q_max is None else config.q_max
    q_step = default_step if config.q_step is None else config.q_step
    if q_step < 1:
        raise ConfigurationError("q-step must be at least 1")
    if not 1 <= q_min <= q_max <= n_vars - 1:
        raise ConfigurationError(
            f"q range [{q_min}, {q_max}] is out of range for {n_vars} variables"
        )
    return list(range(q_min, q_max + 1, q_step))


def _class_prior_fallback(train: DiscreteDataset, class_var: str) -> str:
    codes = train.codes_for(class_var)
    var = train.variable(class_var)
    freq = np.bincount(codes, minlength=var.cardinality)
    return var.levels[int(np.argmax(freq))]


def run_crossval(
    dag: Dag,
    data: DiscreteDataset,
    class_var: str,
    config: RunConfig,
) -> dict:
    """The q-sweep prediction harness: k-fold cross-validation where each
    test row contributes q randomly chosen entries as evidence and the
    class posterior is collected at a root clique containing the class.

    Evidence values come from the observed row itself, so inconsistency
    arises exactly when the test row hits configurations absent from the
    training folds.  A prediction whose evidence is degenerate even
    after smoothing falls back to the training fold's class prior.
    """
    if class_var not in dag.nodes:
        raise QueryError(f"class variable {class_var!r} is not a DAG node")
    non_class = [n for n in dag.nodes if n != class_var]
    q_values = _resolve_q_values(config, len(dag.nodes), default_step=1)
    n = data.n_rows
    if n < config.folds:
        raise ConfigurationError(f"{config.folds} folds need at least that many rows")
    perm = _rng(config.seed, 0).permutation(n)
    fold_of = np.empty(n, dtype=int)
    for pos, row in enumerate(perm):
        fold_of[row] = pos % config.folds
    mistakes = {q: 0 for q in q_values}
    degenerate = {q: 0 for q in q_values}
    for fold in range(config.folds):
        test_rows = [r for r in range(n) if fold_of[r] == fold]
        train_rows = [r for r in range(n) if fold_of[r] != fold]
        train = data.subset(train_rows)
        bn = fit(dag, train, config.policy)
        jt = compile_model(bn, assign=config.assign, root_target=class_var)
        fallback = _class_prior_fallback(train, class_var)
        for q in q_values:
            for pos, row in enumerate(test_rows):
                rng = _rng(config.seed, 1, q, fold, pos)
                picks = rng.choice(len(non_class), size=q, replace=False)
                names = [non_class[i] for i in sorted(picks)]
                ev = Evidence([(bn.variable(nm), data.row_level(row, nm)) for nm in names])
                try:
                    pred = predict_class(
                        jt, ev, class_var, config.policy, up_enabled=config.up_enabled
                    )
                except DegenerateModelError:
                    degenerate[q] += 1
                    pred = fallback
                if pred != data.row_level(row, class_var):
                    mistakes[q] += 1
    return {
        "command": "crossval",
        "policy": config.policy_dict(),
        "up_enabled": config.up_enabled,
        "assign": config.assign,
        "seed": config.seed,
        "folds": config.folds,
        "class_var": class_var,
        "n_rows": n,
        "n_vars": len(dag.nodes),
        "q_values": q_values,
        "errors": {str(q): mistakes[q] / n for q in q_values},
        "degenerate_predictions": {str(q): degenerate[q] for q in q_values},
    }


def _sample_evidence_sets(
    bn: BayesianNetwork, q: int, config: RunConfig
) -> list[Evidence]:
    names = list(bn.dag.nodes)
    out = []
    for rep in range(config.repetitions):
        rng = _rng(config.seed, 2, q, rep)
        picks = rng.choice(len(names), size=q, replace=False)
        pairs = []
        for i in sorted(picks):
            var = bn.variable(names[i])
            pairs.append((var, var.levels[int(rng.integers(var.cardinality))]))
        out.append(Evidence(pairs))
    return out


def _evidence_digest(evidences: Sequence[Evidence]) -> str:
    h = hashlib.sha256()
    for ev in evidences:
        h.update(";".join(f"{v.name}={l}" for v, l in sorted(ev.items(), key=lambda p: p[0].name)).encode())
        h.update(b"|")
    return h.hexdigest()


def _timed_propagation(
    jt: JunctionTree, ev: Evidence, policy: SmoothingPolicy, up_enabled: bool
) -> tuple[int, dict[str, int], float | None, bool, bool]:
    t0 = time.perf_counter_ns()
    state = initialize(jt, ev, policy, up_enabled=up_enabled)
    try:
        collect(state)
        distribute(state)
        degenerate = False
    except DegenerateModelError:
        degenerate = True
    elapsed = time.perf_counter_ns() - t0
    return (
        elapsed,
        state.counters.as_dict(),
        state.eta,
        state.eta_smoothed,
        degenerate,
    )


def run_bench_propagation(bn: BayesianNetwork, config: RunConfig) -> dict:
    """Identical seeded evidence sets propagated with the shortcut engine
    and the materialized engine; reports per-q time and performed-work
    ratios (a value below one favors the shortcuts)."""
    jt = compile_model(bn, assign=config.assign)
    q_values = _resolve_q_values(config, len(bn.dag.nodes), default_step=2)
    records: list[BenchRecord] = []
    per_q: dict[str, dict] = {}
    for q in q_values:
        evidences = _sample_evidence_sets(bn, q, config)
        stats: dict[str, dict] = {}
        for mode, up_enabled in (("up", True), ("no-up", False)):
            total_ns = 0
            performed = 0
            degenerate_count = 0
            for rep, ev in enumerate(evidences):
                elapsed, counters, eta, eta_smoothed, degenerate = _timed_propagation(
                    jt, ev, config.policy, up_enabled
                )
                records.append(
                    BenchRecord(q, rep, mode, elapsed, counters, eta, eta_smoothed, degenerate)
                )
                if degenerate:
                    degenerate_count += 1
                    continue
                total_ns += elapsed
                performed += counters["partial_multiplications"] + counters["partial_divisions"]
            stats[mode] = {
                "time_ns": total_ns,
                "performed": performed,
                "degenerate": degenerate_count,
                "evidence_digest": _evidence_digest(evidences),
            }
        up, noup = stats["up"], stats["no-up"]
        per_q[str(q)] = {
            "up_time_ns": up["time_ns"],
            "noup_time_ns": noup["time_ns"],
            "time_ratio": (up["time_ns"] / noup["time_ns"]) if noup["time_ns"] else 1.0,
            "up_performed": up["performed"],
            "noup_performed": noup["performed"],
            "counter_ratio": (up["performed"] / noup["performed"]) if noup["performed"] else 1.0,
            "degenerate": up["degenerate"],
            "evidence_digest_up": up["evidence_digest"],
            "evidence_digest_noup": noup["evidence_digest"],
        }
    return {
        "command": "bench-propagation",
        "policy": config.policy_dict(),
        "assign": config.assign,
        "seed": config.seed,
        "repetitions": config.repetitions,
        "q_values": q_values,
        "tree": tree_summary(jt),
        "per_q": per_q,
        "records": [r.as_dict() for r in records],
    }


def run_bench_network(bn: BayesianNetwork, config: RunConfig) -> dict:
    """No-evidence propagation with and without the shortcuts; the gain
    here comes purely from unity cliques left by triangulation and CPT
    assignment."""
    jt = compile_model(bn, assign=config.assign)
    ev = Evidence.empty()
    out: dict[str, dict] = {}
    for mode, up_enabled in (("up", True), ("no-up", False)):
        total_ns = 0
        counters: dict[str, int] = {}
        eta = None
        for _rep in range(config.repetitions):
            elapsed, counters, eta, _sm, degenerate = _timed_propagation(
                jt, ev, config.policy, up_enabled
            )
            if degenerate:
                raise DegenerateModelError("model assigns zero mass with no evidence")
            total_ns += elapsed
        performed = counters["partial_multiplications"] + counters["partial_divisions"]
        out[mode] = {"time_ns": total_ns, "performed": performed, "counters": counters, "eta": eta}
    up, noup = out["up"], out["no-up"]
    return {
        "command": "bench-network",
        "policy": config.policy_dict(),
        "assign": config.assign,
        "repetitions": config.repetitions,
        "tree": tree_summary(jt),
        "eta": up["eta"],
        "up_time_ns": up["time_ns"],
        "noup_time_ns": noup["time_ns"],
        "time_ratio": (up["time_ns"] / noup["time_ns"]) if noup["time_ns"] else 1.0,
        "up_performed": up["performed"],
        "noup_performed": noup["performed"],
        "counter_ratio": (up["performed"] / noup["performed"]) if noup["performed"] else 1.0,
        "up_counters": up["counters"],
        "noup_counters": noup["counters"],
    }
