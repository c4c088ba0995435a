"""JSON schemas for the four report formats the CLI emits.

These are the documented output contracts; the test suite validates
every emitted report against them.
"""

from __future__ import annotations

_COUNTER = {
    "type": "object",
    "properties": {
        "partial_multiplications": {"type": "integer", "minimum": 0},
        "partial_divisions": {"type": "integer", "minimum": 0},
        "projections": {"type": "integer", "minimum": 0},
        "avoided_multiplications": {"type": "integer", "minimum": 0},
        "avoided_divisions": {"type": "integer", "minimum": 0},
    },
    "required": [
        "partial_multiplications",
        "partial_divisions",
        "projections",
        "avoided_multiplications",
        "avoided_divisions",
    ],
}

_POLICY = {
    "type": "object",
    "properties": {
        "kind": {"enum": ["mle-unity", "laplace"]},
        "alpha": {"type": "number", "exclusiveMinimum": 0},
        "epsilon": {"type": "number", "exclusiveMinimum": 0},
    },
    "required": ["kind", "alpha", "epsilon"],
}

_TREE = {
    "type": "object",
    "properties": {
        "cliques": {"type": "integer", "minimum": 1},
        "unity_cliques": {"type": "integer", "minimum": 0},
        "max_clique_vars": {"type": "integer", "minimum": 1},
        "max_unity_clique_vars": {"type": "integer", "minimum": 0},
        "root": {"type": "integer", "minimum": 0},
    },
    "required": ["cliques", "unity_cliques", "max_clique_vars", "max_unity_clique_vars"],
}

QUERY_SCHEMA = {
    "type": "object",
    "properties": {
        "command": {"const": "query"},
        "policy": _POLICY,
        "up_enabled": {"type": "boolean"},
        "evidence": {"type": "object", "additionalProperties": {"type": "string"}},
        "eta": {"type": ["number", "null"]},
        "eta_smoothed": {"type": "boolean"},
        "smoothed_cpts": {"type": "array", "items": {"type": "string"}},
        "marginals": {
            "type": "object",
            "additionalProperties": {
                "type": "object",
                "additionalProperties": {"type": "number"},
            },
        },
        "counters": {"type": "object", "additionalProperties": _COUNTER},
        "counters_total": _COUNTER,
        "timings_ns": {"type": "object", "additionalProperties": {"type": "integer"}},
        "tree": _TREE,
    },
    "required": [
        "command",
        "policy",
        "up_enabled",
        "evidence",
        "eta",
        "eta_smoothed",
        "marginals",
        "counters_total",
        "tree",
    ],
}

CROSSVAL_SCHEMA = {
    "type": "object",
    "properties": {
        "command": {"const": "crossval"},
        "policy": _POLICY,
        "up_enabled": {"type": "boolean"},
        "seed": {"type": "integer"},
        "folds": {"type": "integer", "minimum": 2},
        "class_var": {"type": "string"},
        "n_rows": {"type": "integer", "minimum": 1},
        "n_vars": {"type": "integer", "minimum": 2},
        "q_values": {"type": "array", "items": {"type": "integer", "minimum": 1}},
        "errors": {
            "type": "object",
            "additionalProperties": {"type": "number", "minimum": 0, "maximum": 1},
        },
        "degenerate_predictions": {
            "type": "object",
            "additionalProperties": {"type": "integer", "minimum": 0},
        },
    },
    "required": ["command", "policy", "seed", "folds", "class_var", "q_values", "errors"],
}

_BENCH_RECORD = {
    "type": "object",
    "properties": {
        "q": {"type": "integer", "minimum": 0},
        "repetition": {"type": "integer", "minimum": 0},
        "mode": {"enum": ["up", "no-up"]},
        "elapsed_ns": {"type": "integer", "minimum": 0},
        "eta": {"type": ["number", "null"]},
        "eta_smoothed": {"type": "boolean"},
        "degenerate": {"type": "boolean"},
        "partial_multiplications": {"type": "integer", "minimum": 0},
        "partial_divisions": {"type": "integer", "minimum": 0},
        "projections": {"type": "integer", "minimum": 0},
        "avoided_multiplications": {"type": "integer", "minimum": 0},
        "avoided_divisions": {"type": "integer", "minimum": 0},
    },
    "required": ["q", "repetition", "mode", "elapsed_ns", "degenerate"],
}

BENCH_PROPAGATION_SCHEMA = {
    "type": "object",
    "properties": {
        "command": {"const": "bench-propagation"},
        "policy": _POLICY,
        "seed": {"type": "integer"},
        "repetitions": {"type": "integer", "minimum": 1},
        "q_values": {"type": "array", "items": {"type": "integer", "minimum": 1}},
        "tree": _TREE,
        "per_q": {
            "type": "object",
            "additionalProperties": {
                "type": "object",
                "properties": {
                    "time_ratio": {"type": "number", "minimum": 0},
                    "counter_ratio": {"type": "number", "minimum": 0},
                    "up_performed": {"type": "integer", "minimum": 0},
                    "noup_performed": {"type": "integer", "minimum": 0},
                    "degenerate": {"type": "integer", "minimum": 0},
                    "evidence_digest_up": {"type": "string"},
                    "evidence_digest_noup": {"type": "string"},
                },
                "required": [
                    "time_ratio",
                    "counter_ratio",
                    "up_performed",
                    "noup_performed",
                    "evidence_digest_up",
                    "evidence_digest_noup",
                ],
            },
        },
        "records": {"type": "array", "items": _BENCH_RECORD},
    },
    "required": ["command", "policy", "seed", "repetitions", "q_values", "per_q", "records"],
}

BENCH_NETWORK_SCHEMA = {
    "type": "object",
    "properties": {
        "command": {"const": "bench-network"},
        "policy": _POLICY,
        "repetitions": {"type": "integer", "minimum": 1},
        "tree": _TREE,
        "eta": {"type": ["number", "null"]},
        "time_ratio": {"type": "number", "minimum": 0},
        "counter_ratio": {"type": "number", "minimum": 0},
        "up_performed": {"type": "integer", "minimum": 0},
        "noup_performed": {"type": "integer", "minimum": 0},
        "up_counters": _COUNTER,
        "noup_counters": _COUNTER,
    },
    "required": [
        "command",
        "policy",
        "repetitions",
        "tree",
        "time_ratio",
        "counter_ratio",
        "up_performed",
        "noup_performed",
    ],
}

SCHEMAS = {
    "query": QUERY_SCHEMA,
    "crossval": CROSSVAL_SCHEMA,
    "bench-propagation": BENCH_PROPAGATION_SCHEMA,
    "bench-network": BENCH_NETWORK_SCHEMA,
}
