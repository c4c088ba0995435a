"""Reading and writing models and data.

Network files use the classic Bayesian Interchange Format text dialect:
``network``, ``variable`` and ``probability`` blocks.  Parentless
distributions use a ``table`` row; conditional ones use one
``(parent levels) v1, ..., vk;`` row per parent cell, child levels in
declared order.  ``//`` and ``/* */`` comments and ``property`` entries
are accepted and ignored.  Published files carry rounded decimals, so
rows may miss one by up to 1e-6 and are renormalized exactly.

Data files are delimiter-separated text with a header row; rows with a
missing-value marker are dropped and counted.  DAG structure files list
one node per line as ``child: parent1 parent2``.
"""

from __future__ import annotations

import csv
import io as _io
import itertools
import warnings
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DomainError, IngestionError, ParseError
from .estimation import Cpt, SmoothingPolicy, count, laplace, mle
from .graph import Dag
from .model import BayesianNetwork
from .potential import Evidence, Potential, Variable

__all__ = [
    "DiscreteDataset",
    "parse_network",
    "serialize_network",
    "load_dataset",
    "parse_dag",
    "fit",
]

_PUNCT = set("{}()[]|,;")


class _Token:
    __slots__ = ("text", "line", "col")

    def __init__(self, text: str, line: int, col: int):
        self.text = text
        self.line = line
        self.col = col


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    line, col = 1, 1
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if ch.isspace():
            i += 1
            col += 1
            continue
        if text.startswith("//", i):
            while i < n and text[i] != "\n":
                i += 1
            continue
        if text.startswith("/*", i):
            end = text.find("*/", i + 2)
            if end < 0:
                raise ParseError("unterminated comment", line, col)
            skipped = text[i : end + 2]
            line += skipped.count("\n")
            if "\n" in skipped:
                col = len(skipped) - skipped.rfind("\n") + 1
            else:
                col += len(skipped)
            i = end + 2
            continue
        if ch in _PUNCT:
            tokens.append(_Token(ch, line, col))
            i += 1
            col += 1
            continue
        j = i
        while j < n and not text[j].isspace() and text[j] not in _PUNCT and not text.startswith("//", j) and not text.startswith("/*", j):
            j += 1
        tokens.append(_Token(text[i:j], line, col))
        col += j - i
        i = j
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self) -> _Token | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def advance(self) -> _Token:
        tok = self.peek()
        if tok is None:
            last = self.tokens[-1] if self.tokens else None
            raise ParseError("unexpected end of input", last.line if last else 1)
        self.pos += 1
        return tok

    def expect(self, text: str) -> _Token:
        tok = self.advance()
        if tok.text != text:
            raise ParseError(f"expected {text!r}, found {tok.text!r}", tok.line, tok.col)
        return tok

    def skip_property(self) -> None:
        # consume everything up to and including the next ';'
        while True:
            tok = self.advance()
            if tok.text == ";":
                return

    def skip_block(self) -> None:
        self.expect("{")
        depth = 1
        while depth:
            tok = self.advance()
            if tok.text == "{":
                depth += 1
            elif tok.text == "}":
                depth -= 1


def _parse_variable(p: _Parser, variables: dict[str, Variable]) -> None:
    name_tok = p.advance()
    name = name_tok.text
    if name in variables:
        raise ParseError(f"variable {name!r} declared twice", name_tok.line, name_tok.col)
    p.expect("{")
    levels: tuple[str, ...] | None = None
    declared_card: int | None = None
    while True:
        tok = p.advance()
        if tok.text == "}":
            break
        if tok.text == "property":
            p.skip_property()
            continue
        if tok.text != "type":
            raise ParseError(f"unexpected {tok.text!r} in variable block", tok.line, tok.col)
        kind = p.advance()
        if kind.text != "discrete":
            raise ParseError(f"only discrete variables are supported, found {kind.text!r}", kind.line, kind.col)
        p.expect("[")
        card_tok = p.advance()
        try:
            declared_card = int(card_tok.text)
        except ValueError:
            raise ParseError(f"bad cardinality {card_tok.text!r}", card_tok.line, card_tok.col) from None
        p.expect("]")
        p.expect("{")
        found = []
        while True:
            tok = p.advance()
            if tok.text == "}":
                break
            if tok.text == ",":
                continue
            found.append(tok.text)
        levels = tuple(found)
        p.expect(";")
    if levels is None:
        raise ParseError(f"variable {name!r} has no type declaration", name_tok.line, name_tok.col)
    if declared_card != len(levels):
        raise ParseError(
            f"variable {name!r} declares {declared_card} levels but lists {len(levels)}",
            name_tok.line,
            name_tok.col,
        )
    variables[name] = Variable(name, levels)


def _parse_values(p: _Parser, upto: str = ";") -> tuple[list[float], _Token]:
    values: list[float] = []
    first: _Token | None = None
    while True:
        tok = p.advance()
        if tok.text == upto:
            break
        if tok.text == ",":
            continue
        if first is None:
            first = tok
        try:
            values.append(float(tok.text))
        except ValueError:
            raise ParseError(f"expected a number, found {tok.text!r}", tok.line, tok.col) from None
    if first is None:
        raise ParseError("empty value list", tok.line, tok.col)
    return values, first


def _normalized_column(values: Sequence[float], k: int, tok: _Token, child: str) -> list[float]:
    if len(values) != k:
        raise ParseError(
            f"probability row for {child!r} has {len(values)} entries, expected {k}",
            tok.line,
            tok.col,
        )
    if any(v < 0 for v in values):
        raise ParseError(f"negative probability for {child!r}", tok.line, tok.col)
    s = sum(values)
    if abs(s - 1.0) > 1e-6:
        raise ParseError(
            f"probability row for {child!r} sums to {s!r}, outside tolerance",
            tok.line,
            tok.col,
        )
    return [v / s for v in values]


def _parse_probability(p: _Parser, variables: dict[str, Variable], blocks: dict[str, tuple]) -> None:
    open_tok = p.expect("(")
    child_tok = p.advance()
    child = child_tok.text
    if child not in variables:
        raise ParseError(f"probability block for undeclared variable {child!r}", child_tok.line, child_tok.col)
    if child in blocks:
        raise ParseError(f"duplicate probability block for {child!r}", child_tok.line, child_tok.col)
    parents: list[str] = []
    tok = p.advance()
    if tok.text == "|":
        while True:
            tok = p.advance()
            if tok.text == ")":
                break
            if tok.text == ",":
                continue
            if tok.text not in variables:
                raise ParseError(f"undeclared parent {tok.text!r}", tok.line, tok.col)
            parents.append(tok.text)
    elif tok.text != ")":
        raise ParseError(f"expected '|' or ')', found {tok.text!r}", tok.line, tok.col)
    child_var = variables[child]
    parent_vars = tuple(variables[q] for q in parents)
    k = child_var.cardinality
    p.expect("{")
    if not parents:
        tok = p.advance()
        if tok.text == "property":
            p.skip_property()
            tok = p.advance()
        if tok.text != "table":
            raise ParseError(f"parentless {child!r} needs a 'table' row", tok.line, tok.col)
        values, first = _parse_values(p)
        column = _normalized_column(values, k, first, child)
        p.expect("}")
        table = Potential.from_dense((child_var,), column)
        blocks[child] = (parent_vars, Cpt(child_var, parent_vars, table))
        return
    cards = tuple(q.cardinality for q in parent_vars)
    arr = np.zeros((k,) + cards)
    seen: set[tuple[int, ...]] = set()
    while True:
        tok = p.advance()
        if tok.text == "}":
            break
        if tok.text == "property":
            p.skip_property()
            continue
        if tok.text == "table":
            raise ParseError(
                f"'table' rows are only supported for parentless variables; "
                f"{child!r} needs one '(levels) values;' row per parent cell",
                tok.line,
                tok.col,
            )
        if tok.text != "(":
            raise ParseError(f"expected a parent cell, found {tok.text!r}", tok.line, tok.col)
        labels: list[str] = []
        while True:
            t = p.advance()
            if t.text == ")":
                break
            if t.text == ",":
                continue
            labels.append(t.text)
        if len(labels) != len(parent_vars):
            raise ParseError(
                f"parent cell lists {len(labels)} levels, expected {len(parent_vars)}",
                tok.line,
                tok.col,
            )
        try:
            pj = tuple(q.level_index(l) for q, l in zip(parent_vars, labels))
        except DomainError as e:
            raise ParseError(str(e), tok.line, tok.col) from None
        if pj in seen:
            raise ParseError(f"duplicate parent cell {tuple(labels)}", tok.line, tok.col)
        seen.add(pj)
        values, first = _parse_values(p)
        column = _normalized_column(values, k, first, child)
        for ci, v in enumerate(column):
            arr[(ci,) + pj] = v
    expected = int(np.prod(cards))
    if len(seen) != expected:
        raise ParseError(
            f"probability block for {child!r} covers {len(seen)} parent cells, expected {expected}",
            open_tok.line,
            open_tok.col,
        )
    table = Potential.from_dense((child_var,) + parent_vars, arr)
    blocks[child] = (parent_vars, Cpt(child_var, parent_vars, table))


def parse_network(text: str) -> BayesianNetwork:
    """Parse a network file into a validated BayesianNetwork."""
    p = _Parser(text)
    variables: dict[str, Variable] = {}
    blocks: dict[str, tuple] = {}
    saw_network = False
    while p.peek() is not None:
        tok = p.advance()
        if tok.text == "network":
            if saw_network:
                raise ParseError("second network block", tok.line, tok.col)
            saw_network = True
            nxt = p.peek()
            if nxt is not None and nxt.text != "{":
                p.advance()  # network name
            p.skip_block()
        elif tok.text == "variable":
            _parse_variable(p, variables)
        elif tok.text == "probability":
            _parse_probability(p, variables, blocks)
        else:
            raise ParseError(f"unexpected {tok.text!r} at top level", tok.line, tok.col)
    missing = [n for n in variables if n not in blocks]
    if missing:
        raise ParseError(f"no probability block for {missing}")
    parents = {name: tuple(q.name for q in blocks[name][0]) for name in variables}
    try:
        dag = Dag(tuple(variables), parents, variables)
    except DomainError as e:
        raise ParseError(f"invalid network structure: {e}") from None
    cpts = {name: blocks[name][1] for name in variables}
    return BayesianNetwork(dag, cpts)


def serialize_network(bn: BayesianNetwork, name: str = "model") -> str:
    """Emit the dialect parse_network reads; parse(serialize(bn)) is
    value-identical to bn."""
    out = [f"network {name} {{", "}"]
    for node in bn.dag.nodes:
        var = bn.dag.variables[node]
        out.append(f"variable {node} {{")
        out.append(f"  type discrete [ {var.cardinality} ] {{ {', '.join(var.levels)} }};")
        out.append("}")
    for node in bn.dag.nodes:
        cpt = bn.cpts[node]
        table = cpt.table.to_dense()
        child = cpt.child
        if not cpt.parents:
            values = ", ".join(repr(float(v)) for v in table.values_flat())
            out.append(f"probability ( {node} ) {{")
            out.append(f"  table {values};")
            out.append("}")
            continue
        header = ", ".join(q.name for q in cpt.parents)
        out.append(f"probability ( {node} | {header} ) {{")
        for pj in itertools.product(*[range(q.cardinality) for q in cpt.parents]):
            labels = ", ".join(q.levels[i] for q, i in zip(cpt.parents, pj))
            column = [table.value_at((ci,) + pj) for ci in range(child.cardinality)]
            values = ", ".join(repr(float(v)) for v in column)
            out.append(f"  ({labels}) {values};")
        out.append("}")
    return "\n".join(out) + "\n"


class DiscreteDataset:
    """Complete discrete cases in column-code form."""

    def __init__(
        self,
        variables: Sequence[Variable],
        codes: np.ndarray,
        *,
        dropped_rows: int = 0,
        inferred: Sequence[str] = (),
    ):
        self.variables = tuple(variables)
        self._index = {v.name: i for i, v in enumerate(self.variables)}
        codes = np.asarray(codes, dtype=np.int64)
        if codes.ndim != 2 or codes.shape[1] != len(self.variables):
            raise IngestionError("codes must be rows x columns")
        self.codes = codes
        self.dropped_rows = int(dropped_rows)
        self.inferred = tuple(inferred)

    @property
    def n_rows(self) -> int:
        return int(self.codes.shape[0])

    @property
    def column_names(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.variables)

    def variable(self, name: str) -> Variable:
        try:
            return self.variables[self._index[name]]
        except KeyError:
            raise IngestionError(f"no column {name!r} in the dataset") from None

    def codes_for(self, name: str) -> np.ndarray:
        return self.codes[:, self._index[self.variable(name).name]]

    def row_level(self, row: int, name: str) -> str:
        var = self.variable(name)
        return var.levels[int(self.codes[row, self._index[name]])]

    def subset(self, rows: Sequence[int]) -> "DiscreteDataset":
        return DiscreteDataset(self.variables, self.codes[np.asarray(rows, dtype=int)])

    def row_evidence(self, row: int, names: Iterable[str]) -> Evidence:
        return Evidence([(self.variable(n), self.row_level(row, n)) for n in names])

    def __repr__(self):
        return f"DiscreteDataset({self.n_rows} rows x {len(self.variables)} columns)"


def load_dataset(
    text: str,
    schema: Mapping[str, Variable] | Mapping[str, Sequence[str]] | None = None,
    *,
    delimiter: str = ",",
    missing_markers: Sequence[str] = ("", "NA"),
) -> DiscreteDataset:
    """Read delimiter-separated values with a header row.

    `schema` declares levelsets per column; columns it does not cover get
    their levelsets inferred from the observed values (first-appearance
    order) with a warning, since undeclared levelsets weaken evidence
    validation later on.  Rows containing a missing marker are dropped
    and counted."""
    reader = csv.reader(_io.StringIO(text), delimiter=delimiter)
    rows = [row for row in reader if row and not all(not c.strip() for c in row)]
    if not rows:
        raise IngestionError("empty data file")
    header = [c.strip() for c in rows[0]]
    if len(set(header)) != len(header):
        raise IngestionError(f"duplicate column names in header: {header}")
    declared: dict[str, tuple[str, ...]] = {}
    if schema is not None:
        for name, spec in schema.items():
            if name not in header:
                raise IngestionError(f"schema declares {name!r}, which is not a column")
            declared[name] = tuple(spec.levels) if isinstance(spec, Variable) else tuple(spec)
    missing = set(missing_markers)
    kept: list[list[str]] = []
    dropped = 0
    for lineno, row in enumerate(rows[1:], start=2):
        cells = [c.strip() for c in row]
        if len(cells) != len(header):
            raise IngestionError(f"row {lineno} has {len(cells)} fields, expected {len(header)}")
        if any(c in missing for c in cells):
            dropped += 1
            continue
        kept.append(cells)
    levels: dict[str, list[str]] = {}
    inferred: list[str] = []
    for j, name in enumerate(header):
        if name in declared:
            levels[name] = list(declared[name])
        else:
            seen: list[str] = []
            for cells in kept:
                if cells[j] not in seen:
                    seen.append(cells[j])
            if not seen:
                raise IngestionError(f"column {name!r} has no observed values to infer levels from")
            levels[name] = seen
            inferred.append(name)
    if inferred:
        warnings.warn(
            f"levelsets inferred from data for columns {inferred}; evidence on "
            "unobserved levels will be rejected",
            stacklevel=2,
        )
    variables = tuple(Variable(name, tuple(levels[name])) for name in header)
    index = {name: {l: i for i, l in enumerate(levels[name])} for name in header}
    codes = np.zeros((len(kept), len(header)), dtype=np.int64)
    for r, cells in enumerate(kept):
        for j, name in enumerate(header):
            try:
                codes[r, j] = index[name][cells[j]]
            except KeyError:
                raise IngestionError(
                    f"value {cells[j]!r} in column {name!r} is outside the declared levelset"
                ) from None
    return DiscreteDataset(variables, codes, dropped_rows=dropped, inferred=inferred)


def parse_dag(text: str) -> Dag:
    """Structure file: one ``child: parent parent`` line per node,
    ``#`` comments allowed.  Every referenced parent needs its own line."""
    parents: dict[str, tuple[str, ...]] = {}
    order: list[str] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if ":" not in line:
            raise ParseError("expected 'child: parent parent ...'", lineno)
        child, rest = line.split(":", 1)
        child = child.strip()
        if not child:
            raise ParseError("missing node name", lineno)
        if child in parents:
            raise ParseError(f"node {child!r} declared twice", lineno)
        ps = tuple(p for p in rest.replace(",", " ").split() if p)
        parents[child] = ps
        order.append(child)
    unknown = sorted({p for ps in parents.values() for p in ps} - set(order))
    if unknown:
        raise ParseError(f"parents {unknown} have no declaration line")
    try:
        return Dag(tuple(order), parents)
    except DomainError as e:
        raise ParseError(f"invalid structure: {e}") from None


def fit(dag: Dag, data: DiscreteDataset, policy: SmoothingPolicy) -> BayesianNetwork:
    """Estimate one CPT per DAG node from the data: plain maximum
    likelihood (sparse) under mle-unity, Laplace (dense) under laplace."""
    missing = [n for n in dag.nodes if n not in data.column_names]
    if missing:
        raise IngestionError(f"DAG nodes {missing} are not dataset columns")
    variables = {n: data.variable(n) for n in dag.nodes}
    dag = dag.with_variables(variables)
    cpts: dict[str, Cpt] = {}
    for name in dag.nodes:
        counts = count(data, name, dag.parents[name])
        cpts[name] = laplace(counts, policy.alpha) if policy.kind == "laplace" else mle(counts)
    return BayesianNetwork(dag, cpts)
