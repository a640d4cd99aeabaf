"""Predicates, weighted rule templates, grounding and Lukasiewicz translation.

A rule ``B1 & ... & Bn -> H`` becomes the hinge ``max(0, sum val(Bi) - (n-1) - val(H))``,
where a negated literal contributes ``1 - val``.  A headless rule carries exactly
one literal ``L`` and stands for the fact ``L``; its distance to satisfaction is
``1 - val(L)``.

Grounding is a sequence of relational joins (pandas merges) over the atoms stored
in an :class:`AtomTable`, producing a columnar :class:`PotentialSet`.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, NamedTuple, Sequence

import numpy as np
import pandas as pd

__all__ = [
    "Predicate",
    "Literal",
    "RuleTemplate",
    "GroundAtom",
    "GroundPotential",
    "PotentialSet",
    "AtomTable",
    "Var",
    "RuleSyntaxError",
    "GroundingError",
    "parse_rule",
    "parse_rules",
    "render_rule",
    "translate",
    "ground",
    "ground_all",
    "hinge_expression",
]

DOMAINS = ("User", "Item", "Group")


class RuleSyntaxError(ValueError):
    def __init__(self, message: str, line: int = 1, column: int = 1):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class GroundingError(ValueError):
    pass


@dataclass(frozen=True)
class Predicate:
    name: str
    arity: int
    domains: tuple[str, ...] = ()
    closed: bool = True

    def __post_init__(self):
        if self.arity not in (1, 2, 3):
            raise ValueError(f"predicate {self.name}: unsupported arity {self.arity}")
        if self.domains and len(self.domains) != self.arity:
            raise ValueError(f"predicate {self.name}: {len(self.domains)} domains for arity {self.arity}")
        for d in self.domains:
            if d not in DOMAINS:
                raise ValueError(f"predicate {self.name}: unknown domain {d!r}")


@dataclass(frozen=True)
class Literal:
    predicate: str
    args: tuple[str, ...]
    negated: bool = False

    def __str__(self):
        return ("!" if self.negated else "") + f"{self.predicate}({','.join(self.args)})"


@dataclass(frozen=True)
class RuleTemplate:
    body: tuple[Literal, ...]
    head: Literal | None
    weight: float
    exponent: int = 1
    name: str = ""

    def __post_init__(self):
        if not self.weight >= 0:
            raise ValueError(f"rule weight must be nonnegative, got {self.weight}")
        if self.exponent not in (1, 2):
            raise ValueError(f"rule exponent must be 1 or 2, got {self.exponent}")
        if self.head is None and len(self.body) != 1:
            raise ValueError("a headless rule takes exactly one literal")
        if not self.body:
            raise ValueError("a rule needs at least one body literal")

    @property
    def literals(self) -> tuple[Literal, ...]:
        return self.body + ((self.head,) if self.head is not None else ())

    @property
    def is_prior(self) -> bool:
        return self.head is None

    def variables(self) -> list[str]:
        seen: dict[str, None] = {}
        for lit in self.literals:
            for a in lit.args:
                seen.setdefault(a, None)
        return list(seen)

    def __str__(self):
        return render_rule(self)


@dataclass(frozen=True)
class GroundAtom:
    predicate: str
    args: tuple
    value: float | None = None  # None marks a target

    @property
    def observed(self) -> bool:
        return self.value is not None


# --------------------------------------------------------------------------
# rule syntax

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+(?:\.\d*)?(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<arrow>->)|(?P<sq>\^2)|(?P<op>[:&!(),-]))"
)


def _tokenize(text: str, line: int):
    pos = 0
    tokens = []
    stripped = text.rstrip()
    while pos < len(stripped):
        m = _TOKEN.match(stripped, pos)
        if m is None or m.end() == pos:
            col = pos + 1
            while col <= len(stripped) and stripped[col - 1].isspace():
                col += 1
            raise RuleSyntaxError(f"unexpected character {stripped[col - 1]!r}", line, col)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start + 1))
        pos = m.end()
    tokens.append(("end", "", len(stripped) + 1))
    return tokens


class _Parser:
    def __init__(self, text: str, line: int):
        self.tokens = _tokenize(text, line)
        self.i = 0
        self.line = line

    def peek(self):
        return self.tokens[self.i]

    def take(self, kind, value=None, what=None):
        tok = self.tokens[self.i]
        if tok[0] != kind or (value is not None and tok[1] != value):
            expected = what or repr(value or kind)
            found = "end of input" if tok[0] == "end" else repr(tok[1])
            raise RuleSyntaxError(f"expected {expected}, found {found}", self.line, tok[2])
        self.i += 1
        return tok

    def literal(self) -> Literal:
        negated = False
        if self.peek()[:2] == ("op", "!"):
            self.i += 1
            negated = True
        name = self.take("name", what="predicate name")[1]
        self.take("op", "(")
        args = [self.take("name", what="variable")[1]]
        while self.peek()[:2] == ("op", ","):
            self.i += 1
            args.append(self.take("name", what="variable")[1])
        self.take("op", ")", what="',' or ')'")
        return Literal(name, tuple(args), negated)

    def rule(self):
        tok = self.peek()
        if tok[:2] == ("op", "-"):
            raise RuleSyntaxError("weight must be nonnegative", self.line, tok[2])
        weight = float(self.take("num", what="weight")[1])
        self.take("op", ":")
        body = [self.literal()]
        while self.peek()[:2] == ("op", "&"):
            self.i += 1
            body.append(self.literal())
        head = None
        if self.peek()[0] == "arrow":
            self.i += 1
            head = self.literal()
        exponent = 1
        if self.peek()[0] == "sq":
            self.i += 1
            exponent = 2
        tok = self.peek()
        if tok[0] != "end":
            raise RuleSyntaxError(f"unexpected {tok[1]!r}", self.line, tok[2])
        if head is None and len(body) > 1:
            raise RuleSyntaxError("a rule without '->' takes a single literal", self.line, 1)
        return weight, tuple(body), head, exponent


def parse_rule(text: str, predicates: Mapping[str, Predicate] | None = None,
               name: str = "", line: int = 1) -> RuleTemplate:
    """Parse ``<weight>: L1 & L2 ... [-> H] [^2]``.

    When ``predicates`` is given, predicate names and arities are checked against it.
    """
    weight, body, head, exponent = _Parser(text, line).rule()
    template = RuleTemplate(body, head, weight, exponent, name)
    if predicates is not None:
        for lit in template.literals:
            pred = predicates.get(lit.predicate)
            if pred is None:
                raise RuleSyntaxError(f"unknown predicate {lit.predicate!r}", line, text.find(lit.predicate) + 1)
            if pred.arity != len(lit.args):
                raise RuleSyntaxError(
                    f"{lit.predicate} takes {pred.arity} arguments, got {len(lit.args)}",
                    line, text.find(lit.predicate) + 1)
    return template


def parse_rules(text: str, predicates: Mapping[str, Predicate] | None = None) -> list[RuleTemplate]:
    """Parse a rule file: one rule per line, ``#`` starts a comment.

    A comment of the form ``# name: <rule-name>`` directly above a rule names it.
    """
    rules = []
    pending_name = ""
    for lineno, raw in enumerate(text.splitlines(), start=1):
        content, _, comment = raw.partition("#")
        if not content.strip():
            comment = comment.strip()
            if comment.startswith("name:"):
                pending_name = comment[5:].strip()
            continue
        rules.append(parse_rule(content, predicates, name=pending_name, line=lineno))
        pending_name = ""
    return rules


def _fmt_weight(w: float) -> str:
    text = repr(float(w))
    return text


def render_rule(template: RuleTemplate) -> str:
    text = f"{_fmt_weight(template.weight)}: " + " & ".join(str(l) for l in template.body)
    if template.head is not None:
        text += f" -> {template.head}"
    if template.exponent == 2:
        text += " ^2"
    return text


def render_rules(templates: Iterable[RuleTemplate]) -> str:
    lines = []
    for t in templates:
        if t.name:
            lines.append(f"# name: {t.name}")
        lines.append(render_rule(t))
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# ground potentials


class Var(NamedTuple):
    """Reference to a target variable by its dense index."""
    index: int


@dataclass(frozen=True)
class GroundPotential:
    coefficients: tuple[tuple[int, float], ...]
    constant: float
    exponent: int = 1
    weight: float = 1.0
    template: int = -1

    def linear(self, y) -> float:
        return self.constant + sum(c * y[i] for i, c in self.coefficients)

    def evaluate(self, y) -> float:
        """Unweighted hinge ``max(0, l(y)) ** p``."""
        return max(0.0, self.linear(y)) ** self.exponent

    def always_satisfied(self) -> bool:
        return self.constant + sum(max(c, 0.0) for _, c in self.coefficients) <= 0.0


def translate(body: Sequence[tuple[float | Var, bool]], head: tuple[float | Var, bool] | None,
              exponent: int = 1, weight: float = 1.0, template: int = -1) -> GroundPotential:
    """Lukasiewicz distance to satisfaction of one ground rule as an affine hinge.

    ``body`` holds ``(operand, negated)`` pairs where an operand is either an observed
    truth value or a :class:`Var`.  With ``head=None`` the single body literal is
    a fact.
    """
    if head is None:
        if len(body) != 1:
            raise ValueError("a headless rule takes exactly one literal")
        body, head = (), body[0]
    constant = -(len(body) - 1.0)
    coefs: dict[int, float] = {}

    def add(operand, sign):
        nonlocal constant
        if isinstance(operand, Var):
            coefs[operand.index] = coefs.get(operand.index, 0.0) + sign
        else:
            constant += sign * float(operand)

    for operand, negated in body:
        if negated:
            constant += 1.0
            add(operand, -1.0)
        else:
            add(operand, 1.0)
    operand, negated = head
    if negated:
        constant -= 1.0
        add(operand, 1.0)
    else:
        add(operand, -1.0)
    items = tuple((i, c) for i, c in sorted(coefs.items()) if c != 0.0)
    return GroundPotential(items, constant, exponent, weight, template)


class PotentialSet:
    """Columnar batch of ground potentials.

    ``index`` and ``coef`` are ``(n, width)`` arrays padded with ``-1`` / ``0``.
    Iterating yields :class:`GroundPotential` objects.
    """

    def __init__(self, index, coef, constant, weight, exponent, template=None):
        self.index = np.asarray(index, dtype=np.int64)
        self.coef = np.asarray(coef, dtype=np.float64)
        n = self.index.shape[0]
        if self.index.ndim != 2:
            self.index = self.index.reshape(n, -1)
            self.coef = self.coef.reshape(n, -1)
        self.constant = np.asarray(constant, dtype=np.float64).reshape(n)
        self.weight = np.broadcast_to(np.asarray(weight, dtype=np.float64), (n,)).copy()
        self.exponent = np.broadcast_to(np.asarray(exponent, dtype=np.int8), (n,)).copy()
        if template is None:
            template = -1
        self.template = np.broadcast_to(np.asarray(template, dtype=np.int32), (n,)).copy()

    @classmethod
    def empty(cls, width: int = 1) -> "PotentialSet":
        return cls(np.zeros((0, width), np.int64), np.zeros((0, width)), [], [], [], [])

    @classmethod
    def from_potentials(cls, potentials: Iterable[GroundPotential]) -> "PotentialSet":
        potentials = list(potentials)
        width = max([len(p.coefficients) for p in potentials] + [1])
        index = np.full((len(potentials), width), -1, dtype=np.int64)
        coef = np.zeros((len(potentials), width))
        for r, p in enumerate(potentials):
            for c, (i, v) in enumerate(p.coefficients):
                index[r, c] = i
                coef[r, c] = v
        return cls(index, coef,
                   [p.constant for p in potentials], [p.weight for p in potentials],
                   [p.exponent for p in potentials], [p.template for p in potentials])

    @classmethod
    def concat(cls, parts: Sequence["PotentialSet"]) -> "PotentialSet":
        parts = [p for p in parts if len(p)]
        if not parts:
            return cls.empty()
        width = max(p.width for p in parts)

        def pad(a, fill):
            if a.shape[1] == width:
                return a
            extra = np.full((a.shape[0], width - a.shape[1]), fill, dtype=a.dtype)
            return np.hstack([a, extra])

        return cls(np.vstack([pad(p.index, -1) for p in parts]),
                   np.vstack([pad(p.coef, 0.0) for p in parts]),
                   np.concatenate([p.constant for p in parts]),
                   np.concatenate([p.weight for p in parts]),
                   np.concatenate([p.exponent for p in parts]),
                   np.concatenate([p.template for p in parts]))

    @property
    def width(self) -> int:
        return self.index.shape[1]

    def __len__(self):
        return self.index.shape[0]

    def __getitem__(self, k) -> GroundPotential:
        row = [(int(i), float(c)) for i, c in zip(self.index[k], self.coef[k]) if i >= 0]
        return GroundPotential(tuple(row), float(self.constant[k]), int(self.exponent[k]),
                               float(self.weight[k]), int(self.template[k]))

    def __iter__(self) -> Iterator[GroundPotential]:
        for k in range(len(self)):
            yield self[k]

    def linear(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=np.float64)
        safe = np.where(self.index >= 0, self.index, 0)
        vals = np.where(self.index >= 0, y[safe] if y.size else 0.0, 0.0)
        return self.constant + (self.coef * vals).sum(axis=1)

    def values(self, y: np.ndarray) -> np.ndarray:
        """Weighted potential values at ``y``."""
        h = np.maximum(self.linear(y), 0.0)
        return self.weight * np.where(self.exponent == 2, h * h, h)

    def max_index(self) -> int:
        return int(self.index.max()) if self.index.size else -1

    def with_weights(self, scale: float) -> "PotentialSet":
        return PotentialSet(self.index, self.coef, self.constant, self.weight * scale,
                            self.exponent, self.template)


# --------------------------------------------------------------------------
# atoms


class AtomTable:
    """Observed evidence and target atoms, grouped per predicate.

    Build with :meth:`observe` / :meth:`target`, then :meth:`freeze`; targets get
    dense variable indices ``0..n-1`` in insertion order.  The table rejects
    changes once frozen.
    """

    def __init__(self, predicates: Iterable[Predicate]):
        self.predicates: dict[str, Predicate] = {}
        for p in predicates:
            if p.name in self.predicates:
                raise ValueError(f"duplicate predicate {p.name}")
            self.predicates[p.name] = p
        self._chunks: dict[str, list[pd.DataFrame]] = {name: [] for name in self.predicates}
        self._frames: dict[str, pd.DataFrame] | None = None
        self._target_keys: list[tuple[str, pd.DataFrame]] = []
        self.n_targets = 0

    def _check_args(self, name, rows):
        pred = self.predicates.get(name)
        if pred is None:
            raise KeyError(f"unknown predicate {name!r}")
        if self._frames is not None:
            raise RuntimeError("atom table is frozen")
        frame = pd.DataFrame(list(rows) if not isinstance(rows, pd.DataFrame) else rows)
        if len(frame) == 0:
            frame = pd.DataFrame({f"a{k}": [] for k in range(pred.arity)})
        if frame.shape[1] != pred.arity:
            raise ValueError(f"{name} has arity {pred.arity}, rows have {frame.shape[1]} columns")
        frame.columns = [f"a{k}" for k in range(pred.arity)]
        return frame.reset_index(drop=True)

    def observe(self, name: str, rows, values) -> "AtomTable":
        frame = self._check_args(name, rows)
        values = np.broadcast_to(np.asarray(values, dtype=np.float64), (len(frame),)).copy()
        if len(values) and (values.min() < 0.0 or values.max() > 1.0 or not np.isfinite(values).all()):
            raise ValueError(f"observed values for {name} must lie in [0, 1]")
        frame["value"] = values
        frame["var"] = -1
        self._chunks[name].append(frame)
        return self

    def target(self, name: str, rows) -> "AtomTable":
        frame = self._check_args(name, rows)
        if self.predicates[name].closed:
            raise ValueError(f"{name} is closed-world and cannot hold targets")
        frame["value"] = np.nan
        frame["var"] = np.arange(self.n_targets, self.n_targets + len(frame), dtype=np.int64)
        self.n_targets += len(frame)
        self._chunks[name].append(frame)
        self._target_keys.append((name, frame))
        return self

    def freeze(self) -> "AtomTable":
        if self._frames is not None:
            return self
        frames = {}
        for name, chunks in self._chunks.items():
            arity = self.predicates[name].arity
            cols = [f"a{k}" for k in range(arity)]
            if chunks:
                frame = pd.concat(chunks, ignore_index=True)
            else:
                frame = pd.DataFrame({**{c: [] for c in cols}, "value": [], "var": []})
            frame["var"] = frame["var"].astype(np.int64)
            frame["value"] = frame["value"].astype(np.float64)
            dup = frame.duplicated(cols)
            if dup.any():
                bad = tuple(frame.loc[dup.idxmax(), cols])
                raise ValueError(f"duplicate atom {name}{bad}")
            frames[name] = frame
        self._frames = frames
        self._chunks = {}
        return self

    @property
    def frozen(self) -> bool:
        return self._frames is not None

    def frame(self, name: str) -> pd.DataFrame:
        if self._frames is None:
            raise RuntimeError("freeze() the atom table before reading it")
        return self._frames[name]

    def lookup(self, name: str, args: tuple) -> GroundAtom | None:
        frame = self.frame(name)
        mask = np.ones(len(frame), dtype=bool)
        for k, a in enumerate(args):
            mask &= (frame[f"a{k}"] == a).to_numpy()
        if not mask.any():
            return None
        row = frame[mask].iloc[0]
        return GroundAtom(name, tuple(args), None if row["var"] >= 0 else float(row["value"]))

    def targets(self, name: str | None = None) -> pd.DataFrame:
        """Target atoms (optionally of one predicate) with their dense ``var`` index."""
        parts = []
        for pname, frame in self._target_keys:
            if name is None or pname == name:
                part = frame.drop(columns=["value"]).copy()
                part.insert(0, "predicate", pname)
                parts.append(part)
        if not parts:
            return pd.DataFrame(columns=["predicate", "var"])
        return pd.concat(parts, ignore_index=True)

    def __len__(self):
        return sum(len(f) for f in self._frames.values()) if self._frames is not None else 0


# --------------------------------------------------------------------------
# grounding


def _is_selector(lit: Literal, pred: Predicate, in_body: bool) -> bool:
    # Atoms of open predicates outside the table are not part of the model, so
    # they always filter.  Positive closed-world body atoms that are absent are
    # false, which satisfies the rule trivially.
    return (not pred.closed) or (in_body and not lit.negated)


def _literal_frame(table: AtomTable, lit: Literal, slot: int) -> pd.DataFrame:
    frame = table.frame(lit.predicate)
    out = frame.rename(columns={**{f"a{k}": f"_x{k}" for k in range(len(lit.args))},
                                "value": f"v{slot}", "var": f"i{slot}"})
    # repeated variable inside one literal: keep rows where the positions agree
    first: dict[str, str] = {}
    keep = np.ones(len(out), dtype=bool)
    for k, v in enumerate(lit.args):
        col = f"_x{k}"
        if v in first:
            keep &= (out[col] == out[first[v]]).to_numpy()
        else:
            first[v] = col
    if not keep.all():
        out = out[keep]
    out = out[[*first.values(), f"v{slot}", f"i{slot}"]]
    return out.rename(columns={c: v for v, c in first.items()})


def ground(template: RuleTemplate, table: AtomTable, template_id: int = -1,
           body_filter: Mapping[str, str] | None = None) -> PotentialSet:
    """Ground one template against a frozen atom table.

    ``body_filter`` optionally restricts body atoms of a predicate to ``"observed"``
    or ``"targets"`` (``"all"`` keeps both).
    """
    lits = template.literals
    n_body = len(template.body)
    for lit in lits:
        pred = table.predicates.get(lit.predicate)
        if pred is None:
            raise GroundingError(f"predicate {lit.predicate} is not in the atom table")
        if pred.arity != len(lit.args):
            raise GroundingError(
                f"{lit.predicate} takes {pred.arity} arguments, pattern has {len(lit.args)}")

    # headless facts are scored as "-> L", so the literal behaves like a head
    if template.head is None:
        roles = [(lits[0], False)]
        n_body = 0
    else:
        roles = [(lit, k < n_body) for k, lit in enumerate(lits)]

    selectors, lookups = [], []
    for slot, (lit, in_body) in enumerate(roles):
        pred = table.predicates[lit.predicate]
        (selectors if _is_selector(lit, pred, in_body) else lookups).append(slot)
    # closed positive body literals first: they are the most selective
    selectors.sort(key=lambda s: (not table.predicates[roles[s][0].predicate].closed, s))

    bound: set[str] = set()
    joined: pd.DataFrame | None = None
    for slot in selectors:
        lit, in_body = roles[slot]
        part = _literal_frame(table, lit, slot)
        if in_body and body_filter and lit.predicate in body_filter:
            mode = body_filter[lit.predicate]
            if mode == "observed":
                part = part[part[f"i{slot}"] < 0]
            elif mode == "targets":
                part = part[part[f"i{slot}"] >= 0]
        if joined is None:
            joined = part
        else:
            on = [v for v in dict.fromkeys(lit.args) if v in bound]
            joined = joined.merge(part, on=on, how="inner") if on else joined.merge(part, how="cross")
        bound.update(lit.args)
        if len(joined) == 0:
            return PotentialSet.empty()
    for slot in lookups:
        lit, _ = roles[slot]
        missing = [v for v in lit.args if v not in bound]
        if missing:
            raise GroundingError(f"variables {missing} in {lit} are not bound by any selecting literal")
        part = _literal_frame(table, lit, slot)
        joined = joined.merge(part, on=list(dict.fromkeys(lit.args)), how="left")
        joined[f"v{slot}"] = joined[f"v{slot}"].fillna(0.0)
        joined[f"i{slot}"] = joined[f"i{slot}"].fillna(-1).astype(np.int64)

    n = len(joined)
    width = len(roles)
    index = np.empty((n, width), dtype=np.int64)
    coef = np.zeros((n, width))
    constant = np.full(n, -(n_body - 1.0))
    for slot, (lit, in_body) in enumerate(roles):
        var = joined[f"i{slot}"].to_numpy(dtype=np.int64)
        val = joined[f"v{slot}"].to_numpy(dtype=np.float64)
        sign = 1.0 if in_body else -1.0
        if lit.negated:
            constant += sign
            sign = -sign
        is_var = var >= 0
        index[:, slot] = np.where(is_var, var, -1)
        coef[:, slot] = np.where(is_var, sign, 0.0)
        constant += np.where(is_var, 0.0, sign * np.nan_to_num(val))

    index, coef = _merge_duplicate_vars(index, coef)
    has_target = (index >= 0).any(axis=1)
    reachable = constant + np.maximum(coef, 0.0).sum(axis=1)
    keep = has_target & (reachable > 0.0)
    index, coef, constant = index[keep], coef[keep], constant[keep]
    # compact: targets first, padding last
    order = np.argsort(index < 0, axis=1, kind="stable")
    index = np.take_along_axis(index, order, axis=1)
    coef = np.take_along_axis(coef, order, axis=1)
    used = int((index >= 0).sum(axis=1).max()) if len(index) else 1
    return PotentialSet(index[:, :max(used, 1)], coef[:, :max(used, 1)], constant,
                        template.weight, template.exponent, template_id)


def _merge_duplicate_vars(index, coef):
    width = index.shape[1]
    for a in range(width):
        for b in range(a + 1, width):
            same = (index[:, a] == index[:, b]) & (index[:, a] >= 0)
            if same.any():
                coef[same, a] += coef[same, b]
                coef[same, b] = 0.0
                index[same, b] = -1
    zero = (coef == 0.0) & (index >= 0)
    index[zero] = -1
    return index, coef


def ground_all(templates: Sequence[RuleTemplate], table: AtomTable,
               body_filters: Sequence[Mapping[str, str] | None] | None = None) -> PotentialSet:
    """Ground templates in order and concatenate; ``template`` ids are list positions."""
    parts = []
    for k, t in enumerate(templates):
        bf = body_filters[k] if body_filters is not None else None
        parts.append(ground(t, table, template_id=k, body_filter=bf))
    return PotentialSet.concat(parts)


def hinge_expression(template: RuleTemplate, binding: Mapping[str, str]) -> str:
    """Render the unfolded Lukasiewicz hinge of one grounding, e.g.
    ``max(A(x) + B(y) - C(x,y) - 1, 0)``."""
    def atom(lit):
        return f"{lit.predicate}({', '.join(str(binding[a]) for a in lit.args)})"

    if template.head is None:
        body, head = (), template.body[0]
    else:
        body, head = template.body, template.head
    plus, minus = [], []
    constant = -(len(body) - 1)
    for lit in body:
        if lit.negated:
            constant += 1
            minus.append(atom(lit))
        else:
            plus.append(atom(lit))
    if head.negated:
        constant -= 1
        plus.append(atom(head))
    else:
        minus.append(atom(head))
    text = " + ".join(plus)
    for m in minus:
        text = f"{text} - {m}" if text else f"-{m}"
    if constant > 0:
        text = f"{text} + {constant}" if text else str(constant)
    elif constant < 0:
        text = f"{text} - {-constant}"
    return f"max({text}, 0)"
