"""Embedded evaluator for the SQL subset used to generate ground-truth answers.

Supported commands: MAX, MIN, SUM, AVG, COUNT, DISTINCT, ORDER BY, ASC, DESC,
GROUP BY, WHERE; operators: = > < >= <= <> LIKE + - * / % AND NOT OR BETWEEN
IN, including nested ``IN (SELECT ...)`` subqueries. Single-table queries
only; no JOIN.

Semantics follow common embedded-engine behavior so results can be checked
against an independent reference engine: integer division and modulo truncate
toward zero, division by zero yields NULL, comparisons use three-valued logic,
and LIKE is case-insensitive over ASCII. Determinism beyond standard SQL:

* Rows without ORDER BY come out in table order (GROUP BY groups in ascending
  key order, DISTINCT keeps first occurrence).
* ORDER BY appends a hidden tie-break on the source table's primary key (the
  group key tuple for grouped queries). Results whose visible sort keys
  contain duplicates are flagged ``tie_affected``.

``serialize_answer`` renders a result as the canonical gold-answer string:
values flattened row-major and joined with ", "; NULL for empty results;
exact averages rendered without a decimal point when integral, otherwise
rounded half-up to two decimals.
"""

from __future__ import annotations

import functools
import re
import string
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple, Union

from .errors import SqlExecutionError, SqlParseError

KEYWORDS = {
    "SELECT", "DISTINCT", "FROM", "WHERE", "GROUP", "ORDER", "BY", "ASC", "DESC",
    "AND", "OR", "NOT", "IN", "BETWEEN", "LIKE", "MAX", "MIN", "SUM", "AVG", "COUNT",
}
AGG_FUNCS = ("MAX", "MIN", "SUM", "AVG", "COUNT")

# ---------------------------------------------------------------------------
# Lexer


@dataclass(frozen=True)
class Token:
    kind: str  # KEYWORD, IDENT, INT, STR, OP, EOF
    text: str
    pos: int


_TWO_CHAR_OPS = ("<>", ">=", "<=")
_ONE_CHAR_OPS = "=<>+-*/%(),"
_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_INT_RE = re.compile(r"\d+")


def _tokenize(sql: str) -> List[Token]:
    tokens: List[Token] = []
    i, n = 0, len(sql)
    while i < n:
        ch = sql[i]
        if ch.isspace():
            i += 1
            continue
        if sql[i : i + 2] in _TWO_CHAR_OPS:
            tokens.append(Token("OP", sql[i : i + 2], i))
            i += 2
            continue
        if ch in _ONE_CHAR_OPS:
            tokens.append(Token("OP", ch, i))
            i += 1
            continue
        if ch == "'":
            j = i + 1
            buf = []
            while True:
                if j >= n:
                    raise SqlParseError(f"unterminated string literal starting at {i}")
                if sql[j] == "'":
                    if j + 1 < n and sql[j + 1] == "'":
                        buf.append("'")
                        j += 2
                        continue
                    break
                buf.append(sql[j])
                j += 1
            tokens.append(Token("STR", "".join(buf), i))
            i = j + 1
            continue
        m = _INT_RE.match(sql, i)
        if m:
            tokens.append(Token("INT", m.group(0), i))
            i = m.end()
            continue
        m = _IDENT_RE.match(sql, i)
        if m:
            word = m.group(0)
            kind = "KEYWORD" if word.upper() in KEYWORDS else "IDENT"
            text = word.upper() if kind == "KEYWORD" else word
            tokens.append(Token(kind, text, i))
            i = m.end()
            continue
        raise SqlParseError(f"unexpected character {ch!r} at position {i}")
    tokens.append(Token("EOF", "", n))
    return tokens


# ---------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class Literal:
    value: Union[int, str]

    def to_sql(self) -> str:
        if isinstance(self.value, str):
            return "'" + self.value.replace("'", "''") + "'"
        return str(self.value)


@dataclass(frozen=True)
class Column:
    name: str

    def to_sql(self) -> str:
        return self.name


@dataclass(frozen=True)
class Unary:
    op: str
    operand: "Expr"

    def to_sql(self) -> str:
        return f"{self.op}{self.operand.to_sql()}"


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Expr"
    right: "Expr"

    def to_sql(self) -> str:
        return f"{self.left.to_sql()} {self.op} {self.right.to_sql()}"


@dataclass(frozen=True)
class Compare:
    op: str
    left: "Expr"
    right: "Expr"

    def to_sql(self) -> str:
        return f"{self.left.to_sql()} {self.op} {self.right.to_sql()}"


@dataclass(frozen=True)
class Like:
    operand: "Expr"
    pattern: "Expr"
    negated: bool = False

    def to_sql(self) -> str:
        mid = "NOT LIKE" if self.negated else "LIKE"
        return f"{self.operand.to_sql()} {mid} {self.pattern.to_sql()}"


@dataclass(frozen=True)
class Between:
    operand: "Expr"
    low: "Expr"
    high: "Expr"
    negated: bool = False

    def to_sql(self) -> str:
        mid = "NOT BETWEEN" if self.negated else "BETWEEN"
        return f"{self.operand.to_sql()} {mid} {self.low.to_sql()} AND {self.high.to_sql()}"


@dataclass(frozen=True)
class InList:
    operand: "Expr"
    values: Tuple[Literal, ...]
    negated: bool = False

    def to_sql(self) -> str:
        mid = "NOT IN" if self.negated else "IN"
        inner = ", ".join(v.to_sql() for v in self.values)
        return f"{self.operand.to_sql()} {mid} ({inner})"


@dataclass(frozen=True)
class InSubquery:
    operand: "Expr"
    query: "Query"
    negated: bool = False

    def to_sql(self) -> str:
        mid = "NOT IN" if self.negated else "IN"
        return f"{self.operand.to_sql()} {mid} ({self.query.to_sql()})"


@dataclass(frozen=True)
class Not:
    operand: "Expr"

    def to_sql(self) -> str:
        return f"NOT {self.operand.to_sql()}"


@dataclass(frozen=True)
class Logical:
    op: str  # AND / OR
    left: "Expr"
    right: "Expr"

    def to_sql(self) -> str:
        return f"{self.left.to_sql()} {self.op} {self.right.to_sql()}"


@dataclass(frozen=True)
class Aggregate:
    func: str
    arg: Optional["Expr"]  # None means COUNT(*)
    distinct: bool = False

    def to_sql(self) -> str:
        if self.arg is None:
            return f"{self.func}(*)"
        inner = ("DISTINCT " if self.distinct else "") + self.arg.to_sql()
        return f"{self.func}({inner})"


Expr = Union[Literal, Column, Unary, Binary, Compare, Like, Between, InList, InSubquery, Not, Logical, Aggregate]


@dataclass(frozen=True)
class OrderItem:
    expr: Expr
    descending: bool = False

    def to_sql(self) -> str:
        return f"{self.expr.to_sql()} {'DESC' if self.descending else 'ASC'}"


@dataclass(frozen=True)
class Query:
    select_items: Tuple[Expr, ...]  # empty means SELECT *
    table: str
    distinct: bool = False
    where: Optional[Expr] = None
    group_by: Tuple[Expr, ...] = ()
    order_by: Tuple[OrderItem, ...] = ()

    def to_sql(self) -> str:
        items = "*" if not self.select_items else ", ".join(e.to_sql() for e in self.select_items)
        parts = [f"SELECT {'DISTINCT ' if self.distinct else ''}{items} FROM {self.table}"]
        if self.where is not None:
            parts.append(f"WHERE {self.where.to_sql()}")
        if self.group_by:
            parts.append("GROUP BY " + ", ".join(e.to_sql() for e in self.group_by))
        if self.order_by:
            parts.append("ORDER BY " + ", ".join(o.to_sql() for o in self.order_by))
        return " ".join(parts)


# ---------------------------------------------------------------------------
# Parser


class _Parser:
    def __init__(self, sql: str):
        self.tokens = _tokenize(sql)
        self.pos = 0

    def peek(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def fail(self, expected: str) -> SqlParseError:
        tok = self.peek()
        shown = tok.text or "end of input"
        return SqlParseError(f"expected {expected}, found {shown!r} at position {tok.pos}")

    def expect_keyword(self, word: str) -> None:
        tok = self.peek()
        if tok.kind == "KEYWORD" and tok.text == word:
            self.advance()
            return
        raise self.fail(word)

    def accept_keyword(self, word: str) -> bool:
        tok = self.peek()
        if tok.kind == "KEYWORD" and tok.text == word:
            self.advance()
            return True
        return False

    def accept_op(self, op: str) -> bool:
        tok = self.peek()
        if tok.kind == "OP" and tok.text == op:
            self.advance()
            return True
        return False

    def expect_op(self, op: str) -> None:
        if not self.accept_op(op):
            raise self.fail(repr(op))

    # query := SELECT [DISTINCT] list FROM ident [WHERE e] [GROUP BY ...] [ORDER BY ...]
    def parse_query(self) -> Query:
        self.expect_keyword("SELECT")
        distinct = self.accept_keyword("DISTINCT")
        select_items: Tuple[Expr, ...]
        if self.accept_op("*"):
            select_items = ()
        else:
            items = [self.parse_expr()]
            while self.accept_op(","):
                items.append(self.parse_expr())
            select_items = tuple(items)
        self.expect_keyword("FROM")
        tok = self.peek()
        if tok.kind != "IDENT":
            raise self.fail("table name")
        table = self.advance().text
        where = None
        if self.accept_keyword("WHERE"):
            where = self.parse_expr()
        group_by: Tuple[Expr, ...] = ()
        if self.accept_keyword("GROUP"):
            self.expect_keyword("BY")
            exprs = [self.parse_expr()]
            while self.accept_op(","):
                exprs.append(self.parse_expr())
            group_by = tuple(exprs)
        order_by: Tuple[OrderItem, ...] = ()
        if self.accept_keyword("ORDER"):
            self.expect_keyword("BY")
            items = [self.parse_order_item()]
            while self.accept_op(","):
                items.append(self.parse_order_item())
            order_by = tuple(items)
        return Query(select_items, table, distinct, where, group_by, order_by)

    def parse_order_item(self) -> OrderItem:
        expr = self.parse_expr()
        if self.accept_keyword("DESC"):
            return OrderItem(expr, descending=True)
        self.accept_keyword("ASC")
        return OrderItem(expr, descending=False)

    def parse_expr(self) -> Expr:
        return self.parse_or()

    def parse_or(self) -> Expr:
        node = self.parse_and()
        while self.accept_keyword("OR"):
            node = Logical("OR", node, self.parse_and())
        return node

    def parse_and(self) -> Expr:
        node = self.parse_not()
        while self.accept_keyword("AND"):
            node = Logical("AND", node, self.parse_not())
        return node

    def parse_not(self) -> Expr:
        if self.accept_keyword("NOT"):
            return Not(self.parse_not())
        return self.parse_predicate()

    def parse_predicate(self) -> Expr:
        left = self.parse_additive()
        tok = self.peek()
        if tok.kind == "OP" and tok.text in ("=", "<>", "<", ">", "<=", ">="):
            op = self.advance().text
            return Compare(op, left, self.parse_additive())
        negated = False
        if tok.kind == "KEYWORD" and tok.text == "NOT":
            nxt = self.tokens[self.pos + 1]
            if nxt.kind == "KEYWORD" and nxt.text in ("LIKE", "BETWEEN", "IN"):
                self.advance()
                negated = True
                tok = self.peek()
        if tok.kind == "KEYWORD" and tok.text == "LIKE":
            self.advance()
            return Like(left, self.parse_additive(), negated)
        if tok.kind == "KEYWORD" and tok.text == "BETWEEN":
            self.advance()
            low = self.parse_additive()
            self.expect_keyword("AND")
            return Between(left, low, self.parse_additive(), negated)
        if tok.kind == "KEYWORD" and tok.text == "IN":
            self.advance()
            self.expect_op("(")
            if self.peek().kind == "KEYWORD" and self.peek().text == "SELECT":
                sub = self.parse_query()
                self.expect_op(")")
                return InSubquery(left, sub, negated)
            values = [self.parse_literal()]
            while self.accept_op(","):
                values.append(self.parse_literal())
            self.expect_op(")")
            return InList(left, tuple(values), negated)
        if negated:
            raise self.fail("LIKE, BETWEEN, or IN after NOT")
        return left

    def parse_literal(self) -> Literal:
        tok = self.peek()
        if tok.kind == "INT":
            return Literal(int(self.advance().text))
        if tok.kind == "STR":
            return Literal(self.advance().text)
        if tok.kind == "OP" and tok.text == "-":
            self.advance()
            inner = self.peek()
            if inner.kind == "INT":
                return Literal(-int(self.advance().text))
            raise self.fail("integer after unary '-'")
        raise self.fail("literal value")

    def parse_additive(self) -> Expr:
        node = self.parse_multiplicative()
        while True:
            tok = self.peek()
            if tok.kind == "OP" and tok.text in ("+", "-"):
                op = self.advance().text
                node = Binary(op, node, self.parse_multiplicative())
            else:
                return node

    def parse_multiplicative(self) -> Expr:
        node = self.parse_unary()
        while True:
            tok = self.peek()
            if tok.kind == "OP" and tok.text in ("*", "/", "%"):
                op = self.advance().text
                node = Binary(op, node, self.parse_unary())
            else:
                return node

    def parse_unary(self) -> Expr:
        if self.accept_op("-"):
            return Unary("-", self.parse_unary())
        return self.parse_primary()

    def parse_primary(self) -> Expr:
        tok = self.peek()
        if tok.kind == "INT":
            return Literal(int(self.advance().text))
        if tok.kind == "STR":
            return Literal(self.advance().text)
        if tok.kind == "KEYWORD" and tok.text in AGG_FUNCS:
            func = self.advance().text
            self.expect_op("(")
            if self.accept_op("*"):
                if func != "COUNT":
                    raise SqlParseError(f"{func}(*) is not supported; only COUNT(*)")
                self.expect_op(")")
                return Aggregate("COUNT", None)
            distinct = self.accept_keyword("DISTINCT")
            arg = self.parse_expr()
            self.expect_op(")")
            return Aggregate(func, arg, distinct)
        if tok.kind == "IDENT":
            return Column(self.advance().text)
        if tok.kind == "OP" and tok.text == "(":
            self.advance()
            inner = self.parse_expr()
            self.expect_op(")")
            return inner
        raise self.fail("expression")


def parse_sql(sql: str) -> Query:
    """Parse ``sql`` into a query AST; raises :class:`SqlParseError`."""
    parser = _Parser(sql)
    query = parser.parse_query()
    tok = parser.peek()
    if tok.kind != "EOF":
        raise SqlParseError(f"unexpected trailing token {tok.text!r} at position {tok.pos}")
    return query


# ---------------------------------------------------------------------------
# Evaluation

_ASCII_LOWER = str.maketrans(string.ascii_uppercase, string.ascii_lowercase)


def _like_match(value: str, pattern: str) -> bool:
    parts = []
    for ch in pattern:
        if ch == "%":
            parts.append(".*")
        elif ch == "_":
            parts.append(".")
        else:
            parts.append(re.escape(ch.translate(_ASCII_LOWER)))
    regex = re.compile("".join(parts), re.DOTALL)
    return regex.fullmatch(value.translate(_ASCII_LOWER)) is not None


def _as_number(value, context: str):
    if isinstance(value, bool):
        return int(value)
    if isinstance(value, int):
        return value
    raise SqlExecutionError(f"type mismatch: {context} requires an integer, got {value!r}")


def _trunc_div(a: int, b: int):
    if b == 0:
        return None
    q = abs(a) // abs(b)
    return q if (a >= 0) == (b >= 0) else -q


def _trunc_mod(a: int, b: int):
    if b == 0:
        return None
    q = _trunc_div(a, b)
    return a - q * b


def _compare_values(op: str, left, right):
    if left is None or right is None:
        return None
    if isinstance(left, bool):
        left = int(left)
    if isinstance(right, bool):
        right = int(right)
    ln, rn = isinstance(left, int), isinstance(right, int)
    if ln != rn:
        raise SqlExecutionError(f"type mismatch: cannot compare {left!r} with {right!r}")
    if op == "=":
        return left == right
    if op == "<>":
        return left != right
    if op == "<":
        return left < right
    if op == ">":
        return left > right
    if op == "<=":
        return left <= right
    if op == ">=":
        return left >= right
    raise SqlExecutionError(f"unknown comparison operator {op!r}")


def _sort_cmp(a, b) -> int:
    """Total order for ORDER BY keys: NULL < numbers < text."""

    def rank(v):
        if v is None:
            return 0
        if isinstance(v, (int, Fraction, float)):
            return 1
        return 2

    ra, rb = rank(a), rank(b)
    if ra != rb:
        return -1 if ra < rb else 1
    if ra == 0:
        return 0
    if a < b:
        return -1
    if a > b:
        return 1
    return 0


def _cmp_any(a, b) -> int:
    """Like :func:`_sort_cmp` but also orders tuples element-wise."""
    if isinstance(a, tuple) and isinstance(b, tuple):
        for x, y in zip(a, b):
            c = _sort_cmp(x, y)
            if c:
                return c
        return (len(a) > len(b)) - (len(a) < len(b))
    return _sort_cmp(a, b)


class _Context:
    """One execution: resolves tables and memoizes uncorrelated subqueries."""

    def __init__(self, db):
        self.db = db
        self._subquery_cache: Dict[int, list] = {}

    def table_rows(self, query: Query) -> Tuple[Tuple[str, ...], List[dict]]:
        if not self.db.has_table(query.table):
            raise SqlExecutionError(f"unknown table {query.table!r}")
        columns = self.db.columns(query.table)
        rows = [dict(zip(columns, row)) for row in self.db.rows(query.table)]
        return columns, rows

    def subquery_values(self, node: InSubquery) -> list:
        key = id(node.query)
        if key not in self._subquery_cache:
            result = _execute(node.query, self)
            if len(result.columns) != 1:
                raise SqlExecutionError("IN subquery must select exactly one column")
            self._subquery_cache[key] = [row[0] for row in result.rows]
        return self._subquery_cache[key]


def _validate_columns(expr: Expr, columns: Sequence[str], table: str) -> None:
    if isinstance(expr, Column):
        if expr.name not in columns:
            raise SqlExecutionError(f"unknown column {expr.name!r} in table {table!r}")
    elif isinstance(expr, (Unary, Not)):
        _validate_columns(expr.operand, columns, table)
    elif isinstance(expr, (Binary, Compare, Logical)):
        _validate_columns(expr.left, columns, table)
        _validate_columns(expr.right, columns, table)
    elif isinstance(expr, Like):
        _validate_columns(expr.operand, columns, table)
        _validate_columns(expr.pattern, columns, table)
    elif isinstance(expr, Between):
        _validate_columns(expr.operand, columns, table)
        _validate_columns(expr.low, columns, table)
        _validate_columns(expr.high, columns, table)
    elif isinstance(expr, (InList, InSubquery)):
        _validate_columns(expr.operand, columns, table)
    elif isinstance(expr, Aggregate):
        if expr.arg is not None:
            _validate_columns(expr.arg, columns, table)


def _contains_aggregate(expr: Expr) -> bool:
    if isinstance(expr, Aggregate):
        return True
    if isinstance(expr, (Unary, Not)):
        return _contains_aggregate(expr.operand)
    if isinstance(expr, (Binary, Compare, Logical)):
        return _contains_aggregate(expr.left) or _contains_aggregate(expr.right)
    if isinstance(expr, Like):
        return _contains_aggregate(expr.operand)
    if isinstance(expr, Between):
        return _contains_aggregate(expr.operand)
    if isinstance(expr, (InList, InSubquery)):
        return _contains_aggregate(expr.operand)
    return False


def _eval_scalar(expr: Expr, row: dict, ctx: _Context):
    """Evaluate an expression against one row using three-valued logic."""
    if isinstance(expr, Literal):
        return expr.value
    if isinstance(expr, Column):
        return row[expr.name]
    if isinstance(expr, Unary):
        val = _eval_scalar(expr.operand, row, ctx)
        return None if val is None else -_as_number(val, "unary '-'")
    if isinstance(expr, Binary):
        left = _eval_scalar(expr.left, row, ctx)
        right = _eval_scalar(expr.right, row, ctx)
        if left is None or right is None:
            return None
        a = _as_number(left, f"operator {expr.op!r}")
        b = _as_number(right, f"operator {expr.op!r}")
        if expr.op == "+":
            return a + b
        if expr.op == "-":
            return a - b
        if expr.op == "*":
            return a * b
        if expr.op == "/":
            return _trunc_div(a, b)
        if expr.op == "%":
            return _trunc_mod(a, b)
        raise SqlExecutionError(f"unknown operator {expr.op!r}")
    if isinstance(expr, Compare):
        return _compare_values(
            expr.op, _eval_scalar(expr.left, row, ctx), _eval_scalar(expr.right, row, ctx)
        )
    if isinstance(expr, Like):
        value = _eval_scalar(expr.operand, row, ctx)
        pattern = _eval_scalar(expr.pattern, row, ctx)
        if value is None or pattern is None:
            return None
        if not isinstance(value, str) or not isinstance(pattern, str):
            raise SqlExecutionError("type mismatch: LIKE requires text operands")
        matched = _like_match(value, pattern)
        return (not matched) if expr.negated else matched
    if isinstance(expr, Between):
        value = _eval_scalar(expr.operand, row, ctx)
        low = _eval_scalar(expr.low, row, ctx)
        high = _eval_scalar(expr.high, row, ctx)
        ge = _compare_values(">=", value, low)
        le = _compare_values("<=", value, high)
        result = _three_valued_and(ge, le)
        return _three_valued_not(result) if expr.negated else result
    if isinstance(expr, (InList, InSubquery)):
        value = _eval_scalar(expr.operand, row, ctx)
        if isinstance(expr, InList):
            candidates = [v.value for v in expr.values]
        else:
            candidates = ctx.subquery_values(expr)
        if value is None:
            return None
        found = False
        saw_null = False
        for cand in candidates:
            if cand is None:
                saw_null = True
                continue
            if _compare_values("=", value, cand):
                found = True
                break
        result: Optional[bool]
        if found:
            result = True
        elif saw_null:
            result = None
        else:
            result = False
        return _three_valued_not(result) if expr.negated else result
    if isinstance(expr, Not):
        return _three_valued_not(_truthy(_eval_scalar(expr.operand, row, ctx)))
    if isinstance(expr, Logical):
        left = _truthy(_eval_scalar(expr.left, row, ctx))
        right = _truthy(_eval_scalar(expr.right, row, ctx))
        return _three_valued_and(left, right) if expr.op == "AND" else _three_valued_or(left, right)
    if isinstance(expr, Aggregate):
        raise SqlExecutionError(f"aggregate {expr.func} is not allowed in this clause")
    raise SqlExecutionError(f"cannot evaluate expression {expr!r}")


def _truthy(value) -> Optional[bool]:
    if value is None:
        return None
    if isinstance(value, bool):
        return value
    if isinstance(value, int):
        return value != 0
    raise SqlExecutionError(f"type mismatch: {value!r} is not usable as a condition")


def _three_valued_not(v: Optional[bool]) -> Optional[bool]:
    return None if v is None else not v


def _three_valued_and(a: Optional[bool], b: Optional[bool]) -> Optional[bool]:
    if a is False or b is False:
        return False
    if a is None or b is None:
        return None
    return True


def _three_valued_or(a: Optional[bool], b: Optional[bool]) -> Optional[bool]:
    if a is True or b is True:
        return True
    if a is None or b is None:
        return None
    return False


def _eval_aggregate(agg: Aggregate, rows: List[dict], ctx: _Context):
    if agg.arg is None:  # COUNT(*)
        return len(rows)
    values = [v for v in (_eval_scalar(agg.arg, row, ctx) for row in rows) if v is not None]
    if agg.distinct:
        seen = []
        for v in values:
            if v not in seen:
                seen.append(v)
        values = seen
    if agg.func == "COUNT":
        return len(values)
    if not values:
        return None
    if agg.func in ("MAX", "MIN"):
        kinds = {isinstance(v, str) for v in values}
        if len(kinds) > 1:
            raise SqlExecutionError(f"type mismatch: {agg.func} over mixed value types")
        return max(values) if agg.func == "MAX" else min(values)
    total = 0
    for v in values:
        total += _as_number(v, agg.func)
    if agg.func == "SUM":
        return total
    return Fraction(total, len(values))  # AVG as an exact rational


def _eval_group_expr(expr: Expr, group_rows: List[dict], group_key_map: dict, ctx: _Context):
    """Evaluate a select/order expression in group scope."""
    if isinstance(expr, Aggregate):
        return _eval_aggregate(expr, group_rows, ctx)
    if expr in group_key_map:
        return group_key_map[expr]
    if isinstance(expr, Literal):
        return expr.value
    if _contains_aggregate(expr):
        raise SqlExecutionError("aggregates may not be nested inside expressions")
    raise SqlExecutionError(
        f"expression {expr.to_sql()!r} is neither an aggregate nor a GROUP BY key"
    )


@dataclass(frozen=True)
class ResultTable:
    """Rectangular query result with deterministic row order."""

    columns: Tuple[str, ...]
    rows: Tuple[Tuple, ...]
    tie_affected: bool = False


def _project_labels(query: Query, columns: Sequence[str]) -> Tuple[str, ...]:
    if not query.select_items:
        return tuple(columns)
    return tuple(item.to_sql() for item in query.select_items)


def _order_and_flag(
    units: List[dict],
    query: Query,
    key_of,
) -> Tuple[List[dict], bool]:
    """Sort output units by ORDER BY keys plus a hidden tie-break."""
    if not query.order_by:
        return units, False
    directions = [item.descending for item in query.order_by]
    decorated = []
    for unit in units:
        keys = tuple(key_of(unit, item.expr) for item in query.order_by)
        decorated.append((keys, unit))
    visible = [keys for keys, _ in decorated]
    tie_affected = len(set(visible)) < len(visible)

    def cmp(a, b):
        for (ka, kb), desc in zip(zip(a[0], b[0]), directions):
            c = _sort_cmp(ka, kb)
            if c:
                return -c if desc else c
        return _cmp_any(a[1]["__tiebreak__"], b[1]["__tiebreak__"])

    decorated.sort(key=functools.cmp_to_key(cmp))
    return [unit for _, unit in decorated], tie_affected


def _execute(query: Query, ctx: _Context) -> ResultTable:
    columns, rows = ctx.table_rows(query)
    pk = ctx.db.primary_key(query.table) if hasattr(ctx.db, "primary_key") else columns[0]

    for item in query.select_items:
        _validate_columns(item, columns, query.table)
    if query.where is not None:
        _validate_columns(query.where, columns, query.table)
        if _contains_aggregate(query.where):
            raise SqlExecutionError("aggregates are not allowed in WHERE")
    for expr in query.group_by:
        _validate_columns(expr, columns, query.table)
    for item in query.order_by:
        _validate_columns(item.expr, columns, query.table)

    if query.where is not None:
        rows = [row for row in rows if _truthy(_eval_scalar(query.where, row, ctx)) is True]

    has_aggregates = any(_contains_aggregate(e) for e in query.select_items) or any(
        _contains_aggregate(o.expr) for o in query.order_by
    )

    labels = _project_labels(query, columns)

    if query.group_by or has_aggregates:
        if not query.select_items:
            raise SqlExecutionError("SELECT * cannot be combined with aggregation")
        if query.group_by:
            groups: Dict[tuple, List[dict]] = {}
            for row in rows:
                key = tuple(_eval_scalar(e, row, ctx) for e in query.group_by)
                groups.setdefault(key, []).append(row)
            # Ascending key order keeps ungrouped output deterministic.
            group_items = sorted(
                groups.items(),
                key=functools.cmp_to_key(
                    lambda a, b: next((c for c in (_sort_cmp(x, y) for x, y in zip(a[0], b[0])) if c), 0)
                ),
            )
        else:
            group_items = [((), rows)]
        units = []
        for key, members in group_items:
            key_map = dict(zip(query.group_by, key))
            projected = tuple(
                _eval_group_expr(item, members, key_map, ctx) for item in query.select_items
            )
            units.append({"row": projected, "key_map": key_map, "members": members, "__tiebreak__": key})

        def group_key_of(unit, expr):
            return _eval_group_expr(expr, unit["members"], unit["key_map"], ctx)

        units, tie_affected = _order_and_flag(units, query, group_key_of)
        out_rows = [u["row"] for u in units]
    else:
        units = []
        for row in rows:
            if query.select_items:
                projected = tuple(_eval_scalar(item, row, ctx) for item in query.select_items)
            else:
                projected = tuple(row[c] for c in columns)
            units.append({"row": projected, "source": row, "__tiebreak__": row[pk]})

        def row_key_of(unit, expr):
            return _eval_scalar(expr, unit["source"], ctx)

        units, tie_affected = _order_and_flag(units, query, row_key_of)
        out_rows = [u["row"] for u in units]

    if query.distinct:
        seen = []
        deduped = []
        for row in out_rows:
            if row not in seen:
                seen.append(row)
                deduped.append(row)
        out_rows = deduped

    return ResultTable(labels, tuple(out_rows), tie_affected)


def execute_query(db, sql: Union[str, Query]) -> ResultTable:
    """Execute ``sql`` against a metadata database.

    ``db`` needs ``columns(table)``, ``rows(table)``, ``has_table(table)``
    and optionally ``primary_key(table)`` for the hidden ORDER BY tie-break.
    """
    query = parse_sql(sql) if isinstance(sql, str) else sql
    return _execute(query, _Context(db))


# ---------------------------------------------------------------------------
# Answer serialization


def _render_ratio(num: int, den: int) -> str:
    if num % den == 0:
        return str(num // den)
    value = (Decimal(num) / Decimal(den)).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP)
    return str(value)


def render_value(value) -> str:
    """Render one result cell the way gold answers are written."""
    if value is None:
        return "NULL"
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, int):
        return str(value)
    if isinstance(value, Fraction):
        return _render_ratio(value.numerator, value.denominator)
    if isinstance(value, float):
        if value == int(value):
            return str(int(value))
        quantized = Decimal(repr(value)).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP)
        return str(quantized)
    return value


def serialize_answer(result: Union[ResultTable, Sequence[Sequence]]) -> str:
    """Flatten a result row-major and join with ", "; empty results are NULL."""
    rows = result.rows if isinstance(result, ResultTable) else result
    cells = [cell for row in rows for cell in row]
    if not cells:
        return "NULL"
    return ", ".join(render_value(c) for c in cells)


def is_scalar_aggregate(sql: Union[str, Query]) -> bool:
    """True when every select item is an aggregate and there is no GROUP BY.

    Such queries always return exactly one row, so instantiation keeps them
    even when the aggregate comes out NULL.
    """
    query = parse_sql(sql) if isinstance(sql, str) else sql
    if query.group_by or not query.select_items:
        return False
    return all(isinstance(item, Aggregate) for item in query.select_items)


_NUMERIC_COLUMNS = {"title_word_count", "author_count", "reference_count", "author_position"}


def select_output_kind(sql: Union[str, Query]) -> str:
    """Coarse answer type implied by the SELECT clause.

    One of ``numeric``, ``name``, ``title``, ``id``, or ``mixed``; used by the
    failure analysis to spot format violations.
    """
    query = parse_sql(sql) if isinstance(sql, str) else sql

    def kind_of(expr: Expr) -> str:
        if isinstance(expr, Aggregate):
            if expr.func in ("COUNT", "SUM", "AVG"):
                return "numeric"
            return kind_of(expr.arg) if expr.arg is not None else "numeric"
        if isinstance(expr, Column):
            if expr.name in _NUMERIC_COLUMNS:
                return "numeric"
            if expr.name == "author_name":
                return "name"
            if expr.name == "article_title":
                return "title"
            return "id"
        if isinstance(expr, (Literal, Unary, Binary)):
            return "numeric"
        return "numeric"

    if not query.select_items:
        return "mixed"
    kinds = {kind_of(item) for item in query.select_items}
    return kinds.pop() if len(kinds) == 1 else "mixed"
