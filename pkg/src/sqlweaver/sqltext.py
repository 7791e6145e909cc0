"""Tokenizer and lightweight structural analysis for SQLite-dialect SQL.

This is not a full grammar. It tokenizes a statement, segments it into
query scopes (outer query, subqueries, compound-select arms), tracks which
clause each token sits in, and extracts the pieces the engine needs:
FROM-clause table bindings, literal comparisons in WHERE/HAVING, select-list
items, join predicates, and aggregate calls. Rewrites are done by splicing
character spans so untouched SQL survives byte-for-byte.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .errors import SqlParseError

NAME = "name"
QNAME = "qname"  # `x`, [x] — always an identifier
DQUOTED = "dquoted"  # "x" — identifier, or string literal as SQLite fallback
STRING = "string"
NUMBER = "number"
OP = "op"
PUNCT = "punct"

COMPARISON_OPS = {"=", "==", "!=", "<>", "<", ">", "<=", ">="}
EQUALITY_OPS = {"=", "==", "!=", "<>"}

_CLAUSE_KEYWORDS = {
    "SELECT": "select",
    "FROM": "from",
    "WHERE": "where",
    "GROUP": "group",
    "HAVING": "having",
    "ORDER": "order",
    "LIMIT": "limit",
    "OFFSET": "limit",
}
_SET_OPS = {"UNION", "INTERSECT", "EXCEPT"}
_JOIN_WORDS = {"JOIN", "LEFT", "RIGHT", "FULL", "INNER", "OUTER", "CROSS", "NATURAL"}
_NON_ALIAS_WORDS = (
    _JOIN_WORDS
    | _SET_OPS
    | {"ON", "USING", "AS", "WHERE", "GROUP", "HAVING", "ORDER", "LIMIT", "OFFSET", "AND", "OR", "NOT"}
)
_WRITE_VERBS = {
    "INSERT", "UPDATE", "DELETE", "REPLACE", "CREATE", "DROP", "ALTER",
    "PRAGMA", "ATTACH", "DETACH", "VACUUM", "REINDEX", "ANALYZE", "BEGIN",
    "COMMIT", "ROLLBACK", "SAVEPOINT", "RELEASE",
}
AGGREGATE_NAMES = {"count", "sum", "avg", "min", "max", "total"}

_NUMBER_RE = re.compile(r"0[xX][0-9a-fA-F]+|(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?")
_NAME_RE = re.compile(r"[A-Za-z_][A-Za-z_0-9$]*")


@dataclass
class Token:
    kind: str
    text: str
    start: int
    end: int

    def upper(self) -> str:
        return self.text.upper()


def tokenize(sql: str) -> list[Token]:
    """Tokenize a statement; whitespace and comments are dropped.

    Raises SqlParseError on unterminated strings/comments or characters
    outside the dialect.
    """
    tokens: list[Token] = []
    i, n = 0, len(sql)
    while i < n:
        c = sql[i]
        if c.isspace():
            i += 1
            continue
        if c == "-" and sql.startswith("--", i):
            nl = sql.find("\n", i)
            i = n if nl < 0 else nl + 1
            continue
        if c == "/" and sql.startswith("/*", i):
            close = sql.find("*/", i + 2)
            if close < 0:
                raise SqlParseError("unterminated block comment")
            i = close + 2
            continue
        if c == "'" or c == '"':
            j = i + 1
            while True:
                j = sql.find(c, j)
                if j < 0:
                    raise SqlParseError(f"unterminated {c}-quoted token")
                if sql.startswith(c * 2, j):
                    j += 2
                    continue
                break
            kind = STRING if c == "'" else DQUOTED
            tokens.append(Token(kind, sql[i : j + 1], i, j + 1))
            i = j + 1
            continue
        if c == "`" or c == "[":
            closer = "`" if c == "`" else "]"
            j = sql.find(closer, i + 1)
            if j < 0:
                raise SqlParseError("unterminated quoted identifier")
            tokens.append(Token(QNAME, sql[i : j + 1], i, j + 1))
            i = j + 1
            continue
        m = _NUMBER_RE.match(sql, i)
        if m and (c.isdigit() or (c == "." and i + 1 < n and sql[i + 1].isdigit())):
            tokens.append(Token(NUMBER, m.group(), i, m.end()))
            i = m.end()
            continue
        m = _NAME_RE.match(sql, i)
        if m:
            tokens.append(Token(NAME, m.group(), i, m.end()))
            i = m.end()
            continue
        for op in ("<>", "<=", ">=", "==", "!=", "||"):
            if sql.startswith(op, i):
                tokens.append(Token(OP, op, i, i + 2))
                i += 2
                break
        else:
            if c in "=<>+-*/%&|~":
                tokens.append(Token(OP, c, i, i + 1))
                i += 1
            elif c in "(),.;?":
                tokens.append(Token(PUNCT, c, i, i + 1))
                i += 1
            else:
                raise SqlParseError(f"unexpected character {c!r} at offset {i}")
    if not tokens:
        raise SqlParseError("empty statement")
    return tokens


def unquote_ident(text: str) -> str:
    if len(text) >= 2 and text[0] in "\"`[" :
        return text[1:-1].replace(text[0] * 2, text[0]) if text[0] != "[" else text[1:-1]
    return text


def unquote_string(text: str) -> str:
    q = text[0]
    return text[1:-1].replace(q * 2, q)


def quote_string(value: str) -> str:
    return "'" + value.replace("'", "''") + "'"


def render_literal(value: object) -> str:
    """Render a Python value back into SQL literal syntax."""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, (int, float)):
        return repr(value)
    return quote_string(str(value))


def literal_value(token: Token) -> object:
    if token.kind == NUMBER:
        text = token.text
        if text.lower().startswith("0x"):
            return int(text, 16)
        if re.fullmatch(r"\d+", text):
            return int(text)
        return float(text)
    if token.kind == STRING:
        return unquote_string(token.text)
    if token.kind == DQUOTED:
        return unquote_ident(token.text)
    raise SqlParseError(f"not a literal token: {token.text}")


# --- scope / clause segmentation -------------------------------------------


@dataclass
class Scope:
    """One SELECT query: the outer statement, a subquery, or a compound arm."""

    id: int
    parent: int | None
    base_depth: int
    tables: list[tuple[str | None, str | None]] = field(default_factory=list)
    # (real table name or None for derived tables, alias or None)


@dataclass
class Analysis:
    tokens: list[Token]
    scopes: list[Scope]
    token_scope: list[int]
    token_clause: list[str | None]
    token_depth: list[int]

    def scope_chain(self, scope_id: int) -> list[Scope]:
        chain = []
        current: int | None = scope_id
        while current is not None and current >= 0:
            scope = self.scopes[current]
            chain.append(scope)
            current = scope.parent
        return chain


def analyze(sql: str) -> Analysis:
    """Tokenize and segment a statement into scopes and clauses."""
    tokens = tokenize(sql)
    scopes: list[Scope] = []
    token_scope = [-1] * len(tokens)
    token_clause: list[str | None] = [None] * len(tokens)
    token_depth = [0] * len(tokens)

    scope_stack: list[Scope] = []
    clause_stack: list[str | None] = []
    # paren stack entries: True when the paren opened a subquery scope
    paren_scope: list[bool] = []
    pending_sibling_parent: tuple[int | None, int] | None = None

    def current_scope() -> Scope | None:
        return scope_stack[-1] if scope_stack else None

    for i, tok in enumerate(tokens):
        depth = len(paren_scope)
        scope = current_scope()

        if tok.kind == PUNCT and tok.text == "(":
            token_depth[i] = depth
            token_scope[i] = scope.id if scope else -1
            token_clause[i] = clause_stack[-1] if clause_stack else None
            paren_scope.append(False)
            continue
        if tok.kind == PUNCT and tok.text == ")":
            if paren_scope:
                opened = paren_scope.pop()
                if opened and scope_stack:
                    scope_stack.pop()
                    clause_stack.pop()
            depth = len(paren_scope)
            scope = current_scope()
            token_depth[i] = depth
            token_scope[i] = scope.id if scope else -1
            token_clause[i] = clause_stack[-1] if clause_stack else None
            continue

        if tok.kind == NAME:
            up = tok.upper()
            if up == "SELECT":
                prev = tokens[i - 1] if i > 0 else None
                starts_subquery = prev is not None and prev.kind == PUNCT and prev.text == "("
                if starts_subquery:
                    parent = scope.id if scope else None
                    new = Scope(id=len(scopes), parent=parent, base_depth=depth)
                    scopes.append(new)
                    scope_stack.append(new)
                    clause_stack.append("select")
                    paren_scope[-1] = True
                elif pending_sibling_parent is not None and scope is not None and depth == scope.base_depth:
                    # compound arm: replace the finished arm at the same level
                    parent, base = pending_sibling_parent
                    scope_stack.pop()
                    clause_stack.pop()
                    new = Scope(id=len(scopes), parent=parent, base_depth=base)
                    scopes.append(new)
                    scope_stack.append(new)
                    clause_stack.append("select")
                    pending_sibling_parent = None
                elif scope is None or depth == 0 and scope.base_depth != 0:
                    new = Scope(id=len(scopes), parent=None, base_depth=depth)
                    scopes.append(new)
                    scope_stack.append(new)
                    clause_stack.append("select")
                else:
                    clause_stack[-1] = "select"
                scope = current_scope()
                token_depth[i] = depth
                token_scope[i] = scope.id if scope else -1
                token_clause[i] = "select"
                continue
            if up in _SET_OPS and scope is not None and depth == scope.base_depth:
                pending_sibling_parent = (scope.parent, scope.base_depth)
            elif up in _CLAUSE_KEYWORDS and scope is not None and depth == scope.base_depth:
                clause_stack[-1] = _CLAUSE_KEYWORDS[up]

        token_depth[i] = depth
        token_scope[i] = scope.id if scope else -1
        token_clause[i] = clause_stack[-1] if clause_stack else None

    analysis = Analysis(tokens, scopes, token_scope, token_clause, token_depth)
    for scope in scopes:
        scope.tables = _from_tables(analysis, scope)
    return analysis


def _from_tables(a: Analysis, scope: Scope) -> list[tuple[str | None, str | None]]:
    tables: list[tuple[str | None, str | None]] = []
    expecting = False  # a table item may start here
    in_on = False
    i = 0
    toks = a.tokens
    while i < len(toks):
        if a.token_scope[i] != scope.id or a.token_clause[i] != "from":
            i += 1
            continue
        tok = toks[i]
        at_base = a.token_depth[i] == scope.base_depth
        if not at_base:
            i += 1
            continue
        if tok.kind == NAME:
            up = tok.upper()
            if up == "FROM" or up == "JOIN":
                expecting, in_on = True, False
                i += 1
                continue
            if up in _JOIN_WORDS:
                i += 1
                continue
            if up == "ON":
                in_on, expecting = True, False
                i += 1
                continue
            if up == "USING":
                i += 1
                continue
            if expecting and not in_on:
                name = unquote_ident(tok.text)
                alias = None
                j = i + 1
                # schema-qualified: keep the table part
                if j + 1 < len(toks) and toks[j].text == "." and toks[j + 1].kind in (NAME, QNAME, DQUOTED):
                    name = unquote_ident(toks[j + 1].text)
                    j += 2
                if j < len(toks) and toks[j].kind == NAME and toks[j].upper() == "AS":
                    j += 1
                if (
                    j < len(toks)
                    and a.token_scope[j] == scope.id
                    and a.token_clause[j] == "from"
                    and a.token_depth[j] == scope.base_depth
                    and toks[j].kind in (NAME, QNAME, DQUOTED)
                    and toks[j].upper() not in _NON_ALIAS_WORDS
                ):
                    alias = unquote_ident(toks[j].text)
                    j += 1
                tables.append((name, alias))
                expecting = False
                i = j
                continue
        elif tok.kind in (QNAME, DQUOTED) and expecting and not in_on:
            tables.append((unquote_ident(tok.text), None))
            expecting = False
            i += 1
            continue
        elif tok.kind == PUNCT and tok.text == ",":
            expecting, in_on = True, False
            i += 1
            continue
        elif tok.kind == PUNCT and tok.text == "(" and expecting:
            # derived table: find its alias after the matching close paren
            close = _matching_paren(a, i)
            j = close + 1
            if j < len(toks) and toks[j].kind == NAME and toks[j].upper() == "AS":
                j += 1
            alias = None
            if j < len(toks) and toks[j].kind in (NAME, QNAME, DQUOTED) and toks[j].upper() not in _NON_ALIAS_WORDS:
                alias = unquote_ident(toks[j].text)
                j += 1
            tables.append((None, alias))
            expecting = False
            i = j
            continue
        i += 1
    return tables


def _matching_paren(a: Analysis, open_idx: int) -> int:
    depth = 0
    for j in range(open_idx, len(a.tokens)):
        t = a.tokens[j]
        if t.kind == PUNCT and t.text == "(":
            depth += 1
        elif t.kind == PUNCT and t.text == ")":
            depth -= 1
            if depth == 0:
                return j
    raise SqlParseError("unbalanced parentheses")


# --- literal comparisons -----------------------------------------------------


@dataclass
class LiteralComparison:
    """column <op> literal (or flipped) inside a WHERE/HAVING clause."""

    qualifier: str | None
    column: str
    op: str
    value: object
    scope_id: int
    clause: str
    column_span: tuple[int, int]  # char offsets of the column reference
    literal_span: tuple[int, int]  # char offsets of the literal
    literal_is_dquoted: bool = False
    flipped: bool = False


def _column_ref_before(tokens: list[Token], op_idx: int) -> tuple[str | None, str, tuple[int, int]] | None:
    i = op_idx - 1
    if i < 0:
        return None
    col_tok = tokens[i]
    if col_tok.kind not in (NAME, QNAME, DQUOTED):
        return None
    if col_tok.kind == NAME and col_tok.upper() in _NON_ALIAS_WORDS:
        return None
    qualifier = None
    start = col_tok.start
    if i >= 2 and tokens[i - 1].text == "." and tokens[i - 2].kind in (NAME, QNAME, DQUOTED):
        qualifier = unquote_ident(tokens[i - 2].text)
        start = tokens[i - 2].start
    elif i >= 1 and tokens[i - 1].text == ".":
        return None
    return qualifier, unquote_ident(col_tok.text), (start, col_tok.end)


def _column_ref_after(tokens: list[Token], op_idx: int) -> tuple[str | None, str, tuple[int, int]] | None:
    i = op_idx + 1
    if i >= len(tokens):
        return None
    tok = tokens[i]
    if tok.kind not in (NAME, QNAME, DQUOTED):
        return None
    if tok.kind == NAME and tok.upper() in _NON_ALIAS_WORDS:
        return None
    if i + 2 < len(tokens) and tokens[i + 1].text == "." and tokens[i + 2].kind in (NAME, QNAME, DQUOTED):
        return unquote_ident(tok.text), unquote_ident(tokens[i + 2].text), (tok.start, tokens[i + 2].end)
    # a bare name followed by "(" is a function call, not a column
    if i + 1 < len(tokens) and tokens[i + 1].text == "(":
        return None
    return None, unquote_ident(tok.text), (tok.start, tok.end)


def _is_literal(tok: Token) -> bool:
    return tok.kind in (STRING, NUMBER, DQUOTED)


def find_literal_comparisons(a: Analysis) -> list[LiteralComparison]:
    """All column-vs-literal comparisons in WHERE/HAVING clauses, any depth.

    LIKE patterns never appear here (LIKE is a word, not a comparison
    operator) and literals in SELECT output are excluded by clause.
    """
    out: list[LiteralComparison] = []
    toks = a.tokens
    for i, tok in enumerate(toks):
        if tok.kind != OP or tok.text not in COMPARISON_OPS:
            continue
        if a.token_clause[i] not in ("where", "having"):
            continue
        left = toks[i - 1] if i > 0 else None
        right = toks[i + 1] if i + 1 < len(toks) else None
        if right is not None and _is_literal(right):
            # careful: "a.b" = ... leaves b as a NAME; literal right side decides
            ref = _column_ref_before(toks, i)
            if ref and not (right.kind == DQUOTED and toks[min(i + 2, len(toks) - 1)].text == "."):
                qualifier, column, span = ref
                out.append(
                    LiteralComparison(
                        qualifier, column, tok.text, literal_value(right),
                        a.token_scope[i], a.token_clause[i] or "where",
                        span, (right.start, right.end),
                        literal_is_dquoted=right.kind == DQUOTED,
                    )
                )
                continue
        if left is not None and _is_literal(left) and left.kind != DQUOTED:
            ref = _column_ref_after(toks, i)
            if ref:
                qualifier, column, span = ref
                out.append(
                    LiteralComparison(
                        qualifier, column, tok.text, literal_value(left),
                        a.token_scope[i], a.token_clause[i] or "where",
                        span, (left.start, left.end),
                        flipped=True,
                    )
                )
    return out


# --- statement-level helpers -------------------------------------------------


def truncate_at_semicolon(text: str) -> str:
    """Cut raw text at the first statement terminator outside quotes."""
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c in ("'", '"', "`"):
            j = text.find(c, i + 1)
            if j < 0:
                break
            i = j + 1
            continue
        if c == ";":
            return text[:i]
        i += 1
    return text


def statement_kind(sql: str) -> str:
    """Top-level verb of the statement; sees through WITH prefixes."""
    tokens = tokenize(sql)
    depth = 0
    first: str | None = None
    for tok in tokens:
        if tok.kind == PUNCT and tok.text == "(":
            depth += 1
        elif tok.kind == PUNCT and tok.text == ")":
            depth -= 1
        elif tok.kind == NAME and depth == 0:
            up = tok.upper()
            if first is None:
                first = up
                if up != "WITH" and up != "EXPLAIN":
                    return up
                continue
            if up in _WRITE_VERBS or up in ("SELECT", "VALUES"):
                return up
    return first or ""


def is_read_only(sql: str) -> bool:
    try:
        return statement_kind(sql) in ("SELECT", "VALUES")
    except SqlParseError:
        return False


def has_top_level_order_by(sql: str) -> bool:
    try:
        tokens = tokenize(sql)
    except SqlParseError:
        return False
    depth = 0
    for tok in tokens:
        if tok.kind == PUNCT and tok.text == "(":
            depth += 1
        elif tok.kind == PUNCT and tok.text == ")":
            depth -= 1
        elif depth == 0 and tok.kind == NAME and tok.upper() == "ORDER":
            return True
    return False


def replace_spans(sql: str, replacements: list[tuple[int, int, str]]) -> str:
    """Splice replacement texts into the statement by character span."""
    out = []
    last = 0
    for start, end, text in sorted(replacements):
        if start < last:
            raise ValueError("overlapping replacements")
        out.append(sql[last:start])
        out.append(text)
        last = end
    out.append(sql[last:])
    return "".join(out)


# --- pieces used by the perturbation oracle ----------------------------------


def select_item_spans(a: Analysis, scope_id: int = 0) -> list[tuple[int, int]]:
    """Character spans of the top-level select-list expressions of a scope."""
    scope = a.scopes[scope_id]
    items: list[tuple[int, int]] = []
    start: int | None = None
    end: int | None = None
    seen_clause = False
    for i, tok in enumerate(a.tokens):
        in_clause = a.token_scope[i] == scope_id and a.token_clause[i] == "select"
        if not in_clause:
            if seen_clause and start is not None and a.token_depth[i] > scope.base_depth:
                end = tok.end  # subquery inside a select item
                continue
            if seen_clause:
                break  # the select list of this scope is over
            continue
        seen_clause = True
        at_base = a.token_depth[i] == scope.base_depth
        if tok.kind == NAME and at_base and tok.upper() in ("SELECT", "DISTINCT", "ALL") and start is None:
            continue
        if tok.kind == PUNCT and tok.text == "," and at_base:
            if start is not None and end is not None:
                items.append((start, end))
            start = end = None
            continue
        if start is None:
            start = tok.start
        end = tok.end
    if start is not None and end is not None:
        items.append((start, end))
    return items


def join_condition_span(a: Analysis) -> tuple[int, int] | None:
    """Span of the first ``ON <predicate>`` of the outermost query, ON included."""
    for scope in a.scopes:
        if scope.parent is not None:
            continue
        on_start: int | None = None
        on_end: int | None = None
        for i, tok in enumerate(a.tokens):
            if a.token_scope[i] != scope.id or a.token_clause[i] != "from":
                if on_start is not None and a.token_depth[i] > scope.base_depth:
                    on_end = tok.end
                    continue
                if on_start is not None:
                    break
                continue
            at_base = a.token_depth[i] == scope.base_depth
            if on_start is None:
                if at_base and tok.kind == NAME and tok.upper() == "ON":
                    on_start = tok.start
                    on_end = tok.end
                continue
            if at_base and tok.kind == NAME and tok.upper() in (_JOIN_WORDS | {"ON"}):
                break
            if at_base and tok.kind == PUNCT and tok.text == ",":
                break
            on_end = tok.end
        if on_start is not None and on_end is not None:
            return on_start, on_end
    return None


def aggregate_call_span(a: Analysis) -> tuple[int, int, str] | None:
    """(start, end, name) of the first aggregate function name in a select list."""
    for i, tok in enumerate(a.tokens):
        if tok.kind != NAME or a.token_clause[i] != "select":
            continue
        if tok.text.lower() not in AGGREGATE_NAMES:
            continue
        if i + 1 < len(a.tokens) and a.tokens[i + 1].text == "(":
            return tok.start, tok.end, tok.text.lower()
    return None
