"""Recursive-descent parser producing `nodes.Select` trees."""

from __future__ import annotations

from ..errors import SqlSyntaxError
from .nodes import (
    Between, Binary, Case, Cast, ColumnRef, Exists, FuncCall, InList,
    InSelect, IsNull, Join, Like, Literal, OrderingTerm, Select, SelectCore,
    SelectItem, Star, SubqueryExpr, SubquerySource, TableRef, Unary,
)
from .tokens import Token, tokenize

_COMPOUND_OPS = ("UNION", "INTERSECT", "EXCEPT")
_JOIN_INTRO = ("JOIN", "INNER", "LEFT", "RIGHT", "FULL", "CROSS")
# keywords that end an expression / select item when seen bare
_CLAUSE_BOUNDARY = frozenset({
    "FROM", "WHERE", "GROUP", "HAVING", "ORDER", "LIMIT", "OFFSET", "ON",
    "AND", "OR", "NOT", "IN", "BETWEEN", "LIKE", "GLOB", "IS", "AS", "ASC",
    "DESC", "JOIN", "INNER", "LEFT", "RIGHT", "FULL", "CROSS", "UNION",
    "INTERSECT", "EXCEPT", "WHEN", "THEN", "ELSE", "END", "ESCAPE", "USING",
})


def parse(sql: str) -> Select:
    """Parse a single SELECT-form statement (trailing semicolon tolerated)."""
    tokens = tokenize(sql)
    parser = _Parser(tokens, sql)
    stmt = parser.select_statement()
    parser.skip_semicolons()
    tok = parser.peek()
    if tok.kind != "EOF":
        raise SqlSyntaxError(tok.start, f"unexpected input {tok.value!r} after statement")
    return stmt


class _Parser:
    def __init__(self, tokens: list[Token], source: str):
        self.tokens = tokens
        self.source = source
        self.pos = 0

    # --- token plumbing ---

    def peek(self, ahead: int = 0) -> Token:
        i = min(self.pos + ahead, len(self.tokens) - 1)
        return self.tokens[i]

    def advance(self) -> Token:
        tok = self.tokens[self.pos]
        if tok.kind != "EOF":
            self.pos += 1
        return tok

    def at_keyword(self, *names: str) -> bool:
        return self.peek().keyword() in names

    def take_keyword(self, *names: str) -> str | None:
        kw = self.peek().keyword()
        if kw in names:
            self.advance()
            return kw
        return None

    def expect_keyword(self, name: str) -> None:
        if not self.take_keyword(name):
            tok = self.peek()
            raise SqlSyntaxError(tok.start, f"expected {name}, found {tok.value or 'end of input'!r}")

    def at_sym(self, sym: str) -> bool:
        tok = self.peek()
        return tok.kind == "SYM" and tok.value == sym

    def take_sym(self, sym: str) -> bool:
        if self.at_sym(sym):
            self.advance()
            return True
        return False

    def expect_sym(self, sym: str) -> None:
        if not self.take_sym(sym):
            tok = self.peek()
            raise SqlSyntaxError(tok.start, f"expected {sym!r}, found {tok.value or 'end of input'!r}")

    def skip_semicolons(self) -> None:
        while self.take_sym(";"):
            pass

    def _span_start(self) -> int:
        return self.peek().start

    def _close_span(self, node: object, start: int) -> object:
        end = self.tokens[self.pos - 1].end if self.pos > 0 else start
        node.span = (start, end)
        return node

    # --- statements ---

    def select_statement(self) -> Select:
        cores = [self.select_core()]
        ops: list[str] = []
        while self.at_keyword(*_COMPOUND_OPS):
            op = self.advance().keyword()
            if op == "UNION" and self.take_keyword("ALL"):
                op = "UNION ALL"
            ops.append(op)
            cores.append(self.select_core())
        order_by: list[OrderingTerm] = []
        if self.take_keyword("ORDER"):
            self.expect_keyword("BY")
            order_by.append(self.ordering_term())
            while self.take_sym(","):
                order_by.append(self.ordering_term())
        limit = offset = None
        if self.take_keyword("LIMIT"):
            limit = self.expression()
            if self.take_keyword("OFFSET"):
                offset = self.expression()
            elif self.take_sym(","):
                # LIMIT a, b means OFFSET a LIMIT b
                offset, limit = limit, self.expression()
        return Select(cores=cores, compound_ops=ops, order_by=order_by,
                      limit=limit, offset=offset)

    def select_core(self) -> SelectCore:
        self.expect_keyword("SELECT")
        distinct = bool(self.take_keyword("DISTINCT"))
        if not distinct:
            self.take_keyword("ALL")
        items = [self.select_item()]
        while self.take_sym(","):
            items.append(self.select_item())
        core = SelectCore(items=items, distinct=distinct)
        if self.take_keyword("FROM"):
            core.source = self.table_source()
            core.joins = self.join_clauses()
        if self.take_keyword("WHERE"):
            core.where = self.expression()
        if self.take_keyword("GROUP"):
            self.expect_keyword("BY")
            core.group_by.append(self.expression())
            while self.take_sym(","):
                core.group_by.append(self.expression())
        if self.take_keyword("HAVING"):
            core.having = self.expression()
        return core

    def select_item(self) -> SelectItem:
        if self.at_sym("*"):
            self.advance()
            return SelectItem(expr=Star())
        # table.* form
        tok = self.peek()
        if tok.kind == "IDENT" and tok.keyword() is None:
            if self.peek(1).kind == "SYM" and self.peek(1).value == "." \
                    and self.peek(2).kind == "SYM" and self.peek(2).value == "*":
                self.advance()
                self.advance()
                self.advance()
                return SelectItem(expr=Star(table=tok.value))
        expr = self.expression()
        alias = None
        if self.take_keyword("AS"):
            alias = self.name_token("alias")
        else:
            nxt = self.peek()
            if nxt.kind == "IDENT" and (nxt.quoted or nxt.value.upper() not in _CLAUSE_BOUNDARY):
                alias = self.advance().value
        return SelectItem(expr=expr, alias=alias)

    def name_token(self, what: str) -> str:
        tok = self.peek()
        if tok.kind != "IDENT":
            raise SqlSyntaxError(tok.start, f"expected {what}, found {tok.value or 'end of input'!r}")
        return self.advance().value

    # --- from clause ---

    def table_source(self):
        if self.take_sym("("):
            if self.at_keyword("SELECT"):
                sub = self.select_statement()
                self.expect_sym(")")
                return SubquerySource(select=sub, alias=self.optional_alias())
            tok = self.peek()
            raise SqlSyntaxError(tok.start, "expected subquery after '(' in FROM")
        name = self.name_token("table name")
        return TableRef(name=name, alias=self.optional_alias())

    def optional_alias(self) -> str | None:
        if self.take_keyword("AS"):
            return self.name_token("alias")
        tok = self.peek()
        if tok.kind == "IDENT" and (tok.quoted or tok.value.upper() not in _CLAUSE_BOUNDARY):
            return self.advance().value
        return None

    def join_clauses(self) -> list[Join]:
        joins: list[Join] = []
        while True:
            if self.take_sym(","):
                joins.append(Join(kind=",", source=self.table_source()))
                continue
            if not self.at_keyword(*_JOIN_INTRO):
                break
            kind_words = []
            kw = self.advance().keyword()
            kind_words.append(kw)
            if kw in ("LEFT", "RIGHT", "FULL"):
                if self.take_keyword("OUTER"):
                    kind_words.append("OUTER")
                self.expect_keyword("JOIN")
                kind_words.append("JOIN")
            elif kw in ("INNER", "CROSS"):
                self.expect_keyword("JOIN")
                kind_words.append("JOIN")
            source = self.table_source()
            on = None
            if self.take_keyword("ON"):
                on = self.expression()
            joins.append(Join(kind=" ".join(kind_words), source=source, on=on))
        return joins

    def ordering_term(self) -> OrderingTerm:
        expr = self.expression()
        direction = self.take_keyword("ASC", "DESC")
        return OrderingTerm(expr=expr, direction=direction)

    # --- expressions (precedence from loosest to tightest) ---

    def expression(self):
        return self.or_expr()

    def or_expr(self):
        start = self._span_start()
        node = self.and_expr()
        while self.take_keyword("OR"):
            node = Binary("OR", node, self.and_expr())
            self._close_span(node, start)
        return node

    def and_expr(self):
        start = self._span_start()
        node = self.not_expr()
        while self.take_keyword("AND"):
            node = Binary("AND", node, self.not_expr())
            self._close_span(node, start)
        return node

    def not_expr(self):
        start = self._span_start()
        if self.take_keyword("NOT"):
            node = Unary("NOT", self.not_expr())
            return self._close_span(node, start)
        return self.predicate()

    def predicate(self):
        start = self._span_start()
        node = self.arith()
        tok = self.peek()
        if tok.kind == "SYM" and tok.value in ("=", "==", "!=", "<>", "<", "<=", ">", ">="):
            self.advance()
            node = Binary(tok.value, node, self.arith())
            return self._close_span(node, start)
        negated = False
        if self.at_keyword("NOT") and self.peek(1).keyword() in ("IN", "BETWEEN", "LIKE", "GLOB"):
            self.advance()
            negated = True
        if self.take_keyword("BETWEEN"):
            low = self.arith()
            self.expect_keyword("AND")
            high = self.arith()
            return self._close_span(Between(node, low, high, negated=negated), start)
        if self.take_keyword("IN"):
            self.expect_sym("(")
            if self.at_keyword("SELECT"):
                sub = self.select_statement()
                self.expect_sym(")")
                return self._close_span(InSelect(node, sub, negated=negated), start)
            items = []
            if not self.at_sym(")"):
                items.append(self.expression())
                while self.take_sym(","):
                    items.append(self.expression())
            self.expect_sym(")")
            return self._close_span(InList(node, items, negated=negated), start)
        kw = self.take_keyword("LIKE", "GLOB")
        if kw:
            pattern = self.arith()
            escape = None
            if self.take_keyword("ESCAPE"):
                escape = self.arith()
            return self._close_span(
                Like(node, pattern, op=kw, escape=escape, negated=negated), start)
        if self.take_keyword("IS"):
            is_not = bool(self.take_keyword("NOT"))
            if self.take_keyword("NULL"):
                return self._close_span(IsNull(node, negated=is_not), start)
            right = self.arith()
            op = "IS NOT" if is_not else "IS"
            return self._close_span(Binary(op, node, right), start)
        return node

    def arith(self):
        start = self._span_start()
        node = self.term()
        while True:
            tok = self.peek()
            if tok.kind == "SYM" and tok.value in ("+", "-", "||"):
                self.advance()
                node = Binary(tok.value, node, self.term())
                self._close_span(node, start)
            else:
                return node

    def term(self):
        start = self._span_start()
        node = self.factor()
        while True:
            tok = self.peek()
            if tok.kind == "SYM" and tok.value in ("*", "/", "%"):
                self.advance()
                node = Binary(tok.value, node, self.factor())
                self._close_span(node, start)
            else:
                return node

    def factor(self):
        start = self._span_start()
        tok = self.peek()
        if tok.kind == "SYM" and tok.value in ("-", "+"):
            self.advance()
            node = Unary(tok.value, self.factor())
            return self._close_span(node, start)
        return self.primary()

    def primary(self):
        start = self._span_start()
        tok = self.peek()

        if tok.kind == "NUMBER":
            self.advance()
            text = tok.value
            value = float(text) if any(c in text for c in ".eE") else int(text)
            return self._close_span(Literal(value), start)
        if tok.kind == "STRING":
            self.advance()
            return self._close_span(Literal(tok.value), start)

        kw = tok.keyword()
        if kw == "NULL":
            self.advance()
            return self._close_span(Literal(None), start)
        if kw == "EXISTS":
            self.advance()
            self.expect_sym("(")
            sub = self.select_statement()
            self.expect_sym(")")
            return self._close_span(Exists(sub), start)
        if kw == "CASE":
            return self.case_expr()
        if kw == "CAST":
            self.advance()
            self.expect_sym("(")
            inner = self.expression()
            self.expect_keyword("AS")
            type_parts = [self.name_token("type name")]
            while self.peek().kind == "IDENT" and not self.at_sym(")"):
                type_parts.append(self.advance().value)
            self.expect_sym(")")
            return self._close_span(Cast(inner, " ".join(type_parts)), start)

        if self.take_sym("("):
            if self.at_keyword("SELECT"):
                sub = self.select_statement()
                self.expect_sym(")")
                return self._close_span(SubqueryExpr(sub), start)
            inner = self.expression()
            self.expect_sym(")")
            return inner

        if tok.kind == "IDENT":
            # function call: IDENT immediately followed by "("
            if self.peek(1).kind == "SYM" and self.peek(1).value == "(":
                return self.func_call()
            self.advance()
            if self.take_sym("."):
                column = self.name_token("column name")
                return self._close_span(ColumnRef(tok.value, column), start)
            return self._close_span(ColumnRef(None, tok.value), start)

        raise SqlSyntaxError(
            tok.start,
            f"expected expression, found {tok.value!r}" if tok.kind != "EOF"
            else "expected expression, found end of input")

    def func_call(self):
        start = self._span_start()
        name = self.advance().value
        self.expect_sym("(")
        if self.take_sym("*"):
            self.expect_sym(")")
            return self._close_span(FuncCall(name, star=True), start)
        distinct = bool(self.take_keyword("DISTINCT"))
        args = []
        if not self.at_sym(")"):
            args.append(self.expression())
            while self.take_sym(","):
                args.append(self.expression())
        self.expect_sym(")")
        return self._close_span(FuncCall(name, args=args, distinct=distinct), start)

    def case_expr(self):
        start = self._span_start()
        self.expect_keyword("CASE")
        operand = None
        if not self.at_keyword("WHEN"):
            operand = self.expression()
        whens = []
        while self.take_keyword("WHEN"):
            cond = self.expression()
            self.expect_keyword("THEN")
            whens.append((cond, self.expression()))
        if not whens:
            tok = self.peek()
            raise SqlSyntaxError(tok.start, "CASE requires at least one WHEN arm")
        default = None
        if self.take_keyword("ELSE"):
            default = self.expression()
        self.expect_keyword("END")
        return self._close_span(Case(operand, whens, default), start)
