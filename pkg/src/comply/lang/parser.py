"""Recursive-descent parsers for constraint and scenario files.

Both parsers are total: any input yields either a parse tree or positioned
diagnostics, never an exception. On error, no partial results are returned.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Callable, Optional

from .lexer import Token, tokenize
from .nodes import (
    And,
    Arith,
    AttrRef,
    Comparison,
    ConstraintSpec,
    ContextRule,
    Diagnostic,
    FactDecl,
    Literal,
    MODALITIES,
    Not,
    Or,
    PriorityAnswer,
    RelevanceAnswer,
    RunParams,
    ScenarioSpec,
    SetEvent,
    SpawnEvent,
    TeachAnswer,
    VocabEntry,
    expr_attr_refs,
)

MAX_EXPR_DEPTH = 200

VOCAB_KINDS = ("attribute", "type", "context")


@dataclass
class ParseResult:
    """Constraint-file parse: specs on success, diagnostics on failure."""

    specs: list = field(default_factory=list)
    diagnostics: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not any(d.severity == "error" for d in self.diagnostics)


@dataclass
class ScenarioResult:
    spec: Optional[ScenarioSpec] = None
    diagnostics: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not any(d.severity == "error" for d in self.diagnostics)


class ParseError(Exception):
    """Internal signal: a diagnostic was recorded and recovery should start."""


class _Parser:
    def __init__(self, source: str, file: Optional[str] = None):
        self.tokens = tokenize(source)
        self.pos = 0
        self.file = file
        self.diagnostics: list = []

    # ── token plumbing ────────────────────────────────────────────

    def peek(self, offset=0) -> Token:
        i = min(self.pos + offset, len(self.tokens) - 1)
        return self.tokens[i]

    def next(self) -> Token:
        tok = self.tokens[self.pos]
        if tok.kind != "EOF":
            self.pos += 1
        return tok

    def at(self, kind: str, text: Optional[str] = None) -> bool:
        tok = self.peek()
        return tok.kind == kind and (text is None or tok.text == text)

    def at_kw(self, word: str) -> bool:
        return self.at("IDENT", word)

    def error(self, tok: Token, message: str):
        self.diagnostics.append(Diagnostic("error", tok.line, tok.column, message, self.file))

    def warn(self, tok: Token, message: str):
        self.diagnostics.append(Diagnostic("warning", tok.line, tok.column, message, self.file))

    def fail(self, tok: Token, message: str):
        self.error(tok, message)
        raise ParseError()

    def expect(self, kind: str, what: str) -> Token:
        tok = self.peek()
        if tok.kind == "ERROR":
            self.fail(tok, tok.value)
        if tok.kind != kind:
            self.fail(tok, f"expected {what}, found {tok.text!r}" if tok.text else f"expected {what}")
        return self.next()

    def expect_kw(self, word: str) -> Token:
        tok = self.peek()
        if not self.at_kw(word):
            self.fail(tok, f"expected keyword '{word}', found {tok.text!r}")
        return self.next()

    # ── expressions ───────────────────────────────────────────────

    def parse_expr(self, depth=0):
        if depth > MAX_EXPR_DEPTH:
            self.fail(self.peek(), "expression too deeply nested")
        tok = self.peek()
        if tok.kind == "IDENT" and tok.text in ("and", "or", "not") and self.peek(1).kind == "LPAREN":
            self.next()
            self.expect("LPAREN", "'('")
            items = [self.parse_expr(depth + 1)]
            while self.at("COMMA"):
                self.next()
                items.append(self.parse_expr(depth + 1))
            self.expect("RPAREN", "')'")
            if tok.text == "not":
                if len(items) != 1:
                    self.fail(tok, "not(...) takes exactly one argument")
                return Not(items[0])
            node = And if tok.text == "and" else Or
            return node(tuple(items))
        left = self.parse_term(depth)
        op_tok = self.peek()
        ops = {"LT": "<", "LE": "<=", "EQ": "=", "NE": "!=", "GE": ">=", "GT": ">"}
        if op_tok.kind not in ops:
            self.fail(op_tok, "expected comparison operator")
        self.next()
        right = self.parse_term(depth)
        return Comparison(ops[op_tok.kind], left, right)

    def parse_term(self, depth=0):
        if depth > MAX_EXPR_DEPTH:
            self.fail(self.peek(), "expression too deeply nested")
        left = self.parse_product(depth)
        while self.at("PLUS") or self.at("MINUS"):
            op = self.next().text
            right = self.parse_product(depth)
            left = Arith(op, left, right)
        return left

    def parse_product(self, depth):
        left = self.parse_atom(depth)
        while self.at("STAR"):
            self.next()
            right = self.parse_atom(depth)
            left = Arith("*", left, right)
        return left

    def parse_atom(self, depth):
        tok = self.peek()
        if tok.kind == "LPAREN":
            self.next()
            inner = self.parse_term(depth + 1)
            self.expect("RPAREN", "')'")
            return inner
        if tok.kind == "MINUS":
            self.next()
            num = self.peek()
            if num.kind not in ("INT", "DECIMAL"):
                self.fail(num, "expected a number after unary '-'")
            self.next()
            return Literal(-num.value)
        if tok.kind in ("INT", "DECIMAL"):
            self.next()
            return Literal(tok.value)
        if tok.kind == "IDENT":
            self.next()
            if tok.text in ("true", "false"):
                return Literal(tok.text == "true")
            if self.at("DOT"):
                self.next()
                attr = self.expect("IDENT", "attribute name")
                return AttrRef(tok.text, attr.text)
            return Literal(tok.text)  # bare symbol
        if tok.kind == "ERROR":
            self.fail(tok, tok.value)
        self.fail(tok, f"expected a term, found {tok.text!r}" if tok.text else "expected a term")

    # ── literal values (facts, events) ────────────────────────────

    def parse_value(self):
        tok = self.peek()
        if tok.kind == "MINUS":
            self.next()
            num = self.peek()
            if num.kind not in ("INT", "DECIMAL"):
                self.fail(num, "expected a number after '-'")
            self.next()
            return -num.value
        if tok.kind in ("INT", "DECIMAL"):
            self.next()
            return tok.value
        if tok.kind == "IDENT":
            self.next()
            if tok.text == "true":
                return True
            if tok.text == "false":
                return False
            return tok.text
        if tok.kind == "ERROR":
            self.fail(tok, tok.value)
        self.fail(tok, f"expected a value, found {tok.text!r}" if tok.text else "expected a value")


CONSTRAINT_FIELDS = ("modality", "context", "priority", "scope", "when", "holds")


class ConstraintParser(_Parser):
    def parse_file(self) -> ParseResult:
        specs = []
        ids_seen = {}
        while not self.at("EOF"):
            tok = self.peek()
            if tok.kind == "ERROR":
                self.error(tok, tok.value)
                self.next()
                self._sync_to_constraint()
                continue
            if not self.at_kw("constraint"):
                self.error(tok, f"unknown keyword {tok.text!r}, expected 'constraint'")
                self.next()
                self._sync_to_constraint()
                continue
            try:
                spec = self.parse_constraint(ids_seen)
                if spec is not None:
                    specs.append(spec)
            except ParseError:
                self._sync_to_constraint()
        result = ParseResult(specs=specs, diagnostics=self.diagnostics)
        if not result.ok:
            result.specs = []
        return result

    def _sync_to_constraint(self):
        depth = 0
        while not self.at("EOF"):
            tok = self.peek()
            if tok.kind == "LBRACE":
                depth += 1
            elif tok.kind == "RBRACE":
                if depth == 0:
                    self.next()
                    return
                depth -= 1
            elif tok.kind == "IDENT" and tok.text == "constraint" and depth == 0:
                return
            self.next()

    def parse_constraint(self, ids_seen) -> Optional[ConstraintSpec]:
        self.expect_kw("constraint")
        id_tok = self.expect("IDENT", "constraint id")
        if id_tok.text in ids_seen:
            self.error(id_tok, f"duplicate constraint id '{id_tok.text}'")
        ids_seen[id_tok.text] = id_tok
        self.expect("LBRACE", "'{'")

        seen = {}
        modality = None
        context_tags: list = []
        priority = None
        scope: list = []
        when = None
        holds = None

        while not self.at("RBRACE"):
            tok = self.peek()
            if tok.kind == "EOF":
                self.fail(tok, "unbalanced block: missing '}'")
            if tok.kind != "IDENT" or tok.text not in CONSTRAINT_FIELDS:
                self.fail(tok, f"unknown keyword {tok.text!r} in constraint block")
            if tok.text in seen:
                self.fail(tok, f"duplicate field '{tok.text}'")
            seen[tok.text] = tok
            self.next()
            self.expect("COLON", "':'")
            if tok.text == "modality":
                m = self.expect("IDENT", "modality keyword")
                if m.text not in MODALITIES:
                    self.fail(m, f"modality must be one of {', '.join(MODALITIES)}")
                modality = m.text
            elif tok.text == "context":
                context_tags.append(self.expect("IDENT", "context tag").text)
                while self.at("COMMA"):
                    self.next()
                    context_tags.append(self.expect("IDENT", "context tag").text)
            elif tok.text == "priority":
                neg = False
                if self.at("MINUS"):
                    self.next()
                    neg = True
                p = self.expect("INT", "integer priority")
                priority = -p.value if neg else p.value
            elif tok.text == "scope":
                scope.append(self._parse_scope_entry())
                while self.at("COMMA"):
                    self.next()
                    scope.append(self._parse_scope_entry())
            elif tok.text == "when":
                when = self.parse_expr()
            elif tok.text == "holds":
                holds = self.parse_expr()
        self.expect("RBRACE", "'}'")

        ok = True
        if modality is None:
            self.error(id_tok, f"constraint '{id_tok.text}' is missing a modality")
            ok = False
        if holds is None:
            self.error(id_tok, f"constraint '{id_tok.text}' is missing a holds clause")
            ok = False

        bound = {var for var, _ in scope}
        dup_vars = [v for i, (v, _) in enumerate(scope) if v in {s for s, _ in scope[:i]}]
        for v in dup_vars:
            self.error(id_tok, f"scope variable '{v}' bound more than once")
            ok = False
        for expr in (when, holds):
            if expr is None:
                continue
            for ref in sorted(expr_attr_refs(expr), key=lambda r: (r.var, r.attr)):
                if ref.var not in bound:
                    self.error(id_tok, f"unbound variable {ref.var}")
                    ok = False
        if not ok:
            return None
        return ConstraintSpec(
            id=id_tok.text,
            modality=modality,
            context_tags=tuple(context_tags),
            priority=priority,
            scope=tuple(scope),
            when=when,
            holds=holds,
        )

    def _parse_scope_entry(self):
        var = self.expect("IDENT", "scope variable")
        self.expect("COLON", "':'")
        typ = self.expect("IDENT", "entity type")
        return (var.text, typ.text)


SCENARIO_BLOCKS = (
    "environment",
    "constraints",
    "facts",
    "hidden",
    "events",
    "contexts",
    "vocab",
    "values",
    "instructor",
    "run",
)


class ScenarioParser(_Parser):
    def __init__(self, source, file=None, loader: Optional[Callable] = None):
        super().__init__(source, file)
        self.loader = loader

    def parse_file(self) -> ScenarioResult:
        environment = None
        env_tok = None
        facts: list = []
        hidden: list = []
        events: list = []
        contexts: list = []
        constraint_files: list = []
        vocab: list = []
        values: list = []
        instructor: list = []
        run: Optional[RunParams] = None
        seen_blocks = {}
        fact_keys = {}
        entity_types = {}

        while not self.at("EOF"):
            tok = self.peek()
            if tok.kind == "ERROR":
                self.error(tok, tok.value)
                self.next()
                continue
            if tok.kind != "IDENT" or tok.text not in SCENARIO_BLOCKS:
                self.error(tok, f"unknown keyword {tok.text!r} at top level of scenario")
                self.next()
                self._sync_top()
                continue
            if tok.text in seen_blocks and tok.text != "constraints":
                self.error(tok, f"duplicate '{tok.text}' block")
                self.next()
                self._sync_top()
                continue
            seen_blocks[tok.text] = tok
            try:
                if tok.text == "environment":
                    self.next()
                    env_tok = self.expect("IDENT", "environment kind")
                    if env_tok.text not in ("sudoku", "driving"):
                        self.error(env_tok, f"unknown environment '{env_tok.text}'")
                    else:
                        environment = env_tok.text
                elif tok.text == "constraints":
                    self.next()
                    self.expect_kw("file")
                    path = self.expect("STRING", "quoted file path")
                    constraint_files.append(path)
                elif tok.text == "facts":
                    self.next()
                    self._parse_facts(facts, fact_keys, entity_types)
                elif tok.text == "hidden":
                    self.next()
                    self._parse_hidden(hidden)
                elif tok.text == "events":
                    self.next()
                    self._parse_events(events, entity_types)
                elif tok.text == "contexts":
                    self.next()
                    self._parse_contexts(contexts)
                elif tok.text == "vocab":
                    self.next()
                    self._parse_vocab(vocab)
                elif tok.text == "values":
                    self.next()
                    self._parse_values(values)
                elif tok.text == "instructor":
                    self.next()
                    self._parse_instructor(instructor)
                elif tok.text == "run":
                    self.next()
                    run = self._parse_run()
            except ParseError:
                self._sync_top()

        if environment is None:
            anchor = env_tok or self.peek()
            self.error(anchor, "scenario must declare an environment (sudoku or driving)")
        if run is None:
            self.error(self.peek(), "missing run parameters (run block with maxTicks and seed)")

        constraints = self._load_constraint_files(constraint_files)
        result = ScenarioResult(diagnostics=self.diagnostics)
        if result.ok:
            result.spec = ScenarioSpec(
                environment=environment,
                facts=tuple(facts),
                hidden=tuple(hidden),
                events=tuple(events),
                context_rules=tuple(contexts),
                constraint_files=tuple(t.value for t in constraint_files),
                constraints=tuple(constraints),
                vocab=tuple(vocab),
                values=tuple(values),
                instructor=tuple(instructor),
                run=run,
                source_path=self.file,
            )
        return result

    def _sync_top(self):
        depth = 0
        while not self.at("EOF"):
            tok = self.peek()
            if tok.kind == "LBRACE":
                depth += 1
            elif tok.kind == "RBRACE":
                depth -= 1
                if depth <= 0:
                    self.next()
                    return
            elif depth == 0 and tok.kind == "IDENT" and tok.text in SCENARIO_BLOCKS:
                return
            self.next()

    def _block_entries(self, parse_entry):
        self.expect("LBRACE", "'{'")
        while not self.at("RBRACE"):
            if self.at("EOF"):
                self.fail(self.peek(), "unbalanced block: missing '}'")
            parse_entry()
        self.next()

    def _parse_facts(self, facts, fact_keys, entity_types):
        def entry():
            ent = self.expect("IDENT", "entity id")
            self.expect("COLON", "':'")
            typ = self.expect("IDENT", "entity type")
            if ent.text in entity_types and entity_types[ent.text] != typ.text:
                self.error(ent, f"entity '{ent.text}' declared with conflicting types")
            entity_types[ent.text] = typ.text
            attrs = []
            self.expect("LBRACE", "'{'")
            while not self.at("RBRACE"):
                if self.at("EOF"):
                    self.fail(self.peek(), "unbalanced block: missing '}'")
                name = self.expect("IDENT", "attribute name")
                self.expect("EQ", "'='")
                value = self.parse_value()
                key = (ent.text, name.text)
                if key in fact_keys:
                    self.error(name, f"duplicate fact {ent.text}.{name.text}")
                fact_keys[key] = name
                attrs.append((name.text, value))
                if self.at("COMMA"):
                    self.next()
            self.next()
            facts.append(FactDecl(ent.text, typ.text, tuple(attrs)))

        self._block_entries(entry)

    def _parse_hidden(self, hidden):
        def entry():
            ent = self.expect("IDENT", "entity id")
            self.expect("DOT", "'.'")
            attr = self.expect("IDENT", "attribute name")
            pair = (ent.text, attr.text)
            if pair in hidden:
                self.warn(ent, f"duplicate hidden entry {ent.text}.{attr.text}")
            else:
                hidden.append(pair)

        self._block_entries(entry)

    def _parse_events(self, events, entity_types):
        set_targets = {}
        spawn_targets = {}

        def entry():
            self.expect_kw("at")
            tick_tok = self.expect("INT", "tick number")
            self.expect("COLON", "':'")
            verb = self.expect("IDENT", "'set' or 'spawn'")
            if verb.text == "set":
                ent = self.expect("IDENT", "entity id")
                self.expect("DOT", "'.'")
                attr = self.expect("IDENT", "attribute name")
                self.expect("EQ", "'='")
                value = self.parse_value()
                key = (tick_tok.value, ent.text, attr.text)
                if key in set_targets:
                    self.error(
                        tick_tok,
                        f"duplicate event at tick {tick_tok.value} targeting {ent.text}.{attr.text}",
                    )
                set_targets[key] = tick_tok
                events.append(SetEvent(tick_tok.value, ent.text, attr.text, value))
            elif verb.text == "spawn":
                ent = self.expect("IDENT", "entity id")
                self.expect("COLON", "':'")
                typ = self.expect("IDENT", "entity type")
                attrs = []
                self.expect("LBRACE", "'{'")
                while not self.at("RBRACE"):
                    if self.at("EOF"):
                        self.fail(self.peek(), "unbalanced block: missing '}'")
                    name = self.expect("IDENT", "attribute name")
                    self.expect("EQ", "'='")
                    value = self.parse_value()
                    attrs.append((name.text, value))
                    if self.at("COMMA"):
                        self.next()
                self.next()
                if ent.text in spawn_targets or ent.text in entity_types:
                    self.error(ent, f"entity '{ent.text}' spawned more than once or already declared")
                spawn_targets[ent.text] = ent
                events.append(SpawnEvent(tick_tok.value, ent.text, typ.text, tuple(attrs)))
            else:
                self.fail(verb, f"expected 'set' or 'spawn', found {verb.text!r}")

        self._block_entries(entry)

    def _parse_contexts(self, contexts):
        def entry():
            self.expect_kw("rule")
            tag = self.expect("IDENT", "context tag")
            self.expect_kw("when")
            cond = self.parse_expr()
            bad_vars = sorted({r.var for r in expr_attr_refs(cond) if r.var != "self"})
            for v in bad_vars:
                self.error(tag, f"context rule '{tag.text}' may reference only 'self', found '{v}'")
            if not bad_vars:
                contexts.append(ContextRule(tag.text, cond))

        self._block_entries(entry)

    def _parse_vocab_entry(self):
        self.expect_kw("term")
        ext = self.expect("IDENT", "external term")
        self.expect("ARROW", "'->'")
        kind = self.expect("IDENT", "mapping kind")
        if kind.text not in VOCAB_KINDS:
            self.fail(kind, f"mapping kind must be one of {', '.join(VOCAB_KINDS)}")
        internal = self.expect("IDENT", "internal name")
        return ext.text, kind.text, internal.text

    def _parse_vocab(self, vocab):
        seen = {}

        def entry():
            ext, kind, internal = self._parse_vocab_entry()
            if ext in seen:
                self.error(self.peek(), f"duplicate vocabulary entry for '{ext}'")
            seen[ext] = True
            vocab.append(VocabEntry(ext, kind, internal))

        self._block_entries(entry)

    def _parse_values(self, values):
        seen = {}

        def entry():
            cid = self.expect("IDENT", "constraint id")
            self.expect("COLON", "':'")
            neg = False
            if self.at("MINUS"):
                self.next()
                neg = True
            p = self.expect("INT", "integer priority")
            if cid.text in seen:
                self.error(cid, f"duplicate value entry for '{cid.text}'")
            seen[cid.text] = True
            values.append((cid.text, -p.value if neg else p.value))

        self._block_entries(entry)

    def _parse_instructor(self, instructor):
        def entry():
            verb = self.expect("IDENT", "'teach', 'priority' or 'relevance'")
            if verb.text == "teach":
                ext, kind, internal = self._parse_vocab_entry()
                instructor.append(TeachAnswer(ext, kind, internal))
            elif verb.text == "priority":
                a = self.expect("IDENT", "constraint id")
                self.expect_kw("vs")
                b = self.expect("IDENT", "constraint id")
                self.expect("EQ", "'='")
                w = self.expect("IDENT", "winning constraint id")
                if w.text not in (a.text, b.text):
                    self.fail(w, f"priority answer winner '{w.text}' is not one of the compared ids")
                instructor.append(PriorityAnswer(a.text, b.text, w.text))
            elif verb.text == "relevance":
                cid = self.expect("IDENT", "constraint id")
                self.expect_kw("in")
                tag = self.expect("IDENT", "context tag")
                self.expect("EQ", "'='")
                ans = self.expect("IDENT", "'yes' or 'no'")
                if ans.text not in ("yes", "no"):
                    self.fail(ans, f"relevance answer must be 'yes' or 'no', found {ans.text!r}")
                instructor.append(RelevanceAnswer(cid.text, tag.text, ans.text == "yes"))
            else:
                self.fail(verb, f"unknown instructor entry {verb.text!r}")

        self._block_entries(entry)

    def _parse_run(self) -> RunParams:
        fields = {}
        anchor = self.peek()
        self.expect("LBRACE", "'{'")
        known = ("maxTicks", "seed", "staleness", "searchDepth", "groundingLimit")
        while not self.at("RBRACE"):
            if self.at("EOF"):
                self.fail(self.peek(), "unbalanced block: missing '}'")
            name = self.expect("IDENT", "run parameter name")
            if name.text not in known:
                self.fail(name, f"unknown run parameter {name.text!r}")
            self.expect("EQ", "'='")
            v = self.expect("INT", "integer value")
            if name.text in fields:
                self.error(name, f"duplicate run parameter '{name.text}'")
            fields[name.text] = (v.value, name)
        self.next()

        if "maxTicks" not in fields:
            self.error(anchor, "missing run parameters: maxTicks is required")
        elif fields["maxTicks"][0] < 1:
            self.error(fields["maxTicks"][1], "maxTicks must be ≥ 1")
        if "seed" not in fields:
            self.error(anchor, "missing run parameters: seed is required")
        return RunParams(
            max_ticks=fields.get("maxTicks", (1, None))[0],
            seed=fields.get("seed", (0, None))[0],
            staleness=fields.get("staleness", (5, None))[0],
            search_depth=fields.get("searchDepth", (3, None))[0],
            grounding_limit=fields.get("groundingLimit", (500, None))[0],
        )

    def _load_constraint_files(self, path_tokens) -> list:
        constraints = []
        ids_seen = {}
        for tok in path_tokens:
            source = None
            if self.loader is not None:
                source = self.loader(tok.value)
            if source is None:
                self.error(tok, f"cannot read constraint file '{tok.value}'")
                continue
            sub = ConstraintParser(source, file=tok.value).parse_file()
            self.diagnostics.extend(sub.diagnostics)
            for spec in sub.specs:
                if spec.id in ids_seen:
                    self.error(tok, f"duplicate constraint id '{spec.id}' across files")
                    continue
                ids_seen[spec.id] = tok.value
                constraints.append(spec)
        return constraints


def parse_constraint_file(source: str, file: Optional[str] = None) -> ParseResult:
    return ConstraintParser(source, file=file).parse_file()


def file_loader(base_dir: str) -> Callable:
    def load(path: str) -> Optional[str]:
        full = path if os.path.isabs(path) else os.path.join(base_dir, path)
        try:
            with open(full, "r", encoding="utf-8") as fh:
                return fh.read()
        except OSError:
            return None

    return load


def parse_scenario_file(
    source: str,
    file: Optional[str] = None,
    loader: Optional[Callable] = None,
) -> ScenarioResult:
    """Parse a scenario, loading referenced constraint files through `loader`.

    When no loader is given, paths resolve relative to the scenario file's
    directory (or the current directory for in-memory sources).
    """
    if loader is None:
        base = os.path.dirname(file) if file else "."
        loader = file_loader(base)
    return ScenarioParser(source, file=file, loader=loader).parse_file()


def load_scenario(path: str) -> ScenarioResult:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            source = fh.read()
    except OSError as exc:
        return ScenarioResult(
            diagnostics=[Diagnostic("error", 1, 1, f"cannot read scenario file '{path}': {exc}", path)]
        )
    return parse_scenario_file(source, file=path)
