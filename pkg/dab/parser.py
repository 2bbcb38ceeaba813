"""
Structured-text reader and writer for models, properties and catalog instances.

Document grammar (``#`` starts a comment):

    sorts      { id S; value V; value N = 1..100; value F = {a, b}; case C; }
    constants  { a, b : V; }
    catalog    { R(k: S, a: V); }
    repository { R(x: S, y: V) key(x); }
    casevars   { x, y : V; self : C; }
    updates    { U { pre Head(x: S, y) <- body or body; eff EFFECT; } }
    process Name [attr, attr=value, attr=(condition)] { children }
    property   { i: body; j: body; }
    instance   { R(c1, v1); }

Identifiers that are declared constants, carrier values, integers, ``undef``,
``true`` or ``false`` read as constants; every other identifier is a variable.
"""
import logging
import re
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Set, Tuple

from dab.errors import ParseError
from dab.model import (
    LIFECYCLE_STATES, UNDEF,
    And, Assignment, Atom, Attribute, Block, BlockKind, CaseVar, CondBranch, CondUpdate,
    Condition, Constant, DabModel, DataSchema, DeleteSet, Eq, Fact, Guard, HeadVar,
    InsertSet, Item, LifecycleIs, Not, OneOf, Placement, Property, Query, RelationSchema,
    Sort, SortKind, Term, TrueCond, TypeEnv, UpdateSpec, Variable,
)

logger = logging.getLogger(__name__)

_TOKEN = re.compile(r"""
    (?P<ws>[ \t\r]+|\#[^\n]*)
  | (?P<nl>\n)
  | (?P<int>-?\d+)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*(?:-[A-Za-z_][A-Za-z0-9_]*)*)
  | (?P<sym><-|\.\.|!=|<=|>=|[{}()\[\],;:=<>])
""", re.VERBOSE)

_KINDS = {kind.value: kind for kind in BlockKind}
_COMPARISONS = ("<", "<=", ">", ">=")


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    column: int


def tokenize(text: str) -> List[Token]:
    tokens: List[Token] = []
    line, line_start, pos = 1, 0, 0
    while pos < len(text):
        match = _TOKEN.match(text, pos)
        if match is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = match.lastgroup
        if kind == "nl":
            line += 1
            line_start = match.end()
        elif kind != "ws":
            tokens.append(Token(kind, match.group(), line, match.start() - line_start + 1))
        pos = match.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


@dataclass
class _Compare:
    """Comparison waiting for the sort of its term before desugaring"""
    term: Term
    op: str
    bound: int
    token: Token


class _Parser:
    def __init__(self, text: str, schema: Optional[DataSchema] = None,
                 block_names: Optional[Set[str]] = None):
        self.tokens = tokenize(text)
        self.pos = 0
        self.schema = schema
        self.block_names = block_names or set()
        self._constants = self.constant_names()

    # -- token helpers -----------------------------------------------------

    @property
    def tok(self) -> Token:
        return self.tokens[self.pos]

    def peek(self, offset: int = 1) -> Token:
        return self.tokens[min(self.pos + offset, len(self.tokens) - 1)]

    def error(self, message: str, token: Optional[Token] = None) -> ParseError:
        token = token or self.tok
        return ParseError(message, token.line, token.column)

    def at(self, *texts: str) -> bool:
        return self.tok.kind in ("name", "sym") and self.tok.text in texts

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.pos += 1
            return True
        return False

    def expect(self, text: str) -> Token:
        if not self.at(text):
            found = self.tok.text or "end of input"
            raise self.error(f"expected '{text}', found '{found}'")
        token = self.tok
        self.pos += 1
        return token

    def name(self, what: str = "identifier") -> str:
        if self.tok.kind != "name":
            raise self.error(f"expected {what}, found '{self.tok.text or 'end of input'}'")
        text = self.tok.text
        self.pos += 1
        return text

    def value(self) -> str:
        if self.tok.kind not in ("name", "int"):
            raise self.error(f"expected a value, found '{self.tok.text or 'end of input'}'")
        text = self.tok.text
        self.pos += 1
        return text

    def separated(self, parse_item, closer: str, sep: str = ","):
        items = []
        if self.at(closer):
            return items
        items.append(parse_item())
        while self.accept(sep):
            items.append(parse_item())
        return items

    # -- schema sections ---------------------------------------------------

    def sorts(self) -> List[Sort]:
        result = []
        self.expect("{")
        while not self.accept("}"):
            kind_token = self.tok
            kind_text = self.name("sort kind")
            if kind_text not in ("id", "value", "case"):
                raise self.error(f"unknown sort kind '{kind_text}'", kind_token)
            name = self.name("sort name")
            carrier = None
            if self.accept("="):
                if kind_text != "value":
                    raise self.error("only value sorts may declare a carrier")
                carrier = self.carrier()
            self.expect(";")
            result.append(Sort(name, SortKind(kind_text), carrier))
        return result

    def carrier(self) -> Tuple[str, ...]:
        if self.tok.kind == "int":
            return self.int_range()
        self.expect("{")
        values: List[str] = []
        while not self.accept("}"):
            if self.tok.kind == "int" and self.peek().text == "..":
                values.extend(self.int_range())
            else:
                values.append(self.value())
            if not self.at("}"):
                self.expect(",")
        return tuple(dict.fromkeys(values))

    def int_range(self) -> Tuple[str, ...]:
        start_token = self.tok
        low = int(self.value())
        self.expect("..")
        high = int(self.value())
        if high < low:
            raise self.error(f"empty range {low}..{high}", start_token)
        return tuple(str(v) for v in range(low, high + 1))

    def constants(self) -> List[Tuple[str, str]]:
        result = []
        self.expect("{")
        while not self.accept("}"):
            names = self.separated(self.value, ":")
            self.expect(":")
            sort = self.name("sort name")
            self.expect(";")
            result.extend((name, sort) for name in names)
        return result

    def relations(self, placement: Placement) -> List[RelationSchema]:
        result = []
        self.expect("{")
        while not self.accept("}"):
            name = self.name("relation name")
            self.expect("(")
            attributes = self.separated(self.attribute, ")")
            self.expect(")")
            key = None
            if self.at("key"):
                if placement != Placement.REPOSITORY:
                    raise self.error("only repository relations declare a key")
                self.pos += 1
                self.expect("(")
                key = tuple(self.separated(self.name, ")"))
                self.expect(")")
            self.expect(";")
            result.append(RelationSchema(name, tuple(attributes), placement, key))
        return result

    def attribute(self) -> Attribute:
        name = self.name("attribute name")
        self.expect(":")
        return Attribute(name, self.name("sort name"))

    def case_vars(self) -> List[CaseVar]:
        result = []
        self.expect("{")
        while not self.accept("}"):
            names = self.separated(self.name, ":")
            self.expect(":")
            sort = self.name("sort name")
            self.expect(";")
            result.extend(CaseVar(name, sort) for name in names)
        return result

    # -- terms, conditions, queries ----------------------------------------

    def constant_names(self) -> Set[str]:
        names = {UNDEF, "true", "false"}
        if self.schema is not None:
            names.update(name for name, _ in self.schema.constants)
            for s in self.schema.all_sorts():
                names.update(s.carrier or ())
        return names

    def term(self) -> Term:
        if self.tok.kind == "int":
            return Constant(self.value())
        text = self.name("term")
        if text in self._constants:
            return Constant(text)
        return Variable(text)

    def condition(self) -> Condition:
        """Block-level condition: items joined by ``and`` into a left-nested And"""
        items = [self.item(allow_atoms=False)]
        while self.accept("and"):
            items.append(self.item(allow_atoms=False))
        items = self.desugar(items, {})
        cond = items[0]
        for item in items[1:]:
            cond = And(cond, item)
        return cond

    def item(self, allow_atoms: bool = True):
        start = self.tok
        if self.accept("true"):
            return TrueCond()
        if self.accept("not"):
            if self.at("("):
                self.pos += 1
                inner = self.condition()
                self.expect(")")
                return Not(inner)
            inner = self.item(allow_atoms)
            if isinstance(inner, Atom):
                return Atom(inner.relation, inner.terms, not inner.negated)
            if isinstance(inner, _Compare):
                raise self.error("negated comparisons must be parenthesized", start)
            return Not(inner)
        if self.accept("("):
            inner = self.condition()
            self.expect(")")
            return inner
        if self.tok.kind == "name" and self.peek().text == "(":
            if not allow_atoms:
                raise self.error("relational atoms are not allowed in gateway conditions")
            relation = self.name()
            self.expect("(")
            terms = self.separated(self.term, ")")
            self.expect(")")
            return Atom(relation, tuple(terms))
        if (self.tok.kind == "name" and self.tok.text in self.block_names
                and self.peek().text == "=" and self.peek(2).text in LIFECYCLE_STATES):
            block = self.name()
            self.expect("=")
            return LifecycleIs(block, self.name())
        left = self.term()
        if self.accept("="):
            return Eq(left, self.term())
        if self.accept("!="):
            return Not(Eq(left, self.term()))
        if self.accept("in"):
            return OneOf(left, frozenset(self.carrier()))
        if self.at(*_COMPARISONS):
            op = self.tok.text
            self.pos += 1
            bound_token = self.tok
            if bound_token.kind != "int":
                raise self.error("comparisons need an integer bound")
            return _Compare(left, op, int(self.value()), bound_token)
        raise self.error(f"expected a condition after '{left}'")

    def query(self, annotations: Dict[str, str]) -> Query:
        items = [self.item()]
        while self.accept("and"):
            items.append(self.item())
        return Query(tuple(self.desugar(items, annotations)))

    def body(self, annotations: Dict[str, str]) -> Tuple[Query, ...]:
        queries = [self.query(annotations)]
        while self.accept("or"):
            queries.append(self.query(annotations))
        return tuple(queries)

    def desugar(self, items: list, annotations: Dict[str, str]) -> list:
        if not any(isinstance(i, _Compare) for i in items):
            return items
        env = None
        if self.schema is not None:
            env = TypeEnv(self.schema, annotations).infer(
                [i for i in items if not isinstance(i, _Compare)])
        return [self.desugar_compare(i, env) if isinstance(i, _Compare) else i for i in items]

    def desugar_compare(self, cmp: _Compare, env: Optional[TypeEnv]) -> OneOf:
        sort = env.term_sort(cmp.term) if env is not None else None
        if sort is None and self.schema is not None:
            numeric = [s.name for s in self.schema.all_sorts()
                       if s.numeric and str(cmp.bound) in s.carrier]
            if len(numeric) == 1:
                sort = numeric[0]
        s = self.schema.sort(sort) if (self.schema is not None and sort) else None
        if s is None or not s.numeric:
            raise self.error(f"cannot compare '{cmp.term}': no finite numeric sort", cmp.token)
        tests = {
            "<": lambda v: v < cmp.bound,
            "<=": lambda v: v <= cmp.bound,
            ">": lambda v: v > cmp.bound,
            ">=": lambda v: v >= cmp.bound,
        }
        return OneOf(cmp.term, frozenset(v for v in s.carrier if tests[cmp.op](int(v))))

    # -- updates -----------------------------------------------------------

    def update_specs(self) -> List[UpdateSpec]:
        result = []
        self.expect("{")
        while not self.accept("}"):
            name = self.name("update name")
            self.expect("{")
            self.expect("pre")
            guard = self.guard()
            self.expect(";")
            eff = None
            if self.accept("eff"):
                if not self.accept("none"):
                    eff = self.effect()
                self.expect(";")
            self.expect("}")
            result.append(UpdateSpec(name, guard, eff))
        return result

    def guard(self) -> Guard:
        name = self.name("guard name")
        head: List[HeadVar] = []
        if self.accept("("):
            head = self.separated(self.head_var, ")")
            self.expect(")")
        self.expect("<-")
        annotations = {h.name: h.sort for h in head if h.sort}
        return Guard(name, tuple(head), self.body(annotations))

    def head_var(self) -> HeadVar:
        name = self.name("answer variable")
        sort = self.name("sort name") if self.accept(":") else None
        return HeadVar(name, sort)

    def effect(self):
        if self.accept("set"):
            return InsertSet(None, None, tuple(self.assignments()))
        if self.accept("insert"):
            values = self.tuple_terms()
            self.expect("into")
            relation = self.name("relation name")
            assignments = self.assignments() if self.accept("set") else []
            return InsertSet(values, relation, tuple(assignments))
        if self.accept("delete"):
            values = self.tuple_terms()
            self.expect("from")
            relation = self.name("relation name")
            assignments = self.assignments() if self.accept("set") else []
            return DeleteSet(values, relation, tuple(assignments))
        if self.accept("update"):
            relation = self.name("relation name")
            self.expect("(")
            variables = tuple(self.separated(self.name, ")"))
            self.expect(")")
            if not self.at("if"):
                raise self.error("conditional update needs an if branch")
            annotations = {}
            rel = self.schema.relation(relation) if self.schema is not None else None
            if rel is not None and rel.arity == len(variables):
                annotations = dict(zip(variables, rel.sorts))
            return CondUpdate(relation, variables, self.branch(annotations))
        raise self.error(f"expected an effect, found '{self.tok.text or 'end of input'}'")

    def branch(self, annotations: Dict[str, str]):
        if self.accept("if"):
            filt = self.body(annotations)
            self.expect("then")
            then = self.branch(annotations)
            self.expect("else")
            return CondBranch(filt, then, self.branch(annotations))
        relation = self.name("relation name")
        return Atom(relation, self.tuple_terms())

    def tuple_terms(self) -> Tuple[Term, ...]:
        self.expect("(")
        terms = self.separated(self.term, ")")
        self.expect(")")
        return tuple(terms)

    def assignments(self) -> List[Assignment]:
        def one() -> Assignment:
            var = self.name("case variable")
            self.expect("=")
            return Assignment(var, self.term())
        return self.separated(one, ";", ",")

    # -- blocks ------------------------------------------------------------

    def block(self) -> Block:
        kind_token = self.tok
        kind_text = self.name("block kind")
        if kind_text not in _KINDS:
            raise self.error(f"unknown block kind '{kind_text}'", kind_token)
        name = self.name("block name")
        attributes = []
        if self.accept("["):
            attributes = self.separated(self.block_attribute, "]")
            self.expect("]")
        children = []
        if self.accept("{"):
            while not self.accept("}"):
                children.append(self.block())
        return Block(_KINDS[kind_text], name, tuple(attributes), tuple(children))

    def block_attribute(self):
        key = self.name("attribute")
        if not self.accept("="):
            return key, True
        if self.accept("("):
            cond = self.condition()
            self.expect(")")
            return key, cond
        return key, self.value()

    # -- properties and instances ------------------------------------------

    def property(self) -> Property:
        indexes, guards = [], []
        self.expect("{")
        while not self.accept("}"):
            indexes.append(self.name("index"))
            self.expect(":")
            guards.append(self.body({}))
            self.expect(";")
        return Property(tuple(indexes), tuple(guards))

    def facts(self) -> List[Fact]:
        result = []
        self.expect("{")
        while not self.accept("}"):
            relation = self.name("relation name")
            self.expect("(")
            values = self.separated(self.value, ")")
            self.expect(")")
            self.expect(";")
            result.append(Fact(relation, tuple(values)))
        return result

    # -- documents ---------------------------------------------------------

    def model(self) -> DabModel:
        sorts: List[Sort] = []
        constants: List[Tuple[str, str]] = []
        catalog: List[RelationSchema] = []
        repository: List[RelationSchema] = []
        case_vars: List[CaseVar] = []
        updates: List[UpdateSpec] = []
        root = None
        seen: Set[str] = set()
        while self.tok.kind != "eof":
            token = self.tok
            section = self.name("section")
            if section in seen:
                raise self.error(f"section '{section}' given twice", token)
            seen.add(section)
            if section == "sorts":
                sorts = self.sorts()
            elif section == "constants":
                constants = self.constants()
            elif section == "catalog":
                catalog = self.relations(Placement.CATALOG)
            elif section == "repository":
                repository = self.relations(Placement.REPOSITORY)
            elif section == "casevars":
                case_vars = self.case_vars()
            elif section == "updates":
                self.schema = DataSchema(tuple(sorts), tuple(constants), tuple(catalog),
                                         tuple(repository), tuple(case_vars))
                self._constants = self.constant_names()
                updates = self.update_specs()
            elif section == BlockKind.PROCESS.value:
                self.schema = DataSchema(tuple(sorts), tuple(constants), tuple(catalog),
                                         tuple(repository), tuple(case_vars))
                self._constants = self.constant_names()
                self.pos -= 1
                root = self.block()
            else:
                raise self.error(f"unknown section '{section}'", token)
        if root is None:
            raise self.error("model has no process block")
        data = DataSchema(tuple(sorts), tuple(constants), tuple(catalog),
                          tuple(repository), tuple(case_vars))
        return DabModel(data, tuple(updates), root)


def parse_model(text: str) -> DabModel:
    return _Parser(text).model()


def parse_property(text: str, model: DabModel) -> Property:
    """Parse a document holding a single ``property { ... }`` section"""
    parser = _Parser(text, model.data, {b.name for b in model.blocks()})
    parser._constants = parser.constant_names()
    parser.expect("property")
    prop = parser.property()
    if parser.tok.kind != "eof":
        raise parser.error("trailing input after property")
    return prop


def parse_facts(text: str) -> List[Fact]:
    """Parse a catalog document holding an ``instance { ... }`` section"""
    parser = _Parser(text)
    parser.expect("instance")
    facts = parser.facts()
    if parser.tok.kind != "eof":
        raise parser.error("trailing input after instance")
    return facts


def parse_condition(text: str, schema: DataSchema) -> Condition:
    parser = _Parser(text, schema)
    parser._constants = parser.constant_names()
    cond = parser.condition()
    if parser.tok.kind != "eof":
        raise parser.error("trailing input after condition")
    return cond


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------

def _sorted_values(values) -> List[str]:
    if all(v.lstrip("-").isdigit() for v in values):
        return [str(v) for v in sorted(int(v) for v in values)]
    return sorted(values)


def render_values(values, keep_order: bool = False) -> str:
    ordered = [str(v) for v in values] if keep_order else _sorted_values(values)
    if len(ordered) > 2 and all(v.lstrip("-").isdigit() for v in ordered):
        parts, run = [], [int(ordered[0])]
        for v in (int(x) for x in ordered[1:]):
            if v == run[-1] + 1:
                run.append(v)
                continue
            parts.append(run)
            run = [v]
        parts.append(run)
        rendered = [f"{r[0]}..{r[-1]}" if len(r) > 2 else ", ".join(map(str, r)) for r in parts]
        return "{" + ", ".join(rendered) + "}"
    return "{" + ", ".join(ordered) + "}"


def render_item(item: Item) -> str:
    if isinstance(item, Atom):
        text = f"{item.relation}({', '.join(map(str, item.terms))})"
        return f"not {text}" if item.negated else text
    if isinstance(item, Eq):
        return f"{item.left} = {item.right}"
    if isinstance(item, Not):
        if isinstance(item.body, Eq):
            return f"{item.body.left} != {item.body.right}"
        return f"not ({render_condition(item.body)})"
    if isinstance(item, And):
        return f"({render_condition(item)})"
    if isinstance(item, OneOf):
        return f"{item.term} in {render_values(item.values)}"
    if isinstance(item, LifecycleIs):
        return f"{item.block} = {item.state}"
    return "true"


def render_condition(cond: Condition) -> str:
    if isinstance(cond, And):
        right = render_item(cond.right) if isinstance(cond.right, And) else render_condition(cond.right)
        return f"{render_condition(cond.left)} and {right}"
    return render_item(cond)


def render_body(body: Sequence[Query]) -> str:
    return " or ".join(" and ".join(render_item(i) for i in q.items) for q in body)


def _render_branch(branch) -> str:
    if isinstance(branch, Atom):
        return render_item(branch)
    return (f"if {render_body(branch.filter)} then {_render_branch(branch.then)} "
            f"else {_render_branch(branch.otherwise)}")


def render_effect(eff) -> str:
    def sets(assignments) -> str:
        return ", ".join(f"{a.var} = {a.term}" for a in assignments)

    if isinstance(eff, CondUpdate):
        return f"update {eff.relation}({', '.join(eff.variables)}) {_render_branch(eff.branch)}"
    if isinstance(eff, DeleteSet):
        text = f"delete ({', '.join(map(str, eff.values))}) from {eff.relation}"
        return f"{text} set {sets(eff.assignments)}" if eff.assignments else text
    if eff.values is None:
        return f"set {sets(eff.assignments)}"
    text = f"insert ({', '.join(map(str, eff.values))}) into {eff.relation}"
    return f"{text} set {sets(eff.assignments)}" if eff.assignments else text


def render_guard(guard: Guard) -> str:
    head = ", ".join(f"{h.name}: {h.sort}" if h.sort else h.name for h in guard.head)
    return f"{guard.name}({head}) <- {render_body(guard.body)}"


def render_block(block: Block, indent: int = 0) -> str:
    pad = "  " * indent
    attrs = []
    for key, value in block.attributes:
        if value is True:
            attrs.append(key)
        elif isinstance(value, str):
            attrs.append(f"{key}={value}")
        else:
            attrs.append(f"{key}=({render_condition(value)})")
    text = f"{pad}{block.kind.value} {block.name}"
    if attrs:
        text += f" [{', '.join(attrs)}]"
    if not block.children:
        return text
    inner = "\n".join(render_block(child, indent + 1) for child in block.children)
    return f"{text} {{\n{inner}\n{pad}}}"


def render_model(m: DabModel) -> str:
    lines = ["sorts {"]
    for s in m.data.sorts:
        carrier = f" = {render_values(s.carrier, keep_order=True)}" if s.carrier is not None else ""
        lines.append(f"  {s.kind.value} {s.name}{carrier};")
    lines.append("}")
    if m.data.constants:
        lines.append("constants {")
        lines.extend(f"  {name} : {sort};" for name, sort in m.data.constants)
        lines.append("}")
    for section, relations in (("catalog", m.data.catalog), ("repository", m.data.repository)):
        lines.append(f"{section} {{")
        for rel in relations:
            attrs = ", ".join(f"{a.name}: {a.sort}" for a in rel.attributes)
            key = f" key({', '.join(rel.key)})" if rel.key else ""
            lines.append(f"  {rel.name}({attrs}){key};")
        lines.append("}")
    lines.append("casevars {")
    lines.extend(f"  {v.name} : {v.sort};" for v in m.data.case_vars)
    lines.append("}")
    lines.append("updates {")
    for spec in m.updates:
        lines.append(f"  {spec.name} {{")
        lines.append(f"    pre {render_guard(spec.pre)};")
        if spec.eff is not None:
            lines.append(f"    eff {render_effect(spec.eff)};")
        lines.append("  }")
    lines.append("}")
    lines.append(render_block(m.root))
    return "\n".join(lines) + "\n"


def render_property(p: Property) -> str:
    lines = ["property {"]
    lines.extend(f"  {index}: {render_body(body)};" for index, body in p.items())
    lines.append("}")
    return "\n".join(lines) + "\n"


def render_facts(facts: Sequence[Fact]) -> str:
    lines = ["instance {"]
    lines.extend(f"  {f.relation}({', '.join(f.values)});" for f in facts)
    lines.append("}")
    return "\n".join(lines) + "\n"
