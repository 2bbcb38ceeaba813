"""
Explicit-state execution of DAB models.

Snapshots hold the case map (one entry per created case, completed cases
included), the repository as sorted multisets of rows and nothing else: the
catalog instance is fixed for a whole search. Lifecycle moves come from the
same rule tables the translation compiles, so a run of the oracle and a run
of the translated system can be compared step by step.

Free inputs range over the active domain, the declared constants and a small
pool of fresh values per open sort. Closed value sorts are cut down to
representatives of the partition induced by the membership tests and
constants of the model.
"""
import hashlib
import itertools
import logging
from collections import deque
from dataclasses import dataclass
from functools import cached_property
from typing import Dict, Iterable, Iterator, List, Mapping, Optional, Sequence, Set, Tuple, Union

from dab.checks import SET, VerificationMode
from dab.errors import BoundsTooSmall, InconsistentSnapshot, UnassignedFreeVariable
from dab.lifecycle import ACTIVATE, COMPLETE, ENABLED, BlockRule, flag_blocks, model_rules, nonatomic_tasks
from dab.model import (
    SELF, UNDEF, And, Atom, CondBranch, CondUpdate, Constant, DabModel, DataSchema, DeleteSet, Eq, Fact,
    InsertSet, Item, LifecycleIs, Not, OneOf, Property, Query, SortKind, TrueCond, TypeEnv, UpdateSpec,
    Variable, effect_terms, item_terms, update_env,
)
from dab.parser import render_facts
from dab.translate import CREATE_CASE, aux_name, flag_name, lifecycle_name, nonatomic_inputs

logger = logging.getLogger(__name__)

Row = Tuple[str, ...]
Binding = Dict[str, str]


@dataclass(frozen=True)
class Bounds:
    max_cases: int = 2
    max_rows: int = 3
    max_steps: int = 200
    fresh_values: int = 1
    max_states: int = 200000

    def __post_init__(self):
        for name in ("max_cases", "max_rows", "max_steps", "fresh_values", "max_states"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")


# ---------------------------------------------------------------------------
# Catalog instances
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CatalogInstance:
    """Rows per catalog relation plus optional carriers for value sorts"""
    tables: Tuple[Tuple[str, Tuple[Row, ...]], ...] = ()
    carriers: Tuple[Tuple[str, Tuple[str, ...]], ...] = ()

    @staticmethod
    def build(tables: Mapping[str, Iterable[Sequence[str]]],
              carriers: Optional[Mapping[str, Sequence[str]]] = None) -> "CatalogInstance":
        packed = tuple(sorted((name, tuple(sorted({tuple(r) for r in rows}))) for name, rows in tables.items()))
        extra = tuple(sorted((sort, tuple(values)) for sort, values in (carriers or {}).items()))
        return CatalogInstance(packed, extra)

    @staticmethod
    def from_facts(facts: Iterable[Fact], schema: DataSchema) -> "CatalogInstance":
        tables: Dict[str, List[Row]] = {rel.name: [] for rel in schema.catalog}
        for fact in facts:
            rel = schema.relation(fact.relation)
            if rel is None or not schema.is_catalog(fact.relation):
                raise InconsistentSnapshot(f"{fact.relation} is not a catalog relation")
            if rel.arity != len(fact.values):
                raise InconsistentSnapshot(f"{fact.relation} expects {rel.arity} values, got {len(fact.values)}")
            tables[fact.relation].append(tuple(fact.values))
        instance = CatalogInstance.build(tables)
        instance.check(schema)
        return instance

    def rows(self, relation: str) -> Tuple[Row, ...]:
        for name, rows in self.tables:
            if name == relation:
                return rows
        return ()

    def carrier(self, sort: str) -> Tuple[str, ...]:
        for name, values in self.carriers:
            if name == sort:
                return values
        return ()

    def keys(self, relation: str) -> Tuple[str, ...]:
        return tuple(row[0] for row in self.rows(relation))

    @property
    def size(self) -> int:
        return sum(len(rows) for _, rows in self.tables)

    def facts(self) -> List[Fact]:
        return [Fact(name, row) for name, rows in self.tables for row in rows]

    def render(self) -> str:
        return render_facts(self.facts())

    def check(self, schema: DataSchema) -> None:
        """Keys unique and defined, foreign keys resolving"""
        key_sorts = schema.key_sorts()
        for rel in schema.catalog:
            keys = self.keys(rel.name)
            if len(keys) != len(set(keys)):
                raise InconsistentSnapshot(f"duplicate key in catalog relation {rel.name}")
            for row in self.rows(rel.name):
                if UNDEF in row:
                    raise InconsistentSnapshot(f"{rel.name}{row} contains undef")
                for value, attr in zip(row[1:], rel.attributes[1:]):
                    target = key_sorts.get(attr.sort)
                    if target is not None and value not in self.keys(target):
                        raise InconsistentSnapshot(
                            f"{rel.name}.{attr.name} = {value} does not resolve into {target}")


def _labels(sort: str, count: int) -> Tuple[str, ...]:
    return tuple(f"{sort.lower()}{k}" for k in range(1, count + 1))


def enumerate_catalogs(schema: DataSchema, size_bound: int,
                       carriers: Optional[Mapping[str, Sequence[str]]] = None) -> Iterator[CatalogInstance]:
    """Every catalog instance with at most ``size_bound`` rows per relation, up to renaming of ids"""
    key_sorts = schema.key_sorts()
    sorts = list(key_sorts)

    def values_of(sort: str, keys: Mapping[str, Tuple[str, ...]]) -> Tuple[str, ...]:
        if sort in keys:
            return keys[sort]
        if carriers and sort in carriers:
            return tuple(carriers[sort])
        declared = schema.sort(sort)
        if declared is not None and declared.closed:
            return declared.carrier[:max(size_bound, 1)]
        return _labels(sort, size_bound)

    value_carriers = {}
    for s in schema.all_sorts():
        if s.kind == SortKind.VALUE and s.name not in key_sorts:
            value_carriers[s.name] = values_of(s.name, {})
    seen: Set[tuple] = set()
    for counts in itertools.product(range(size_bound + 1), repeat=len(sorts)):
        keys = {sort: _labels(sort, n) for sort, n in zip(sorts, counts)}
        per_relation = []
        for rel in schema.catalog:
            key = rel.attributes[0].sort
            options = [values_of(a.sort, keys) for a in rel.attributes[1:]]
            per_key = [[(k,) + rest for rest in itertools.product(*options)] for k in keys.get(key, ())]
            per_relation.append([tuple(choice) for choice in itertools.product(*per_key)])
        for tables in itertools.product(*per_relation):
            raw = {rel.name: rows for rel, rows in zip(schema.catalog, tables)}
            canon = _canonical_tables(raw, keys)
            if canon in seen:
                continue
            seen.add(canon)
            yield CatalogInstance.build(raw, value_carriers)


def _canonical_tables(tables: Mapping[str, Sequence[Row]], keys: Mapping[str, Tuple[str, ...]]) -> tuple:
    ids = [(sort, labels) for sort, labels in keys.items() if labels]
    best = None
    for perms in itertools.product(*(itertools.permutations(labels) for _, labels in ids)):
        rename = {old: new for (_, labels), perm in zip(ids, perms) for old, new in zip(labels, perm)}
        form = tuple(sorted((name, tuple(sorted(tuple(rename.get(v, v) for v in row) for row in rows)))
                            for name, rows in tables.items()))
        if best is None or form < best:
            best = form
    return best if best is not None else tuple(sorted((n, tuple(sorted(r))) for n, r in tables.items()))


# ---------------------------------------------------------------------------
# Snapshots
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CaseState:
    id: str
    values: Tuple[Tuple[str, str], ...]

    @cached_property
    def table(self) -> Dict[str, str]:
        return dict(self.values)

    def get(self, name: str) -> str:
        return self.table.get(name, UNDEF)

    def updated(self, changes: Mapping[str, str]) -> "CaseState":
        if not changes:
            return self
        table = dict(self.table)
        table.update(changes)
        return CaseState(self.id, tuple(sorted(table.items())))


@dataclass(frozen=True)
class Snapshot:
    """Case map in creation order and the repository as sorted multisets"""
    cases: Tuple[CaseState, ...] = ()
    repo: Tuple[Tuple[str, Tuple[Row, ...]], ...] = ()

    def case(self, case_id: str) -> CaseState:
        for c in self.cases:
            if c.id == case_id:
                return c
        raise InconsistentSnapshot(f"unknown case {case_id}")

    def rows(self, relation: str) -> Tuple[Row, ...]:
        for name, rows in self.repo:
            if name == relation:
                return rows
        return ()

    def with_case(self, case: CaseState) -> "Snapshot":
        cases = tuple(case if c.id == case.id else c for c in self.cases)
        if all(c.id != case.id for c in self.cases):
            cases += (case,)
        return Snapshot(cases, self.repo)

    def with_rows(self, relation: str, rows: Iterable[Row]) -> "Snapshot":
        packed = tuple(sorted(rows))
        return Snapshot(self.cases, tuple((n, packed if n == relation else r) for n, r in self.repo))

    @property
    def digest(self) -> str:
        return hashlib.sha1(repr(self).encode()).hexdigest()[:10]

    def render(self) -> str:
        lines = []
        for c in self.cases:
            data = ", ".join(f"{k}={v}" for k, v in c.values if v != UNDEF and not k.startswith("lifecycle."))
            active = ", ".join(f"{k[len('lifecycle.'):]}={v}" for k, v in c.values
                               if k.startswith("lifecycle.") and v != "idle")
            lines.append(f"  {c.id}: {data} | {active}")
        for name, rows in self.repo:
            for row in rows:
                lines.append(f"  {name}({', '.join(row)})")
        return "\n".join(lines)


@dataclass(frozen=True)
class Move:
    case: str
    rule: str
    binding: Tuple[Tuple[str, str], ...]
    target: Snapshot

    def label(self) -> str:
        args = ", ".join(f"{k}={v}" for k, v in self.binding)
        return f"{self.case} {self.rule}" + (f" [{args}]" if args else "")


@dataclass(frozen=True)
class Witness:
    catalog: CatalogInstance
    steps: Tuple[Move, ...]
    initial: Snapshot

    @property
    def final(self) -> Snapshot:
        return self.steps[-1].target if self.steps else self.initial

    def render(self) -> str:
        facts = ", ".join(f"{f.relation}({', '.join(f.values)})" for f in self.catalog.facts())
        lines = [f"catalog: {facts or '(empty)'}"]
        for k, move in enumerate(self.steps, start=1):
            lines.append(f"step {k}: {move.label()} -> {move.target.digest}")
        lines.append("final snapshot:")
        lines.append(self.final.render())
        return "\n".join(lines)


@dataclass(frozen=True)
class NotFound:
    states: int
    truncated: bool = False


@dataclass(frozen=True)
class BoundedCheck:
    witnessed: bool
    witness: Optional[Witness]
    catalogs_checked: int


@dataclass(frozen=True)
class ReplayResult:
    confirmed: bool
    witness: Optional[Witness] = None
    failed_step: Optional[int] = None


# ---------------------------------------------------------------------------
# Value domains
# ---------------------------------------------------------------------------

def _condition_items(cond) -> Iterator[Item]:
    if isinstance(cond, Not):
        yield from _condition_items(cond.body)
    elif isinstance(cond, And):
        yield from _condition_items(cond.left)
        yield from _condition_items(cond.right)
    else:
        yield cond


def _branch_items(branch) -> Iterator[Item]:
    if isinstance(branch, CondBranch):
        for query in branch.filter:
            for item in query.items:
                yield from _condition_items(item)
        yield from _branch_items(branch.then)
        yield from _branch_items(branch.otherwise)


def model_items(m: DabModel, p: Optional[Property] = None) -> List[Item]:
    """Every guard, gateway and property item, negations stripped"""
    items: List[Item] = []
    for spec in m.updates:
        for query in spec.pre.body:
            for item in query.items:
                items.extend(_condition_items(item))
        if isinstance(spec.eff, CondUpdate):
            items.extend(_branch_items(spec.eff.branch))
    conditions = (Eq, Not, And, OneOf, TrueCond, LifecycleIs, Atom)
    for b in m.blocks():
        for _, value in b.attributes:
            if isinstance(value, conditions):
                items.extend(_condition_items(value))
    if p is not None:
        for _, body in p.items():
            for query in body:
                for item in query.items:
                    items.extend(_condition_items(item))
    return items


def representatives(m: DabModel, per_block: int, p: Optional[Property] = None) -> Dict[str, Tuple[str, ...]]:
    """Per closed value sort, up to ``per_block`` elements of each block of the induced partition"""
    items = model_items(m, p)
    value_sets = [frozenset(i.values) for i in items if isinstance(i, OneOf)]
    constants = {t.value for i in items for t in item_terms(i) if isinstance(t, Constant)}
    for spec in m.updates:
        constants.update(t.value for t in effect_terms(spec.eff) if isinstance(t, Constant))
    result = {}
    for s in m.data.all_sorts():
        if not s.closed:
            continue
        blocks: Dict[tuple, List[str]] = {}
        for value in s.carrier:
            signature = tuple(value in vs for vs in value_sets) + ((value if value in constants else None),)
            members = blocks.setdefault(signature, [])
            if len(members) < max(per_block, 1):
                members.append(value)
        kept = {v for members in blocks.values() for v in members}
        result[s.name] = tuple(v for v in s.carrier if v in kept)
    return result


def _value_key(value: str):
    return (0, int(value), value) if value.lstrip("-").isdigit() else (1, 0, value)


# ---------------------------------------------------------------------------
# Oracle
# ---------------------------------------------------------------------------

class Oracle:
    """Successor relation of one model over one catalog instance"""

    def __init__(self, m: DabModel, catalog: CatalogInstance, bounds: Bounds,
                 insertion: str = "multiset", property: Optional[Property] = None):
        self.model = m
        self.schema = m.data
        self.catalog = catalog
        self.bounds = bounds
        self.insertion = insertion
        self.rules: List[BlockRule] = model_rules(m)
        self.key_sorts = self.schema.key_sorts()
        self.representatives = representatives(m, bounds.fresh_values, property)
        self.aux: Dict[str, Dict[str, str]] = {}
        for task in nonatomic_tasks(m):
            spec = m.update(task.update)
            if spec is not None:
                self.aux[task.name] = nonatomic_inputs(spec, m)
        self.fresh_fields: Dict[str, str] = {v.name: UNDEF for v in self.schema.case_vars}
        for b in m.blocks():
            self.fresh_fields[lifecycle_name(b.name)] = "idle"
        for name in flag_blocks(m):
            self.fresh_fields[flag_name(name)] = "false"
        for task, inputs in self.aux.items():
            for var in inputs:
                self.fresh_fields[aux_name(task, var)] = UNDEF
        self.truncated = False

    def initial(self) -> Snapshot:
        return Snapshot((), tuple((rel.name, ()) for rel in self.schema.repository))

    # -- domains -------------------------------------------------------------

    def active(self, sort: str, s: Snapshot) -> Set[str]:
        values: Set[str] = set()
        for rel in self.schema.catalog:
            for row in self.catalog.rows(rel.name):
                values.update(v for v, a in zip(row, rel.attributes) if a.sort == sort)
        for rel in self.schema.repository:
            for row in s.rows(rel.name):
                values.update(v for v, a in zip(row, rel.attributes) if a.sort == sort)
        for c in s.cases:
            values.update(c.get(v.name) for v in self.schema.case_vars if v.sort == sort)
            if sort == self.schema.ctype:
                values.add(c.id)
        values.discard(UNDEF)
        return values

    def domain(self, sort: Optional[str], s: Snapshot) -> Tuple[str, ...]:
        """Candidate values of a free input of ``sort``; undef excluded"""
        if sort is None:
            return ()
        if sort in self.key_sorts:
            return self.catalog.keys(self.key_sorts[sort])
        values = self.active(sort, s)
        declared = self.schema.sort(sort)
        if declared is not None and declared.closed:
            values.update(self.representatives.get(sort, ()))
        else:
            values.update(self.schema.constants_of(sort))
            values.update(self.catalog.carrier(sort))
            values.update(f"{sort}#{k}" for k in range(1, self.bounds.fresh_values + 1))
        values.discard(UNDEF)
        return tuple(sorted(values, key=_value_key))

    # -- queries -------------------------------------------------------------

    def _table(self, relation: str, s: Snapshot) -> Tuple[Row, ...]:
        if self.schema.is_catalog(relation):
            return self.catalog.rows(relation)
        return s.rows(relation)

    def value(self, term, case: Optional[CaseState], binding: Mapping[str, str]) -> str:
        if isinstance(term, Constant):
            return term.value
        if term.name in binding:
            return binding[term.name]
        if case is not None and self.schema.case_var(term.name) is not None:
            return case.get(term.name)
        raise UnassignedFreeVariable(term.name)

    def _known(self, term, case: Optional[CaseState], binding: Mapping[str, str]) -> bool:
        return isinstance(term, Constant) or term.name in binding or (
            case is not None and self.schema.case_var(term.name) is not None)

    def _unify(self, terms, row: Row, binding: Binding, case: Optional[CaseState]) -> Optional[Binding]:
        result = dict(binding)
        for term, value in zip(terms, row):
            if self._known(term, case, result):
                if self.value(term, case, result) != value:
                    return None
            else:
                result[term.name] = value
        return result

    def holds(self, cond, s: Snapshot, case: Optional[CaseState], binding: Mapping[str, str]) -> bool:
        if isinstance(cond, TrueCond):
            return True
        if isinstance(cond, Eq):
            return self.value(cond.left, case, binding) == self.value(cond.right, case, binding)
        if isinstance(cond, Not):
            return not self.holds(cond.body, s, case, binding)
        if isinstance(cond, And):
            return self.holds(cond.left, s, case, binding) and self.holds(cond.right, s, case, binding)
        if isinstance(cond, OneOf):
            return self.value(cond.term, case, binding) in cond.values
        if isinstance(cond, LifecycleIs):
            return case is not None and case.get(lifecycle_name(cond.block)) == cond.state
        if isinstance(cond, Atom):
            found = any(self._unify(cond.terms, row, dict(binding), case) is not None
                        for row in self._table(cond.relation, s))
            return found != cond.negated
        raise TypeError(f"not a condition: {cond!r}")

    def solutions(self, items: Sequence[Item], sorts: Mapping[str, str], s: Snapshot,
                  case: Optional[CaseState], binding: Optional[Mapping[str, str]] = None,
                  extra: Sequence[str] = (), defined_inputs: bool = True) -> Iterator[Binding]:
        """Bindings of the data variables of a conjunctive query, each at most once

        With ``defined_inputs`` every variable that no positive relational atom
        binds must take a value other than undef.
        """
        binding = dict(binding or {})
        cvars = set(self.schema.case_var_names())
        names: List[str] = []
        for item in items:
            for t in item_terms(item):
                if isinstance(t, Variable) and t.name not in cvars and t.name not in binding and t.name not in names:
                    names.append(t.name)
        names += [n for n in extra if n not in cvars and n not in binding and n not in names]
        atoms = [i for i in items if isinstance(i, Atom) and not i.negated]
        rest = [i for i in items if not (isinstance(i, Atom) and not i.negated)]
        covered = {t.name for a in atoms for t in a.terms if isinstance(t, Variable)}
        seen: Set[tuple] = set()

        def match(k: int, current: Binding) -> Iterator[Binding]:
            if k == len(atoms):
                yield current
                return
            for row in self._table(atoms[k].relation, s):
                nxt = self._unify(atoms[k].terms, row, current, case)
                if nxt is not None:
                    yield from match(k + 1, nxt)

        for partial in match(0, binding):
            partial = self._propagate(rest, partial, case)
            free = [n for n in names if n not in partial]
            domains = [self.domain(sorts.get(n), s) for n in free]
            for values in itertools.product(*domains):
                full = {**partial, **dict(zip(free, values))}
                if defined_inputs and any(full[n] == UNDEF for n in names if n not in covered):
                    continue
                if not all(self.holds(i, s, case, full) for i in rest):
                    continue
                key = tuple(sorted((n, full[n]) for n in names))
                if key in seen:
                    continue
                seen.add(key)
                yield full

    def _propagate(self, items: Sequence[Item], binding: Binding, case: Optional[CaseState]) -> Binding:
        """Bind variables fixed by an equation with an already known term"""
        binding = dict(binding)
        progress = True
        while progress:
            progress = False
            for item in items:
                if not isinstance(item, Eq):
                    continue
                for var, other in ((item.left, item.right), (item.right, item.left)):
                    if isinstance(var, Variable) and not self._known(var, case, binding) \
                            and self._known(other, case, binding):
                        binding[var.name] = self.value(other, case, binding)
                        progress = True
        return binding

    def satisfied(self, body: Sequence[Query], s: Snapshot, case: Optional[CaseState]) -> bool:
        for query in body:
            sorts = TypeEnv(self.schema).infer(query.items).sorts
            if any(True for _ in self.solutions(query.items, sorts, s, case)):
                return True
        return False

    def property_holds(self, p: Property, s: Snapshot) -> bool:
        """Some injective assignment of the property indexes to cases satisfies every index body"""
        candidates = [[c.id for c in s.cases if self.satisfied(body, s, c)] for _, body in p.items()]
        for choice in itertools.product(*candidates):
            if len(set(choice)) == len(choice):
                return True
        return False

    # -- effects -------------------------------------------------------------

    def _insert(self, eff: InsertSet, s: Snapshot, case: CaseState, binding: Binding) -> Optional[Snapshot]:
        rel = self.schema.relation(eff.relation)
        row = tuple(self.value(t, case, binding) for t in eff.values)
        rows = list(s.rows(eff.relation))
        if self.insertion == SET:
            positions = rel.key_positions()
            rows = [r for r in rows if any(r[k] != row[k] for k in positions)]
        rows.append(row)
        if len(rows) > self.bounds.max_rows:
            self.truncated = True
            return None
        return s.with_rows(eff.relation, rows)

    def _delete(self, eff: DeleteSet, s: Snapshot, case: CaseState, binding: Binding) -> Optional[Snapshot]:
        row = tuple(self.value(t, case, binding) for t in eff.values)
        rows = list(s.rows(eff.relation))
        if row not in rows:
            return None
        rows.remove(row)
        return s.with_rows(eff.relation, rows)

    def _branch(self, branch, s: Snapshot, case: CaseState, binding: Binding) -> Row:
        if isinstance(branch, Atom):
            return tuple(self.value(t, case, binding) for t in branch.terms)
        known = {n: self.schema.case_var(n).sort for n in self.schema.case_var_names()}
        for query in branch.filter:
            sorts = TypeEnv(self.schema, known).infer(query.items).sorts
            if any(True for _ in self.solutions(query.items, sorts, s, case, binding, defined_inputs=False)):
                return self._branch(branch.then, s, case, binding)
        return self._branch(branch.otherwise, s, case, binding)

    def apply_effect(self, spec: UpdateSpec, s: Snapshot, case: CaseState,
                     binding: Binding) -> Optional[Tuple[Snapshot, Dict[str, str]]]:
        """Post-snapshot (case variables not yet written) and the case writes, or None if blocked"""
        eff = spec.eff
        if eff is None:
            return s, {}
        if isinstance(eff, CondUpdate):
            rows = [self._branch(eff.branch, s, case, {**binding, **dict(zip(eff.variables, row))})
                    for row in s.rows(eff.relation)]
            return s.with_rows(eff.relation, rows), {}
        writes = {a.var: self.value(a.term, case, binding) for a in eff.assignments}
        if isinstance(eff, InsertSet) and eff.values is not None:
            nxt = self._insert(eff, s, case, binding)
        elif isinstance(eff, DeleteSet):
            nxt = self._delete(eff, s, case, binding)
        else:
            nxt = s
        if nxt is None:
            return None
        return nxt, writes

    def _firings(self, spec: UpdateSpec, stage: str, task: str, case: CaseState,
                 s: Snapshot) -> Iterator[Tuple[Binding, Snapshot, Dict[str, str]]]:
        if stage == COMPLETE:
            binding = {v: case.get(aux_name(task, v)) for v in self.aux.get(task, {})}
            result = self.apply_effect(spec, s, case, binding)
            if result is not None:
                yield binding, result[0], result[1]
            return
        extra = list(spec.pre.head_names)
        if not isinstance(spec.eff, CondUpdate):
            extra += [t.name for t in effect_terms(spec.eff) if isinstance(t, Variable)]
        for query in spec.pre.body:
            sorts = update_env(spec, query, self.schema).sorts
            for binding in self.solutions(query.items, sorts, s, case, extra=extra):
                if stage == ACTIVATE:
                    writes = {aux_name(task, v): binding.get(v, UNDEF) for v in self.aux.get(task, {})}
                    yield binding, s, writes
                    continue
                result = self.apply_effect(spec, s, case, binding)
                if result is not None:
                    yield binding, result[0], result[1]

    # -- steps ---------------------------------------------------------------

    def create_case(self, s: Snapshot) -> Optional[Move]:
        if len(s.cases) >= self.bounds.max_cases:
            self.truncated = True
            return None
        case_id = f"case{len(s.cases) + 1}"
        fields = dict(self.fresh_fields)
        fields[SELF] = case_id
        fields[lifecycle_name(self.model.root.name)] = ENABLED
        case = CaseState(case_id, tuple(sorted(fields.items())))
        return Move(case_id, CREATE_CASE, (), Snapshot(s.cases + (case,), s.repo))

    def fire(self, rule: BlockRule, case: CaseState, s: Snapshot) -> List[Move]:
        if any(case.get(lifecycle_name(b)) != state for b, state in rule.requires):
            return []
        if any(case.get(flag_name(b)) != ("true" if value else "false") for b, value in rule.flags):
            return []
        for cond, positive in rule.conditions:
            items = list(_conjuncts(cond))
            sorts = TypeEnv(self.schema).infer(items).sorts
            found = any(True for _ in self.solutions(items, sorts, s, case, defined_inputs=False))
            if found != positive:
                return []
        control = {lifecycle_name(b): state for b, state in rule.sets}
        control.update({flag_name(b): "true" if value else "false" for b, value in rule.set_flags})
        spec = self.model.update(rule.update)
        if spec is None:
            return [Move(case.id, rule.name, (), s.with_case(case.updated(control)))]
        moves = []
        targets: Set[Snapshot] = set()
        for binding, nxt, writes in self._firings(spec, rule.stage, rule.block, case, s):
            target = nxt.with_case(nxt.case(case.id).updated({**writes, **control}))
            if target in targets:
                continue
            targets.add(target)
            moves.append(Move(case.id, rule.name, tuple(sorted(binding.items())), target))
        return moves

    def step(self, s: Snapshot, rule_name: Optional[str] = None) -> List[Move]:
        """Labelled successors of ``s``, optionally only those of one rule"""
        moves: List[Move] = []
        if rule_name in (None, CREATE_CASE):
            created = self.create_case(s)
            if created is not None:
                moves.append(created)
        for case in s.cases:
            for rule in self.rules:
                if rule_name is None or rule.name == rule_name:
                    moves.extend(self.fire(rule, case, s))
        return moves


def _conjuncts(cond) -> Iterator[Item]:
    if isinstance(cond, And):
        yield from _conjuncts(cond.left)
        yield from _conjuncts(cond.right)
    else:
        yield cond


# ---------------------------------------------------------------------------
# Searches
# ---------------------------------------------------------------------------

def _path(parents: Mapping[Snapshot, Optional[Tuple[Snapshot, Move]]], s: Snapshot) -> Tuple[Move, ...]:
    moves = []
    while parents[s] is not None:
        prev, move = parents[s]
        moves.append(move)
        s = prev
    return tuple(reversed(moves))


def bounded_reach(m: DabModel, catalog: CatalogInstance, bounds: Bounds, p: Property,
                  insertion: str = "multiset") -> Union[Witness, NotFound]:
    """Breadth-first search for a shortest run ending in a snapshot that satisfies ``p``"""
    oracle = Oracle(m, catalog, bounds, insertion, p)
    start = oracle.initial()
    if oracle.property_holds(p, start):
        return Witness(catalog, (), start)
    parents: Dict[Snapshot, Optional[Tuple[Snapshot, Move]]] = {start: None}
    frontier = deque([(start, 0)])
    capped = False
    while frontier:
        s, depth = frontier.popleft()
        if depth >= bounds.max_steps:
            capped = True
            continue
        for move in oracle.step(s):
            t = move.target
            if t in parents:
                continue
            if len(parents) >= bounds.max_states:
                capped = True
                break
            parents[t] = (s, move)
            if oracle.property_holds(p, t):
                witness = Witness(catalog, _path(parents, t), start)
                logger.info(f"Oracle witness of length {len(witness.steps)} after {len(parents)} snapshots")
                return witness
            frontier.append((t, depth + 1))
    logger.info(f"Oracle search exhausted: {len(parents)} snapshots, catalog size {catalog.size}")
    return NotFound(len(parents), capped or oracle.truncated)


def _oracle_bounds(bounds: Bounds, mode: VerificationMode) -> Bounds:
    cases = bounds.max_cases if mode.case_bound is None else min(bounds.max_cases, mode.case_bound)
    rows = bounds.max_rows if mode.repo_bound is None else min(bounds.max_rows, mode.repo_bound)
    return Bounds(cases, rows, bounds.max_steps, bounds.fresh_values, bounds.max_states)


def _catalog_carriers(m: DabModel, p: Optional[Property]) -> Dict[str, Tuple[str, ...]]:
    return representatives(m, 1, p)


def parameterized_bounded_check(m: DabModel, mode: VerificationMode, bounds: Bounds, size_bound: int,
                                p: Property) -> BoundedCheck:
    """Bounded search over every catalog up to ``size_bound``; never claims safety"""
    bounds = _oracle_bounds(bounds, mode)
    checked = 0
    for catalog in enumerate_catalogs(m.data, size_bound, _catalog_carriers(m, p)):
        checked += 1
        outcome = bounded_reach(m, catalog, bounds, p, mode.insertion)
        if isinstance(outcome, Witness):
            logger.info(f"✅ Witness found on catalog #{checked}")
            return BoundedCheck(True, outcome, checked)
    logger.info(f"No witness within bounds over {checked} catalog instance(s)")
    return BoundedCheck(False, None, checked)


def rule_of(transition: str) -> str:
    """Rule label of a transition name such as ``Main.T2#3@1``"""
    return transition.split("@", 1)[0].split("#", 1)[0]


def replay_trace(m: DabModel, mode: VerificationMode, trace: Sequence[str], bounds: Bounds, p: Property,
                 size_bound: int = 1, catalog: Optional[CatalogInstance] = None) -> ReplayResult:
    """Follow the rule labels of ``trace`` forward and check ``p`` at the end

    Raises BoundsTooSmall when no run was confirmed and some move with the
    needed label was cut by the bounds.
    """
    bounds = _oracle_bounds(bounds, mode)
    labels = [rule_of(name) for name in trace]
    catalogs = [catalog] if catalog is not None else enumerate_catalogs(m.data, size_bound, _catalog_carriers(m, p))
    furthest = 0
    truncated = False
    for instance in catalogs:
        oracle = Oracle(m, instance, bounds, mode.insertion, p)
        start = oracle.initial()
        frontier: Dict[Snapshot, Tuple[Move, ...]] = {start: ()}
        for k, label in enumerate(labels):
            nxt: Dict[Snapshot, Tuple[Move, ...]] = {}
            for s, run in frontier.items():
                for move in oracle.step(s, label):
                    if move.target not in nxt:
                        if len(nxt) >= bounds.max_states:
                            truncated = True
                            break
                        nxt[move.target] = run + (move,)
            frontier = nxt
            if not frontier:
                furthest = max(furthest, k)
                break
        else:
            furthest = len(labels)
            for s, run in frontier.items():
                if oracle.property_holds(p, s):
                    logger.info(f"✅ Trace of {len(labels)} step(s) confirmed")
                    return ReplayResult(True, Witness(instance, run, start))
        truncated = truncated or oracle.truncated
    if truncated:
        raise BoundsTooSmall(f"replay exhausted its bounds ({bounds}) without confirming the trace")
    logger.warning(f"[WARN] Trace replay failed at step {furthest + 1}")
    return ReplayResult(False, None, furthest + 1 if furthest < len(labels) else len(labels))


def check_step(m: DabModel, s: Snapshot, bounds: Bounds) -> None:
    """Structural invariants of a snapshot; raises InconsistentSnapshot"""
    for c in s.cases:
        if c.get(SELF) != c.id:
            raise InconsistentSnapshot(f"case {c.id} has self = {c.get(SELF)}")
    for name, rows in s.repo:
        if len(rows) > bounds.max_rows:
            raise InconsistentSnapshot(f"{name} holds {len(rows)} rows, bound is {bounds.max_rows}")
        rel = m.data.relation(name)
        if rel is None or any(len(r) != rel.arity for r in rows):
            raise InconsistentSnapshot(f"malformed rows in {name}")


def step(s: Snapshot, m: DabModel, catalog: CatalogInstance, bounds: Bounds,
         insertion: str = "multiset") -> List[Move]:
    check_step(m, s, bounds)
    return Oracle(m, catalog, bounds, insertion).step(s)


__all__ = [
    "Bounds", "CatalogInstance", "CaseState", "Snapshot", "Move", "Witness", "NotFound", "BoundedCheck",
    "ReplayResult", "Oracle", "enumerate_catalogs", "representatives", "bounded_reach",
    "parameterized_bounded_check", "replay_trace", "rule_of", "step", "check_step",
]
