"""
Compile a DAB model into an array-based artifact system.

Per-case data (case variables, block lifecycles, error flags and the inputs
bound by nonatomic tasks) lives in arrays over the ``PI_index`` sort, one entry
per case. With a case bound ``k`` every array is replaced by ``k`` banks of
plain variables ``name@b``. Each repository relation ``R`` becomes one array
per attribute over ``R_index`` plus an occupancy array ``R.#row`` that is
``true`` exactly on the stored tuples; a repository bound replaces those by
slots ``R.A/s``.

A transition is ``exists params. guard & updates`` where each update group
writes a set of targets with a case-defined function: the first case whose
conditions hold gives the new values, otherwise the default applies.
"""
import itertools
import logging
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Mapping, Optional, Sequence, Tuple, Union

from dab.checks import SET, VerificationMode
from dab.errors import IllTypedEffect, TooManyIndexes, UnsupportedCombination
from dab.lifecycle import (
    ACTIVATE, COMPLETE, ENABLED, BlockRule, block_rules, condition_cubes, flag_blocks, model_rules,
    nonatomic_tasks,
)
from dab.logic.evaluate import FiniteStructure, eval_literal, eval_term
from dab.logic.terms import (
    CASEID, LIFECYCLE, App, Const, Cube, FunctionSymbol, Literal, Eq as LitEq, Read, Signature, SortInfo, StateFormula,
    StateVar, Term, Var, catalog_literals, catalog_to_signature, eq, literal_subterms, mem, negate, neq,
    not_mem, subst_literal, substitute, subterms, trivial, undef,
)
from dab.model import (
    BOOL, LIFECYCLE_STATES, SELF, UNDEF, Atom, Block, CondUpdate, DabModel,
    DeleteSet, Eq, InsertSet, LifecycleIs, Not, OneOf, Property, Query, RelationSchema, TypeEnv,
    UpdateSpec, Variable, effect_terms, item_terms, query_variables, update_env,
)

logger = logging.getLogger(__name__)

PI_INDEX = "PI_index"
CREATE_CASE = "create_case"
ROW = "#row"
TRUE_B = Const("true", BOOL)
FALSE_B = Const("false", BOOL)


def lifecycle_name(block: str) -> str:
    return f"lifecycle.{block}"


def flag_name(block: str) -> str:
    return f"error.{block}"


def aux_name(task: str, var: str) -> str:
    return f"aux.{task}.{var}"


def is_index_var(v: Var) -> bool:
    return v.name.startswith("%")


# ---------------------------------------------------------------------------
# Artifact system
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StateSlot:
    """Plain artifact variable with its initial value"""
    name: str
    sort: str
    initial: str = UNDEF


@dataclass(frozen=True)
class Component:
    """Array component from an artifact sort to a basic sort"""
    name: str
    source: str
    target: str
    initial: str = UNDEF


Case = Tuple[Tuple[Literal, ...], Tuple[Term, ...]]


@dataclass(frozen=True)
class UpdateGroup:
    """Simultaneous case-defined update of ``targets``

    With ``param`` set the targets are arrays and the group denotes
    ``a' = lambda param. if c1 then v1 else ... else default``; otherwise the
    targets are plain variables.
    """
    targets: Tuple[str, ...]
    param: Optional[Var]
    cases: Tuple[Case, ...]
    default: Tuple[Term, ...]

    def variables(self) -> Iterator[Var]:
        for conds, values in self.cases:
            for lit in conds:
                for t in literal_subterms(lit):
                    if isinstance(t, Var) and t != self.param:
                        yield t
            for value in values:
                for t in subterms(value):
                    if isinstance(t, Var) and t != self.param:
                        yield t
        for value in self.default:
            for t in subterms(value):
                if isinstance(t, Var) and t != self.param:
                    yield t

    def substituted(self, mapping: Mapping[Term, Term]) -> "UpdateGroup":
        cases = []
        for conds, values in self.cases:
            simplified = _simplify(subst_literal(lit, mapping) for lit in conds)
            if simplified is None:
                continue
            cases.append((simplified, tuple(substitute(v, mapping) for v in values)))
            if not simplified:
                break
        default = tuple(substitute(v, mapping) for v in self.default)
        while cases and cases[-1][1] == default:
            cases.pop()
        return UpdateGroup(self.targets, self.param, tuple(cases), default)


def _simplify(literals) -> Optional[Tuple[Literal, ...]]:
    kept = []
    for lit in literals:
        value = trivial(lit)
        if value is False:
            return None
        if value is None and lit not in kept:
            kept.append(lit)
    return tuple(kept)


@dataclass(frozen=True)
class Transition:
    name: str
    rule: str
    block: Optional[str]
    params: Tuple[Var, ...]
    guard: Tuple[Literal, ...]
    updates: Tuple[UpdateGroup, ...]

    @property
    def writes(self) -> frozenset:
        return frozenset(t for group in self.updates for t in group.targets)

    @property
    def bank(self) -> Optional[int]:
        if "@" in self.name:
            return int(self.name.rsplit("@", 1)[1])
        return None


@dataclass(frozen=True, eq=False)
class ArtifactSystem:
    signature: Signature
    variables: Tuple[StateSlot, ...]
    components: Tuple[Component, ...]
    transitions: Tuple[Transition, ...]
    mode: VerificationMode
    layout: "Layout"

    def __post_init__(self):
        initial = {v.name: v.initial for v in self.variables}
        initial.update({c.name: c.initial for c in self.components})
        object.__setattr__(self, "_initial", initial)

    def initial_value(self, name: str) -> str:
        return self._initial[name]

    def component(self, name: str) -> Optional[Component]:
        for c in self.components:
            if c.name == name:
                return c
        return None

    def variable(self, name: str) -> Optional[StateSlot]:
        for v in self.variables:
            if v.name == name:
                return v
        return None

    def transition(self, name: str) -> Transition:
        for t in self.transitions:
            if t.name == name:
                return t
        raise KeyError(name)

    def initial_literals(self) -> List[str]:
        """The initial formula as ``x = c`` and ``a = lambda y. d`` conjuncts"""
        lines = [f"{v.name} = {v.initial}" for v in self.variables]
        lines += [f"{c.name} = lambda y:{c.source}. {c.initial}" for c in self.components]
        return lines

    def initial_substitution(self, terms) -> Dict[Term, Term]:
        """Maps every state variable and array read among ``terms`` to its initial constant"""
        mapping: Dict[Term, Term] = {}
        for t in terms:
            if isinstance(t, StateVar):
                mapping[t] = Const(self.initial_value(t.name), t.sort)
            elif isinstance(t, Read):
                mapping[t] = Const(self.initial_value(t.array), t.sort)
        return mapping


# ---------------------------------------------------------------------------
# Layout: where per-case and repository data live
# ---------------------------------------------------------------------------

class CaseContext:
    """Reads and writes of one case inside a transition: an array index or a bank"""

    def __init__(self, layout: "Layout", index: Optional[Var] = None, bank: Optional[int] = None):
        self.layout = layout
        self.index = index
        self.bank = bank

    def read(self, name: str) -> Term:
        sort = self.layout.case_sorts[name]
        if self.bank is not None:
            return StateVar(f"{name}@{self.bank}", sort)
        return Read(name, self.index, sort)

    def fresh_self(self) -> Term:
        ctype = self.layout.ctype
        if self.bank is not None:
            return Const(f"case{self.bank}", ctype)
        return App(CASEID, self.index, ctype)

    def write(self, values: Mapping[str, Term]) -> List[UpdateGroup]:
        if not values:
            return []
        names = sorted(values)
        new = tuple(values[n] for n in names)
        if self.bank is not None:
            return [UpdateGroup(tuple(f"{n}@{self.bank}" for n in names), None, (), new)]
        j = Var("%j", PI_INDEX)
        default = tuple(Read(n, j, self.layout.case_sorts[n]) for n in names)
        return [UpdateGroup(tuple(names), j, (((eq(j, self.index),), new),), default)]

    @property
    def suffix(self) -> str:
        return f"@{self.bank}" if self.bank is not None else ""


class RepoLayout:
    """Storage of one repository relation: indexed arrays or ``bound`` slots"""

    def __init__(self, relation: RelationSchema, bound: Optional[int]):
        self.relation = relation
        self.bound = bound

    @property
    def name(self) -> str:
        return self.relation.name

    @property
    def index_sort(self) -> str:
        return f"{self.relation.name}_index"

    @property
    def slots(self) -> List[int]:
        return list(range(1, (self.bound or 0) + 1))

    def array(self, attr: str) -> str:
        return f"{self.relation.name}.{attr}"

    def _at(self, array: str, sort: str, where: Union[Term, int]) -> Term:
        if self.bound is not None:
            return StateVar(f"{array}/{where}", sort)
        return Read(array, where, sort)

    def row(self, where) -> Term:
        return self._at(self.array(ROW), BOOL, where)

    def attr(self, k: int, where) -> Term:
        a = self.relation.attributes[k]
        return self._at(self.array(a.name), a.sort, where)

    def attrs(self, where) -> Tuple[Term, ...]:
        return tuple(self.attr(k, where) for k in range(self.relation.arity))

    def targets(self, where, with_row: bool = True) -> Tuple[str, ...]:
        names = ([self.array(ROW)] if with_row else []) + [self.array(a.name) for a in self.relation.attributes]
        if self.bound is not None:
            return tuple(f"{n}/{where}" for n in names)
        return tuple(names)

    def empty(self, where) -> List[Literal]:
        return [eq(self.row(where), undef(BOOL))] + [eq(t, undef(t.sort)) for t in self.attrs(where)]

    def undefs(self, with_row: bool = True) -> Tuple[Term, ...]:
        values = tuple(undef(a.sort) for a in self.relation.attributes)
        return ((undef(BOOL),) if with_row else ()) + values


class Layout:
    def __init__(self, m: DabModel, mode: VerificationMode):
        self.model = m
        self.mode = mode
        self.ctype = m.data.ctype
        self.case_sorts: Dict[str, str] = {v.name: v.sort for v in m.data.case_vars}
        self.case_initial: Dict[str, str] = {v.name: UNDEF for v in m.data.case_vars}
        for b in m.blocks():
            self.case_sorts[lifecycle_name(b.name)] = LIFECYCLE
            self.case_initial[lifecycle_name(b.name)] = "idle"
        for name in flag_blocks(m):
            self.case_sorts[flag_name(name)] = BOOL
            self.case_initial[flag_name(name)] = "false"
        self.aux: Dict[str, Dict[str, str]] = {}
        for task in nonatomic_tasks(m):
            spec = m.update(task.update)
            if spec is None:
                continue
            self.aux[task.name] = nonatomic_inputs(spec, m)
            for var, sort in self.aux[task.name].items():
                self.case_sorts[aux_name(task.name, var)] = sort
                self.case_initial[aux_name(task.name, var)] = UNDEF
        self.repos: Dict[str, RepoLayout] = {
            rel.name: RepoLayout(rel, mode.repo_bound) for rel in m.data.repository
        }

    @property
    def banked(self) -> bool:
        return self.mode.case_bound is not None

    def case_contexts(self) -> List[CaseContext]:
        if self.banked:
            return [CaseContext(self, bank=b) for b in range(1, self.mode.case_bound + 1)]
        return [CaseContext(self, index=Var("%i", PI_INDEX))]


def nonatomic_inputs(spec: UpdateSpec, m: DabModel) -> Dict[str, str]:
    """Answer variables (and other effect inputs) a nonatomic task keeps between activation and completion"""
    cvars = set(m.data.case_var_names())
    names = list(spec.pre.head_names)
    candidates = [t.name for t in effect_terms(spec.eff) if isinstance(t, Variable) and t.name not in cvars]
    if isinstance(spec.eff, CondUpdate):
        # row and filter variables are rebound per tuple at completion
        guard_names = {v for query in spec.pre.body for v in query_variables(query)}
        candidates = [n for n in candidates if n in guard_names and n not in spec.eff.variables]
    names += [n for n in dict.fromkeys(candidates) if n not in names]
    sorts: Dict[str, str] = {}
    for query in spec.pre.body:
        env = update_env(spec, query, m.data)
        for name in names:
            if name not in sorts and env.sorts.get(name):
                sorts[name] = env.sorts[name]
    missing = [n for n in names if n not in sorts]
    if missing:
        raise IllTypedEffect(f"update {spec.name}: cannot infer the sorts of {', '.join(missing)}")
    return {n: sorts[n] for n in names}


# ---------------------------------------------------------------------------
# Queries
# ---------------------------------------------------------------------------

Alternative = Tuple[List[Literal], Dict[tuple, Union[Var, int]]]


class _Scope:
    """Translation of the terms and items of one guard disjunct within one case"""

    def __init__(self, builder: "_Builder", ctx: CaseContext, env: TypeEnv, suffix: str = "",
                 locals: Optional[Dict[str, Term]] = None):
        self.builder = builder
        self.ctx = ctx
        self.env = env
        self.suffix = suffix
        self.locals = dict(locals or {})
        self.covered: set = set()

    def with_locals(self, locals: Dict[str, Term]) -> "_Scope":
        scope = _Scope(self.builder, self.ctx, self.env, self.suffix, {**self.locals, **locals})
        return scope

    def with_env(self, env: TypeEnv) -> "_Scope":
        return _Scope(self.builder, self.ctx, env, self.suffix, self.locals)

    @property
    def schema(self):
        return self.builder.model.data

    def sort_of(self, t) -> Optional[str]:
        if isinstance(t, Variable):
            if t.name in self.locals:
                return self.locals[t.name].sort
            if self.schema.case_var(t.name) is not None:
                return self.schema.case_var(t.name).sort
            return self.env.sorts.get(t.name)
        return None

    def term(self, t, expected: Optional[str] = None) -> Term:
        if isinstance(t, Variable):
            if t.name in self.locals:
                return self.locals[t.name]
            if self.schema.case_var(t.name) is not None:
                return self.ctx.read(t.name)
            sort = self.env.sorts.get(t.name) or expected
            if sort is None:
                raise IllTypedEffect(f"cannot infer the sort of variable '{t.name}'")
            return Var(t.name + self.suffix, sort)
        sort = expected or self.env.term_sort(t)
        if sort is None:
            raise IllTypedEffect(f"cannot infer the sort of constant '{t.value}'")
        return Const(t.value, sort)

    def leaf(self, item) -> Literal:
        negated = isinstance(item, Not)
        base = item.body if negated else item
        if isinstance(base, Eq):
            sort = self.sort_of(base.left) or self.sort_of(base.right)
            if sort is None:
                candidates = self.schema.sorts_of_constant(str(base.left))
                sort = candidates[0] if candidates else None
            left, right = self.term(base.left, sort), self.term(base.right, sort)
            return neq(left, right) if negated else eq(left, right)
        if isinstance(base, OneOf):
            sort = self.sort_of(base.term)
            if sort is None:
                raise IllTypedEffect(f"cannot infer the sort of '{base.term}'")
            t = self.term(base.term, sort)
            return not_mem(t, base.values) if negated else mem(t, base.values)
        if isinstance(base, LifecycleIs):
            lit = eq(self.ctx.read(lifecycle_name(base.block)), Const(base.state, LIFECYCLE))
            return negate(lit) if negated else lit
        raise TypeError(f"not a literal item: {item!r}")

    def condition(self, cond, positive: bool = True) -> List[List[Literal]]:
        return [[self.leaf(leaf) for leaf in cube] for cube in condition_cubes(cond, positive)]

    def item(self, item) -> List[Alternative]:
        if isinstance(item, Atom):
            return self.atom(item)
        return [(lits, {}) for lits in self.condition(item, True)]

    def items(self, items: Sequence) -> List[Alternative]:
        result: List[Alternative] = [([], {})]
        for item in items:
            options = self.item(item)
            result = [(la + lb, {**ba, **bb}) for la, ba in result for lb, bb in options]
        return result

    def atom(self, atom: Atom) -> List[Alternative]:
        rel = self.schema.relation(atom.relation)
        args = tuple(self.term(t, a.sort) for t, a in zip(atom.terms, rel.attributes))
        if not atom.negated:
            self.covered.update(t.name for t in atom.terms if isinstance(t, Variable))
        if self.schema.is_catalog(atom.relation):
            lits = catalog_literals(atom.relation, args, self.builder.signature)
            if not atom.negated:
                return [(lits, {})]
            return [([negate(lit)], {}) for lit in lits]
        repo = self.builder.layout.repos[atom.relation]
        key = (atom.relation, args)
        if repo.bound is None:
            if atom.negated:
                raise UnsupportedCombination(
                    f"negated repository atom over {atom.relation} needs a repository bound")
            e = self.builder.fresh_index(repo)
            lits = [eq(repo.row(e), TRUE_B)] + [eq(a, repo.attr(k, e)) for k, a in enumerate(args)]
            return [(lits, {key: e})]
        if not atom.negated:
            return [([eq(repo.row(s), TRUE_B)] + [eq(a, repo.attr(k, s)) for k, a in enumerate(args)], {key: s})
                    for s in repo.slots]
        per_slot = [[neq(repo.row(s), TRUE_B)] + [neq(a, repo.attr(k, s)) for k, a in enumerate(args)]
                    for s in repo.slots]
        return [(list(choice), {}) for choice in itertools.product(*per_slot)]

    def input_guards(self, names: Sequence[str]) -> List[Literal]:
        """Inputs not bound by a positive relational atom are never undef"""
        lits = []
        for name in names:
            if name in self.covered or name in self.locals or self.schema.case_var(name) is not None:
                continue
            t = self.term(Variable(name))
            lits.append(neq(t, undef(t.sort)))
        return lits


def _data_names(query: Query, extra: Sequence[str], m: DabModel) -> List[str]:
    cvars = set(m.data.case_var_names())
    names: Dict[str, None] = {}
    for item in query.items:
        for t in _item_vars(item):
            if t not in cvars:
                names.setdefault(t, None)
    for name in extra:
        if name not in cvars:
            names.setdefault(name, None)
    return list(names)


def _item_vars(item) -> Iterator[str]:
    for t in item_terms(item):
        if isinstance(t, Variable):
            yield t.name


# ---------------------------------------------------------------------------
# Definitions and finishing
# ---------------------------------------------------------------------------

def eliminate_definitions(literals: Sequence[Literal], eliminable) -> Tuple[Optional[List[Literal]], Dict[Term, Term]]:
    """Substitute away variables that have a defining equation ``v = t``

    Returns the remaining literals (None if one became false) and the
    substitution applied.
    """
    lits = list(literals)
    mapping: Dict[Term, Term] = {}
    progress = True
    while progress:
        progress = False
        for lit in lits:
            if not isinstance(lit, LitEq):
                continue
            for var, other in ((lit.left, lit.right), (lit.right, lit.left)):
                if isinstance(var, Var) and eliminable(var) and var not in set(subterms(other)):
                    step = {var: other}
                    lits = [subst_literal(l, step) for l in lits]
                    mapping = {k: substitute(v, step) for k, v in mapping.items()}
                    mapping[var] = other
                    progress = True
                    break
            if progress:
                break
    kept = _simplify(lits)
    return (list(kept) if kept is not None else None), mapping


# ---------------------------------------------------------------------------
# Builder
# ---------------------------------------------------------------------------

@dataclass
class _Fragment:
    guard: List[Literal] = field(default_factory=list)
    writes: Dict[str, Term] = field(default_factory=dict)
    groups: List[UpdateGroup] = field(default_factory=list)


class _Builder:
    def __init__(self, m: DabModel, mode: VerificationMode):
        self.model = m
        self.mode = mode
        self.layout = Layout(m, mode)
        self.signature = _signature(m, mode, self.layout)
        self._counter = 0

    def fresh_index(self, repo: RepoLayout) -> Var:
        self._counter += 1
        return Var(f"%e{self._counter}", repo.index_sort)

    # -- effects -------------------------------------------------------------

    def effect(self, spec: UpdateSpec, scope: _Scope, bindings: Dict[tuple, Union[Var, int]]) -> List[_Fragment]:
        eff = spec.eff
        if eff is None:
            return [_Fragment()]
        schema = self.model.data
        writes: Dict[str, Term] = {}
        if isinstance(eff, (InsertSet, DeleteSet)):
            for a in eff.assignments:
                writes[a.var] = scope.term(a.term, schema.case_var(a.var).sort)
        if isinstance(eff, InsertSet) and eff.values is None:
            return [_Fragment(writes=writes)]
        if isinstance(eff, InsertSet):
            return [_Fragment(f.guard, {**writes}, f.groups) for f in self._insert(eff, scope)]
        if isinstance(eff, DeleteSet):
            return [_Fragment(f.guard, {**writes}, f.groups) for f in self._delete(eff, scope, bindings)]
        return [_Fragment(groups=self._cond_update(eff, scope))]

    def _values(self, repo: RepoLayout, terms, scope: _Scope) -> Tuple[Term, ...]:
        return tuple(scope.term(t, a.sort) for t, a in zip(terms, repo.relation.attributes))

    def _key_match(self, repo: RepoLayout, values: Tuple[Term, ...], where) -> List[Literal]:
        return [eq(repo.row(where), TRUE_B)] + [eq(values[k], repo.attr(k, where))
                                                for k in repo.relation.key_positions()]

    def _insert(self, eff: InsertSet, scope: _Scope) -> List[_Fragment]:
        repo = self.layout.repos[eff.relation]
        values = self._values(repo, eff.values, scope)
        stored = (TRUE_B,) + values
        set_semantics = self.mode.insertion == SET
        if repo.bound is None:
            ins = Var("%ins", repo.index_sort)
            j = Var("%j", repo.index_sort)
            cases = [((eq(j, ins),), stored)]
            if set_semantics:
                cases.append((tuple(self._key_match(repo, values, j)), repo.undefs()))
            group = UpdateGroup(repo.targets(j), j, tuple(cases), (repo.row(j),) + repo.attrs(j))
            return [_Fragment(guard=repo.empty(ins), groups=[group])]
        fragments = []
        for s in repo.slots:
            groups = [UpdateGroup(repo.targets(s), None, (), stored)]
            if set_semantics:
                for other in repo.slots:
                    if other != s:
                        groups.append(UpdateGroup(
                            repo.targets(other), None,
                            ((tuple(self._key_match(repo, values, other)), repo.undefs()),),
                            (repo.row(other),) + repo.attrs(other)))
            fragments.append(_Fragment(guard=repo.empty(s), groups=groups))
        if set_semantics:
            for s in repo.slots:
                fragments.append(_Fragment(guard=self._key_match(repo, values, s),
                                           groups=[UpdateGroup(repo.targets(s), None, (), stored)]))
        return fragments

    def _delete(self, eff: DeleteSet, scope: _Scope, bindings) -> List[_Fragment]:
        repo = self.layout.repos[eff.relation]
        values = self._values(repo, eff.values, scope)
        bound = bindings.get((eff.relation, values))
        if repo.bound is None:
            guard = []
            e = bound
            if e is None:
                e = Var("%del", repo.index_sort)
                guard = [eq(repo.row(e), TRUE_B)] + [eq(v, repo.attr(k, e)) for k, v in enumerate(values)]
            j = Var("%j", repo.index_sort)
            group = UpdateGroup(repo.targets(j), j, (((eq(j, e),), repo.undefs()),),
                                (repo.row(j),) + repo.attrs(j))
            return [_Fragment(guard=guard, groups=[group])]
        slots = [bound] if bound is not None else repo.slots
        fragments = []
        for s in slots:
            guard = [] if bound is not None else (
                [eq(repo.row(s), TRUE_B)] + [eq(v, repo.attr(k, s)) for k, v in enumerate(values)])
            fragments.append(_Fragment(guard=guard, groups=[UpdateGroup(repo.targets(s), None, (), repo.undefs())]))
        return fragments

    def _cond_update(self, eff: CondUpdate, scope: _Scope) -> List[UpdateGroup]:
        repo = self.layout.repos[eff.relation]

        def group(where, param: Optional[Var]) -> UpdateGroup:
            locals = {v: repo.attr(k, where) for k, v in enumerate(eff.variables)}
            inner = scope.with_locals(locals)
            cases = self._branch_cases(eff.branch, inner, [eq(repo.row(where), TRUE_B)], repo)
            targets = repo.targets(where, with_row=False)
            return UpdateGroup(targets, param, tuple(cases), repo.attrs(where)).substituted({})

        if repo.bound is None:
            j = Var("%j", repo.index_sort)
            return [group(j, j)]
        return [group(s, None) for s in repo.slots]

    def _branch_cases(self, branch, scope: _Scope, prefix: List[Literal], repo: RepoLayout) -> List[Case]:
        if isinstance(branch, Atom):
            values = tuple(scope.term(t, a.sort) for t, a in zip(branch.terms, repo.relation.attributes))
            return [(tuple(prefix), values)]
        cases: List[Case] = []
        for query in branch.filter:
            env = scope.env.copy().infer(query.items)
            local_names = set(env.sorts) - set(scope.env.sorts)
            inner = scope.with_env(env)
            for lits, _ in inner.items(query.items):
                kept, _ = eliminate_definitions(lits, lambda v: v.name in local_names)
                if kept is None:
                    continue
                leftover = {t.name for lit in kept for t in literal_subterms(lit)
                            if isinstance(t, Var) and t.name in local_names}
                if leftover:
                    raise UnsupportedCombination(
                        f"conditional update filter binds {', '.join(sorted(leftover))} without a definition")
                cases.extend(self._branch_cases(branch.then, scope, prefix + kept, repo))
        cases.extend(self._branch_cases(branch.otherwise, scope, prefix, repo))
        return cases

    # -- rules ---------------------------------------------------------------

    def update_fragments(self, spec: UpdateSpec, stage: str, task: str, ctx: CaseContext) -> List[_Fragment]:
        schema = self.model.data
        if stage == COMPLETE:
            inputs = self.layout.aux.get(task, {})
            locals = {v: ctx.read(aux_name(task, v)) for v in inputs}
            scope = _Scope(self, ctx, TypeEnv(schema), ctx.suffix, locals)
            return self.effect(spec, scope, {})
        fragments = []
        for query in spec.pre.body:
            env = update_env(spec, query, schema)
            scope = _Scope(self, ctx, env)
            extra = list(spec.pre.head_names) + [t.name for t in effect_terms(spec.eff) if isinstance(t, Variable)]
            if isinstance(spec.eff, CondUpdate):
                extra = list(spec.pre.head_names)
            for lits, bindings in scope.items(query.items):
                guard = lits + scope.input_guards(_data_names(query, extra, self.model))
                if stage == ACTIVATE:
                    writes = {aux_name(task, v): scope.term(Variable(v), sort)
                              for v, sort in self.layout.aux.get(task, {}).items()}
                    fragments.append(_Fragment(guard=guard, writes=writes))
                    continue
                for f in self.effect(spec, scope, bindings):
                    fragments.append(_Fragment(guard + f.guard, f.writes, f.groups))
        return fragments

    def rule_transitions(self, rule: BlockRule, ctx: CaseContext) -> List[Transition]:
        guard: List[Literal] = []
        for block, state in rule.requires:
            guard.append(eq(ctx.read(lifecycle_name(block)), Const(state, LIFECYCLE)))
        for block, value in rule.flags:
            guard.append(eq(ctx.read(flag_name(block)), TRUE_B if value else FALSE_B))
        scope = _Scope(self, ctx, TypeEnv(self.model.data))
        choices = [scope.condition(cond, positive) for cond, positive in rule.conditions]
        writes: Dict[str, Term] = {lifecycle_name(b): Const(state, LIFECYCLE) for b, state in rule.sets}
        writes.update({flag_name(b): TRUE_B if value else FALSE_B for b, value in rule.set_flags})
        spec = self.model.update(rule.update)
        fragments = self.update_fragments(spec, rule.stage, rule.block, ctx) if spec else [_Fragment()]
        result = []
        for picked in itertools.product(*choices):
            conds = [lit for cube in picked for lit in cube]
            for f in fragments:
                t = self.finish(rule.name, rule.name, rule.block, guard + conds + f.guard,
                                ctx.write({**f.writes, **writes}) + f.groups)
                if t is not None:
                    result.append(t)
        return _numbered(result, ctx.suffix)

    def create_case(self, ctx: CaseContext) -> Transition:
        root = self.model.root.name
        guard = [eq(ctx.read(SELF), undef(self.layout.ctype))]
        writes = {SELF: ctx.fresh_self(), lifecycle_name(root): Const(ENABLED, LIFECYCLE)}
        t = self.finish(CREATE_CASE, CREATE_CASE, None, guard, ctx.write(writes))
        return _numbered([t], ctx.suffix)[0]

    def finish(self, name: str, rule: str, block: Optional[str], guard: List[Literal],
               groups: List[UpdateGroup]) -> Optional[Transition]:
        lits, mapping = eliminate_definitions(guard, lambda v: not is_index_var(v))
        if lits is None:
            return None
        groups = [g.substituted(mapping) for g in groups]
        params = {t for lit in lits for t in literal_subterms(lit) if isinstance(t, Var)}
        for g in groups:
            params.update(g.variables())
        ordered = tuple(sorted(params, key=lambda v: (v.name, v.sort)))
        return Transition(name, rule, block, ordered, tuple(sorted(lits, key=str)), tuple(groups))

    def transitions(self) -> List[Transition]:
        result = []
        for ctx in self.layout.case_contexts():
            result.append(self.create_case(ctx))
        for rule in model_rules(self.model):
            for ctx in self.layout.case_contexts():
                result.extend(self.rule_transitions(rule, ctx))
        return result


def _numbered(transitions: List[Transition], suffix: str) -> List[Transition]:
    result = []
    for n, t in enumerate(transitions, start=1):
        name = f"{t.name}#{n}" if len(transitions) > 1 else t.name
        result.append(Transition(name + suffix, t.rule, t.block, t.params, t.guard, t.updates))
    return result


def _signature(m: DabModel, mode: VerificationMode, layout: Layout) -> Signature:
    base = catalog_to_signature(m.data)
    sorts = [SortInfo(LIFECYCLE, "value", LIFECYCLE_STATES)]
    functions = []
    ctype = m.data.ctype
    if mode.case_bound is not None:
        info = base.sorts[ctype]
        banks = tuple(f"case{b}" for b in range(1, mode.case_bound + 1))
        sorts.append(SortInfo(ctype, info.kind, info.carrier, info.constants + banks))
    else:
        sorts.append(SortInfo(PI_INDEX, "artifact"))
        functions.append(FunctionSymbol(CASEID, PI_INDEX, ctype, injective=True))
    if mode.repo_bound is None:
        sorts.extend(SortInfo(repo.index_sort, "artifact") for repo in layout.repos.values())
    return base.extended(sorts, functions)


# ---------------------------------------------------------------------------
# Public operations
# ---------------------------------------------------------------------------

def translate(m: DabModel, mode: VerificationMode) -> ArtifactSystem:
    """Artifact system for ``m`` under ``mode``; ``m`` must validate"""
    builder = _Builder(m, mode)
    layout = builder.layout
    variables: List[StateSlot] = []
    components: List[Component] = []
    for name in layout.case_sorts:
        sort, initial = layout.case_sorts[name], layout.case_initial[name]
        if layout.banked:
            variables.extend(StateSlot(f"{name}@{b}", sort, initial) for b in range(1, mode.case_bound + 1))
        else:
            components.append(Component(name, PI_INDEX, sort, initial))
    for repo in layout.repos.values():
        columns = [(ROW, BOOL)] + [(a.name, a.sort) for a in repo.relation.attributes]
        for attr, sort in columns:
            if repo.bound is None:
                components.append(Component(repo.array(attr), repo.index_sort, sort))
            else:
                variables.extend(StateSlot(f"{repo.array(attr)}/{s}", sort) for s in repo.slots)
    transitions = builder.transitions()
    system = ArtifactSystem(builder.signature, tuple(variables), tuple(components), tuple(transitions), mode, layout)
    logger.info(f"Translated model {m.root.name} ({mode}): {len(variables)} variables, "
                f"{len(components)} components, {len(transitions)} transitions")
    return system


def translate_block(m: DabModel, b: Block, mode: VerificationMode) -> List[Transition]:
    """Transitions contributed by the lifecycle rules of one block"""
    builder = _Builder(m, mode)
    return [t for rule in block_rules(m, b) for ctx in builder.layout.case_contexts()
            for t in builder.rule_transitions(rule, ctx)]


def rewrite_update(m: DabModel, spec: UpdateSpec, mode: VerificationMode,
                   stage: str = "fire", task: str = "") -> List[Tuple[Tuple[Literal, ...], Tuple[UpdateGroup, ...]]]:
    """Guard/update fragments for one update specification, in the first case context"""
    builder = _Builder(m, mode)
    ctx = builder.layout.case_contexts()[0]
    result = []
    for f in builder.update_fragments(spec, stage, task, ctx):
        t = builder.finish(spec.name, spec.name, None, f.guard, ctx.write(f.writes) + f.groups)
        if t is not None:
            result.append((t.guard, t.updates))
    return result


def translate_property(p: Property, m: DabModel, mode: VerificationMode) -> StateFormula:
    """Unsafe-state formula: one distinct existing case per property index"""
    builder = _Builder(m, mode)
    layout = builder.layout
    n = len(p.indexes)
    if mode.case_bound is not None and n > mode.case_bound:
        raise TooManyIndexes(f"property has {n} indexes but the case bound is {mode.case_bound}")
    per_index: List[List[List[Literal]]] = []
    contexts = []
    for k, (index, body) in enumerate(p.items(), start=1):
        if layout.banked:
            ctx = CaseContext(layout, bank=k)
        else:
            ctx = CaseContext(layout, index=Var(f"%p{k}", PI_INDEX))
        contexts.append(ctx)
        exists = [neq(ctx.read(SELF), undef(layout.ctype))]
        options = []
        for query in body:
            scope = _Scope(builder, ctx, TypeEnv(m.data).infer(query.items), suffix=f"~{index}")
            for lits, _ in scope.items(query.items):
                options.append(exists + lits + scope.input_guards(_data_names(query, (), m)))
        per_index.append(options)
    distinct = [neq(a.read(SELF), b.read(SELF)) for a, b in itertools.combinations(contexts, 2)] \
        if layout.banked else [neq(a.index, b.index) for a, b in itertools.combinations(contexts, 2)]
    cubes = []
    for picked in itertools.product(*per_index):
        lits = distinct + [lit for part in picked for lit in part]
        kept, _ = eliminate_definitions(lits, lambda v: not is_index_var(v))
        if kept is None:
            continue
        cube = Cube.of(kept)
        if cube is not None and cube not in cubes:
            cubes.append(cube)
    return tuple(cubes)


# ---------------------------------------------------------------------------
# Shape audit
# ---------------------------------------------------------------------------

def validate_shape(system: ArtifactSystem) -> List[str]:
    """Problems that keep a transition from the ``exists e. guard & updates`` format"""
    sig = system.signature
    problems = []
    for c in system.components:
        if c.source not in sig.sorts or not sig.sorts[c.source].artifact:
            problems.append(f"component {c.name}: source {c.source} is not an artifact sort")
        if c.target not in sig.sorts or sig.sorts[c.target].artifact:
            problems.append(f"component {c.name}: target {c.target} is not a basic sort")
    arrays = {c.name: c for c in system.components}
    scalars = {v.name: v for v in system.variables}

    def check_term(t: Term, where: str):
        for sub in subterms(t):
            if sub.sort not in sig.sorts:
                problems.append(f"{where}: unknown sort {sub.sort}")
            if isinstance(sub, StateVar) and (sub.name not in scalars or scalars[sub.name].sort != sub.sort):
                problems.append(f"{where}: unknown variable {sub.name}")
            if isinstance(sub, Read):
                c = arrays.get(sub.array)
                if c is None or c.target != sub.sort or c.source != sub.index.sort:
                    problems.append(f"{where}: ill-sorted read {sub}")
            if isinstance(sub, Const) and sub.sort == LIFECYCLE and sub.name not in LIFECYCLE_STATES + (UNDEF,):
                problems.append(f"{where}: unknown lifecycle state {sub.name}")

    def check_literal(lit: Literal, where: str):
        terms = [lit.left, lit.right] if hasattr(lit, "left") else [lit.term]
        if len({t.sort for t in terms}) > 1:
            problems.append(f"{where}: ill-sorted literal {lit}")
        for t in terms:
            check_term(t, where)

    for t in system.transitions:
        where = f"transition {t.name}"
        for lit in t.guard:
            check_literal(lit, where)
        written = []
        for g in t.updates:
            written.extend(g.targets)
            pool = arrays if g.param is not None else scalars
            sorts = []
            for name in g.targets:
                slot = pool.get(name)
                if slot is None:
                    problems.append(f"{where}: writes unknown target {name}")
                    sorts.append(None)
                    continue
                sorts.append(slot.target if g.param is not None else slot.sort)
                if g.param is not None and slot.source != g.param.sort:
                    problems.append(f"{where}: {name} updated over {g.param.sort}")
            for conds, values in g.cases + (((), g.default),):
                for lit in conds:
                    check_literal(lit, where)
                if len(values) != len(g.targets):
                    problems.append(f"{where}: update of {', '.join(g.targets)} has {len(values)} values")
                for value, sort in zip(values, sorts):
                    check_term(value, where)
                    if sort is not None and value.sort != sort:
                        problems.append(f"{where}: value {value} does not have sort {sort}")
        if len(written) != len(set(written)):
            problems.append(f"{where}: a target is written twice")
        free = set(t.params)
        mentioned = {s for lit in t.guard for s in literal_subterms(lit) if isinstance(s, Var)}
        for g in t.updates:
            mentioned.update(g.variables())
        if mentioned - free:
            problems.append(f"{where}: unquantified variables {sorted(v.name for v in mentioned - free)}")
    return problems


# ---------------------------------------------------------------------------
# Concrete execution
# ---------------------------------------------------------------------------

def initial_structure(system: ArtifactSystem, carriers: Mapping[str, Sequence[str]],
                      functions: Optional[Mapping[str, Mapping[str, str]]] = None) -> FiniteStructure:
    """The initial state over the given carriers (artifact sorts list their index elements)"""
    state = {v.name: v.initial for v in system.variables}
    arrays = {c.name: {e: c.initial for e in carriers.get(c.source, ())} for c in system.components}
    return FiniteStructure({s: tuple(v) for s, v in carriers.items()},
                           {k: dict(v) for k, v in (functions or {}).items()}, state, arrays)


def apply_transition(t: Transition, s: FiniteStructure, binding: Mapping[str, str]) -> Optional[FiniteStructure]:
    """Successor of ``s`` under ``t`` with its parameters bound, or None if the guard fails"""
    if not all(eval_literal(lit, s, binding) for lit in t.guard):
        return None
    state = dict(s.state)
    arrays = {name: dict(values) for name, values in s.arrays.items()}
    for group in t.updates:
        if group.param is None:
            for name, value in zip(group.targets, _pick(group, s, binding)):
                state[name] = value
            continue
        for element in s.carriers.get(group.param.sort, ()):
            values = _pick(group, s, {**binding, group.param.name: element})
            for name, value in zip(group.targets, values):
                arrays.setdefault(name, {})[element] = value
    return FiniteStructure(s.carriers, s.functions, state, arrays)


def _pick(group: UpdateGroup, s: FiniteStructure, assignment: Mapping[str, str]) -> Tuple[str, ...]:
    for conds, values in group.cases:
        if all(eval_literal(lit, s, assignment) for lit in conds):
            return tuple(eval_term(v, s, assignment) for v in values)
    return tuple(eval_term(v, s, assignment) for v in group.default)


def successors(system: ArtifactSystem, s: FiniteStructure) -> Iterator[Tuple[str, Dict[str, str], FiniteStructure]]:
    """Every (transition, binding, successor) triple over the carriers of ``s``"""
    for t in system.transitions:
        domains = [s.carriers.get(v.sort, ()) for v in t.params]
        for values in itertools.product(*domains):
            binding = {v.name: value for v, value in zip(t.params, values)}
            nxt = apply_transition(t, s, binding)
            if nxt is not None:
                yield t.name, binding, nxt


# ---------------------------------------------------------------------------
# Emission
# ---------------------------------------------------------------------------

def _conds(conds: Sequence[Literal]) -> str:
    return " & ".join(str(lit) for lit in conds) if conds else "true"


def emit_arts(system: ArtifactSystem) -> str:
    """Self-contained textual rendering of the artifact system"""
    sig = system.signature
    lines = [f"# artifact system ({system.mode})", "sorts {"]
    for info in sorted(sig.sorts.values(), key=lambda s: s.name):
        extra = f" = {{{', '.join(info.carrier)}}}" if info.carrier else ""
        consts = f" constants {{{', '.join(info.constants)}}}" if info.constants else ""
        lines.append(f"  {info.kind} {info.name}{extra}{consts};")
    lines.append("}")
    lines.append("functions {")
    for fn in sorted(sig.functions.values(), key=lambda f: f.name):
        tag = " injective" if fn.injective else ""
        lines.append(f"  {fn.name}: {fn.source} -> {fn.target}{tag};")
    lines.append("}")
    lines.append("variables {")
    lines.extend(f"  {v.name}: {v.sort} = {v.initial};" for v in system.variables)
    lines.append("}")
    lines.append("components {")
    lines.extend(f"  {c.name}: {c.source} -> {c.target} = lambda. {c.initial};" for c in system.components)
    lines.append("}")
    for t in system.transitions:
        lines.append(f"transition {t.name} [rule={t.rule}] {{")
        if t.params:
            lines.append(f"  exists {', '.join(f'{v.name}:{v.sort}' for v in t.params)};")
        lines.append(f"  guard {_conds(t.guard)};")
        for g in t.updates:
            lines.extend(_render_group(g))
        lines.append("}")
    return "\n".join(lines) + "\n"


def _render_group(g: UpdateGroup) -> List[str]:
    lines = []
    for k, target in enumerate(g.targets):
        body = ""
        for conds, values in g.cases:
            body += f"if {_conds(conds)} then {values[k]} else "
        body += str(g.default[k])
        prefix = f"lambda {g.param.name}. " if g.param is not None else ""
        lines.append(f"  {target}' := {prefix}{body};")
    return lines


def emit_mcmt_like(system: ArtifactSystem) -> str:
    """Rule listing in the spirit of MCMT input files, for reading rather than running"""
    lines = [":comment artifact system listing"]
    for info in sorted(system.signature.sorts.values(), key=lambda s: s.name):
        lines.append(f":smt (define-type {info.name})")
    for v in system.variables:
        lines.append(f":global {v.name} {v.sort}")
    for c in system.components:
        lines.append(f":local {c.name} {c.target}")
    lines.append(":initial")
    lines.extend(f":cnj (= {line.split(' = ', 1)[0]} {line.split(' = ', 1)[1]})" for line in system.initial_literals())
    for t in system.transitions:
        lines.append("")
        lines.append(":transition")
        lines.append(f":comment {t.name}")
        for v in t.params:
            lines.append(f":var {v.name} {v.sort}")
        lines.append(f":guard {_conds(t.guard)}")
        for g in t.updates:
            lines.append(f":numcases {len(g.cases) + 1}")
            for conds, values in g.cases:
                lines.append(f":case {_conds(conds)}")
                lines.extend(f" :val {name} {value}" for name, value in zip(g.targets, values))
            lines.append(":case")
            lines.extend(f" :val {name} {value}" for name, value in zip(g.targets, g.default))
    return "\n".join(lines) + "\n"


__all__ = [
    "PI_INDEX", "CREATE_CASE", "ROW", "lifecycle_name", "flag_name", "aux_name", "is_index_var",
    "StateSlot", "Component", "UpdateGroup", "Transition", "ArtifactSystem", "CaseContext", "RepoLayout",
    "Layout", "nonatomic_inputs", "eliminate_definitions", "translate", "translate_block", "rewrite_update",
    "translate_property", "validate_shape", "initial_structure", "apply_transition", "successors",
    "emit_arts", "emit_mcmt_like",
]
