"""
SMT-LIB v2 emission and the external solver process.

Every sort is declared uninterpreted; closed sorts get a domain-closure axiom,
constants are pairwise distinct per sort and the undef axioms are quantified
assertions. Variables of the obligation are declared as fresh constants.
"""
import logging
import shlex
import subprocess
from functools import lru_cache
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple

from dab.errors import SolverProtocolError, SolverTimeout, SolverUnavailable
from dab.logic.solver import Obligation
from dab.logic.terms import (
    App, Const, Eq, Literal, Mem, Neq, NotMem, Read, Signature, StateVar, Term, Var, literal_subterms,
)

logger = logging.getLogger(__name__)

DEFAULT_COMMAND = "z3 -in -smt2"
IN_PROCESS = "z3py"

_PLAIN = set("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_-+.*<>=/?!$%&^~")


def symbol(text: str) -> str:
    if text and all(ch in _PLAIN for ch in text) and not text[0].isdigit():
        return text
    return f"|{text.replace('|', '_')}|"


def const_symbol(name: str, sort: str) -> str:
    return symbol(f"{name}:{sort}")


def _term(t: Term) -> str:
    if isinstance(t, Const):
        return const_symbol(t.name, t.sort)
    if isinstance(t, (Var, StateVar)):
        prefix = "v!" if isinstance(t, Var) else "s!"
        return symbol(prefix + t.name)
    if isinstance(t, Read):
        return f"({symbol('a!' + t.array)} {_term(t.index)})"
    return f"({symbol(t.fn)} {_term(t.arg)})"


def _literal(lit: Literal) -> str:
    if isinstance(lit, Eq):
        return f"(= {_term(lit.left)} {_term(lit.right)})"
    if isinstance(lit, Neq):
        return f"(not (= {_term(lit.left)} {_term(lit.right)}))"
    options = [f"(= {_term(lit.term)} {const_symbol(v, lit.term.sort)})" for v in sorted(lit.values)]
    body = options[0] if len(options) == 1 else f"(or {' '.join(options)})"
    return body if isinstance(lit, Mem) else f"(not {body})"


def _clause(lits: Sequence[Literal]) -> str:
    if not lits:
        return "false"
    if len(lits) == 1:
        return _literal(lits[0])
    return f"(or {' '.join(_literal(l) for l in lits)})"


def emit_smtlib(ob: Obligation, sig: Signature) -> str:
    """Deterministic SMT-LIB script checking the satisfiability of an obligation"""
    terms: List[Term] = [t for lit in ob.literals() for t in literal_subterms(lit)]
    sorts: Set[str] = set(sig.sorts) | {t.sort for t in terms}
    constants: Dict[str, Set[str]] = {s: set(sig.constants_of(s)) | {"undef"} for s in sorts}
    scalars: Dict[str, Tuple[str, str]] = {}
    arrays: Dict[str, Tuple[str, str]] = {}
    for t in terms:
        if isinstance(t, Const):
            constants.setdefault(t.sort, {"undef"}).add(t.name)
        elif isinstance(t, Var):
            scalars[symbol("v!" + t.name)] = ("", t.sort)
        elif isinstance(t, StateVar):
            scalars[symbol("s!" + t.name)] = ("", t.sort)
        elif isinstance(t, Read):
            arrays[symbol("a!" + t.array)] = (t.index.sort, t.sort)
            sorts.add(t.index.sort)

    lines = ["(set-logic ALL)"]
    for s in sorted(sorts):
        lines.append(f"(declare-sort {symbol(s)} 0)")
    for s in sorted(constants):
        names = sorted(constants[s])
        for name in names:
            lines.append(f"(declare-fun {const_symbol(name, s)} () {symbol(s)})")
        if len(names) > 1:
            lines.append(f"(assert (distinct {' '.join(const_symbol(n, s) for n in names)}))")
        info = sig.sorts.get(s)
        if info is not None and info.closed:
            options = " ".join(f"(= x {const_symbol(n, s)})" for n in names)
            lines.append(f"(assert (forall ((x {symbol(s)})) (or {options})))")
    for fn in sorted(sig.functions.values(), key=lambda f: f.name):
        src, tgt = symbol(fn.source), symbol(fn.target)
        name = symbol(fn.name)
        lines.append(f"(declare-fun {name} ({src}) {tgt})")
        undef_src, undef_tgt = const_symbol("undef", fn.source), const_symbol("undef", fn.target)
        if fn.injective:
            lines.append(f"(assert (forall ((x {src}) (y {src})) (=> (= ({name} x) ({name} y)) (= x y))))")
            lines.append(f"(assert (forall ((x {src})) (not (= ({name} x) {undef_tgt}))))")
        else:
            lines.append(f"(assert (forall ((x {src})) (= (= x {undef_src}) (= ({name} x) {undef_tgt}))))")
    for name in sorted(scalars):
        lines.append(f"(declare-fun {name} () {symbol(scalars[name][1])})")
    for name in sorted(arrays):
        source, target = arrays[name]
        lines.append(f"(declare-fun {name} ({symbol(source)}) {symbol(target)})")
    for lit in sorted(ob.cube, key=str):
        lines.append(f"(assert {_literal(lit)})")
    for clause in ob.clauses:
        lines.append(f"(assert {_clause(sorted(clause, key=str))})")
    lines.append("(check-sat)")
    return "\n".join(lines) + "\n"


@lru_cache(maxsize=8)
def _require_executable(executable: str) -> None:
    """Fail fast when the solver binary is missing"""
    try:
        subprocess.run([executable, "--version"], capture_output=True, check=True, timeout=5)
    except (subprocess.CalledProcessError, FileNotFoundError):
        raise SolverUnavailable(f"SMT solver '{executable}' not found or not runnable")
    except subprocess.TimeoutExpired:
        raise SolverUnavailable(f"SMT solver '{executable}' version check timeout")


def _parse_verdict(output: str) -> bool:
    lines = [line.strip() for line in output.splitlines() if line.strip()]
    if not lines or lines[0] not in ("sat", "unsat", "unknown"):
        raise SolverProtocolError(f"unexpected solver answer: {lines[0] if lines else '<empty>'}")
    if lines[0] == "unknown":
        logger.warning("[WARN] Solver answered unknown; treating the obligation as satisfiable")
    return lines[0] != "unsat"


def _z3_solver(timeout_ms: int):
    """A solver on its own z3 context; the default context is shared by every thread"""
    try:
        import z3
    except ImportError:
        raise SolverUnavailable("the z3-solver package is not installed")
    solver = z3.Solver(ctx=z3.Context())
    solver.set(timeout=timeout_ms)
    return solver


def _check_in_process(doc: str, timeout_ms: int) -> bool:
    solver = _z3_solver(timeout_ms)
    import z3
    try:
        solver.from_string(doc)
    except z3.Z3Exception as e:
        raise SolverProtocolError(f"z3 rejected the script: {e}")
    verdict = solver.check()
    if verdict == z3.unknown and "timeout" in str(solver.reason_unknown()):
        raise SolverTimeout(f"solver exceeded {timeout_ms} ms")
    return _parse_verdict(str(verdict))


def check_external(doc: str, command: Optional[str] = None, timeout_ms: int = 10000) -> bool:
    """Run one script through the configured solver; True means sat (or unknown)"""
    command = command or DEFAULT_COMMAND
    if command.strip() == IN_PROCESS:
        return _check_in_process(doc, timeout_ms)
    argv = shlex.split(command)
    _require_executable(argv[0])
    try:
        result = subprocess.run(
            argv,
            input=doc,
            capture_output=True,
            text=True,
            timeout=timeout_ms / 1000.0,
        )
    except FileNotFoundError:
        raise SolverUnavailable(f"SMT solver '{argv[0]}' not found")
    except subprocess.TimeoutExpired:
        raise SolverTimeout(f"solver exceeded {timeout_ms} ms")
    if result.returncode != 0 and not result.stdout.strip():
        raise SolverProtocolError(f"solver exited with code {result.returncode}: {result.stderr.strip()[:200]}")
    return _parse_verdict(result.stdout)


__all__ = ["DEFAULT_COMMAND", "IN_PROCESS", "emit_smtlib", "check_external", "symbol"]
