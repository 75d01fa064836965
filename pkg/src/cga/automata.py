"""Nondeterministic quasi-realtime k-counter automata.

A counter automaton is a finite automaton over a token alphabet, augmented
with k integer counters.  Counters start at zero; transitions carry
instruction programs that may increment, decrement, zero-test or reset them.
A word is accepted when some run reads exactly the word and ends in an
accepting state with every counter equal to zero.

Blind machines never read their counters (no tests, no resets).
Quasi-realtime means a fixed bound on consecutive epsilon moves; here it is
enforced structurally by requiring the epsilon-transition graph to be acyclic.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Optional

EPSILON = None  # transition label for moves that read no input

# instruction kinds
INC = "inc"
DEC = "dec"
TEST_ZERO = "test_zero"
TEST_NONZERO = "test_nonzero"
SET_ZERO = "set_zero"
NOOP = "noop"

_KINDS = (INC, DEC, TEST_ZERO, TEST_NONZERO, SET_ZERO, NOOP)
_GUARDS = (TEST_ZERO, TEST_NONZERO)
_READS = (TEST_ZERO, TEST_NONZERO, SET_ZERO)


class AutomatonError(Exception):
    """Structural problem in an automaton definition."""


class TokenError(AutomatonError):
    """A word contains a token outside the machine's alphabet."""


@dataclass(frozen=True)
class CounterInstruction:
    """One action on one counter. ``amount`` is used by inc/dec only."""

    kind: str
    amount: int = 0

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise AutomatonError(f"unknown instruction kind {self.kind!r}")
        if self.kind in (INC, DEC) and self.amount < 1:
            raise AutomatonError(f"{self.kind} amount must be >= 1")


NO_OP = CounterInstruction(NOOP)


def inc(amount: int = 1) -> CounterInstruction:
    return CounterInstruction(INC, amount)


def dec(amount: int = 1) -> CounterInstruction:
    return CounterInstruction(DEC, amount)


TEST0 = CounterInstruction(TEST_ZERO)
TESTN0 = CounterInstruction(TEST_NONZERO)
SETZ = CounterInstruction(SET_ZERO)

# An instruction program is a tuple of steps; each step is a k-tuple of
# CounterInstruction (entry i acts on counter i).  Steps apply in order.
# Guards in a step are evaluated against the counter values current at that
# step, before any of the step's mutations; a failed guard blocks the whole
# transition with no counter changed.
Program = tuple


def program(*steps: Iterable[CounterInstruction]) -> Program:
    return tuple(tuple(step) for step in steps)


EMPTY_PROGRAM: Program = ()


def single_step(k: int, **per_counter: CounterInstruction) -> Program:
    """Build a one-step program for k counters, e.g. single_step(2, c0=inc())."""
    step = [NO_OP] * k
    for name, instr in per_counter.items():
        step[int(name[1:])] = instr
    return (tuple(step),)


def delta_program(k: int, index: int, delta: int) -> Program:
    """One-step program adding ``delta`` to counter ``index`` (empty if 0)."""
    if delta == 0:
        return EMPTY_PROGRAM
    instr = inc(delta) if delta > 0 else dec(-delta)
    step = [NO_OP] * k
    step[index] = instr
    return (tuple(step),)


def pad_program(prog: Program, old_k: int, new_k: int, offset: int = 0) -> Program:
    """Re-home a program for ``old_k`` counters into a ``new_k``-counter vector."""
    out = []
    for step in prog:
        padded = [NO_OP] * new_k
        for i, instr in enumerate(step):
            padded[offset + i] = instr
        out.append(tuple(padded))
    return tuple(out)


def apply_program(prog: Program, counters: tuple) -> Optional[tuple]:
    """Run a program on a counter vector; None if a guard fails."""
    cur = counters
    for step in prog:
        nxt = None
        for i, instr in enumerate(step):
            kind = instr.kind
            if kind is NOOP or kind == NOOP:
                continue
            if kind == TEST_ZERO:
                if cur[i] != 0:
                    return None
            elif kind == TEST_NONZERO:
                if cur[i] == 0:
                    return None
            else:
                if nxt is None:
                    nxt = list(cur)
                if kind == INC:
                    nxt[i] += instr.amount
                elif kind == DEC:
                    nxt[i] -= instr.amount
                else:  # SET_ZERO
                    nxt[i] = 0
        if nxt is not None:
            cur = tuple(nxt)
    return cur


def program_reads_counters(prog: Program) -> bool:
    return any(instr.kind in _READS for step in prog for instr in step)


def program_max_delta(prog: Program) -> int:
    """Largest |net additive change| any counter can get from this program."""
    if not prog:
        return 0
    k = len(prog[0])
    best = 0
    for i in range(k):
        net = 0
        for step in prog:
            instr = step[i]
            if instr.kind == INC:
                net += instr.amount
            elif instr.kind == DEC:
                net -= instr.amount
            elif instr.kind == SET_ZERO:
                net = 0
        best = max(best, abs(net))
    return best


class Transition(NamedTuple):
    src: str
    label: Optional[str]  # token, or EPSILON
    program: Program
    dst: str


@dataclass(frozen=True)
class Configuration:
    """A (state, counter vector) pair; the diamond flag marks runs whose
    second convolution row has already been exhausted."""

    state: str
    counters: tuple
    diamond: bool = False


@dataclass
class ValidationReport:
    errors: list = field(default_factory=list)
    epsilon_bound: Optional[int] = None  # longest epsilon-only path, None on cycle
    blind: bool = False
    deterministic: bool = False

    @property
    def ok(self) -> bool:
        return not self.errors


class CounterAutomaton:
    """Immutable k-counter automaton.  All operations are pure."""

    def __init__(self, name, alphabet, counters, states, start, accepts,
                 transitions, blind=False, deterministic=False):
        self.name = name
        self.alphabet = tuple(alphabet)
        self.alphabet_set = frozenset(self.alphabet)
        self.counters = counters
        self.states = tuple(states)
        self.start = start
        self.accepts = frozenset(accepts)
        self.transitions = tuple(
            t if isinstance(t, Transition) else Transition(*t) for t in transitions
        )
        self.declared_blind = blind
        self.declared_deterministic = deterministic
        self._by_state_letter = None
        self._eps_by_state = None
        self._eps_bound = None

    # -- derived tables ----------------------------------------------------

    @property
    def by_state_letter(self):
        """dict (state, token) -> list of (program, dst)."""
        if self._by_state_letter is None:
            table = {}
            for t in self.transitions:
                if t.label is not EPSILON:
                    table.setdefault((t.src, t.label), []).append((t.program, t.dst))
            self._by_state_letter = table
        return self._by_state_letter

    @property
    def eps_by_state(self):
        if self._eps_by_state is None:
            table = {}
            for t in self.transitions:
                if t.label is EPSILON:
                    table.setdefault(t.src, []).append((t.program, t.dst))
            self._eps_by_state = table
        return self._eps_by_state

    def epsilon_bound(self):
        """Length of the longest epsilon-only path; None if the epsilon graph
        has a cycle (quasi-realtime violated)."""
        if self._eps_bound is None:
            self._eps_bound = _longest_eps_path(self)
        return self._eps_bound

    def max_transition_delta(self) -> int:
        return max((program_max_delta(t.program) for t in self.transitions), default=0)

    def degree_bound(self) -> int:
        """Max in- or out-degree over states (the constant E of the search)."""
        outs = {}
        ins = {}
        for t in self.transitions:
            outs[t.src] = outs.get(t.src, 0) + 1
            ins[t.dst] = ins.get(t.dst, 0) + 1
        candidates = list(outs.values()) + list(ins.values())
        return max(candidates, default=0)

    # -- semantics ----------------------------------------------------------

    def zero_vector(self) -> tuple:
        return (0,) * self.counters

    def eps_closure(self, configs):
        """All configurations reachable by epsilon moves (input set included)."""
        eps = self.eps_by_state
        out = set(configs)
        stack = [c for c in out if c[0] in eps]
        while stack:
            state, counters = stack.pop()
            for prog, dst in eps[state]:
                nxt = apply_program(prog, counters)
                if nxt is None:
                    continue
                cfg = (dst, nxt)
                if cfg not in out:
                    out.add(cfg)
                    if dst in eps:
                        stack.append(cfg)
        return out

    def step(self, configs, token):
        table = self.by_state_letter
        out = set()
        for state, counters in configs:
            for prog, dst in table.get((state, token), ()):
                nxt = apply_program(prog, counters)
                if nxt is not None:
                    out.add((dst, nxt))
        return out

    def _check_word(self, word):
        for tok in word:
            if tok not in self.alphabet_set:
                raise TokenError(f"token {tok!r} not in alphabet of {self.name}")

    def run(self, word):
        """Configuration set after consuming the word (epsilon-closed)."""
        self._check_word(word)
        configs = self.eps_closure({(self.start, self.zero_vector())})
        for tok in word:
            configs = self.eps_closure(self.step(configs, tok))
            if not configs:
                break
        return configs

    def accepts_word(self, word) -> bool:
        zero = self.zero_vector()
        return any(
            state in self.accepts and counters == zero
            for state, counters in self.run(word)
        )


def _longest_eps_path(m: CounterAutomaton):
    eps_edges = {}
    for t in m.transitions:
        if t.label is EPSILON:
            eps_edges.setdefault(t.src, []).append(t.dst)
    depth = {}
    WIP = object()

    def visit(state):
        cached = depth.get(state)
        if cached is WIP:
            return None
        if cached is not None:
            return cached
        depth[state] = WIP
        best = 0
        for dst in eps_edges.get(state, ()):
            sub = visit(dst)
            if sub is None:
                return None
            best = max(best, sub + 1)
        depth[state] = best
        return best

    longest = 0
    for state in list(eps_edges):
        d = visit(state)
        if d is None:
            return None
        longest = max(longest, d)
    return longest


def validate(m: CounterAutomaton) -> ValidationReport:
    """Structural validation: epsilon bound, blindness and determinism verdicts."""
    report = ValidationReport()
    state_set = set(m.states)
    if m.start not in state_set:
        report.errors.append(f"start state {m.start!r} not declared")
    for s in m.accepts:
        if s not in state_set:
            report.errors.append(f"accept state {s!r} not declared")
    for t in m.transitions:
        if t.src not in state_set:
            report.errors.append(f"dangling source state {t.src!r}")
        if t.dst not in state_set:
            report.errors.append(f"dangling target state {t.dst!r}")
        if t.label is not EPSILON and t.label not in m.alphabet_set:
            report.errors.append(f"transition label {t.label!r} not in alphabet")
        for step in t.program:
            if len(step) != m.counters:
                report.errors.append(
                    f"program step arity {len(step)} != counters {m.counters}"
                )

    blind = not any(program_reads_counters(t.program) for t in m.transitions)
    report.blind = blind
    if m.declared_blind and not blind:
        report.errors.append("blind flag contradicted by a read/reset instruction")

    bound = m.epsilon_bound()
    report.epsilon_bound = bound
    if bound is None:
        report.errors.append("epsilon cycle detected (quasi-realtime violated)")

    report.deterministic = _determinism_verdict(m)
    return report


def _guard_prefix(prog: Program, k: int):
    """Per counter, the first guard seen before any mutation of that counter."""
    guards = [None] * k
    mutated = [False] * k
    for step in prog:
        for i, instr in enumerate(step):
            if instr.kind in _GUARDS and not mutated[i] and guards[i] is None:
                guards[i] = instr.kind
            elif instr.kind in (INC, DEC, SET_ZERO):
                mutated[i] = True
    return tuple(guards)


def _determinism_verdict(m: CounterAutomaton) -> bool:
    eps_sources = {t.src for t in m.transitions if t.label is EPSILON}
    letter_sources = {t.src for t in m.transitions if t.label is not EPSILON}
    if eps_sources & letter_sources:
        return False
    by_key = {}
    for t in m.transitions:
        by_key.setdefault((t.src, t.label), []).append(t)
    for key, group in by_key.items():
        if len(group) == 1:
            continue
        prefixes = [_guard_prefix(t.program, m.counters) for t in group]
        for i in range(len(group)):
            for j in range(i + 1, len(group)):
                contradictory = any(
                    a is not None and b is not None and a != b
                    for a, b in zip(prefixes[i], prefixes[j])
                )
                if not contradictory:
                    return False
    return True


def accepts(m: CounterAutomaton, word) -> bool:
    """Membership: some run reads the word and ends accepting with zero counters."""
    return m.accepts_word(word)


def reachable_configurations(m: CounterAutomaton, word):
    """Exact configuration set after consuming the word (epsilon-closed)."""
    return {Configuration(state, counters) for state, counters in m.run(word)}


def counter_growth_bound(m: CounterAutomaton, n: int) -> int:
    """Linear ceiling F*n on counter magnitude after reading n tokens,
    with F = 3 * max(K,1) * (max per-transition change)."""
    K = m.epsilon_bound()
    if K is None:
        raise AutomatonError("epsilon cycle: growth bound undefined")
    return 3 * max(K, 1) * m.max_transition_delta() * n


def fresh_names(count: int, prefix: str = "q"):
    return [f"{prefix}{i}" for i in range(count)]
