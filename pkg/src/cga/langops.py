"""Convolution of word tuples and closure operations on counter automata.

Tuple letters stack one token per row, with the padding symbol filling rows
whose word has already ended.  They are serialized as single tokens like
``(a|b)`` and ``(a|_)``, ``_`` standing for the padding symbol; components may
themselves be tuple tokens, e.g. ``((a|_)|b)``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from .automata import (
    EPSILON,
    EMPTY_PROGRAM,
    AutomatonError,
    CounterAutomaton,
    Transition,
    pad_program,
)

DIAMOND = "_"  # display form of the padding symbol inside tuple tokens


class LangOpError(AutomatonError):
    pass


class AlphabetMismatch(LangOpError):
    pass


# ---------------------------------------------------------------------------
# tuple letters and convolution


def tuple_token(components) -> str:
    """Serialize a tuple letter; None components become the padding symbol."""
    parts = [DIAMOND if c is None else c for c in components]
    return "(" + "|".join(parts) + ")"


def parse_tuple_token(token: str):
    """Inverse of tuple_token; splits only on top-level ``|``."""
    if not (token.startswith("(") and token.endswith(")")):
        raise LangOpError(f"not a tuple token: {token!r}")
    inner = token[1:-1]
    parts = []
    depth = 0
    cur = []
    for ch in inner:
        if ch == "|" and depth == 0:
            parts.append("".join(cur))
            cur = []
        else:
            if ch == "(":
                depth += 1
            elif ch == ")":
                depth -= 1
            cur.append(ch)
    parts.append("".join(cur))
    if depth != 0 or len(parts) < 2:
        raise LangOpError(f"malformed tuple token: {token!r}")
    return tuple(None if p == DIAMOND else p for p in parts)


@dataclass(frozen=True)
class ConvolvedAlphabet:
    """All r-tuples over a base alphabet plus padding, minus the all-padding one."""

    arity: int
    base: tuple

    def __post_init__(self):
        if self.arity < 2:
            raise LangOpError("convolved alphabets need arity >= 2")
        if DIAMOND in self.base:
            raise LangOpError("padding symbol cannot be a base token")

    def letters(self):
        padded = tuple(self.base) + (None,)
        for combo in itertools.product(padded, repeat=self.arity):
            if any(c is not None for c in combo):
                yield tuple_token(combo)

    def __contains__(self, token):
        try:
            parts = parse_tuple_token(token)
        except LangOpError:
            return False
        return (
            len(parts) == self.arity
            and any(p is not None for p in parts)
            and all(p is None or p in self.base for p in parts)
        )


def pair_alphabet(base) -> ConvolvedAlphabet:
    return ConvolvedAlphabet(2, tuple(base))


def convolve(*words):
    """Stack words letterwise into a tuple word of length max |w_i|."""
    if len(words) < 2:
        raise LangOpError("convolve needs at least two words")
    words = [tuple(w) for w in words]
    length = max((len(w) for w in words), default=0)
    out = []
    for i in range(length):
        out.append(tuple_token(tuple(w[i] if i < len(w) else None for w in words)))
    return tuple(out)


def project(word, coordinate: int):
    """Row ``coordinate`` of a tuple word, padding removed."""
    out = []
    for token in word:
        parts = parse_tuple_token(token)
        if coordinate >= len(parts):
            raise LangOpError(f"coordinate {coordinate} out of range for {token!r}")
        if parts[coordinate] is not None:
            out.append(parts[coordinate])
    return tuple(out)


# ---------------------------------------------------------------------------
# letter homomorphisms


@dataclass(frozen=True)
class LetterHomomorphism:
    """Token-to-word map phi; phi(w) concatenates the images of w's tokens."""

    source: tuple
    target: tuple
    mapping: dict = field(hash=False)

    def __post_init__(self):
        for tok in self.source:
            if tok not in self.mapping:
                raise LangOpError(f"homomorphism undefined on {tok!r}")
        for tok, image in self.mapping.items():
            for out in image:
                if out not in self.target:
                    raise LangOpError(f"image token {out!r} not in target alphabet")

    @property
    def epsilon_free(self) -> bool:
        return all(len(self.mapping[tok]) > 0 for tok in self.source)

    def apply(self, word):
        out = []
        for tok in word:
            if tok not in self.mapping:
                raise LangOpError(f"token {tok!r} not in homomorphism source")
            out.extend(self.mapping[tok])
        return tuple(out)


def identity_homomorphism(alphabet) -> LetterHomomorphism:
    alphabet = tuple(alphabet)
    return LetterHomomorphism(alphabet, alphabet, {a: (a,) for a in alphabet})


def row_swap_homomorphism(alphabet) -> LetterHomomorphism:
    """Swap the two rows of every pair letter (turns L_x into L_{x inverse})."""
    alphabet = tuple(alphabet)
    mapping = {}
    for tok in alphabet:
        a, b = parse_tuple_token(tok)
        mapping[tok] = (tuple_token((b, a)),)
    return LetterHomomorphism(alphabet, alphabet, mapping)


# ---------------------------------------------------------------------------
# reachable/co-reachable trimming


def trim(m: CounterAutomaton, name=None) -> CounterAutomaton:
    """Drop states that are unreachable or cannot reach an accept state."""
    fwd = {}
    back = {}
    for t in m.transitions:
        fwd.setdefault(t.src, []).append(t.dst)
        back.setdefault(t.dst, []).append(t.src)

    def closure(seeds, edges):
        seen = set(seeds)
        stack = list(seeds)
        while stack:
            q = stack.pop()
            for nxt in edges.get(q, ()):
                if nxt not in seen:
                    seen.add(nxt)
                    stack.append(nxt)
        return seen

    reachable = closure({m.start}, fwd)
    useful = closure(set(m.accepts), back) & reachable
    keep = useful | {m.start}
    states = [s for s in m.states if s in keep]
    transitions = [t for t in m.transitions if t.src in keep and t.dst in keep]
    return CounterAutomaton(
        name or m.name, m.alphabet, m.counters, states, m.start,
        [s for s in m.accepts if s in keep], transitions,
        blind=m.declared_blind, deterministic=m.declared_deterministic,
    )


def _renumber(name, alphabet, counters, start_key, accept_test, expand,
              blind, deterministic):
    """Build a machine by forward exploration with compact state names.

    ``expand(key)`` yields (label, program, successor key); keys are arbitrary
    hashables, renamed to s0, s1, ... in discovery order.
    """
    names = {start_key: "s0"}
    order = [start_key]
    transitions = []
    i = 0
    while i < len(order):
        key = order[i]
        i += 1
        for label, prog, nxt in expand(key):
            if nxt not in names:
                names[nxt] = f"s{len(names)}"
                order.append(nxt)
            transitions.append(Transition(names[key], label, prog, names[nxt]))
    states = [names[k] for k in order]
    accepts = [names[k] for k in order if accept_test(k)]
    machine = CounterAutomaton(name, alphabet, counters, states, "s0", accepts,
                               transitions, blind=blind, deterministic=deterministic)
    return trim(machine)


# ---------------------------------------------------------------------------
# intersection, union


def intersect(m: CounterAutomaton, n: CounterAutomaton,
              name=None) -> CounterAutomaton:
    """Product machine on a shared alphabet; counters are laid side by side,
    so L(result) = L(m) & L(n) with k+l counters."""
    if m.alphabet_set != n.alphabet_set:
        raise AlphabetMismatch(f"{m.name} and {n.name} have different alphabets")
    k, l = m.counters, n.counters
    total = k + l

    m_eps = m.eps_by_state
    n_eps = n.eps_by_state
    m_letters = {}
    for t in m.transitions:
        if t.label is not EPSILON:
            m_letters.setdefault(t.src, {}).setdefault(t.label, []).append(t)
    n_letters = {}
    for t in n.transitions:
        if t.label is not EPSILON:
            n_letters.setdefault(t.src, {}).setdefault(t.label, []).append(t)

    def expand(key):
        s, t = key
        for prog, dst in m_eps.get(s, ()):
            yield EPSILON, pad_program(prog, k, total, 0), (dst, t)
        for prog, dst in n_eps.get(t, ()):
            yield EPSILON, pad_program(prog, l, total, k), (s, dst)
        mine = m_letters.get(s)
        theirs = n_letters.get(t)
        if not mine or not theirs:
            return
        for label in mine.keys() & theirs.keys():
            for tm in mine[label]:
                pm = pad_program(tm.program, k, total, 0)
                for tn in theirs[label]:
                    yield label, pm + pad_program(tn.program, l, total, k), \
                        (tm.dst, tn.dst)

    m_acc, n_acc = m.accepts, n.accepts
    return _renumber(
        name or f"({m.name}&{n.name})", m.alphabet, total,
        (m.start, n.start), lambda key: key[0] in m_acc and key[1] in n_acc,
        expand, m.declared_blind and n.declared_blind,
        m.declared_deterministic and n.declared_deterministic,
    )


def union(m: CounterAutomaton, n: CounterAutomaton, name=None) -> CounterAutomaton:
    """Fresh start with epsilon edges into both machines; counters padded to
    max(k, l) with no-ops."""
    if m.alphabet_set != n.alphabet_set:
        raise AlphabetMismatch(f"{m.name} and {n.name} have different alphabets")
    total = max(m.counters, n.counters)
    states = ["u!start"]
    transitions = [
        Transition("u!start", EPSILON, EMPTY_PROGRAM, "m!" + m.start),
        Transition("u!start", EPSILON, EMPTY_PROGRAM, "n!" + n.start),
    ]
    accepts = []
    for src, machine in (("m!", m), ("n!", n)):
        states.extend(src + s for s in machine.states)
        accepts.extend(src + s for s in machine.accepts)
        for t in machine.transitions:
            transitions.append(Transition(
                src + t.src, t.label,
                pad_program(t.program, machine.counters, total, 0), src + t.dst,
            ))
    return CounterAutomaton(
        name or f"({m.name}|{n.name})", m.alphabet, total, states, "u!start",
        accepts, transitions, blind=m.declared_blind and n.declared_blind,
        deterministic=False,
    )


def union_all(machines, name=None) -> CounterAutomaton:
    out = machines[0]
    for other in machines[1:]:
        out = union(out, other)
    if name is not None:
        out.name = name
    return out


# ---------------------------------------------------------------------------
# homomorphic image and preimage


def image(m: CounterAutomaton, phi: LetterHomomorphism,
          name=None) -> CounterAutomaton:
    """Machine for phi(L(m)).  Erased letters become epsilon transitions and
    the result is re-validated for epsilon-acyclicity."""
    if set(phi.source) != m.alphabet_set:
        raise AlphabetMismatch("homomorphism source must equal machine alphabet")
    states = list(m.states)
    transitions = []
    fresh = 0
    for t in m.transitions:
        if t.label is EPSILON:
            transitions.append(t)
            continue
        word = phi.mapping[t.label]
        if len(word) == 0:
            transitions.append(Transition(t.src, EPSILON, t.program, t.dst))
        elif len(word) == 1:
            transitions.append(Transition(t.src, word[0], t.program, t.dst))
        else:
            prev = t.src
            for i, tok in enumerate(word[:-1]):
                mid = f"img{fresh}"
                fresh += 1
                states.append(mid)
                transitions.append(Transition(
                    prev, tok, t.program if i == 0 else EMPTY_PROGRAM, mid))
                prev = mid
            transitions.append(Transition(prev, word[-1], EMPTY_PROGRAM, t.dst))
    out = CounterAutomaton(
        name or f"{phi_name(phi)}({m.name})", phi.target, m.counters, states,
        m.start, m.accepts, transitions, blind=m.declared_blind,
        deterministic=False,
    )
    out = trim(out, out.name)
    if out.epsilon_bound() is None:
        raise LangOpError(
            "erasing homomorphism introduced an epsilon cycle; "
            "quasi-realtime image not constructible"
        )
    return out


def phi_name(phi: LetterHomomorphism) -> str:
    return "phi" if phi.epsilon_free else "phi~"


def relabel(m: CounterAutomaton, letter_map, name=None,
            alphabet=None) -> CounterAutomaton:
    """Rename letters through a bijective token map (cheap image special case)."""
    new_alphabet = alphabet if alphabet is not None else [
        letter_map(tok) for tok in m.alphabet]
    transitions = [
        Transition(t.src,
                   t.label if t.label is EPSILON else letter_map(t.label),
                   t.program, t.dst)
        for t in m.transitions
    ]
    return CounterAutomaton(
        name or m.name, new_alphabet, m.counters, m.states, m.start, m.accepts,
        transitions, blind=m.declared_blind,
        deterministic=m.declared_deterministic,
    )


def swap_rows(m: CounterAutomaton, name=None) -> CounterAutomaton:
    """The row-swap image: accepts (v, u) exactly when m accepts (u, v)."""

    def swap(tok):
        a, b = parse_tuple_token(tok)
        return tuple_token((b, a))

    return relabel(m, swap, name or f"swap({m.name})",
                   alphabet=sorted({swap(tok) for tok in m.alphabet}))


def _eps_paths_with_programs(m: CounterAutomaton, src: str):
    """All (program-sequence, endpoint) for epsilon paths from src, including
    the empty path.  Finite because the epsilon graph is acyclic."""
    eps = m.eps_by_state
    out = [((), src)]
    stack = [((), src)]
    while stack:
        progs, q = stack.pop()
        for prog, dst in eps.get(q, ()):
            item = (progs + (prog,), dst)
            out.append(item)
            stack.append(item)
    return out


def preimage(m: CounterAutomaton, phi: LetterHomomorphism,
             name=None) -> CounterAutomaton:
    """Machine for phi^{-1}(L(m)): a transition per source letter for every
    path of m spelling its image, carrying the concatenated programs."""
    if set(phi.target) != m.alphabet_set:
        raise AlphabetMismatch("homomorphism target must equal machine alphabet")
    if m.epsilon_bound() is None:
        raise LangOpError("preimage requires an epsilon-acyclic machine")

    eps_paths = {q: _eps_paths_with_programs(m, q) for q in m.states}
    table = m.by_state_letter

    transitions = [t for t in m.transitions if t.label is EPSILON]

    by_image = {}
    for tok in phi.source:
        by_image.setdefault(phi.mapping[tok], []).append(tok)

    for word, tokens in by_image.items():
        # endpoints of paths eps* w1 eps* ... wr eps* from each state
        for src in m.states:
            frontier = {}  # endpoint -> set of program tuples
            for progs, q in eps_paths[src]:
                frontier.setdefault(q, set()).add(progs)
            for tok in word:
                nxt = {}
                for q, progsets in frontier.items():
                    for prog, dst in table.get((q, tok), ()):
                        for tail, q2 in eps_paths[dst]:
                            bucket = nxt.setdefault(q2, set())
                            for progs in progsets:
                                bucket.add(progs + (prog,) + tail)
                frontier = nxt
                if not frontier:
                    break
            for dst, progsets in frontier.items():
                for progs in progsets:
                    flat = tuple(step for prog in progs for step in prog)
                    for tok in tokens:
                        transitions.append(Transition(src, tok, flat, dst))

    out = CounterAutomaton(
        name or f"{phi_name(phi)}^-1({m.name})", phi.source, m.counters,
        m.states, m.start, m.accepts, transitions, blind=m.declared_blind,
        deterministic=False,
    )
    return trim(out, out.name)


# ---------------------------------------------------------------------------
# padded lift: one row runs the machine, the other row is free


def pad_lift(m: CounterAutomaton, side: str, free_alphabet=None,
             name=None) -> CounterAutomaton:
    """Lift m to the pair alphabet: the tracked row spells a word of L(m), the
    free row ranges over its alphabet, and padding appears only as a suffix of
    either row (the row that ends first is out for good).

    side='left' tracks row 0 and accepts convolutions of (L(m), free*);
    side='right' tracks row 1.
    """
    if side not in ("left", "right"):
        raise LangOpError("side must be 'left' or 'right'")
    free = tuple(free_alphabet) if free_alphabet is not None else m.alphabet
    alphabet = ConvolvedAlphabet(2, tuple(dict.fromkeys(m.alphabet + free)))

    def letter(tracked, free_part):
        if side == "left":
            return tuple_token((tracked, free_part))
        return tuple_token((free_part, tracked))

    ENDED = ("!ended",)
    by_src = {}
    for (src, tok), arrows in m.by_state_letter.items():
        by_src.setdefault(src, []).extend((tok, prog, dst) for prog, dst in arrows)

    def expand(key):
        if key == ENDED:
            for f in free:
                yield letter(None, f), EMPTY_PROGRAM, ENDED
            return
        q, free_done = key
        for tok, prog, dst in by_src.get(q, ()):
            if not free_done:
                for f in free:
                    yield letter(tok, f), prog, (dst, False)
            yield letter(tok, None), prog, (dst, True)
        for prog, dst in m.eps_by_state.get(q, ()):
            yield EPSILON, prog, (dst, free_done)
        if q in m.accepts and not free_done:
            for f in free:
                yield letter(None, f), EMPTY_PROGRAM, ENDED

    def accepting(key):
        if key == ENDED:
            return True
        q, _ = key
        return q in m.accepts

    return _renumber(
        name or f"pad_{side}({m.name})", tuple(alphabet.letters()), m.counters,
        (m.start, False), accepting, expand, m.declared_blind, False,
    )


def convolution_square(m: CounterAutomaton, name=None) -> CounterAutomaton:
    """Machine for convolutions of pairs from L(m) x L(m)."""
    return intersect(pad_lift(m, "left"), pad_lift(m, "right"),
                     name or f"conv2({m.name})")
