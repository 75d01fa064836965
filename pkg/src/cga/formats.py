"""Textual file formats: automaton definitions, letter homomorphisms, and
structure manifests.

Automaton format, one directive per line, '#'-prefixed comment lines ignored,
tokens whitespace-separated::

    automaton <name>
    alphabet <tok> <tok> ...
    counters <k>
    blind <true|false>
    states <s> <s> ...
    start <s>
    accept <s> <s> ...
    trans <src> <label|EPS> <program> <dst>

Programs are semicolon-separated steps, each a comma-separated k-vector over
``+c -c =0 !0 Z .``; the empty program is ``-`` (or all-noop steps).  Parsing
is bit-exact: unknown tokens are errors.
"""

from __future__ import annotations

import os

from .automata import (
    EPSILON,
    EMPTY_PROGRAM,
    NO_OP,
    SETZ,
    TEST0,
    TESTN0,
    CounterAutomaton,
    Transition,
    dec,
    inc,
)
from .langops import LetterHomomorphism
from .gastructure import (
    FamilySpec,
    GeneratorSet,
    GraphAutomaticStructure,
    GrowthPolicy,
)


class ParseError(Exception):
    def __init__(self, message, line=None, column=None, path=None):
        where = ""
        if path:
            where += f"{path}:"
        if line is not None:
            where += f"{line}:"
        if column is not None:
            where += f"{column}:"
        super().__init__(f"{where} {message}" if where else message)
        self.line = line
        self.column = column
        self.path = path


def _directive_lines(text):
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        yield lineno, line.split()


def parse_program(text, counters, lineno=None):
    if text == "-":
        return EMPTY_PROGRAM
    steps = []
    for step_text in text.split(";"):
        entries = step_text.split(",")
        if len(entries) != counters:
            raise ParseError(
                f"program step {step_text!r} has {len(entries)} entries, "
                f"expected {counters}", line=lineno)
        step = []
        for entry in entries:
            entry = entry.strip()
            if entry == ".":
                step.append(NO_OP)
            elif entry == "=0":
                step.append(TEST0)
            elif entry == "!0":
                step.append(TESTN0)
            elif entry == "Z":
                step.append(SETZ)
            elif entry.startswith("+") and entry[1:].isdigit():
                step.append(inc(int(entry[1:])))
            elif entry.startswith("-") and entry[1:].isdigit():
                step.append(dec(int(entry[1:])))
            else:
                raise ParseError(f"unknown program token {entry!r}", line=lineno)
        steps.append(tuple(step))
    if all(instr is NO_OP for step in steps for instr in step):
        return EMPTY_PROGRAM
    return tuple(steps)


def format_program(program, counters):
    if not program:
        return "-"
    parts = []
    for step in program:
        entries = []
        for instr in step:
            if instr.kind == "noop":
                entries.append(".")
            elif instr.kind == "inc":
                entries.append(f"+{instr.amount}")
            elif instr.kind == "dec":
                entries.append(f"-{instr.amount}")
            elif instr.kind == "test_zero":
                entries.append("=0")
            elif instr.kind == "test_nonzero":
                entries.append("!0")
            else:
                entries.append("Z")
        parts.append(",".join(entries))
    return ";".join(parts)


def parse_automaton(text, path=None) -> CounterAutomaton:
    name = None
    alphabet = []
    counters = None
    blind = False
    states = []
    start = None
    accepts = []
    raw_transitions = []
    seen = set()

    for lineno, words in _directive_lines(text):
        directive, args = words[0], words[1:]
        if directive == "automaton":
            if len(args) != 1:
                raise ParseError("automaton needs one name", lineno, path=path)
            name = args[0]
        elif directive == "alphabet":
            alphabet.extend(args)
        elif directive == "counters":
            if len(args) != 1 or not args[0].isdigit():
                raise ParseError("counters needs one integer", lineno, path=path)
            counters = int(args[0])
        elif directive == "blind":
            if args not in (["true"], ["false"]):
                raise ParseError("blind must be true or false", lineno, path=path)
            blind = args == ["true"]
        elif directive == "states":
            states.extend(args)
        elif directive == "start":
            if len(args) != 1:
                raise ParseError("start needs one state", lineno, path=path)
            start = args[0]
        elif directive == "accept":
            accepts.extend(args)
        elif directive == "trans":
            if len(args) < 4:
                raise ParseError("trans needs src label program dst",
                                 lineno, path=path)
            raw_transitions.append((lineno, args))
        else:
            raise ParseError(f"unknown directive {directive!r}", lineno, path=path)
        if directive in ("automaton", "counters", "start", "blind"):
            if directive in seen:
                raise ParseError(f"duplicate {directive} directive",
                                 lineno, path=path)
            seen.add(directive)

    if name is None or counters is None or start is None:
        raise ParseError("missing automaton, counters or start directive",
                         path=path)
    alphabet_set = set(alphabet)
    state_set = set(states)
    transitions = []
    for lineno, args in raw_transitions:
        src, label, dst = args[0], args[1], args[-1]
        program_text = "".join(args[2:-1])
        if src not in state_set:
            raise ParseError(f"dangling state {src!r}", lineno, path=path)
        if dst not in state_set:
            raise ParseError(f"dangling state {dst!r}", lineno, path=path)
        if label == "EPS":
            label = EPSILON
        elif label not in alphabet_set:
            raise ParseError(f"label {label!r} not in alphabet", lineno, path=path)
        program = parse_program(program_text, counters, lineno)
        transitions.append(Transition(src, label, program, dst))
    for s in [start] + accepts:
        if s not in state_set:
            raise ParseError(f"dangling state {s!r}", path=path)
    return CounterAutomaton(name, alphabet, counters, states, start, accepts,
                            transitions, blind=blind)


def format_automaton(machine: CounterAutomaton) -> str:
    lines = [f"automaton {machine.name}"]
    for chunk in _chunks(machine.alphabet, 16):
        lines.append("alphabet " + " ".join(chunk))
    lines.append(f"counters {machine.counters}")
    lines.append(f"blind {'true' if machine.declared_blind else 'false'}")
    for chunk in _chunks(machine.states, 16):
        lines.append("states " + " ".join(chunk))
    lines.append(f"start {machine.start}")
    for chunk in _chunks(sorted(machine.accepts), 16):
        lines.append("accept " + " ".join(chunk))
    for t in machine.transitions:
        label = "EPS" if t.label is EPSILON else t.label
        lines.append(
            f"trans {t.src} {label} {format_program(t.program, machine.counters)} "
            f"{t.dst}")
    return "\n".join(lines) + "\n"


def load_automaton(path) -> CounterAutomaton:
    with open(path, "r", encoding="utf-8") as handle:
        return parse_automaton(handle.read(), path=str(path))


def _chunks(items, size):
    items = list(items)
    if not items:
        return
    for i in range(0, len(items), size):
        yield items[i:i + size]


# ---------------------------------------------------------------------------
# homomorphism files: lines "map <letter> -> <string|EPS>"


def parse_homomorphism(text, source, target, path=None) -> LetterHomomorphism:
    mapping = {}
    for lineno, words in _directive_lines(text):
        if words[0] != "map" or "->" not in words:
            raise ParseError("expected: map <letter> -> <string|EPS>",
                             lineno, path=path)
        arrow = words.index("->")
        if arrow != 2:
            raise ParseError("map takes a single source letter", lineno, path=path)
        letter = words[1]
        image = words[arrow + 1:]
        if image == ["EPS"]:
            image = []
        mapping[letter] = tuple(image)
    return LetterHomomorphism(tuple(source), tuple(target), mapping)


# ---------------------------------------------------------------------------
# structure manifests


MANIFEST_NAME = "structure.txt"


def _parse_word(args):
    if args == ["EPS"]:
        return ()
    return tuple(args)


def _format_word(word):
    return " ".join(word) if word else "EPS"


def parse_generators_line(args):
    tokens = []
    family = None
    if "|" in args:
        split = args.index("|")
        tokens = args[:split]
        fam = args[split + 1:]
        if len(fam) != 3 or fam[0] != "family" or fam[2] != "INT":
            raise ParseError("family clause must be: | family <base> INT")
        family = FamilySpec(fam[1])
    else:
        tokens = args
    pairs = []
    seen = set()
    for tok in tokens:
        if tok in seen:
            continue
        if tok.endswith("-") and tok[:-1] in tokens:
            continue  # handled with its positive partner
        inv = tok + "-"
        if inv not in tokens:
            raise ParseError(f"generator {tok!r} has no inverse token")
        seen.update((tok, inv))
        pairs.append((tok, inv))
    return pairs, family


def load_structure(directory) -> GraphAutomaticStructure:
    path = os.path.join(directory, MANIFEST_NAME)
    with open(path, "r", encoding="utf-8") as handle:
        text = handle.read()

    name = None
    symbols = None
    pairs = []
    family = None
    nf = None
    multipliers = {}
    left_multipliers = {}
    seed_p = ()
    seed_q = ()
    quasi = None
    growth = GrowthPolicy(1, 4)
    order = None

    for lineno, words in _directive_lines(text):
        directive, args = words[0], words[1:]
        if directive == "structure":
            name = args[0]
        elif directive == "lambda":
            symbols = (symbols or ()) + tuple(args)
        elif directive == "generators":
            pairs, family = parse_generators_line(args)
        elif directive == "nf":
            nf = load_automaton(os.path.join(directory, args[0]))
        elif directive == "mult":
            multipliers[args[0]] = load_automaton(os.path.join(directory, args[1]))
        elif directive == "lmult":
            left_multipliers[args[0]] = load_automaton(
                os.path.join(directory, args[1]))
        elif directive == "seed-p":
            seed_p = _parse_word(args)
        elif directive == "seed-q":
            seed_q = _parse_word(args)
        elif directive == "quasigeodesic-C":
            quasi = None if args == ["none"] else int(args[0])
        elif directive == "growth":
            growth = GrowthPolicy(int(args[0]), int(args[1]))
        elif directive == "order":
            order = (order or ()) + tuple(args)
        else:
            raise ParseError(f"unknown directive {directive!r}", lineno, path=path)

    if name is None or symbols is None or nf is None:
        raise ParseError("manifest must give structure, lambda and nf", path=path)
    generators = GeneratorSet.from_pairs(pairs, family)
    return GraphAutomaticStructure(
        name, symbols, generators, nf, multipliers, seed_p=seed_p,
        seed_q=seed_q, quasigeodesic_c=quasi, growth=growth, order=order,
        left_multipliers=left_multipliers)


def _safe_filename(token):
    return "".join(ch if ch.isalnum() or ch in "._-" else f"&{ord(ch)}&"
                   for ch in token)


def write_structure(structure: GraphAutomaticStructure, directory):
    os.makedirs(directory, exist_ok=True)
    lines = [f"structure {structure.name}"]
    for chunk in _chunks(structure.symbols, 16):
        lines.append("lambda " + " ".join(chunk))
    gen_tokens = structure.generators.tokens()
    gen_line = "generators " + " ".join(gen_tokens)
    family = structure.generators.family
    if family is not None and family.max_index is None:
        gen_line += f" | family {family.base} INT"
    lines.append(gen_line)

    nf_file = "nf.aut"
    with open(os.path.join(directory, nf_file), "w", encoding="utf-8") as handle:
        handle.write(format_automaton(structure.nf_automaton))
    lines.append(f"nf {nf_file}")
    for tok in gen_tokens:
        machine = structure.multiplier(tok)
        fname = f"mult_{_safe_filename(tok)}.aut"
        with open(os.path.join(directory, fname), "w", encoding="utf-8") as handle:
            handle.write(format_automaton(machine))
        lines.append(f"mult {tok} {fname}")
    lines.append(f"seed-p {_format_word(structure.seed_p)}")
    lines.append(f"seed-q {_format_word(structure.seed_q)}")
    quasi = structure.quasigeodesic_c
    lines.append(f"quasigeodesic-C {'none' if quasi is None else quasi}")
    lines.append(f"growth {structure.growth.alpha} {structure.growth.beta}")
    for chunk in _chunks(structure.order.letters, 16):
        lines.append("order " + " ".join(chunk))
    with open(os.path.join(directory, MANIFEST_NAME), "w",
              encoding="utf-8") as handle:
        handle.write("\n".join(lines) + "\n")
