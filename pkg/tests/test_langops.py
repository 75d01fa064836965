import pytest
from hypothesis import given, settings, strategies as st

from cga.automata import (
    EMPTY_PROGRAM,
    EPSILON,
    CounterAutomaton,
    accepts,
    dec,
    inc,
)
from cga.langops import (
    AlphabetMismatch,
    ConvolvedAlphabet,
    LangOpError,
    LetterHomomorphism,
    convolve,
    identity_homomorphism,
    image,
    intersect,
    pad_lift,
    pair_alphabet,
    parse_tuple_token,
    preimage,
    project,
    swap_rows,
    tuple_token,
    union,
)
from cga.groups import bs_encode, bs_structure, finf_nf_machine, z_structure
from cga.shortlex import OrderedAlphabet, iter_shortlex

from conftest import all_words, brute_force_accepts, toks


# -- convolution ----------------------------------------------------------------

def test_convolution_paper_example():
    got = convolve(("a", "a"), ("b", "b", "b"), ("a",))
    assert got == ("(a|b|a)", "(a|b|_)", "(_|b|_)")


def test_convolution_trivial_cases():
    assert convolve((), ()) == ()
    assert convolve(("a", "b"), ("a", "b")) == ("(a|a)", "(b|b)")


def test_projection_paper_example():
    word = convolve(("a", "a"), ("b", "b", "b"), ("a",))
    assert project(word, 1) == ("b", "b", "b")
    assert project(word, 0) == ("a", "a")
    assert project(("(a|_)", "(_|b)"), 0) == ("a",)


@settings(max_examples=80, deadline=None)
@given(st.lists(st.lists(st.sampled_from(("a", "b", "c")), max_size=5),
                min_size=2, max_size=4))
def test_convolution_round_trip_and_length(words):
    words = [tuple(w) for w in words]
    conv = convolve(*words)
    assert len(conv) == max(len(w) for w in words)
    for i, w in enumerate(words):
        assert project(conv, i) == w


def test_tuple_tokens_nest():
    token = tuple_token((tuple_token(("a", None)), None))
    assert token == "((a|_)|_)"
    assert parse_tuple_token(token) == ("(a|_)", None)


def test_convolved_alphabet_excludes_all_padding():
    alphabet = ConvolvedAlphabet(2, ("a",))
    assert sorted(alphabet.letters()) == ["(_|a)", "(a|_)", "(a|a)"]
    assert "(_|_)" not in alphabet


# -- intersection -----------------------------------------------------------------

def one_counter(word_token, delta):
    return ((inc(delta),),) if delta > 0 else ((dec(-delta),),)


def test_intersect_bs_l1_l2_accepts_paper_string(bs47):
    assert accepts(bs47.nf_automaton, toks("at # 1 1 1 # 1 # # 1"))


def test_intersect_with_all_strings_is_identity(bs23):
    machine = bs23.nf_automaton
    everything = CounterAutomaton(
        "all", machine.alphabet, 0, ["q"], "q", ["q"],
        [("q", tok, EMPTY_PROGRAM, "q") for tok in machine.alphabet])
    both = intersect(machine, everything)
    assert both.counters == machine.counters
    for word in [toks("# # # #"), toks("t # # # #"), toks("# 1 #"),
                 toks("at # 1 # # 1 #")]:
        assert accepts(both, word) == accepts(machine, word)


def test_intersect_finf_l2_l3_rejects_paper_string():
    machine = finf_nf_machine()
    assert machine.counters == 2
    assert not accepts(machine, toks("n 1 p 1 1 n 1 1 p 1"))
    assert accepts(machine, toks("p 1 1 p 1 1 p 1 1 n 1 1 1 1 1"))


def test_intersect_requires_same_alphabet():
    a = CounterAutomaton("a", ("x",), 0, ["q"], "q", ["q"], [])
    b = CounterAutomaton("b", ("y",), 0, ["q"], "q", ["q"], [])
    with pytest.raises(AlphabetMismatch):
        intersect(a, b)


@st.composite
def blind_machine(draw):
    n_states = draw(st.integers(1, 3))
    states = [f"q{i}" for i in range(n_states)]
    counters = draw(st.integers(0, 1))
    programs = [EMPTY_PROGRAM]
    if counters:
        programs += [((inc(1),),), ((dec(1),),)]
    transitions = []
    for _ in range(draw(st.integers(0, 6))):
        src = draw(st.integers(0, n_states - 1))
        label = draw(st.sampled_from(("a", "b")))
        dst = draw(st.integers(0, n_states - 1))
        transitions.append((states[src], label,
                            draw(st.sampled_from(programs)), states[dst]))
    accept = draw(st.sets(st.sampled_from(states)))
    return CounterAutomaton("rand", ("a", "b"), counters, states, states[0],
                            accept, transitions, blind=True)


@settings(max_examples=40, deadline=None)
@given(m=blind_machine(), n=blind_machine(), data=st.data())
def test_intersection_and_union_meet_boolean_spec(m, n, data):
    word = tuple(data.draw(st.lists(st.sampled_from(("a", "b")), max_size=6)))
    both = intersect(m, n)
    assert both.counters == m.counters + n.counters
    assert accepts(both, word) == (
        brute_force_accepts(m, word) and brute_force_accepts(n, word))
    either = union(m, n)
    assert accepts(either, word) == (
        brute_force_accepts(m, word) or brute_force_accepts(n, word))


def test_blindness_preserved_iff_both_blind():
    from cga.automata import validate
    blind = CounterAutomaton("b", ("a",), 1, ["q"], "q", ["q"],
                             [("q", "a", ((inc(1),),), "q")], blind=True)
    from cga.automata import TEST0
    seeing = CounterAutomaton("s", ("a",), 1, ["q"], "q", ["q"],
                              [("q", "a", ((TEST0,),), "q")])
    assert intersect(blind, blind).declared_blind
    assert not intersect(blind, seeing).declared_blind
    assert validate(intersect(blind, seeing)).blind is False


# -- union ---------------------------------------------------------------------

def test_union_with_empty_language(bs23):
    machine = bs23.nf_automaton
    empty = CounterAutomaton("none", machine.alphabet, 0, ["q"], "q", [], [])
    got = union(machine, empty)
    for word in [toks("# # # #"), toks("t # # # #"), toks("1 #")]:
        assert accepts(got, word) == accepts(machine, word)


def test_union_idempotent_on_language(bs23):
    machine = bs23.nf_automaton
    got = union(machine, machine)
    assert got.epsilon_bound() == machine.epsilon_bound() + 1
    for word in [toks("# # # #"), toks("at- # # # #"), toks("# 1 # 1 #")]:
        assert accepts(got, word) == accepts(machine, word)


def test_union_of_case_machines_accepts_case1_witnesses():
    from cga.groups import BSNormalPair, bs_case_machines
    from cga.langops import union_all
    cases = bs_case_machines(2, 3)
    u_cases = union_all([m for k, m in cases.items() if k.startswith("t:U")])
    m, n = 2, 3
    for p_word in ((), ("t",)):
        for s in range(n):
            for q in range(4):
                big_n = q * n + s
                u = bs_encode(BSNormalPair(p_word, big_n), m, n)
                v_p = p_word + ("a" * s + "t",)
                v = bs_encode(BSNormalPair(v_p, q * m), m, n)
                assert accepts(u_cases, convolve(u, v)), (u, v)


# -- image / preimage --------------------------------------------------------------

def test_row_swap_turns_multiplier_into_inverse(bs23, bs23_oracle):
    la = bs23.multiplier("a")
    la_inv = bs23.multiplier("a-")
    u = bs23.normal_form(("a",))
    v = bs23.normal_form(("a", "a"))
    assert accepts(la, convolve(u, v))
    assert accepts(la_inv, convolve(v, u))
    assert not accepts(la_inv, convolve(u, v))


def test_row_swap_is_involution(bs23):
    la = bs23.multiplier("a")
    back = swap_rows(swap_rows(la))
    u = bs23.normal_form(("t",))
    v = bs23.normal_form(("t", "a"))
    for pair in [(u, v), (v, u), (u, u)]:
        assert accepts(back, convolve(*pair)) == accepts(la, convolve(*pair))


def test_image_identity_homomorphism(bs23):
    machine = bs23.nf_automaton
    same = image(machine, identity_homomorphism(machine.alphabet))
    for word in [toks("# # # #"), toks("t # 1 # # 1 #"), toks("# #")]:
        assert accepts(same, word) == accepts(machine, word)


def test_image_onto_rank_one_fragment(finf):
    # a -> p1, A -> n1 sends freely reduced {a,A} words onto the x1 fragment
    z = z_structure()
    source = image(z.nf_automaton,
                   LetterHomomorphism(("a", "a-"), ("p", "n", "1"),
                                      {"a": ("p", "1"), "a-": ("n", "1")}))
    finf_l = finf.nf_automaton
    mapping = {"a": ("p", "1"), "a-": ("n", "1")}
    for word in all_words(("a", "a-"), 4):
        encoded = tuple(tok for letter in word for tok in mapping[letter])
        assert accepts(source, encoded) == accepts(finf_l, encoded)


def test_image_erasing_cycle_is_rejected():
    machine = CounterAutomaton(
        "loop", ("a", "b"), 0, ["q"], "q", ["q"],
        [("q", "a", EMPTY_PROGRAM, "q"), ("q", "b", EMPTY_PROGRAM, "q")])
    erase_a = LetterHomomorphism(("a", "b"), ("b",), {"a": (), "b": ("b",)})
    with pytest.raises(LangOpError):
        image(machine, erase_a)


def test_preimage_identity(bs23):
    machine = bs23.nf_automaton
    same = preimage(machine, identity_homomorphism(machine.alphabet))
    for word in [toks("# # # #"), toks("t # 1 # # 1 #"), toks("1 1")]:
        assert accepts(same, word) == accepts(machine, word)


def test_preimage_of_anbn_under_c_to_ab():
    anbn = CounterAutomaton(
        "anbn", ("a", "b"), 1, ["qa", "qb"], "qa", ["qa", "qb"],
        [("qa", "a", ((inc(1),),), "qa"),
         ("qa", "b", ((dec(1),),), "qb"),
         ("qb", "b", ((dec(1),),), "qb")])
    phi = LetterHomomorphism(("c",), ("a", "b"), {"c": ("a", "b")})
    pre = preimage(anbn, phi)
    for length in range(7):
        word = ("c",) * length
        expected = anbn.accepts_word(phi.apply(word))
        assert accepts(pre, word) == expected
        assert expected == (length <= 1)


def test_preimage_keeps_epsilon_acceptance():
    # machine accepting only the empty word via an epsilon hop
    machine = CounterAutomaton(
        "eps", ("a",), 0, ["p", "q"], "p", ["q"],
        [("p", EPSILON, EMPTY_PROGRAM, "q")])
    phi = LetterHomomorphism(("c",), ("a",), {"c": ()})
    pre = preimage(machine, phi)
    assert accepts(pre, ())
    assert accepts(pre, ("c",))  # image is still the empty word


def test_preimage_row_pair_projection_on_triples(bs23, bs23_oracle):
    # radius-3 sample sweep of the change-of-generators building block
    from cga.groups import row_pair_homomorphism
    la = bs23.multiplier("a")
    lt = bs23.multiplier("t")
    a1 = preimage(la, row_pair_homomorphism(bs23.symbols, 3, 0, 1,
                                            target=la.alphabet))
    a2 = preimage(lt, row_pair_homomorphism(bs23.symbols, 3, 1, 2,
                                            target=lt.alphabet))
    words = [(), ("a",), ("t",), ("a", "t-"), ("t", "a"), ("a-", "a-")]
    for w in words:
        v0 = bs23.normal_form(w)
        v1 = bs23.normal_form(w + ("a",))
        v2 = bs23.normal_form(w + ("a", "t"))
        triple = convolve(v0, v1, v2)
        assert accepts(a1, triple)
        assert accepts(a2, triple)
        # wrong middle row fails the first layer
        bad = convolve(v0, bs23.normal_form(w + ("a", "a")), v2)
        assert not (accepts(a1, bad) and accepts(a2, bad))


# -- pad_lift ---------------------------------------------------------------------

def test_pad_lift_finf_accepts_padded_member(finf):
    lifted = pad_lift(finf.nf_automaton, "right")
    assert accepts(lifted, convolve(("p", "1"), ("p", "1", "1")))


def test_pad_lift_left_rejects_bad_projection(finf):
    lifted = pad_lift(finf.nf_automaton, "left")
    word = convolve(("p",), ("p", "1"))  # row 0 spells just "p", not in L
    assert not accepts(lifted, word)


def test_pad_lift_enforces_padding_suffix(bs23):
    machine = pad_lift(bs23.nf_automaton, "left")
    # second row resumes after padding: invalid convolution shape
    bad = ("(#|#)", "(#|_)", "(#|#)", "(#|_)")
    assert not accepts(machine, bad)


def test_pad_intersection_is_convolution_square(bs23):
    import random
    from cga.groups import BSNormalPair
    rng = random.Random(7)
    square = intersect(pad_lift(bs23.nf_automaton, "left"),
                       pad_lift(bs23.nf_automaton, "right"))
    words = []
    for _ in range(20):
        p_word = rng.choice([(), ("t",), ("at",), ("t", "at-")])
        value = rng.randint(-6, 6)
        words.append(bs_encode(BSNormalPair(p_word, value), 2, 3))
    for u in words[:5]:
        for v in words[5:10]:
            assert accepts(square, convolve(u, v))
    # and a non-member second row
    assert not accepts(square, convolve(words[0], ("#", "1", "1", "#", "#", "#")))
