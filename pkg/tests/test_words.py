from itertools import product

import pytest
from hypothesis import given, strategies as st

from conftest import word_strategy
from fnouter.words import (
    Basis, Morphism, WordError, apply_morphism, compose_morphisms, count_reduced_words,
    cyclic_normal_form, cyclic_reduce, inverse, inverse_defects, is_reduced, is_root_free,
    iterate_morphism, reduce, reduced_words, unoriented_normal_form, verify_inverse_pair,
)

B3 = Basis(names="abc")
letters3 = st.lists(st.sampled_from([1, 2, 3, -1, -2, -3]), max_size=14)


def test_parse_and_format_round_trip():
    B = Basis(names="abcd")
    assert B.format(B.parse("cadAC")) == "cadAC"
    assert B.parse("aA") == ()
    with pytest.raises(WordError):
        B.parse("x")


def test_basis_names_must_be_lowercase_letters():
    with pytest.raises(WordError):
        Basis(names=["A"])
    with pytest.raises(WordError):
        Basis(names="aa")


@given(letters3)
def test_reduce_idempotent(raw):
    w = reduce(raw)
    assert reduce(w) == w
    assert is_reduced(w)


@given(letters3)
def test_inverse_cancels(raw):
    w = reduce(raw)
    assert reduce(tuple(w) + tuple(inverse(w))) == ()


def test_reduced_word_counts():
    for n in range(5):
        assert sum(1 for _ in reduced_words(3, n, n)) == count_reduced_words(3, n)
    assert count_reduced_words(3, 3) == 6 * 5 * 5


def test_house_images(house):
    B = house.basis
    assert B.format(house.phi(house.w("c"))) == "cad"
    assert B.format(iterate_morphism(house.phi, house.w("c"), 3)) == "cadacacad"
    assert B.format(house.phi(house.w("Cd"))) == "DA"


def test_house_inverses_verify(house):
    assert verify_inverse_pair(house.phi)
    assert verify_inverse_pair(house.psi)


def test_mutated_inverse_names_generator(house):
    bad = Morphism.from_strings(house.basis, {"c": "cad", "d": "c"}, {"c": "d", "d": "Dc"})
    assert not verify_inverse_pair(bad)
    named = [house.basis.names[i] for i in inverse_defects(bad)]
    assert "d" in named and "a" not in named and "b" not in named


def test_collapsing_image_rejected():
    with pytest.raises(WordError):
        Morphism.from_strings(Basis(names="ab"), {"a": "bB"})


# product of three transvections of F_3, inverse written out by hand
M3 = Morphism.from_strings(B3, {"a": "ab", "b": "bc", "c": "BAc"}, {"a": "aacB", "b": "bCA", "c": "ac"})


def test_m3_is_invertible():
    assert verify_inverse_pair(M3)


@given(word_strategy(3, 8), word_strategy(3, 8))
def test_morphism_is_homomorphism(u, v):
    lhs = apply_morphism(M3, reduce(tuple(u) + tuple(v)))
    rhs = reduce(tuple(apply_morphism(M3, u)) + tuple(apply_morphism(M3, v)))
    assert lhs == rhs


def test_inverse_pair_round_trips_exhaustively():
    inv = M3.inverse()
    for w in reduced_words(3, 6):
        assert apply_morphism(inv, apply_morphism(M3, w)) == w


@given(word_strategy(3, 8))
def test_inverse_pair_round_trips_length_8(w):
    assert apply_morphism(M3.inverse(), apply_morphism(M3, w)) == w


def test_composition_matches_iteration(house):
    sq = compose_morphisms(house.phi, house.phi)
    for w in reduced_words(4, 3):
        assert apply_morphism(sq, w) == iterate_morphism(house.phi, w, 2)
    assert house.phi.power(-2).images == compose_morphisms(house.phi.inverse(), house.phi.inverse()).images


@given(word_strategy(3, 5), word_strategy(3, 5))
def test_cyclic_normal_form_conjugation_invariant(g, w):
    conj = reduce(tuple(g) + tuple(w) + tuple(inverse(g)))
    assert cyclic_normal_form(conj) == cyclic_normal_form(w)


def test_cyclic_normal_form_rotation(house):
    assert cyclic_normal_form(house.w("cad")) == cyclic_normal_form(house.w("adc"))
    assert cyclic_normal_form(()) == ()


def test_orientation_is_kept():
    ab = B3.parse("ab")
    assert cyclic_normal_form(ab) != cyclic_normal_form(inverse(ab))
    assert unoriented_normal_form(ab) == unoriented_normal_form(inverse(ab))


@given(word_strategy(3, 10))
def test_cyclic_reduce_is_cyclically_reduced(w):
    c = cyclic_reduce(w)
    assert is_reduced(c)
    assert len(c) < 2 or c[0] != -c[-1]


def test_proper_powers_are_not_root_free():
    for n in range(1, 5):
        for u in reduced_words(2, n, n):
            u = cyclic_reduce(u)
            if not u:
                continue
            for k in range(2, 5):
                assert not is_root_free(tuple(u) * k)


def test_root_free_examples():
    assert is_root_free(B3.parse("ab"))
    assert is_root_free(B3.parse("aab"))
    assert not is_root_free(B3.parse("abab"))
    with pytest.raises(WordError):
        is_root_free(())
