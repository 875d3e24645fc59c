import random

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import random_reduced, word_strategy
from fnouter.electric import (
    ElectricContext, ElectricError, ball_electric_oracle, bfs_electric_oracle, comparability_bounds,
    conjugacy_flaring_exponent, coset_key, cyclic_sample, electric_length, electric_length_batch,
    electric_length_conjugacy, enumerate_ball, strict_flaring_exponent, three_of_four_sample, three_of_four_test,
    uniform_exponent,
)
from fnouter.subgroups import fold_stallings
from fnouter.words import Basis, cyclic_normal_form, cyclic_reduce, inverse, reduce, reduced_words

CTX3 = ElectricContext.from_letters(Basis(names="abc"), [["a"], ["b"]])
CTX4 = ElectricContext.from_letters(Basis(names="abcd"), [["a", "b"]])


def blocks(ctx, w):
    lf = ctx.letter_factor()
    out, prev = [], None
    for x in w:
        f = lf.get(x)
        if f is not None and f == prev:
            out[-1].append(x)
        elif f is not None:
            out.append([x])
        prev = f
    return out


def test_examples():
    B = CTX4.basis
    assert electric_length(CTX4, B.parse("c")) == 1
    assert electric_length(CTX4, B.parse("cabd")) == 3
    assert electric_length(CTX4, B.parse("abab")) == 1
    assert electric_length(CTX4, ()) == 0
    assert electric_length_conjugacy(CTX4, B.parse("cabC")) == 0
    assert electric_length_conjugacy(CTX4, B.parse("acab")) == 2


@given(word_strategy(4, 14))
def test_at_most_word_length(w):
    el = electric_length(CTX4, w)
    assert el <= len(w)
    assert (el == len(w)) == all(len(b) == 1 for b in blocks(CTX4, w))


@given(word_strategy(4, 8), word_strategy(4, 8))
def test_triangle_inequality(u, v):
    uv = reduce(tuple(u) + tuple(v))
    assert electric_length(CTX4, uv) <= electric_length(CTX4, u) + electric_length(CTX4, v)


@given(word_strategy(4, 10, 1), st.integers(0, 9))
def test_conjugacy_length_rotation_invariant(w, i):
    c = cyclic_reduce(w)
    if not c:
        return
    i %= len(c)
    rot = tuple(c[i:]) + tuple(c[:i])
    base = electric_length_conjugacy(CTX4, c)
    assert electric_length_conjugacy(CTX4, rot) == base
    assert base <= electric_length(CTX4, w)
    assert base <= electric_length(CTX4, rot)


@given(word_strategy(4, 6), word_strategy(4, 6, 1))
def test_conjugacy_length_below_representatives(g, w):
    conj = reduce(tuple(g) + tuple(w) + tuple(inverse(g)))
    assert electric_length_conjugacy(CTX4, w) <= electric_length(CTX4, conj)


def test_batch_matches_scalar():
    rng = random.Random(3)
    words = [random_reduced(rng, 4, 10) for _ in range(500)]
    arr = np.array(words, dtype=np.int8)
    got = electric_length_batch(CTX4, arr)
    assert got.tolist() == [electric_length(CTX4, w) for w in words]


def test_ball_oracle_small_radius():
    ball = enumerate_ball(3, 6)
    assert len(ball.words) == 1 + sum(6 * 5 ** (k - 1) for k in range(1, 7))
    oracle = ball_electric_oracle(CTX3, ball)
    closed = electric_length_batch(CTX3, ball.words)
    assert (oracle == closed).all()


def test_tube_oracle_rank_4():
    rng = random.Random(11)
    for _ in range(150):
        w = random_reduced(rng, 4, rng.randint(0, 10))
        assert bfs_electric_oracle(CTX4, w, slack=1) == electric_length(CTX4, w)


def test_tube_oracle_without_closed_form():
    # ⟨ab⟩ is not spanned by letters, so only the oracle applies
    B = Basis(names="abc")
    ctx = ElectricContext(B, (fold_stallings([B.parse("ab")], 3),))
    assert not ctx.aligned
    with pytest.raises(ElectricError):
        electric_length(ctx, B.parse("ab"))
    assert bfs_electric_oracle(ctx, B.parse("ababab")) == 1
    assert bfs_electric_oracle(ctx, B.parse("cababc")) == 3


def test_coset_keys_identify_cosets():
    B = CTX4.basis
    A = CTX4.factors[0]
    assert coset_key(A, B.parse("cab")) == coset_key(A, B.parse("cBa"))
    assert coset_key(A, B.parse("c")) != coset_key(A, B.parse("d"))


def test_peripheral_sigma():
    B = CTX4.basis
    ctx = ElectricContext.from_letters(B, [["a", "b"]], sigma="cd")
    assert len(ctx.peripherals()) == 2
    assert ctx.carries(B.parse("dc"))


# ---------------------------------------------------------------------------
# flaring

def test_conjugacy_flaring_of_c(house):
    rep = conjugacy_flaring_exponent(house.ctx, house.phi, house.w("c"))
    assert rep.minimal == 2
    assert rep.rows[2][1] == 5
    assert rep.rows[2][3] == 3  # c, d and c of cadac lie in the top stratum
    with pytest.raises(ElectricError):
        conjugacy_flaring_exponent(house.ctx, house.phi, house.w("ab"))


@pytest.mark.parametrize("text", ["c", "d", "cd", "caD", "cbd", "cadb"])
def test_flaring_antitone_in_factor(house, text):
    prev = None
    for factor in (4.0, 3.0, 2.0, 1.5, 1.0):
        m = conjugacy_flaring_exponent(house.ctx, house.phi, house.w(text), factor=factor).minimal
        if prev is not None and m is not None:
            assert m <= prev
        prev = m if m is not None else prev


def test_strict_flaring(house):
    res = strict_flaring_exponent(house.ctx, house.phi, [house.w("c"), house.w("cad")])
    mins = {r.input: r.minimal for r in res["reports"]}
    assert mins == {"c": 1, "cad": 2}
    assert res["uniform"] == 2
    with pytest.raises(ElectricError):
        strict_flaring_exponent(house.ctx, house.phi, [house.w("ab")])


def test_three_of_four(house):
    fv = three_of_four_test(house.ctx, house.phi, house.psi, house.w("c"), 2)
    assert fv.values[0] == 5 and fv.bound == 3
    assert fv.passed
    fw = three_of_four_test(house.ctx, house.phi, house.psi, house.w("c"), 2, mode="word")
    assert fw.bound == 2


def brute_sample(k):
    lf = CTX4.letter_factor()
    found = set()
    for w in reduced_words(4, 2 * k, 1):
        if len(w) > 1 and w[0] == -w[-1]:
            continue
        out = [i for i, x in enumerate(w) if x not in lf]
        if not 1 <= len(out) <= k:
            continue
        gaps = [(out[(j + 1) % len(out)] - out[j] - 1) % len(w) for j in range(len(out))]
        if len(out) == 1:
            gaps = [len(w) - 1]
        if all(g <= 1 for g in gaps):
            found.add(cyclic_normal_form(w))
    return found


@pytest.mark.parametrize("k", [1, 2, 3])
def test_cyclic_sample_matches_brute_force(k):
    got = cyclic_sample(CTX4, k)
    assert len(got) == len(set(got))
    assert set(got) == brute_sample(k)


def test_uniform_exponent_small_sample(house):
    sample = cyclic_sample(house.ctx, 2)
    res = uniform_exponent(house.ctx, house.phi, sample)
    M = res["uniform"]
    assert M is not None and not res["failures"]
    assert M >= max(r.minimal for r in res["reports"])
    bounds = comparability_bounds(house.ctx, sample)
    assert 0 < bounds["low"] <= bounds["high"] <= bounds["K"]


def test_batched_three_of_four_matches_single(house):
    sample = cyclic_sample(house.ctx, 2)
    batch = three_of_four_sample(house.ctx, house.phi, house.psi, sample, 3)
    single = [three_of_four_test(house.ctx, house.phi, house.psi, x, 3) for x in sample]
    assert batch == single


def test_periodic_class_never_flares(house):
    # φ swaps [acDACd] with its inverse class, so its length never changes
    sample = [house.w("acDACd"), house.w("c")]
    res = uniform_exponent(house.ctx, house.phi, sample)
    assert res["uniform"] is None and res["failures"] == ["acDACd"]
    assert res["flaring_uniform"] == 2
