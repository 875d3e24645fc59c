import pytest
from hypothesis import given, strategies as st

from fnouter.electric import cyclic_sample
from fnouter.graphs import GraphMap, iterate_path, map_path, map_path_protected
from fnouter.laminations import (
    AttractingNeighborhood, LaminationError, Player, PowerCache, contains, count_disjoint_copies,
    critical_constant, disjoint_copy_positions, expgrowth_certificate, fit_legality, flare_exponent,
    growing_edge, leaf_approximant, legality, neighborhood_contains, occurrences, pingpong_search,
    protected_iterate, three_disjoint_copies,
)

from conftest import word_strategy


def leaf(house, f=None):
    f = f or house.f
    return leaf_approximant(f, house.filt, 2, growing_edge(f, house.filt, 2))


def test_leaf_approximant_nests(house):
    lam = leaf(house)
    assert lam.nested and len(lam.path) >= 200
    shallow = leaf_approximant(house.f, house.filt, 2, lam.edge, depth=3)
    assert house.G.format_path(shallow.path) == "cadacacad"
    assert contains(lam.path, shallow.path)
    with pytest.raises(LaminationError):
        leaf_approximant(house.f, house.filt, 0, 0)
    with pytest.raises(LaminationError):
        lam.window(len(lam.path) + 1)


def test_critical_constant(house):
    cc = critical_constant(house.f, house.filt, 2)
    assert cc.bcc == 2
    assert cc.value == pytest.approx(4 / (cc.eigenvalue - 1))
    assert cc.working == 8


def test_legality_examples(house):
    lam = leaf(house)
    assert legality(house.f, house.filt, 2, house.w("cadacacad"), 2, lam) == 1.0
    assert legality(house.f, house.filt, 2, house.w("ab"), 2, lam) == 0.0
    with pytest.raises(LaminationError):
        legality(house.f, house.filt, 2, house.w("c"), 0, lam)


@given(word_strategy(4, 16, 1), st.integers(1, 4))
def test_legality_in_unit_interval(alpha, C):
    from conftest import House
    h = _H
    v = legality(h.f, h.filt, 2, alpha, C, _LEAF)
    assert 0.0 <= v <= 1.0


from conftest import House  # noqa: E402
_H = House()
_LEAF = leaf(_H)


def test_fit_legality_small_sample(house):
    sample = [tuple(c) for c in cyclic_sample(house.ctx, 2)]
    fit = fit_legality(house.f, house.f_inv, house.filt, 2, sample)
    assert fit.C == 8
    assert fit.epsilon > 0 and not fit.unreached
    assert len(fit.witnesses) == len(sample)


def test_flare_exponent(house):
    assert flare_exponent(house.f, house.filt, 2, house.w("c"), 3) == 2
    assert flare_exponent(house.f, house.filt, 2, house.w("c"), 1) == 1
    assert flare_exponent(GraphMap.identity(house.G), house.filt, 2, house.w("c"), 2, cap=5) is None


def test_disjoint_copies():
    assert count_disjoint_copies((1, 1, 1, 1, 1), (1, 1)) == 2
    assert occurrences((1, 1), (1, 1, 1)) == [0, 1]
    assert count_disjoint_copies((2, -1, 3, 1, -2), (1, -2)) == 2  # a reverse copy counts
    assert not three_disjoint_copies((3, 1, 4), (3,))
    with pytest.raises(LaminationError):
        count_disjoint_copies((1,), ())


def test_three_copies_in_plain_image(house):
    img = iterate_path(house.f, house.w("c"), 3)
    assert house.G.format_path(img) == "cadacacad"
    assert disjoint_copy_positions(img, house.w("c")) == [0, 4, 6]
    assert three_disjoint_copies(img, house.w("c"))


def test_neighbourhoods():
    V = AttractingNeighborhood((3, 1))
    assert neighborhood_contains(V, (2, 3, 1))
    assert neighborhood_contains(V, (1, 2, 3), cyclic=True)
    assert not neighborhood_contains(V, (1, 2, 3))
    with pytest.raises(LaminationError):
        AttractingNeighborhood(())


def test_expgrowth_certificates(house):
    cert = expgrowth_certificate(house.f, house.w("cadac"))
    assert cert.certified and cert.k == 5
    assert expgrowth_certificate(house.f, house.w("cadacacad")).k == 4
    # protected images of c shrink to d and then vanish
    none = expgrowth_certificate(house.f, house.w("c"))
    assert not none.certified and none.verdict == "inconclusive"
    assert house.G.format_path(none.images[0]) == "d" and not none.images[1]


def test_protected_growth_is_monotone_after_certificate(house):
    beta = house.w("cadac")
    k = expgrowth_certificate(house.f, beta).k
    pc = PowerCache(house.f)
    counts = [count_disjoint_copies(protected_iterate(pc, beta, j), beta) for j in range(k, k + 5)]
    assert all(c >= 3 for c in counts)
    assert counts == sorted(counts)


@pytest.mark.parametrize("text", ["cad", "cadac", "dac"])
def test_iterated_protection_is_subpath_of_plain_image(house, text):
    beta = house.w(text)
    pc = PowerCache(house.f)
    for k in range(1, 4):
        assert contains(map_path(pc(k), beta), protected_iterate(pc, beta, k), either_way=False)
    assert protected_iterate(pc, beta, 1) == map_path_protected(house.f, beta)


def players(house, m):
    return {"+": Player("+", GraphMap.from_morphism(m, house.basis), house.filt, 2),
            "-": Player("-", GraphMap.from_morphism(m.inverse(), house.basis), house.filt, 2)}


def test_pingpong_house_pair(house):
    cert = pingpong_search(players(house, house.phi), players(house, house.psi))
    assert cert.ok, cert.message
    assert cert.M == 12 and cert.k == 3
    assert all(cert.audit.values()) and len(cert.audit) == 8
    assert set(cert.neighborhoods()) == {"psi+", "psi-", "phi+", "phi-"}


@pytest.mark.parametrize("other", ["phi", "phi_inv"])
def test_pingpong_rejects_commensurable_pair(house, other):
    m = house.phi if other == "phi" else house.phi.inverse()
    cert = pingpong_search(players(house, house.phi), players(house, m))
    assert not cert.ok and cert.failed_step == "step1"
