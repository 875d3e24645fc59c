import random

import pytest
from hypothesis import HealthCheck, settings, strategies as st

from fnouter.electric import ElectricContext
from fnouter.graphs import Filtration, GraphMap
from fnouter.words import Basis, Morphism, reduce

settings.register_profile("default", max_examples=150, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


class House:
    """φ: c↦cad, d↦c and ψ: c↦cbd, d↦c on the rank-4 rose, ℱ = ⟨a,b⟩."""

    def __init__(self):
        B = Basis(names="abcd")
        self.basis = B
        self.phi = Morphism.from_strings(B, {"c": "cad", "d": "c"}, {"c": "d", "d": "ADc"})
        self.psi = Morphism.from_strings(B, {"c": "cbd", "d": "c"}, {"c": "d", "d": "BDc"})
        self.f = GraphMap.from_morphism(self.phi, B)
        self.g = GraphMap.from_morphism(self.psi, B)
        self.f_inv = GraphMap.from_morphism(self.phi.inverse(), B)
        self.G = self.f.graph
        self.filt = Filtration.from_names(self.G, [["a"], ["b"], ["c", "d"]])
        self.ctx = ElectricContext.from_letters(B, [["a", "b"]])

    def w(self, text):
        return self.basis.parse(text)


@pytest.fixture(scope="session")
def house():
    return House()


def word_strategy(rank, max_len, min_len=0):
    letters = [i for i in range(1, rank + 1)] + [-i for i in range(1, rank + 1)]
    return st.lists(st.sampled_from(letters), min_size=min_len, max_size=max_len).map(reduce)


def random_reduced(rng: random.Random, rank: int, length: int) -> tuple:
    out = []
    while len(out) < length:
        x = rng.choice([i for i in range(-rank, rank + 1) if i])
        if not out or x != -out[-1]:
            out.append(x)
    return tuple(out)


# one PASS/FAIL line per acceptance criterion, printed after the run
ACCEPTANCE = {}


def record(n, ok, detail=""):
    ACCEPTANCE[n] = (ok, detail)
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
