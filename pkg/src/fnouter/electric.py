"""Coned-off (electric) word length relative to a free factor system.

Each left coset gH of a peripheral subgroup H gets a cone point joined to
every element of gH by an edge of length 1/2, so hopping across a coset
costs 1.  Internally distances are counted in half-units.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .subgroups import FreeFactorSystem, SubgroupGraph, carries_loop, fold_stallings
from .words import (
    Basis, CyclicWord, FreeWord, Morphism, WordError, apply_morphism, cyclic_normal_form,
    cyclic_reduce, inverse, reduce, verify_inverse_pair,
)


class ElectricError(ValueError):
    pass


@dataclass(frozen=True)
class ElectricContext:
    basis: Basis
    factors: tuple  # SubgroupGraph per factor
    sigma: Optional[FreeWord] = None

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple(self.factors))
        if self.sigma is not None:
            s = reduce(self.sigma)
            if not s:
                raise ElectricError("sigma must be nontrivial")
            object.__setattr__(self, "sigma", s)

    @classmethod
    def from_letters(cls, basis: Basis, factors: Iterable[Iterable[str]],
                     sigma: Optional[str] = None) -> "ElectricContext":
        graphs = [fold_stallings([basis.parse(x) for x in names], basis.rank) for names in factors]
        return cls(basis, tuple(graphs), basis.parse(sigma) if sigma else None)

    @classmethod
    def from_system(cls, basis: Basis, system: FreeFactorSystem,
                    sigma: Optional[Sequence[int]] = None) -> "ElectricContext":
        return cls(basis, tuple(system.components), sigma)

    @property
    def aligned(self) -> bool:
        """Every factor is generated by basis letters and no two factors share a letter."""
        seen = set()
        for H in self.factors:
            if H.num_vertices != 1:
                return False
            letters = {x for _, x, _ in H.edges}
            if letters & seen:
                return False
            seen |= letters
        return True

    def letter_factor(self) -> dict:
        """Signed letter -> factor index, for aligned contexts."""
        out = {}
        for i, H in enumerate(self.factors):
            for _, x, _ in H.edges:
                out[x] = out[-x] = i
        return out

    def peripherals(self) -> list:
        out = list(self.factors)
        if self.sigma is not None:
            out.append(fold_stallings([self.sigma], self.basis.rank))
        return out

    def carries(self, alpha: Sequence[int]) -> bool:
        """Is the conjugacy class carried by a factor (or by ⟨σ⟩)?"""
        alpha = cyclic_reduce(reduce(alpha))
        if not alpha:
            return True
        return any(carries_loop(H, alpha) for H in self.peripherals())

    def hr_length(self, w: Sequence[int]) -> int:
        """Number of letters outside every factor (the top-stratum length on a rose)."""
        lf = self.letter_factor()
        return sum(1 for x in w if x not in lf)


def _require_aligned(ctx: ElectricContext) -> dict:
    if not ctx.aligned:
        raise ElectricError("closed form needs a basis-aligned factor system; use bfs_electric_oracle")
    return ctx.letter_factor()


def electric_length(ctx: ElectricContext, w: Sequence[int]) -> int:
    """Maximal single-factor blocks count 1 each, other letters 1 each."""
    lf = _require_aligned(ctx)
    total = 0
    prev = None
    for x in reduce(w):
        i = lf.get(x)
        if i is None or i != prev:
            total += 1
        prev = i
    return total


def electric_length_batch(ctx: ElectricContext, words: np.ndarray) -> np.ndarray:
    """Vectorised :func:`electric_length` over rows of a 0-padded letter matrix.

    Rows must already be reduced words, left-aligned.
    """
    lf = _require_aligned(ctx)
    r = ctx.basis.rank
    table = np.full(2 * r + 1, -1, dtype=np.int16)  # index letter + r
    for x, i in lf.items():
        table[x + r] = i
    table[r] = -2  # padding
    fid = table[words.astype(np.int64) + r]
    prev = np.concatenate([np.full((fid.shape[0], 1), -3, dtype=np.int16), fid[:, :-1]], axis=1)
    new_block = (fid != -2) & ((fid == -1) | (fid != prev))
    return new_block.sum(axis=1)


def electric_length_conjugacy(ctx: ElectricContext, alpha: Sequence[int]) -> int:
    """Cyclic block count; 0 for classes carried by the factor system."""
    lf = _require_aligned(ctx)
    a = tuple(cyclic_reduce(reduce(alpha)))
    ids = [lf.get(x) for x in a]
    if not a or (ids[0] is not None and ids.count(ids[0]) == len(ids)):
        return 0
    if ctx.sigma is not None and ctx.carries(a):
        return 0
    n = len(a)
    # a cyclic block starts wherever the factor changes or a letter lies outside
    return sum(1 for j in range(n) if ids[j] is None or ids[j] != ids[j - 1])


# ---------------------------------------------------------------------------
# ground truth

def coset_key(H: SubgroupGraph, g: Sequence[int], adj: Optional[list] = None) -> tuple:
    """Canonical label of the left coset gH.

    gH corresponds to the right coset H g⁻¹, i.e. the vertex of the Schreier
    graph reached by reading g⁻¹ from the base.  Reading stays in the Stallings
    graph up to some vertex v and then runs down a hanging tree along the
    unread suffix, so (v, suffix) names the vertex.
    """
    ginv = inverse(reduce(g))
    adj = H.adjacency() if adj is None else adj
    v = 0
    for n, x in enumerate(ginv):
        nxt = adj[v].get(x)
        if nxt is None:
            return v, tuple(ginv[n:])
        v = nxt
    return v, ()


def _tube(w: FreeWord, letters: tuple, slack: int) -> set:
    nodes = set()
    frontier = {FreeWord(w[:i]) for i in range(len(w) + 1)}
    nodes |= frontier
    for _ in range(slack):
        nxt = set()
        for g in frontier:
            for x in letters:
                if not g or g[-1] != -x:
                    nxt.add(FreeWord(g + (x,)))
                else:
                    nxt.add(FreeWord(g[:-1]))
        nxt -= nodes
        nodes |= nxt
        frontier = nxt
    return nodes


def bfs_electric_oracle(ctx: ElectricContext, w: Sequence[int], cap: int = 12, slack: int = 2) -> int:
    """Shortest path from 1 to w in the coned Cayley graph, searched near the geodesic.

    The search runs over group elements within tree distance ``slack`` of the
    geodesic [1, w] plus one cone point per coset met.  For basis-aligned
    factors nearest-point projection onto the geodesic does not increase
    length, so ``slack = 0`` already gives the exact value; a positive slack
    lets the search find detours if that argument were wrong.  Works for any
    peripheral subgroups (including ⟨σ⟩).
    """
    w = reduce(w)
    if len(w) > cap:
        raise ElectricError(f"word length {len(w)} exceeds oracle cap {cap}")
    nodes = _tube(w, ctx.basis.letters, slack)
    periph = [(H, H.adjacency()) for H in ctx.peripherals()]
    cones: dict = {}
    node_cones = {}
    for g in nodes:
        keys = [(i, coset_key(H, g, adj)) for i, (H, adj) in enumerate(periph)]
        node_cones[g] = keys
        for k in keys:
            cones.setdefault(k, []).append(g)
    start, goal = FreeWord(()), w
    dist = {start: 0}
    heap = [(0, 0, start)]
    tick = 1
    while heap:
        d, _, u = heapq.heappop(heap)
        if dist.get(u, None) != d:
            continue
        if u == goal:
            return d // 2
        if isinstance(u, FreeWord):
            nbrs = []
            for x in ctx.basis.letters:
                v = FreeWord(u[:-1]) if u and u[-1] == -x else FreeWord(u + (x,))
                if v in nodes:
                    nbrs.append((v, 2))
            nbrs += [(("cone",) + k, 1) for k in node_cones[u]]
        else:
            nbrs = [(v, 1) for v in cones[u[1:]]]
        for v, c in nbrs:
            nd = d + c
            if nd < dist.get(v, 1 << 30):
                dist[v] = nd
                heapq.heappush(heap, (nd, tick, v))
                tick += 1
    raise ElectricError("goal unreachable")  # cannot happen: the geodesic is in the tube


@dataclass
class Ball:
    """All reduced words of length ≤ radius, layer by layer (children contiguous)."""

    words: np.ndarray  # (N, radius) int8, 0-padded
    parent: np.ndarray
    last: np.ndarray
    layer_start: list


def enumerate_ball(rank: int, radius: int) -> Ball:
    letters = np.array([s * i for i in range(1, rank + 1) for s in (1, -1)], dtype=np.int8)
    words = [np.zeros((1, radius), dtype=np.int8)]
    parent = [np.array([-1], dtype=np.int64)]
    last = [np.zeros(1, dtype=np.int8)]
    starts = [0]
    offset = 1
    prev_idx = np.array([0], dtype=np.int64)
    prev_last = last[0]
    prev_words = words[0]
    for depth in range(1, radius + 1):
        p = np.repeat(prev_idx, len(letters))
        x = np.tile(letters, len(prev_idx))
        pl = np.repeat(prev_last, len(letters))
        keep = (pl == 0) | (x != -pl)
        p, x = p[keep], x[keep]
        rows = np.repeat(np.arange(len(prev_idx)), len(letters))[keep]
        w = prev_words[rows].copy()
        w[:, depth - 1] = x
        starts.append(offset)
        idx = np.arange(offset, offset + len(p), dtype=np.int64)
        offset += len(p)
        words.append(w)
        parent.append(p)
        last.append(x)
        prev_idx, prev_last, prev_words = idx, x, w
    starts.append(offset)
    return Ball(np.concatenate(words), np.concatenate(parent), np.concatenate(last), starts)


def ball_electric_oracle(ctx: ElectricContext, ball: Ball) -> np.ndarray:
    """Exact electric distance from 1 to every element of the ball (aligned factors).

    Distances are relaxed to a fixpoint over the ball's subgraph: tree edges
    both ways, and cone hops through the coset gH_i of every element.  The
    shortest element of gH_i is g with trailing H_i letters removed, which is
    how cosets are keyed.  Projection to the geodesic keeps optimal paths
    inside the ball.
    """
    _require_aligned(ctx)
    lf = ctx.letter_factor()
    n = len(ball.parent)
    starts = ball.layer_start
    L = len(starts) - 1
    d = np.empty(n, dtype=np.int32)
    for k in range(L):
        d[starts[k]:starts[k + 1]] = 2 * k
    nf = len(ctx.factors)
    member = []
    strip = []
    for i in range(nf):
        m = np.zeros(n, dtype=bool)
        for x, j in lf.items():
            if j == i:
                m |= ball.last == x
        member.append(m)
        s = np.arange(n, dtype=np.int64)
        for k in range(1, L):
            sl = slice(starts[k], starts[k + 1])
            mm = m[sl]
            s[sl] = np.where(mm, s[ball.parent[sl]], s[sl])
        strip.append(s)
    big = np.int32(1 << 28)
    while True:
        before = d.copy()
        # downward tree sweep
        for k in range(1, L):
            sl = slice(starts[k], starts[k + 1])
            np.minimum(d[sl], d[ball.parent[sl]] + 2, out=d[sl])
        # upward tree sweep; children of one parent are contiguous
        for k in range(L - 1, 0, -1):
            sl = slice(starts[k], starts[k + 1])
            par = ball.parent[sl]
            cut = np.flatnonzero(np.r_[True, par[1:] != par[:-1]])
            best = np.minimum.reduceat(d[sl], cut) + 2
            np.minimum.at(d, par[cut], best)
        # cone hops
        for i in range(nf):
            cmin = d.copy()
            for k in range(L - 1, 0, -1):
                sl = slice(starts[k], starts[k + 1])
                vals = np.where(member[i][sl], cmin[sl], big)
                par = ball.parent[sl]
                cut = np.flatnonzero(np.r_[True, par[1:] != par[:-1]])
                best = np.minimum.reduceat(vals, cut)
                np.minimum.at(cmin, par[cut], best)
            np.minimum(d, cmin[strip[i]] + 2, out=d)
        if np.array_equal(before, d):
            break
    if np.any(d % 2):
        raise ElectricError("odd half-unit distance")  # cone hops come in pairs
    return d // 2


# ---------------------------------------------------------------------------
# flaring experiments

@dataclass
class FlareReport:
    """Per-exponent electric and top-stratum lengths for one input."""

    input: str
    mode: str
    factor: float
    cap: int
    base_el: int
    rows: list = field(default_factory=list)  # (k, fwd_el, bwd_el, fwd_Hr, bwd_Hr)
    minimal: Optional[int] = None

    @property
    def passed(self) -> bool:
        return self.minimal is not None

    def to_dict(self) -> dict:
        return {"input": self.input, "mode": self.mode, "factor": self.factor, "cap": self.cap,
                "base_el": self.base_el, "minimal": self.minimal, "passed": self.passed,
                "rows": [list(r) for r in self.rows]}


def _require_inverse(m: Morphism, name: str = "morphism"):
    if m.declared_inverse is None:
        raise ElectricError(f"{name} has no declared inverse")
    if not verify_inverse_pair(m):
        raise ElectricError(f"{name} fails the inverse check")


def _meets(value: int, bound: float, strict: bool) -> bool:
    return value > bound if strict else value >= bound


class _Orbit:
    """Letter images of m^k and cyclic lengths, kept on plain tuples for speed."""

    def __init__(self, ctx: ElectricContext, m: Morphism):
        self.ctx = ctx
        self.lf = _require_aligned(ctx)
        one = {}
        for i, w in enumerate(m.images):
            one[i + 1] = tuple(w)
            one[-i - 1] = tuple(-y for y in reversed(w))
        self.tables = [None, one]

    def table(self, k: int) -> dict:
        while len(self.tables) <= k:
            last, one = self.tables[-1], self.tables[1]
            self.tables.append({x: tuple(_concat(last, w)) for x, w in one.items()})
        return self.tables[k]

    def image(self, a: tuple, k: int = 1) -> tuple:
        st = _concat(self.table(k), a)
        n = len(st)
        i = 0
        while i < n - 1 - i and st[i] == -st[n - 1 - i]:
            i += 1
        return tuple(st[i:n - i])

    def lengths(self, a: tuple) -> tuple:
        """(electric length, top-stratum length) of a cyclically reduced word."""
        ids = [self.lf.get(x) for x in a]
        hr = ids.count(None)
        if not a or (hr == 0 and ids.count(ids[0]) == len(ids)):
            return 0, hr
        if self.ctx.sigma is not None and self.ctx.carries(a):
            return 0, hr
        return sum(1 for j in range(len(a)) if ids[j] is None or ids[j] != ids[j - 1]), hr


def _concat(table: dict, a) -> list:
    stack = []
    for x in a:
        for y in table[x]:
            if stack and stack[-1] == -y:
                stack.pop()
            else:
                stack.append(y)
    return stack


def conjugacy_flaring_exponent(ctx: ElectricContext, phi: Morphism, alpha: Sequence[int],
                               cap: int = 20, factor: float = 3.0, strict: bool = True,
                               full: bool = False, label: Optional[str] = None) -> FlareReport:
    """Least M ≤ cap with factor·‖α‖ below max(‖φ^M α‖, ‖φ^{-M} α‖).

    ``strict`` demands a strict inequality.  The trajectory stops at the first
    hit unless ``full`` is set.
    """
    _require_inverse(phi)
    return _flare(_Orbit(ctx, phi), _Orbit(ctx, phi.inverse()), alpha, cap, factor, strict,
                  full, label)


def _flare(fo: _Orbit, bo: _Orbit, alpha, cap, factor, strict, full=False, label=None) -> FlareReport:
    ctx = fo.ctx
    a = tuple(cyclic_reduce(reduce(alpha)))
    el0, hr0 = fo.lengths(a)
    if el0 == 0:
        raise ElectricError(f"class {ctx.basis.format(a)} is carried by the factor system")
    if label is None:
        label = ctx.basis.format(alpha if isinstance(alpha, CyclicWord) else cyclic_normal_form(a))
    bound = factor * el0
    rep = FlareReport(label, "conjugacy", factor, cap, el0)
    rep.rows.append((0, el0, el0, hr0, hr0))
    fwd, bwd = a, a
    for k in range(1, cap + 1):
        fwd, bwd = fo.image(fwd), bo.image(bwd)
        (fe, fh), (be, bh) = fo.lengths(fwd), bo.lengths(bwd)
        rep.rows.append((k, fe, be, fh, bh))
        if rep.minimal is None and _meets(max(fe, be), bound, strict):
            rep.minimal = k
            if not full:
                break
    return rep


def _in_a_factor(ctx: ElectricContext, w: FreeWord) -> bool:
    lf = ctx.letter_factor()
    return len({lf.get(x, -1 - j) for j, x in enumerate(w)}) <= 1 and all(x in lf for x in w)


def strict_flaring_exponent(ctx: ElectricContext, Phi: Morphism, words: Iterable[Sequence[int]],
                            cap: int = 20, factor: float = 2.0, strict: bool = False) -> dict:
    """Per-word least n with factor·|w| ≤ max(|Φ^n w|, |Φ^{-n} w|), plus the uniform N.

    Returns ``{"reports": [...], "uniform": N or None}``; ``uniform`` is the
    least n ≤ cap at which every word meets the bound.
    """
    _require_inverse(Phi)
    inv = Phi.inverse()
    reports = []
    traj = []
    for w in words:
        w = reduce(w)
        if not w or _in_a_factor(ctx, w):
            raise ElectricError(f"word {ctx.basis.format(w)!r} lies in a factor")
        el0 = electric_length(ctx, w)
        rep = FlareReport(ctx.basis.format(w), "strict", factor, cap, el0)
        rep.rows.append((0, el0, el0, ctx.hr_length(w), ctx.hr_length(w)))
        fwd, bwd = w, w
        for k in range(1, cap + 1):
            fwd, bwd = apply_morphism(Phi, fwd), apply_morphism(inv, bwd)
            fe, be = electric_length(ctx, fwd), electric_length(ctx, bwd)
            rep.rows.append((k, fe, be, ctx.hr_length(fwd), ctx.hr_length(bwd)))
            if rep.minimal is None and _meets(max(fe, be), factor * el0, strict):
                rep.minimal = k
        reports.append(rep)
    uniform = None
    for n in range(1, cap + 1):
        if all(_meets(max(r.rows[n][1], r.rows[n][2]), factor * r.base_el, strict) for r in reports):
            uniform = n
            break
    return {"reports": reports, "uniform": uniform}


@dataclass(frozen=True)
class FourValues:
    input: str
    mode: str
    n: int
    base: int
    values: tuple  # φ^n, φ^-n, ψ^n, ψ^-n
    bound: float

    @property
    def hits(self) -> int:
        if self.mode == "word":
            return sum(1 for v in self.values if v > self.bound)
        return sum(1 for v in self.values if v >= self.bound)

    @property
    def passed(self) -> bool:
        return self.hits >= 3


def three_of_four_test(ctx: ElectricContext, phi: Morphism, psi: Morphism, x: Sequence[int],
                       n: int, mode: str = "conjugacy") -> FourValues:
    """The four lengths under φ^{±n}, ψ^{±n}.

    Conjugacy mode compares against 3‖α‖ (non-strict); word mode demands
    strictly more than 2|w|.
    """
    _require_inverse(phi, "phi")
    _require_inverse(psi, "psi")
    x = reduce(x)
    if mode == "conjugacy":
        return _four(_four_orbits(ctx, phi, psi), x, n)
    elif mode == "word":
        if not x or _in_a_factor(ctx, x):
            raise ElectricError(f"word {ctx.basis.format(x)!r} lies in a factor")
        base = electric_length(ctx, x)
        vals = tuple(electric_length(ctx, _iterate(m, x, n, cyclic=False))
                     for m in (phi, phi.inverse(), psi, psi.inverse()))
        label = ctx.basis.format(x)
        bound = 2 * base
    else:
        raise ElectricError(f"unknown mode {mode!r}")
    return FourValues(label, mode, n, base, vals, bound)


def _four_orbits(ctx, phi, psi) -> list:
    return [_Orbit(ctx, m) for m in (phi, phi.inverse(), psi, psi.inverse())]


def _four(orbits: list, x: Sequence[int], n: int) -> FourValues:
    ctx = orbits[0].ctx
    a = tuple(cyclic_reduce(reduce(x)))
    base = orbits[0].lengths(a)[0]
    if base == 0:
        raise ElectricError(f"class {ctx.basis.format(a)} is carried by the factor system")
    vals = tuple(o.lengths(o.image(a, n))[0] for o in orbits)
    label = ctx.basis.format(x if isinstance(x, CyclicWord) else cyclic_normal_form(a))
    return FourValues(label, "conjugacy", n, base, vals, 3 * base)


def three_of_four_sample(ctx: ElectricContext, phi: Morphism, psi: Morphism, sample, n: int) -> list:
    """Conjugacy-mode :func:`three_of_four_test` over many classes, sharing the letter tables."""
    _require_inverse(phi, "phi")
    _require_inverse(psi, "psi")
    orbits = _four_orbits(ctx, phi, psi)
    return [_four(orbits, x, n) for x in sample]


def _iterate(m: Morphism, w: Sequence[int], n: int, cyclic: bool) -> FreeWord:
    for _ in range(n):
        w = apply_morphism(m, w)
        if cyclic:
            w = cyclic_reduce(w)
    return FreeWord(w)


def comparability_bounds(ctx: ElectricContext, sample: Iterable[Sequence[int]]) -> dict:
    """Extremes of |α|_{H_r} / ‖α‖_el over a sample of non-carried classes."""
    ratios = []
    for a in sample:
        a = cyclic_reduce(reduce(a))
        if ctx.carries(a):
            raise ElectricError(f"sample class {ctx.basis.format(a)} is carried by the factor system")
        ratios.append(ctx.hr_length(a) / electric_length_conjugacy(ctx, a))
    if not ratios:
        raise ElectricError("empty sample")
    lo, hi = min(ratios), max(ratios)
    return {"low": lo, "high": hi, "K": max(hi, 1 / lo)}


# ---------------------------------------------------------------------------
# samples

def cyclic_sample(ctx: ElectricContext, max_outside: int, gap_length: int = 1,
                  min_outside: int = 1) -> list:
    """Conjugacy classes with between min and max letters outside the factors.

    Between consecutive outside letters sits a reduced factor word of length at
    most ``gap_length`` (any factor).  Classes are deduplicated by cyclic normal
    form; carried classes never appear since every class has an outside letter.
    """
    lf = _require_aligned(ctx)
    outside = [x for x in ctx.basis.letters if x not in lf]
    inside = [x for x in ctx.basis.letters if x in lf]
    gaps = [()]
    layer = [()]
    for _ in range(gap_length):
        layer = [g + (x,) for g in layer for x in inside
                 if (not g or g[-1] != -x) and (not g or lf[g[-1]] == lf[x])]
        gaps += layer
    blocks = [(x,) + g for x in outside for g in gaps]
    seen = set()
    out = []
    for n in range(min_outside, max_outside + 1):
        for combo in _necklaces(len(blocks), n):
            word = tuple(y for i in combo for y in blocks[i])
            if any(word[i] == -word[(i + 1) % len(word)] for i in range(len(word))):
                continue
            key = cyclic_normal_form(word)
            if key not in seen:
                seen.add(key)
                out.append(key)
    out.sort(key=lambda c: (len(c), [_ok(x) for x in c]))
    return out


def _ok(x: int) -> int:
    return 2 * x - 2 if x > 0 else -2 * x - 1


def _necklaces(k: int, n: int):
    """Sequences over range(k) of length n that are least among their rotations."""
    # FKM algorithm; yields each necklace (rotation class) once
    a = [0] * (n + 1)

    def gen(t, p):
        if t > n:
            if n % p == 0:
                yield tuple(a[1:])
            return
        a[t] = a[t - p]
        yield from gen(t + 1, p)
        for j in range(a[t - p] + 1, k):
            a[t] = j
            yield from gen(t + 1, t)

    yield from gen(1, 1)


def uniform_exponent(ctx: ElectricContext, phi: Morphism, sample: Sequence[Sequence[int]],
                     cap: int = 20, factor: float = 3.0, strict: bool = True) -> dict:
    """Per-class minimal exponents and the least M at which the whole sample flares.

    Classes with no exponent up to ``cap`` are listed under ``failures`` and
    ``uniform`` is then None; ``flaring_uniform`` is the least M that works
    for every remaining class.
    """
    _require_inverse(phi)
    fo, bo = _Orbit(ctx, phi), _Orbit(ctx, phi.inverse())
    reports = [_flare(fo, bo, a, cap, factor, strict) for a in sample]
    failures = [r.input for r in reports if not r.passed]
    live = [(tuple(cyclic_reduce(reduce(a))), r) for a, r in zip(sample, reports) if r.passed]
    M = max((r.minimal for _, r in live), default=None)
    while M is not None and M <= cap:
        # flaring at one exponent does not imply flaring at the next, so recheck at M
        bad = []
        for a, r in live:
            if r.minimal == M:
                continue
            value = max(fo.lengths(fo.image(a, M))[0], bo.lengths(bo.image(a, M))[0])
            if not _meets(value, factor * r.base_el, strict):
                bad.append(a)
        if not bad:
            break
        M += 1
    else:
        if M is not None:
            failures += [ctx.basis.format(a) for a in bad]
        M = None
    return {"reports": reports, "uniform": None if failures else M, "flaring_uniform": M,
            "failures": failures}


