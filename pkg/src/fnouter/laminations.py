"""Leaf approximants, legality, attracting neighbourhoods and ping-pong search."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .graphs import (
    Filtration, GraphMap, analyze_filtration, bcc_constant, compose_maps, illegal_turns,
    iterate_path, map_circuit, map_path, map_path_protected, reverse_path, turn,
)
from .words import FreeWord

log = logging.getLogger(__name__)


class LaminationError(ValueError):
    pass


def _enc(p: Sequence[int]) -> bytes:
    return bytes(x + 128 for x in p)


def occurrences(small: Sequence[int], big: Sequence[int]) -> list:
    """Start positions of ``small`` in ``big`` (overlaps allowed)."""
    s, b = _enc(small), _enc(big)
    out = []
    if not s:
        return out
    i = b.find(s)
    while i >= 0:
        out.append(i)
        i = b.find(s, i + 1)
    return out


def contains(big: Sequence[int], small: Sequence[int], either_way: bool = True) -> bool:
    if _enc(small) in _enc(big):
        return True
    return either_way and _enc(reverse_path(small)) in _enc(big)


# ---------------------------------------------------------------------------

class PowerCache:
    """Memoised iterates f^k of a graph map."""

    def __init__(self, f: GraphMap):
        self.f = f
        self._powers = [GraphMap.identity(f.graph), f]

    def __call__(self, k: int) -> GraphMap:
        while len(self._powers) <= k:
            self._powers.append(compose_maps(self.f, self._powers[-1]))
        return self._powers[k]


def protected_iterate(f, beta: Sequence[int], k: int, ext_cap: int = 16) -> FreeWord:
    """f_## applied k times to β.

    Each step keeps only what survives every extension, so the result is a
    subpath of (f^k)_##(β) that never overstates it.  ``f`` may be a map or
    a :class:`PowerCache` (whose base map is used).
    """
    g = f.f if isinstance(f, PowerCache) else f
    cur = FreeWord(beta)
    for _ in range(k):
        if not cur:
            break
        cur = map_path_protected(g, cur, ext_cap)
    return cur


@dataclass(frozen=True)
class LeafApproximant:
    edge: int
    depth: int
    path: FreeWord
    stratum: int
    nested: bool = True

    def window(self, length: int, shift: int = 0) -> FreeWord:
        """Subpath of the given length centred in the approximant."""
        n = len(self.path)
        if length > n:
            raise LaminationError(f"window {length} longer than approximant ({n})")
        start = max(0, min(n - length, (n - length) // 2 + shift))
        return self.path[start:start + length]

    def padded(self, inner_start: int, inner_len: int, pad: int) -> FreeWord:
        return self.path[inner_start - pad:inner_start + inner_len + pad]


def _check_eg(f: GraphMap, filt: Filtration, r: int):
    st = analyze_filtration(f, filt)[r]
    if st.kind != "EG":
        raise LaminationError(f"stratum {r} is {st.kind}, not EG")
    return st


def leaf_approximant(f: GraphMap, filt: Filtration, r: int, edge: int,
                     depth: Optional[int] = None, min_length: int = 200) -> LeafApproximant:
    """λ_k = f^k_#(E) for an H_r edge E (0-based index).

    With ``depth=None`` the least k with |λ_k| ≥ ``min_length`` is used.  The
    nesting audit records whether every earlier λ_i sits inside λ_k.
    """
    _check_eg(f, filt, r)
    if edge not in filt.strata[r]:
        raise LaminationError(f"edge {edge} is not in stratum {r}")
    chain = [FreeWord((edge + 1,))]
    while (depth is None and len(chain[-1]) < min_length) or (depth is not None and len(chain) <= depth):
        chain.append(map_path(f, chain[-1]))
        if depth is None and len(chain) > 200:
            raise LaminationError("approximant does not grow")
    lam = chain[-1]
    nested = all(contains(lam, p) for p in chain[:-1])
    return LeafApproximant(edge, len(chain) - 1, lam, r, nested)


def growing_edge(f: GraphMap, filt: Filtration, r: int) -> int:
    """First H_r edge whose image crosses itself, so leaf approximants nest."""
    for e in filt.strata[r]:
        if any(abs(x) - 1 == e for x in f.edge_images[e]):
            return e
    return filt.strata[r][0]


@dataclass(frozen=True)
class CriticalConstant:
    value: float
    bcc: int
    eigenvalue: float

    @property
    def working(self) -> int:
        return math.ceil(self.value) + 1


def critical_constant(f: GraphMap, filt: Filtration, r: int) -> CriticalConstant:
    st = analyze_filtration(f, filt)[r]
    lam = st.pf_eigenvalue
    if lam is None or lam <= 1 + 1e-9:
        raise LaminationError(f"stratum {r} has eigenvalue {lam}; need λ > 1")
    b = bcc_constant(f)
    return CriticalConstant(2 * b / (lam - 1), b, lam)


# ---------------------------------------------------------------------------
# legality

def _bad_junctions(f, filt, r, a, illegal) -> list:
    hr = set(filt.strata[r])
    n = len(a)
    out = []
    for i in range(n):
        t = turn(-a[i], a[(i + 1) % n])
        out.append(t in illegal and (abs(t[0]) - 1 in hr or abs(t[1]) - 1 in hr))
    return out


def _excise(a: Sequence[int], sigma: Sequence[int]) -> list:
    """Mask of positions of the circuit covered by copies of σ or σ⁻¹."""
    n = len(a)
    mask = [False] * n
    if not sigma or len(sigma) > n:
        return mask
    doubled = tuple(a) + tuple(a[:len(sigma) - 1])
    for piece in (tuple(sigma), tuple(reverse_path(sigma))):
        for i in occurrences(piece, doubled):
            if i < n:
                for j in range(i, i + len(piece)):
                    mask[j % n] = True
    return mask


def legality(f: GraphMap, filt: Filtration, r: int, alpha: Sequence[int], C: int,
             leaf: LeafApproximant, sigma: Optional[Sequence[int]] = None,
             illegal: Optional[frozenset] = None) -> float:
    """Share of the circuit's H_r-length lying in long r-legal leaf segments."""
    if C < 1:
        raise LaminationError("C must be at least 1")
    a = tuple(alpha)
    n = len(a)
    hr = set(filt.strata[r])
    in_hr = [abs(x) - 1 in hr for x in a]
    skip = _excise(a, sigma) if sigma else [False] * n
    denom = sum(1 for i in range(n) if in_hr[i] and not skip[i])
    if denom == 0:
        return 0.0
    illegal = illegal_turns(f) if illegal is None else illegal
    bad = _bad_junctions(f, filt, r, a, illegal)
    lam, lam_rev = _enc(leaf.path), _enc(reverse_path(leaf.path))
    below = set(e for k in range(r + 1) for e in filt.strata[k])
    covered = [False] * n
    for i in range(n):
        # longest legal leaf segment starting at i (cyclically, at most n edges)
        best = 0
        j = 0
        while j < n:
            x = a[(i + j) % n]
            if abs(x) - 1 not in below or skip[(i + j) % n]:
                break
            seg = _enc([a[(i + t) % n] for t in range(j + 1)])
            if seg not in lam and seg not in lam_rev:
                break
            j += 1
            if j < n and bad[(i + j - 1) % n]:
                break
        best = j
        if sum(1 for t in range(best) if in_hr[(i + t) % n]) >= C:
            for t in range(best):
                covered[(i + t) % n] = True
    num = sum(1 for i in range(n) if covered[i] and in_hr[i] and not skip[i])
    return num / denom


def hr_length(filt: Filtration, r: int, p: Sequence[int]) -> int:
    hr = set(filt.strata[r])
    return sum(1 for x in p if abs(x) - 1 in hr)


@dataclass(frozen=True)
class LegalityFit:
    epsilon: float
    C: int
    cap: int
    witnesses: tuple  # (circuit, exponent, direction "+"/"-", legality) per input
    unreached: tuple  # circuits with zero legality in both directions up to the cap


def fit_legality(fwd: GraphMap, bwd: GraphMap, filt: Filtration, r: int, circuits,
                 C: Optional[int] = None, cap: int = 20, target: float = 0.5) -> LegalityFit:
    """For each circuit, the first M ≤ cap where legality of f^M or f^-M reaches ``target``.

    ε is the least legality recorded over all circuits (the best value seen
    when the target is never reached).  Backward iterates are measured with
    the inverse map's own leaf and illegal turns.
    """
    if C is None:
        C = critical_constant(fwd, filt, r).working
    sides = []
    for g in (fwd, bwd):
        e = growing_edge(g, filt, r)
        sides.append((g, leaf_approximant(g, filt, r, e), illegal_turns(g)))
    wit, unreached = [], []
    for alpha in circuits:
        best = (0.0, None, None)
        cur = [tuple(alpha), tuple(alpha)]
        for M in range(1, cap + 1):
            for i, (g, leaf, ill) in enumerate(sides):
                cur[i] = map_circuit(g, cur[i])
                v = legality(g, filt, r, cur[i], C, leaf, illegal=ill) if cur[i] else 0.0
                if v > best[0]:
                    best = (v, M, "+-"[i])
            if best[0] >= target:
                break
        if best[0] == 0.0:
            unreached.append(FreeWord(alpha))
        wit.append((FreeWord(alpha), best[1], best[2], best[0]))
    eps = min((w[3] for w in wit), default=0.0)
    return LegalityFit(eps, C, cap, tuple(wit), tuple(unreached))


def flare_exponent(f: GraphMap, filt: Filtration, r: int, alpha: Sequence[int], A: float,
                   cap: int = 20) -> Optional[int]:
    """Least m ≤ cap with |f^m_#(α)|_{H_r} ≥ A·|α|_{H_r} for a circuit α."""
    base = hr_length(filt, r, alpha)
    cur = tuple(alpha)
    for m in range(1, cap + 1):
        cur = map_circuit(f, cur)
        if hr_length(filt, r, cur) >= A * base:
            return m
    return None


# ---------------------------------------------------------------------------
# neighbourhoods and growth certificates

@dataclass(frozen=True)
class AttractingNeighborhood:
    beta: FreeWord

    def __post_init__(self):
        if not self.beta:
            raise LaminationError("neighbourhood path must be nonempty")


def neighborhood_contains(V: AttractingNeighborhood, p: Sequence[int], cyclic: bool = False) -> bool:
    p = tuple(p)
    if cyclic and p:
        reps = (len(V.beta) - 1) // len(p) + 2
        p = p * reps
    return contains(p, V.beta)


def three_disjoint_copies(container: Sequence[int], beta: Sequence[int]) -> bool:
    """At least three pairwise disjoint occurrences of β or its reverse."""
    return count_disjoint_copies(container, beta) >= 3


def count_disjoint_copies(container: Sequence[int], beta: Sequence[int]) -> int:
    if not beta:
        raise LaminationError("β must be nonempty")
    m = len(beta)
    starts = set(occurrences(beta, container)) | set(occurrences(reverse_path(beta), container))
    # interval scheduling by right end point is optimal
    count, free_from = 0, 0
    for s in sorted(starts):
        if s >= free_from:
            count += 1
            free_from = s + m
    return count


def disjoint_copy_positions(container: Sequence[int], beta: Sequence[int]) -> list:
    m = len(beta)
    starts = sorted(set(occurrences(beta, container)) | set(occurrences(reverse_path(beta), container)))
    out, free_from = [], 0
    for s in starts:
        if s >= free_from:
            out.append(s)
            free_from = s + m
    return out


@dataclass(frozen=True)
class GrowthCertificate:
    k: Optional[int]
    certified: bool
    images: tuple = ()  # protected images, k = 1..last tried

    @property
    def verdict(self) -> str:
        return "certified" if self.certified else "inconclusive"


def expgrowth_certificate(f: GraphMap, beta: Sequence[int], k_cap: int = 6,
                          ext_cap: int = 16) -> GrowthCertificate:
    """Least k ≤ k_cap such that (f^k)_##(β) holds three disjoint copies of β."""
    beta = FreeWord(beta)
    if not beta:
        raise LaminationError("β must be nonempty")
    pc = PowerCache(f)
    imgs = []
    for k in range(1, k_cap + 1):
        img = protected_iterate(pc, beta, k, ext_cap)
        imgs.append(img)
        if three_disjoint_copies(img, beta):
            return GrowthCertificate(k, True, tuple(imgs))
    return GrowthCertificate(None, False, tuple(imgs))


# ---------------------------------------------------------------------------
# ping-pong

@dataclass
class Player:
    """One of φ^{±1}, ψ^{±1}: a map, its filtration and EG stratum."""

    name: str
    f: GraphMap
    filt: Filtration
    r: int
    leaf: Optional[LeafApproximant] = None
    powers: Optional[PowerCache] = None
    _chains: dict = field(default_factory=dict, repr=False)

    def prepare(self, min_length: int):
        if self.leaf is None:
            e = growing_edge(self.f, self.filt, self.r)
            self.leaf = leaf_approximant(self.f, self.filt, self.r, e, min_length=min_length)
        if self.powers is None:
            self.powers = PowerCache(self.f)

    def protected(self, beta, k, ext_cap=16):
        chain = self._chains.setdefault(tuple(beta), [FreeWord(beta)])
        while len(chain) <= k:
            prev = chain[-1]
            chain.append(map_path_protected(self.f, prev, ext_cap) if prev else prev)
        return chain[k]

    def image(self, p, k):
        return map_path(self.powers(k), p)


@dataclass
class PingPongCertificate:
    ok: bool
    failed_step: Optional[str] = None
    message: str = ""
    C: int = 0
    alpha1: dict = field(default_factory=dict)   # ψ-sign -> padded window
    alpha: dict = field(default_factory=dict)
    beta: dict = field(default_factory=dict)     # φ-sign -> window
    beta1: dict = field(default_factory=dict)
    gamma: dict = field(default_factory=dict)    # ψ-sign -> window
    p: dict = field(default_factory=dict)        # (φ-sign, ψ-sign) -> exponent
    q: dict = field(default_factory=dict)        # (ψ-sign, φ-sign) -> exponent
    k: Optional[int] = None
    M: Optional[int] = None
    audit: dict = field(default_factory=dict)    # "ψ^±M φ^±M" -> bool

    def neighborhoods(self) -> dict:
        out = {}
        for s, g in self.gamma.items():
            out[f"psi{s}"] = g
        for s, b in self.beta.items():
            out[f"phi{s}"] = b
        return out


SIGNS = ("+", "-")


def _central(player: Player, hr_edges: int, pad: int = 0):
    """Central leaf window spanning ``hr_edges`` top-stratum edges, and its C-padded version.

    The window starts and ends with an H_r edge so that it keeps growing
    under iteration.
    """
    path = player.leaf.path
    hr = set(player.filt.strata[player.r])
    pos = [i for i, x in enumerate(path) if abs(x) - 1 in hr]
    if hr_edges > len(pos):
        raise LaminationError("leaf approximant too short for the requested window")
    first = (len(pos) - hr_edges) // 2
    i, j = pos[first], pos[first + hr_edges - 1] + 1
    if i - pad < 0 or j + pad > len(path):
        raise LaminationError("leaf approximant too short for the requested padding")
    return path[i:j], path[i - pad:j + pad]


def _first_exponent(player: Player, src: Sequence[int], target: Sequence[int],
                    cap: int, ext_cap: int, persist: int = 0) -> Optional[int]:
    """Least j ≤ cap - persist with the target inside (g^i)_##(src) for i = j .. j + persist."""
    run = 0
    for j in range(1, cap + 1):
        if contains(player.protected(src, j, ext_cap), target):
            run += 1
            if run > persist:
                return j - persist
        else:
            run = 0
    return None


def pingpong_search(phi: dict, psi: dict, exp_cap: int = 10, window_cap: int = 40,
                    t_check: int = 2, ext_cap: int = 16, leaf_length: int = 200,
                    audit: bool = True, pad: int = 0, reach: int = 20) -> PingPongCertificate:
    """Constructive search for the ping-pong exponent M of φ and ψ on a common rose.

    ``phi`` and ``psi`` map ``"+"``/``"-"`` to :class:`Player` objects.  Every
    step that cannot be met within its cap ends the search with a structured
    failure naming the step; this means the hypothesis was not witnessed, not
    that it is false.
    """
    players = list(phi.values()) + list(psi.values())
    graph = players[0].f.graph
    if any(p.f.graph != graph for p in players):
        raise LaminationError("ping-pong maps must share one marked graph")
    for p in players:
        p.prepare(leaf_length)
    C = max(2 * max(bcc_constant(p.f) for p in players) + 1, pad)
    cert = PingPongCertificate(False, C=C)

    # Step 1: ψ-leaf windows whose φ-iterates reach φ-leaf windows
    reach = max(reach, 2 * C + 1)
    for e in SIGNS:
        for ell in range(1, window_cap + 1):
            a, a1 = _central(psi[e], ell, C)
            if all(_first_exponent(phi[s], a1, _central(phi[s], reach)[0], exp_cap, ext_cap,
                                   persist=t_check)
                   for s in SIGNS):
                cert.alpha[e], cert.alpha1[e] = a, a1
                break
        else:
            cert.failed_step = "step1"
            cert.message = f"no ψ{e} leaf window up to {window_cap} is attracted to both φ leaves"
            return cert

    # Steps 2-3: φ-leaf windows β whose ψ-iterates protect α₁
    for s in SIGNS:
        for ell in range(1, window_cap + 1):
            b, b1 = _central(phi[s], ell, C)
            ps = {e: _first_exponent(psi[e], b, cert.alpha1[e], exp_cap, ext_cap) for e in SIGNS}
            if all(ps.values()):
                cert.beta[s], cert.beta1[s] = b, b1
                for e in SIGNS:
                    cert.p[(s, e)] = ps[e]
                break
        else:
            cert.failed_step = "step2"
            cert.message = f"no φ{s} leaf window up to {window_cap} reaches both padded α windows"
            return cert
    for (s, e), p in cert.p.items():
        for t in range(t_check + 1):
            got = psi[e].protected(cert.beta[s], p + t, ext_cap)
            want = psi[e].protected(cert.alpha1[e], t, ext_cap) if t else cert.alpha1[e]
            if not contains(got, want):
                cert.failed_step = "step3"
                cert.message = f"containment fails for φ{s}→ψ{e} at t={t}"
                return cert

    # Step 4: roles reversed
    for e in SIGNS:
        for ell in range(1, window_cap + 1):
            g, _ = _central(psi[e], ell)
            qs = {}
            for s in SIGNS:
                qs[s] = _first_exponent(phi[s], g, cert.beta1[s], exp_cap, ext_cap)
            if all(qs.values()):
                cert.gamma[e] = g
                for s in SIGNS:
                    cert.q[(e, s)] = qs[s]
                break
        else:
            cert.failed_step = "step4"
            cert.message = f"no ψ{e} leaf window up to {window_cap} reaches both padded β windows"
            return cert
    for (e, s), q in cert.q.items():
        for t in range(t_check + 1):
            got = phi[s].protected(cert.gamma[e], q + t, ext_cap)
            want = phi[s].protected(cert.beta1[s], t, ext_cap) if t else cert.beta1[s]
            if not contains(got, want):
                cert.failed_step = "step4"
                cert.message = f"containment fails for ψ{e}→φ{s} at t={t}"
                return cert

    # Step 5: three disjoint copies
    for k in range(1, exp_cap + 1):
        if all(three_disjoint_copies(psi[e].protected(cert.alpha1[e], k, ext_cap), cert.gamma[e])
               for e in SIGNS) and \
                all(three_disjoint_copies(phi[s].protected(cert.beta1[s], k, ext_cap), cert.beta[s])
                    for s in SIGNS):
            cert.k = k
            break
    else:
        cert.failed_step = "step5"
        cert.message = f"no k ≤ {exp_cap} gives three disjoint copies"
        return cert
    cert.M = max(list(cert.p.values()) + list(cert.q.values())) + cert.k

    if audit:
        for e in SIGNS:
            for s in SIGNS:
                mid = phi[s].protected(cert.gamma[e], cert.M, ext_cap)
                img = protected_iterate(psi[e].f, mid, cert.M, ext_cap)
                cert.audit[f"psi{e}M phi{s}M"] = three_disjoint_copies(img, cert.gamma[e])
                mid2 = psi[e].protected(cert.beta[s], cert.M, ext_cap)
                img2 = protected_iterate(phi[s].f, mid2, cert.M, ext_cap)
                cert.audit[f"phi{s}M psi{e}M"] = three_disjoint_copies(img2, cert.beta[s])
        if not all(cert.audit.values()):
            cert.failed_step = "audit"
            cert.message = "direct check of the composite maps failed: " + ", ".join(
                k for k, v in sorted(cert.audit.items()) if not v)
            return cert
    cert.ok = True
    return cert
