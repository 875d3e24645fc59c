"""Marked graphs, graph maps and their train-track style invariants.

Oriented edges are signed edge indices (edge ``i`` is ``i + 1``, its reverse
``-(i + 1)``), so on a rose an edge path is literally a free-group word.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Optional, Sequence

import numpy as np

from .words import Basis, FreeWord, Morphism, WordError

log = logging.getLogger(__name__)

PF_TOL = 1e-9


class GraphError(ValueError):
    pass


class InvarianceError(GraphError):
    pass


@dataclass(frozen=True)
class MarkedGraph:
    """Finite graph with oriented edges.

    ``marking`` (optional) gives, for each ambient generator, a loop at
    ``base`` representing it; on a rose it is the identity.
    """

    vertices: tuple
    edge_names: tuple
    ends: tuple  # (initial, terminal) vertex index per edge
    marking: Optional[tuple] = None
    base: int = 0

    def __post_init__(self):
        if len(self.ends) != len(self.edge_names):
            raise GraphError("one (initial, terminal) pair is needed per edge")
        nv = len(self.vertices)
        for i, (u, v) in enumerate(self.ends):
            if not (0 <= u < nv and 0 <= v < nv):
                raise GraphError(f"edge {self.edge_names[i]!r} has an endpoint outside the vertex set")
        Basis(names=self.edge_names)  # validates edge names

    @classmethod
    def rose(cls, basis: Basis) -> "MarkedGraph":
        marking = tuple(FreeWord((i + 1,)) for i in range(basis.rank))
        return cls(("v",), basis.names, ((0, 0),) * basis.rank, marking)

    @cached_property
    def alphabet(self) -> Basis:
        return Basis(names=self.edge_names)

    @property
    def num_edges(self) -> int:
        return len(self.edge_names)

    @property
    def directions(self) -> tuple:
        return self.alphabet.letters

    def init(self, e: int) -> int:
        u, v = self.ends[abs(e) - 1]
        return u if e > 0 else v

    def term(self, e: int) -> int:
        u, v = self.ends[abs(e) - 1]
        return v if e > 0 else u

    @cached_property
    def outgoing(self) -> tuple:
        out = [[] for _ in self.vertices]
        for e in self.directions:
            out[self.init(e)].append(e)
        return tuple(tuple(x) for x in out)

    def valence(self, v: int) -> int:
        return len(self.outgoing[v])

    def edge(self, name: str) -> int:
        return self.alphabet.letter(name)

    def parse_path(self, text: str) -> FreeWord:
        p = self.alphabet.parse_letters(text)
        check_concatenable(self, p)
        return FreeWord(p)

    def format_path(self, p: Iterable[int]) -> str:
        return self.alphabet.format(p)


def check_concatenable(G: MarkedGraph, p: Sequence[int]) -> None:
    for x in p:
        if x == 0 or abs(x) > G.num_edges:
            raise GraphError(f"{x} is not an edge of the graph")
    for i in range(len(p) - 1):
        if G.term(p[i]) != G.init(p[i + 1]):
            raise GraphError(
                f"path is not concatenable at position {i}: "
                f"{G.format_path([p[i]])} then {G.format_path([p[i + 1]])}")


def _tighten(p: Iterable[int]) -> list:
    stack = []
    for x in p:
        if stack and stack[-1] == -x:
            stack.pop()
        else:
            stack.append(x)
    return stack


def tighten_path(G: MarkedGraph, p: Sequence[int]) -> FreeWord:
    """Remove backtracking; the result is homotopic rel endpoints."""
    check_concatenable(G, p)
    return FreeWord(_tighten(p))


def is_tight(p: Sequence[int]) -> bool:
    return all(p[i] != -p[i + 1] for i in range(len(p) - 1))


def reverse_path(p: Sequence[int]) -> FreeWord:
    return FreeWord(-x for x in reversed(p))


def reduced_paths(G: MarkedGraph, length: int, start: Optional[int] = None,
                  avoid_first: Optional[int] = None):
    """All tight edge paths with exactly ``length`` edges.

    ``start`` fixes the initial vertex; ``avoid_first`` forbids one first edge.
    """
    if length <= 0:
        return
    firsts = G.directions if start is None else G.outgoing[start]

    def grow(prefix, n):
        if n == 0:
            yield FreeWord(prefix)
            return
        last = prefix[-1]
        for e in G.outgoing[G.term(last)]:
            if e != -last:
                yield from grow(prefix + (e,), n - 1)

    for e in firsts:
        if e != avoid_first:
            yield from grow((e,), length - 1)


@dataclass(frozen=True)
class GraphMap:
    """Topological representative: vertices to vertices, edges to edge paths."""

    graph: MarkedGraph
    vertex_images: tuple
    edge_images: tuple

    def __post_init__(self):
        G = self.graph
        if len(self.vertex_images) != len(G.vertices):
            raise GraphError("one vertex image is needed per vertex")
        if len(self.edge_images) != G.num_edges:
            raise GraphError("one edge image is needed per edge")
        imgs = tuple(FreeWord(p) for p in self.edge_images)
        object.__setattr__(self, "edge_images", imgs)
        for i, p in enumerate(imgs):
            check_concatenable(G, p)
            u, v = G.ends[i]
            fu, fv = self.vertex_images[u], self.vertex_images[v]
            if p:
                if G.init(p[0]) != fu or G.term(p[-1]) != fv:
                    raise GraphError(f"image of edge {G.edge_names[i]!r} has the wrong endpoints")
            elif fu != fv:
                raise GraphError(f"edge {G.edge_names[i]!r} collapses but its endpoints map apart")

    @classmethod
    def from_morphism(cls, m: Morphism, basis: Optional[Basis] = None) -> "GraphMap":
        basis = basis or Basis(m.rank)
        return cls(MarkedGraph.rose(basis), (0,), m.images)

    @classmethod
    def identity(cls, G: MarkedGraph) -> "GraphMap":
        return cls(G, tuple(range(len(G.vertices))),
                   tuple(FreeWord((i + 1,)) for i in range(G.num_edges)))

    def image(self, e: int) -> FreeWord:
        if e > 0:
            return self.edge_images[e - 1]
        return reverse_path(self.edge_images[-e - 1])

    @cached_property
    def _signed_images(self) -> dict:
        return {e: tuple(self.image(e)) for e in self.graph.directions}

    def untight_edges(self) -> list:
        return [i for i, p in enumerate(self.edge_images) if not is_tight(p)]

    def direction_map(self, e: int) -> Optional[int]:
        """Df: first edge of the image of ``e`` (None if ``e`` collapses)."""
        p = _tighten(self.image(e))
        return p[0] if p else None

    def power(self, k: int) -> "GraphMap":
        if k < 0:
            raise GraphError("graph maps are only iterated forwards")
        out = GraphMap.identity(self.graph)
        for _ in range(k):
            out = compose_maps(self, out)
        return out


def compose_maps(f: GraphMap, g: GraphMap) -> GraphMap:
    """``f ∘ g`` on a common graph (``g`` first), images tightened."""
    if f.graph != g.graph:
        raise GraphError("maps live on different graphs")
    verts = tuple(f.vertex_images[v] for v in g.vertex_images)
    imgs = tuple(map_path(f, p) for p in g.edge_images)
    return GraphMap(f.graph, verts, imgs)


def map_path(f: GraphMap, p: Sequence[int]) -> FreeWord:
    """f_#: the tightened image of an edge path."""
    imgs = f._signed_images
    stack = []
    for e in p:
        for y in imgs[e]:
            if stack and stack[-1] == -y:
                stack.pop()
            else:
                stack.append(y)
    return FreeWord(stack)


def iterate_path(f: GraphMap, p: Sequence[int], k: int) -> FreeWord:
    out = FreeWord(p)
    for _ in range(k):
        out = map_path(f, out)
    return out


def map_circuit(f: GraphMap, c: Sequence[int]) -> FreeWord:
    """Tightened image of a circuit, cyclically reduced (not canonically rotated)."""
    p = list(map_path(f, c))
    i, j = 0, len(p) - 1
    while i < j and p[i] == -p[j]:
        i += 1
        j -= 1
    return FreeWord(p[i:j + 1])


def _cancellation(left: Sequence[int], right: Sequence[int]) -> int:
    n = min(len(left), len(right))
    i = 0
    while i < n and left[-1 - i] == -right[i]:
        i += 1
    return i


# ---------------------------------------------------------------------------
# bounded cancellation

@dataclass(frozen=True)
class BccScan:
    value: int
    max_path_length: int
    stable: bool
    rounds: tuple  # (path length, max cancellation) per round


def bcc_scan(f: GraphMap, cap: int = 8) -> BccScan:
    """Largest cancellation between f_#(β) and f_#(γ) over tight splittings β·γ.

    Splittings with ``|β|, |γ| <= L/2`` are scanned for ``L = 2, 4, 8, ...``;
    the scan stops once two consecutive rounds agree or ``L`` passes ``cap``.
    """
    G = f.graph
    rounds = []
    half = 1
    prev = None
    # suffix/prefix images keyed by the boundary edge, accumulated over lengths
    tails: dict = {}
    heads: dict = {}
    done_len = 0
    while 2 * half <= max(cap, 2):
        for n in range(done_len + 1, half + 1):
            for beta in reduced_paths(G, n):
                tails.setdefault(beta[-1], set()).add(tuple(map_path(f, beta)))
                heads.setdefault(beta[0], set()).add(tuple(map_path(f, beta)))
        done_len = half
        best = 0
        for last, left_set in tails.items():
            for first in G.outgoing[G.term(last)]:
                if first == -last:
                    continue
                for right in heads.get(first, ()):
                    for left in left_set:
                        c = _cancellation(left, right)
                        if c > best:
                            best = c
        rounds.append((2 * half, best))
        if prev is not None and best == prev:
            return BccScan(best, 2 * half, True, tuple(rounds))
        prev = best
        half *= 2
    log.warning("bounded cancellation scan did not stabilise by length %d; %d is a lower estimate",
                cap, prev)
    return BccScan(prev, rounds[-1][0], False, tuple(rounds))


_BCC_CACHE: dict = {}


def bcc_constant(f: GraphMap, cap: int = 8) -> int:
    key = (f, cap)
    if key not in _BCC_CACHE:
        _BCC_CACHE[key] = bcc_scan(f, cap).value
    return _BCC_CACHE[key]


# ---------------------------------------------------------------------------
# protected images

def _strip_amount(f: GraphMap, X: Sequence[int], vertex: int, avoid: int,
                  side: str, ext_cap: int, C: int) -> int:
    """Max number of edges of X killed by extensions on one side.

    Extensions are grown away from β one edge at a time.  Once more than C
    edges of an extension's image survive past the point where it stops
    cancelling X, bounded cancellation says that no longer extension can
    cancel more, so that branch is closed.
    """
    G = f.graph
    best = 0
    stack = [(e,) for e in G.outgoing[vertex] if e != avoid]
    capped = False
    while stack:
        ray = stack.pop()
        if side == "left":
            img = map_path(f, reverse_path(ray))
            c = _cancellation(img, X)
        else:
            img = map_path(f, ray)
            c = _cancellation(X, img)
        best = max(best, c)
        if best >= len(X):
            return len(X)
        if c + C >= len(img):
            if len(ray) < ext_cap:
                stack.extend(ray + (e,) for e in G.outgoing[G.term(ray[-1])] if e != -ray[-1])
            else:
                capped = True
    if capped:
        log.warning("protected image search hit the extension cap %d", ext_cap)
    return best


def map_path_protected(f: GraphMap, beta: Sequence[int], ext_cap: int = 16) -> FreeWord:
    """f_##(β): the part of f_#(β) that survives in f_#(γ1·β·γ3) for every extension.

    Exact given the bounded cancellation constant of ``f``; ``ext_cap`` is
    only a safety limit on the extension length.
    """
    beta = FreeWord(beta)
    if not beta:
        return FreeWord(())
    G = f.graph
    X = map_path(f, beta)
    if not X:
        return X
    C = bcc_constant(f)
    left = _strip_amount(f, X, G.init(beta[0]), beta[0], "left", ext_cap, C)
    right = _strip_amount(f, X, G.term(beta[-1]), -beta[-1], "right", ext_cap, C)
    if left + right >= len(X):
        return FreeWord(())
    return X[left:len(X) - right]


def is_subpath(small: Sequence[int], big: Sequence[int]) -> bool:
    n, m = len(small), len(big)
    if n == 0:
        return True
    small = tuple(small)
    big = tuple(big)
    return any(big[i:i + n] == small for i in range(m - n + 1))


# ---------------------------------------------------------------------------
# filtrations and strata

@dataclass(frozen=True)
class Filtration:
    """Ordered strata H_1, ..., H_K (lists of 0-based edge indices)."""

    strata: tuple

    def __post_init__(self):
        strata = tuple(tuple(s) for s in self.strata)
        object.__setattr__(self, "strata", strata)
        seen = set()
        for s in strata:
            if not s:
                raise GraphError("strata must be nonempty")
            for e in s:
                if e in seen:
                    raise GraphError(f"edge {e} appears in two strata")
                seen.add(e)

    @classmethod
    def from_names(cls, G: MarkedGraph, strata: Sequence[Sequence[str]]) -> "Filtration":
        return cls(tuple(tuple(G.edge(n) - 1 for n in s) for s in strata))

    def stratum_of(self, edge: int) -> int:
        """0-based stratum index of a (signed or unsigned 0-based) edge."""
        for k, s in enumerate(self.strata):
            if edge in s:
                return k
        raise GraphError(f"edge {edge} is not in the filtration")

    def height(self, p: Sequence[int]) -> int:
        return max((self.stratum_of(abs(e) - 1) for e in p), default=-1)

    def check_covers(self, G: MarkedGraph) -> None:
        missing = set(range(G.num_edges)) - {e for s in self.strata for e in s}
        if missing:
            raise GraphError(f"edges not in any stratum: {[G.edge_names[e] for e in sorted(missing)]}")

    def check_invariant(self, f: GraphMap) -> None:
        G = f.graph
        self.check_covers(G)
        for k, s in enumerate(self.strata):
            for e in s:
                for x in f.edge_images[e]:
                    if self.stratum_of(abs(x) - 1) > k:
                        raise InvarianceError(
                            f"filtration is not invariant: f({G.edge_names[e]}) = "
                            f"{G.format_path(f.edge_images[e])} leaves G_{k + 1}")


def transition_matrix(f: GraphMap, filt: Filtration, k: int) -> np.ndarray:
    """Entry (i, j): crossings of the i-th edge of H_k by f(j-th edge of H_k)."""
    filt.check_invariant(f)
    edges = filt.strata[k]
    pos = {e: i for i, e in enumerate(edges)}
    M = np.zeros((len(edges), len(edges)), dtype=np.int64)
    for j, e in enumerate(edges):
        for x in f.edge_images[e]:
            i = pos.get(abs(x) - 1)
            if i is not None:
                M[i, j] += 1
    return M


def _strongly_connected(M: np.ndarray) -> bool:
    n = M.shape[0]
    if n == 0:
        return False
    adj = M > 0
    for A in (adj, adj.T):
        seen = {0}
        todo = [0]
        while todo:
            u = todo.pop()
            for v in np.nonzero(A[u])[0]:
                if int(v) not in seen:
                    seen.add(int(v))
                    todo.append(int(v))
        if len(seen) != n:
            return False
    return True


def is_irreducible(M) -> bool:
    M = np.asarray(M)
    if M.shape == (1, 1):
        return M[0, 0] > 0
    return _strongly_connected(M)


def pf_eigenvalue(M, tol: float = 1e-12, max_iter: int = 100000, with_vector: bool = False):
    """Perron–Frobenius eigenvalue of an irreducible nonnegative matrix.

    Power iteration on ``M + I`` (primitive whenever ``M`` is irreducible)
    from the all-ones vector.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise GraphError("matrix must be square")
    if (M < 0).any():
        raise GraphError("matrix must be nonnegative")
    if not is_irreducible(M):
        raise GraphError("matrix is reducible")
    n = M.shape[0]
    A = M + np.eye(n)
    v = np.ones(n)
    lam = 0.0
    for _ in range(max_iter):
        w = A @ v
        new_lam = w.max()
        w = w / new_lam
        delta = np.abs(w - v).max()
        v = w
        if delta < tol and abs(new_lam - lam) < tol:
            lam = new_lam
            break
        lam = new_lam
    lam = lam - 1.0
    resid = np.abs(M @ v - lam * v).max()
    if resid > PF_TOL:
        raise GraphError(f"power iteration did not converge (residual {resid:.3g})")
    return (lam, v) if with_vector else lam


@dataclass(frozen=True)
class StratumAnalysis:
    index: int
    edges: tuple
    matrix: tuple
    irreducible: bool
    kind: str  # "zero", "NEG", "EG" or "reducible"
    pf_eigenvalue: Optional[float]
    realizes_free_factor_system: bool = False


def classify_matrix(M) -> tuple:
    M = np.asarray(M)
    if not M.any():
        return "zero", None, False
    if not is_irreducible(M):
        return "reducible", None, False
    lam = pf_eigenvalue(M)
    if lam > 1 + PF_TOL:
        return "EG", lam, True
    if abs(lam - 1) <= PF_TOL:
        return "NEG", lam, True
    # an irreducible nonnegative integer matrix has λ >= 1
    raise GraphError(f"unexpected eigenvalue {lam}")


def analyze_filtration(f: GraphMap, filt: Filtration, realizes: Optional[int] = None) -> list:
    """Per-stratum transition matrix and EG/NEG/zero class.

    ``realizes`` marks the index ``r - 1`` of the filtration element that
    realizes a free factor system; the stratum just above it is flagged.
    """
    filt.check_invariant(f)
    out = []
    for k, edges in enumerate(filt.strata):
        M = transition_matrix(f, filt, k)
        kind, lam, irr = classify_matrix(M)
        out.append(StratumAnalysis(k, edges, tuple(map(tuple, M.tolist())), irr, kind, lam,
                                   realizes is not None and k == realizes + 1))
    return out


# ---------------------------------------------------------------------------
# turns and legality

def turn(d1: int, d2: int) -> tuple:
    return (d1, d2) if d1 <= d2 else (d2, d1)


def all_turns(G: MarkedGraph) -> list:
    out = []
    for v in range(len(G.vertices)):
        dirs = sorted(G.outgoing[v])
        for i, a in enumerate(dirs):
            for b in dirs[i:]:
                out.append((a, b))
    return out


def illegal_turns(f: GraphMap) -> frozenset:
    """Turns some iterate of Df makes degenerate (degenerate turns included)."""
    G = f.graph
    Df = {e: f.direction_map(e) for e in G.directions}
    verdict: dict = {}
    for t in all_turns(G):
        seen = []
        cur = t
        result = None
        while True:
            if cur in verdict:
                result = verdict[cur]
                break
            a, b = cur
            if a == b:
                result = True
                break
            if cur in seen:
                result = False
                break
            seen.append(cur)
            da, db = Df[a], Df[b]
            if da is None or db is None:
                # a collapsed direction never becomes degenerate with a live one
                result = da is None and db is None
                break
            cur = turn(da, db)
        for s in seen:
            verdict[s] = result
        verdict[t] = result
    return frozenset(t for t, bad in verdict.items() if bad)


def path_turns(p: Sequence[int], cyclic: bool = False) -> list:
    out = [turn(-p[i], p[i + 1]) for i in range(len(p) - 1)]
    if cyclic and len(p) > 1:
        out.append(turn(-p[-1], p[0]))
    return out


def is_r_legal(f: GraphMap, filt: Filtration, r: int, p: Sequence[int],
               cyclic: bool = False, illegal: Optional[frozenset] = None) -> bool:
    """Height exactly ``r`` and no illegal turn meets an H_r direction."""
    if not p or filt.height(p) != r:
        return False
    illegal = illegal_turns(f) if illegal is None else illegal
    hr = set(filt.strata[r])
    for t in path_turns(p, cyclic):
        if t in illegal and (abs(t[0]) - 1 in hr or abs(t[1]) - 1 in hr):
            return False
    return True


# ---------------------------------------------------------------------------
# Nielsen paths

@dataclass(frozen=True)
class NielsenPath:
    path: FreeWord
    period: int
    indivisible: bool


def _fixed_period(f_powers: list, p: Sequence[int]) -> Optional[int]:
    for j, fj in enumerate(f_powers, start=1):
        if map_path(fj, p) == p:
            return j
    return None


def find_nielsen_paths(f: GraphMap, max_length: int, max_period: int) -> list:
    """Periodic Nielsen paths up to the caps, shortest first.

    Absence from the result only means none was found within the caps.
    """
    if max_length < 1 or max_period < 1:
        raise GraphError("caps must be at least 1")
    G = f.graph
    powers = [f]
    for _ in range(max_period - 1):
        powers.append(compose_maps(f, powers[-1]))
    found = {}
    for n in range(1, max_length + 1):
        for p in reduced_paths(G, n):
            # endpoints must be periodic vertices for the same power
            j = _fixed_period(powers, p)
            if j is not None:
                found[p] = j
    out = []
    for p, j in found.items():
        out.append(NielsenPath(p, j, not _splits_into(p, found)))
    return out


def _splits_into(p: Sequence[int], pieces: dict) -> bool:
    """Can ``p`` be cut into >= 2 consecutive members of ``pieces``?"""
    n = len(p)
    p = tuple(p)
    # reach[i]: number of pieces (capped at 2) of some cut of p[:i]
    reach = {0: 0}
    for i in range(n):
        if i not in reach:
            continue
        for j in range(i + 1, n + 1):
            if (i, j) == (0, n):
                continue
            if p[i:j] in pieces:
                reach[j] = max(reach.get(j, 0), min(reach[i] + 1, 2))
    return reach.get(n, 0) >= 2


# ---------------------------------------------------------------------------
# relative train track conditions

@dataclass(frozen=True)
class RttReport:
    stratum: int
    passed: bool
    failures: tuple = ()  # (condition, witness)
    checked: dict = field(default_factory=dict)


def check_rtt_conditions(f: GraphMap, filt: Filtration, r: int, max_length: int = 4) -> RttReport:
    """Bounded check of the relative train track conditions for stratum ``r``.

    (i) r-legal paths of length <= ``max_length`` map to r-legal paths;
    (ii) nontrivial connecting paths in G_{r-1} between H_r edges stay nontrivial;
    (iii) Df sends H_r directions to H_r directions.
    Untight edge images fail outright.
    """
    G = f.graph
    filt.check_invariant(f)
    failures = []
    for i in f.untight_edges():
        failures.append(("tightness", G.edge_names[i] + " -> " + G.format_path(f.edge_images[i])))
    hr = set(filt.strata[r])
    for e in G.directions:
        if abs(e) - 1 in hr:
            d = f.direction_map(e)
            if d is None or abs(d) - 1 not in hr:
                failures.append(("iii", G.format_path([e])))
    illegal = illegal_turns(f)
    n_legal = n_conn = 0
    for n in range(1, max_length + 1):
        for p in reduced_paths(G, n):
            if not is_r_legal(f, filt, r, p, illegal=illegal):
                continue
            n_legal += 1
            img = map_path(f, p)
            if not is_r_legal(f, filt, r, img, illegal=illegal):
                failures.append(("i", G.format_path(p)))
            if n >= 3 and abs(p[0]) - 1 in hr and abs(p[-1]) - 1 in hr:
                mid = p[1:-1]
                if all(abs(x) - 1 not in hr for x in mid) and filt.height(mid) < r:
                    n_conn += 1
                    if not map_path(f, mid):
                        failures.append(("ii", G.format_path(mid)))
    seen = set()
    uniq = []
    for item in failures:
        if item not in seen:
            seen.add(item)
            uniq.append(item)
    return RttReport(r, not uniq, tuple(uniq), {"r_legal_paths": n_legal, "connecting_paths": n_conn})
