"""Stallings graphs and subgroup-system algebra."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .graphs import (
    Filtration, GraphMap, MarkedGraph, analyze_filtration, find_nielsen_paths, iterate_path,
)
from .words import FreeWord, _order_key, cyclic_reduce, inverse, reduce


class SubgroupError(ValueError):
    pass


@dataclass(frozen=True)
class SubgroupGraph:
    """Folded Stallings graph: vertices ``0..n-1`` with base ``0``.

    ``edges`` holds ``(source, generator, target)`` with positive generator
    indices, in canonical order (BFS from the base, letters ordered a, A, b, ...).
    """

    num_vertices: int
    edges: tuple
    rank_ambient: int = 0

    @property
    def rank(self) -> int:
        if self.num_vertices == 0:
            return 0
        return len(self.edges) - self.num_vertices + 1

    def is_trivial(self) -> bool:
        return not self.edges

    def adjacency(self) -> list:
        """``adj[v][letter] = w`` for signed letters."""
        adj = [dict() for _ in range(self.num_vertices)]
        for u, x, v in self.edges:
            adj[u][x] = v
            adj[v][-x] = u
        return adj

    def valence(self, v: int) -> int:
        return sum(1 for u, _, w in self.edges for z in (u, w) if z == v)

    def natural_vertices(self) -> list:
        """Vertices of valence > 2."""
        val = [0] * self.num_vertices
        for u, _, v in self.edges:
            val[u] += 1
            val[v] += 1
        return [v for v in range(self.num_vertices) if val[v] > 2]

    def natural_edges(self) -> list:
        """Maximal edgelet chains between natural vertices, as (start, word, end).

        Each edge of the graph is one edgelet labelled by its generator.  With
        no natural vertex the graph is a circle (or a point) and the single
        loop read from the base is returned.
        """
        adj = self.adjacency()
        nat = set(self.natural_vertices())
        if not self.edges:
            return []
        starts = sorted(nat) if nat else [0]
        used = set()
        out = []
        for s in starts:
            for x in sorted(adj[s], key=_order_key):
                key = (s, x)
                if key in used:
                    continue
                word = [x]
                prev, cur = s, adj[s][x]
                used.add((s, x))
                last = x
                while cur not in nat and cur != s:
                    nxt = [y for y in adj[cur] if y != -last]
                    if not nxt:
                        break
                    y = nxt[0]
                    used.add((cur, y))
                    word.append(y)
                    last = y
                    prev, cur = cur, adj[cur][y]
                used.add((cur, -last))
                out.append((s, FreeWord(word), cur))
        return out

    def to_json(self) -> dict:
        return {"vertices": self.num_vertices, "base": 0,
                "edges": [list(e) for e in self.edges]}

    @classmethod
    def from_json(cls, data: dict, rank_ambient: int = 0) -> "SubgroupGraph":
        if data.get("base", 0) != 0:
            raise SubgroupError("serialised graphs use base 0")
        return canonical_graph(data["vertices"], [tuple(e) for e in data["edges"]], 0,
                               rank_ambient)



def _fold(num_vertices: int, edges: list, base: int):
    """Stallings folding by union–find; returns (vertex count, edge set, base)."""
    parent = list(range(num_vertices))

    def find(v):
        while parent[v] != v:
            parent[v] = parent[parent[v]]
            v = parent[v]
        return v

    edges = set(edges)
    changed = True
    while changed:
        changed = False
        out = {}
        new_edges = set()
        for u, x, v in edges:
            u, v = find(u), find(v)
            new_edges.add((u, x, v))
        edges = new_edges
        for u, x, v in sorted(edges):
            for key, tgt in (((u, x), v), ((v, -x), u)):
                other = out.get(key)
                if other is None:
                    out[key] = tgt
                elif find(other) != find(tgt):
                    a, b = find(other), find(tgt)
                    parent[max(a, b)] = min(a, b)
                    changed = True
        if changed:
            continue
    edges = {(find(u), x, find(v)) for u, x, v in edges}
    return edges, find(base)


def _prune(edges: set, keep: set) -> set:
    """Repeatedly delete valence-1 vertices not in ``keep``."""
    edges = set(edges)
    while True:
        val: dict = {}
        for u, _, v in edges:
            val[u] = val.get(u, 0) + 1
            val[v] = val.get(v, 0) + 1
        leaves = {v for v, d in val.items() if d == 1 and v not in keep}
        if not leaves:
            return edges
        edges = {e for e in edges if e[0] not in leaves and e[2] not in leaves}


def canonical_graph(num_vertices: int, edges, base: int, rank_ambient: int = 0) -> SubgroupGraph:
    """Relabel vertices by BFS from the base, visiting letters a, A, b, B, ..."""
    adj: dict = {}
    for u, x, v in edges:
        adj.setdefault(u, {})[x] = v
        adj.setdefault(v, {})[-x] = u
    order = {base: 0}
    q = deque([base])
    while q:
        u = q.popleft()
        for x in sorted(adj.get(u, {}), key=_order_key):
            v = adj[u][x]
            if v not in order:
                order[v] = len(order)
                q.append(v)
    new_edges = sorted((order[u], x, order[v]) for u, x, v in edges if u in order)
    return SubgroupGraph(len(order), tuple(new_edges), rank_ambient)


def fold_stallings(generators: Sequence[Sequence[int]], rank_ambient: int = 0) -> SubgroupGraph:
    """Folded core graph of ⟨generators⟩ with base vertex 0 (hair to the base kept)."""
    edges = []
    n = 1
    for g in generators:
        g = reduce(g)
        if not g:
            continue
        cur = 0
        for i, x in enumerate(g):
            nxt = 0 if i == len(g) - 1 else n
            if nxt:
                n += 1
            if x > 0:
                edges.append((cur, x, nxt))
            else:
                edges.append((nxt, -x, cur))
            cur = nxt
    folded, base = _fold(n, edges, 0)
    core = _prune(folded, {base})
    return canonical_graph(n, core, base, rank_ambient)


def contains_word(H: SubgroupGraph, w: Sequence[int]) -> bool:
    adj = H.adjacency()
    v = 0
    for x in w:
        v = adj[v].get(x)
        if v is None:
            return False
    return v == 0


def read_word(H: SubgroupGraph, w: Sequence[int], start: int = 0):
    """Follow ``w`` from ``start``; returns (letters read, vertex reached)."""
    adj = H.adjacency()
    v = start
    for i, x in enumerate(w):
        nxt = adj[v].get(x)
        if nxt is None:
            return i, v
        v = nxt
    return len(w), v


def spelling_words(H: SubgroupGraph) -> list:
    """Label of a BFS-tree path from the base to each vertex."""
    adj = H.adjacency()
    words = [None] * H.num_vertices
    words[0] = ()
    q = deque([0])
    while q:
        u = q.popleft()
        for x in sorted(adj[u], key=_order_key):
            v = adj[u][x]
            if words[v] is None:
                words[v] = words[u] + (x,)
                q.append(v)
    return [FreeWord(w) for w in words]


def free_basis(H: SubgroupGraph) -> list:
    """Free basis read off the spanning tree of BFS spellings."""
    sp = spelling_words(H)
    tree = set()
    adj = H.adjacency()
    for v in range(1, H.num_vertices):
        w = sp[v]
        u = 0
        for x in w:
            nxt = adj[u][x]
            tree.add((u, x, nxt) if x > 0 else (nxt, -x, u))
            u = nxt
    out = []
    for e in H.edges:
        if e not in tree:
            u, x, v = e
            out.append(reduce(sp[u] + (x,) + inverse(sp[v])))
    return out


def core_graph(H: SubgroupGraph) -> SubgroupGraph:
    """Cyclic core (hair removed); the new base is the old base's nearest core vertex."""
    core = _prune(set(H.edges), set())
    if not core:
        return SubgroupGraph(1, (), H.rank_ambient)
    verts = {u for u, _, _ in core} | {v for _, _, v in core}
    base = 0 if 0 in verts else _nearest(H, verts)
    return canonical_graph(H.num_vertices, core, base, H.rank_ambient)


def _nearest(H: SubgroupGraph, targets: set) -> int:
    adj = H.adjacency()
    seen = {0}
    q = deque([0])
    while q:
        u = q.popleft()
        if u in targets:
            return u
        for x in sorted(adj[u], key=_order_key):
            v = adj[u][x]
            if v not in seen:
                seen.add(v)
                q.append(v)
    raise SubgroupError("no core vertex reachable")


def conjugacy_key(H: SubgroupGraph) -> tuple:
    """Invariant of the conjugacy class: minimal canonical form over core base points."""
    C = core_graph(H)
    if not C.edges:
        return (1, ())
    return min((g.num_vertices, g.edges)
               for g in (canonical_graph(C.num_vertices, C.edges, v) for v in range(C.num_vertices)))


def rebase(H: SubgroupGraph, v: int) -> SubgroupGraph:
    return canonical_graph(H.num_vertices, _prune(set(H.edges), {v}), v, H.rank_ambient)


def carries_loop(H: SubgroupGraph, alpha: Sequence[int]) -> bool:
    """Does some vertex of H carry a closed path reading the cyclic word ``alpha``?"""
    alpha = cyclic_reduce(reduce(alpha))
    if not alpha:
        return True
    adj = H.adjacency()
    for start in range(H.num_vertices):
        v = start
        for x in alpha:
            v = adj[v].get(x)
            if v is None:
                break
        else:
            if v == start:
                return True
    return False


@dataclass(frozen=True)
class SubgroupSystem:
    components: tuple = ()

    def __post_init__(self):
        comps = tuple(self.components)
        for c in comps:
            if c.is_trivial():
                raise SubgroupError("subgroup systems have nontrivial components")
        object.__setattr__(self, "components", comps)

    def __len__(self):
        return len(self.components)

    def __iter__(self):
        return iter(self.components)

    def keys(self) -> list:
        return sorted(conjugacy_key(c) for c in self.components)

    def same_classes(self, other: "SubgroupSystem") -> bool:
        return self.keys() == other.keys()


def carries_conjugacy(S, alpha: Sequence[int]) -> bool:
    return any(carries_loop(H, alpha) for H in S)


@dataclass(frozen=True)
class FreeFactorSystem(SubgroupSystem):
    complement: Optional[SubgroupGraph] = None
    rank_ambient: int = 0

    @property
    def basis_aligned(self) -> bool:
        return all(H.num_vertices == 1 for H in self.components)

    def factor_letters(self) -> list:
        """Generator sets of the factors (only meaningful when basis aligned)."""
        return [frozenset(x for _, x, _ in H.edges) for H in self.components]

    @classmethod
    def from_generators(cls, factors, complement=None, rank_ambient: int = 0) -> "FreeFactorSystem":
        comps = tuple(fold_stallings(gens, rank_ambient) for gens in factors)
        comp = fold_stallings(complement, rank_ambient) if complement is not None else None
        return cls(comps, comp, rank_ambient)


# ---------------------------------------------------------------------------
# fiber products

def _pullback_components(H: SubgroupGraph, K: SubgroupGraph):
    """Connected components of H ×_R K as (vertex pairs, edges, contains base pair)."""
    adjH, adjK = H.adjacency(), K.adjacency()
    seen = {}
    comps = []
    for u0 in range(H.num_vertices):
        for v0 in range(K.num_vertices):
            if (u0, v0) in seen:
                continue
            idx = len(comps)
            verts = [(u0, v0)]
            seen[(u0, v0)] = idx
            q = deque([(u0, v0)])
            edges = set()
            while q:
                u, v = q.popleft()
                for x, u2 in adjH[u].items():
                    v2 = adjK[v].get(x)
                    if v2 is None:
                        continue
                    if (u2, v2) not in seen:
                        seen[(u2, v2)] = idx
                        verts.append((u2, v2))
                        q.append((u2, v2))
                    if x > 0:
                        edges.add(((u, v), x, (u2, v2)))
            comps.append((verts, edges))
    return comps


def _component_graph(verts, edges, base_pair, rank_ambient) -> SubgroupGraph:
    index = {p: i for i, p in enumerate(verts)}
    e = {(index[a], x, index[b]) for a, x, b in edges}
    core = _prune(e, {index[base_pair]})
    return canonical_graph(len(verts), core, index[base_pair], rank_ambient)


@dataclass(frozen=True)
class Intersection:
    """One nontrivial component of a pullback: H ∩ x K x⁻¹ (up to conjugacy in H)."""

    subgroup: SubgroupGraph
    conjugator: FreeWord
    contains_base: bool


def pullback(H: SubgroupGraph, K: SubgroupGraph) -> list:
    spH, spK = spelling_words(H), spelling_words(K)
    out = []
    for verts, edges in _pullback_components(H, K):
        base_pair = (0, 0) if (0, 0) in verts else None
        core = _prune(edges_to_index(verts, edges), set())
        if not core and base_pair is None:
            continue
        if base_pair is not None:
            g = _component_graph(verts, edges, base_pair, H.rank_ambient)
            if g.is_trivial():
                continue
            out.append(Intersection(g, FreeWord(()), True))
            continue
        # pick the vertex giving the shortest, then smallest, conjugator
        index = {p: i for i, p in enumerate(verts)}
        core_verts = {a for a, _, _ in core} | {b for _, _, b in core}
        cands = []
        for p in verts:
            if index[p] in core_verts:
                x = reduce(spH[p[0]] + inverse(spK[p[1]]))
                cands.append((len(x), [_order_key(y) for y in x], p, x))
        _, _, p, x = min(cands)
        out.append(Intersection(_component_graph(verts, edges, p, H.rank_ambient), x, False))
    return out


def edges_to_index(verts, edges) -> set:
    index = {p: i for i, p in enumerate(verts)}
    return {(index[a], x, index[b]) for a, x, b in edges}


def intersect_subgroups(H: SubgroupGraph, K: SubgroupGraph) -> SubgroupSystem:
    """Representatives of the nontrivial H ∩ x K x⁻¹, up to conjugacy."""
    comps = []
    seen = set()
    for item in pullback(H, K):
        key = conjugacy_key(item.subgroup)
        if key not in seen:
            seen.add(key)
            comps.append(item.subgroup)
    return SubgroupSystem(tuple(comps))


def conjugate_into(A: SubgroupGraph, F: SubgroupGraph) -> bool:
    """Is A contained in some conjugate of F?"""
    CA = core_graph(A)
    if not CA.edges:
        return True
    adjA, adjF = CA.adjacency(), F.adjacency()
    for start in range(F.num_vertices):
        image = {0: start}
        q = deque([0])
        ok = True
        while q and ok:
            u = q.popleft()
            for x, v in adjA[u].items():
                t = adjF[image[u]].get(x)
                if t is None:
                    ok = False
                    break
                if v in image:
                    if image[v] != t:
                        ok = False
                        break
                else:
                    image[v] = t
                    q.append(v)
        if ok:
            return True
    return False


@dataclass(frozen=True)
class MalnormalityVerdict:
    malnormal: bool
    witness: Optional[tuple] = None  # (i, j, conjugator, generators of the intersection)
    checked_pairs: int = 0
    notes: tuple = field(default_factory=tuple)


def check_mutual_malnormality(S1, S2, rel: Optional[FreeFactorSystem] = None,
                              self_check: Optional[bool] = None) -> MalnormalityVerdict:
    """All H ∩ x K x⁻¹ trivial for H ∈ S1, K ∈ S2.

    When the two systems are the same (``self_check``), the diagonal case
    ``i == j`` with ``x ∈ H_i`` is allowed, i.e. this is malnormality of S1.
    With ``rel``, intersections conjugate into a factor of ``rel`` are allowed.
    """
    S1, S2 = list(S1), list(S2)
    if self_check is None:
        self_check = [conjugacy_key(c) for c in S1] == [conjugacy_key(c) for c in S2]
    pairs = 0
    for i, H in enumerate(S1):
        for j, K in enumerate(S2):
            pairs += 1
            for item in pullback(H, K):
                if self_check and i == j and item.contains_base:
                    continue
                if rel is not None and any(conjugate_into(item.subgroup, F) for F in rel):
                    continue
                gens = tuple(free_basis(core_graph(item.subgroup)))
                return MalnormalityVerdict(False, (i, j, item.conjugator, gens), pairs)
    return MalnormalityVerdict(True, None, pairs)


def meet_systems(S1, S2) -> FreeFactorSystem:
    """Nontrivial intersections across all component pairs, deduplicated up to conjugacy."""
    found = {}
    rank = 0
    for H in S1:
        rank = rank or H.rank_ambient
        for K in S2:
            for item in pullback(H, K):
                g = core_graph(item.subgroup)
                found.setdefault(conjugacy_key(g), g)
    comps = tuple(found[k] for k in sorted(found))
    return FreeFactorSystem(comps, None, rank)


def verify_free_factorization(factors: Sequence[SubgroupGraph], complement: SubgroupGraph,
                              rank_ambient: int) -> bool:
    """Ranks add up to the ambient rank and the factors with the complement generate F."""
    parts = list(factors) + [complement]
    if sum(p.rank for p in parts) != rank_ambient:
        return False
    gens = [w for p in parts for w in free_basis(p)]
    joined = fold_stallings(gens, rank_ambient)
    return joined.num_vertices == 1 and {x for _, x, _ in joined.edges} == set(range(1, rank_ambient + 1))


# ---------------------------------------------------------------------------
# nonattracting subgraph and path systems

@dataclass(frozen=True)
class PathSystem:
    """Nonattracting subgraph Z (0-based edge indices) plus an optional Nielsen path."""

    graph: MarkedGraph
    z_edges: frozenset
    rho: FreeWord = FreeWord(())
    rho_vertex: int = 0
    stratum: int = -1


def occurrence_reach(f: GraphMap) -> list:
    """reach[e] = edges reachable from edge e in the edge-occurrence digraph."""
    n = f.graph.num_edges
    succ = [{abs(x) - 1 for x in f.edge_images[e]} for e in range(n)]
    out = []
    for e in range(n):
        seen = set()
        todo = list(succ[e])
        while todo:
            u = todo.pop()
            if u not in seen:
                seen.add(u)
                todo.extend(succ[u])
        out.append(seen)
    return out


def nonattracting_subgraph(f: GraphMap, filt: Filtration, s: int,
                           nielsen_length: int = 6, nielsen_period: int = 2) -> PathSystem:
    analysis = analyze_filtration(f, filt)
    if analysis[s].kind != "EG":
        raise SubgroupError(f"stratum {s} is not EG")
    hs = set(filt.strata[s])
    reach = occurrence_reach(f)
    z = set()
    for k, st in enumerate(analysis):
        if k == s or not st.irreducible:
            continue
        if all(not (reach[e] & hs) for e in filt.strata[k]):
            z.update(filt.strata[k])
    rho = FreeWord(())
    rho_vertex = 0
    for n in find_nielsen_paths(f, nielsen_length, nielsen_period):
        if n.indivisible and filt.height(n.path) == s and n.period == 1:
            rho = n.path
            rho_vertex = f.graph.init(rho[0])
            break
    return PathSystem(f.graph, frozenset(z), rho, rho_vertex, s)


def audit_nonattracting(f: GraphMap, ps: PathSystem, filt: Filtration, depth: Optional[int] = None) -> list:
    """Edges of Z whose iterates (up to ``depth``) cross H_s; empty when the digraph answer holds."""
    depth = 2 * f.graph.num_edges if depth is None else depth
    hs = set(filt.strata[ps.stratum])
    bad = []
    for e in sorted(ps.z_edges):
        p = FreeWord((e + 1,))
        for k in range(1, depth + 1):
            p = iterate_path(f, p, 1)
            if any(abs(x) - 1 in hs for x in p):
                bad.append((e, k))
                break
    return bad


def carried_by_path_system(ps: PathSystem, p: Sequence[int], cyclic: bool = False) -> bool:
    """Does ``p`` split into Z-edges and copies of ρ or ρ⁻¹?"""
    p = tuple(p)
    if not p:
        return True
    rho = tuple(ps.rho)
    pieces = [rho, tuple(inverse(rho))] if rho else []
    candidates = [p[i:] + p[:i] for i in range(len(p))] if cyclic else [p]
    for q in candidates:
        n = len(q)
        ok = [False] * (n + 1)
        ok[0] = True
        for i in range(n):
            if not ok[i]:
                continue
            if abs(q[i]) - 1 in ps.z_edges:
                ok[i + 1] = True
            for r in pieces:
                if q[i:i + len(r)] == r:
                    ok[i + len(r)] = True
        if ok[n]:
            return True
    return False


@dataclass(frozen=True)
class CoedgeCount:
    count: int
    multi_edge: bool


def coedge_count(G: MarkedGraph, H: Sequence[int]) -> CoedgeCount:
    """Edges of G outside the subgraph H (0-based edge indices)."""
    H = set(H)
    bad = [e for e in H if not 0 <= e < G.num_edges]
    if bad:
        raise SubgroupError(f"not edges of the graph: {bad}")
    n = G.num_edges - len(H)
    return CoedgeCount(n, n >= 2)
