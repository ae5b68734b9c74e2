"""Folded word-labeled graphs, graph maps, local vertex models, piece
classification, finite covers of the theta graph, and fiber products.

Oriented edges are darts ``(edge_id, +1)`` / ``(edge_id, -1)``. Every edge
carries a nonempty reduced word; the reverse dart reads the inverse word.
Graphs are kept at word granularity (edges are long); letter granularity is
recovered by explicit subdivision when maps need it.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Hashable, Iterable, Optional, Sequence

from .words import inverse_word, is_reduced

Dart = tuple[Hashable, int]


class GraphError(ValueError):
    pass


@dataclass
class LabeledGraph:
    """Graph with reduced-word labels on oriented edges."""

    vertices: set = field(default_factory=set)
    edge_ends: dict = field(default_factory=dict)   # eid -> (src, dst)
    edge_label: dict = field(default_factory=dict)  # eid -> bytes
    basepoint: Optional[Hashable] = None

    def add_vertex(self, v: Hashable) -> Hashable:
        self.vertices.add(v)
        return v

    def add_edge(self, eid: Hashable, src: Hashable, dst: Hashable, label: bytes):
        if eid in self.edge_ends:
            raise GraphError(f"duplicate edge id {eid!r}")
        if len(label) == 0:
            raise GraphError("edge labels must be nonempty")
        if not is_reduced(label):
            raise GraphError("edge labels must be reduced")
        self.vertices.add(src)
        self.vertices.add(dst)
        self.edge_ends[eid] = (src, dst)
        self.edge_label[eid] = bytes(label)

    # -- darts ------------------------------------------------------------

    def darts(self) -> Iterable[Dart]:
        for eid in self.edge_ends:
            yield (eid, 1)
            yield (eid, -1)

    @staticmethod
    def reverse(dart: Dart) -> Dart:
        return (dart[0], -dart[1])

    def dart_source(self, dart: Dart) -> Hashable:
        src, dst = self.edge_ends[dart[0]]
        return src if dart[1] == 1 else dst

    def dart_target(self, dart: Dart) -> Hashable:
        src, dst = self.edge_ends[dart[0]]
        return dst if dart[1] == 1 else src

    def dart_label(self, dart: Dart) -> bytes:
        lab = self.edge_label[dart[0]]
        return lab if dart[1] == 1 else inverse_word(lab)

    def out_darts(self, v: Hashable) -> list[Dart]:
        out = []
        for eid, (src, dst) in self.edge_ends.items():
            if src == v:
                out.append((eid, 1))
            if dst == v:
                out.append((eid, -1))
        return out

    def degree(self, v: Hashable) -> int:
        return len(self.out_darts(v))

    def total_length(self) -> int:
        return sum(len(lab) for lab in self.edge_label.values())

    def euler_characteristic(self) -> int:
        return len(self.vertices) - len(self.edge_ends)

    def connected_components(self) -> list[set]:
        seen: set = set()
        comps = []
        adj: dict = {v: set() for v in self.vertices}
        for src, dst in self.edge_ends.values():
            adj[src].add(dst)
            adj[dst].add(src)
        for v in self.vertices:
            if v in seen:
                continue
            comp = {v}
            stack = [v]
            seen.add(v)
            while stack:
                u = stack.pop()
                for w in adj[u]:
                    if w not in seen:
                        seen.add(w)
                        comp.add(w)
                        stack.append(w)
            comps.append(comp)
        return comps

    def subgraph(self, verts: set) -> "LabeledGraph":
        g = LabeledGraph()
        for v in verts:
            g.add_vertex(v)
        for eid, (src, dst) in self.edge_ends.items():
            if src in verts and dst in verts:
                g.add_edge(eid, src, dst, self.edge_label[eid])
        return g

    # -- serialization ----------------------------------------------------

    def to_json(self, alphabet=None) -> str:
        def enc(word: bytes) -> str:
            if alphabet is not None:
                return "".join(alphabet.letter_to_char(l) for l in word)
            return ",".join(str(l) for l in word)

        obj = {
            "schema": "v1",
            "vertices": sorted(str(v) for v in self.vertices),
            "edges": sorted(
                (
                    {
                        "id": str(eid),
                        "from": str(self.edge_ends[eid][0]),
                        "to": str(self.edge_ends[eid][1]),
                        "label": enc(self.edge_label[eid]),
                    }
                    for eid in self.edge_ends
                ),
                key=lambda e: e["id"],
            ),
            "basepoint": None if self.basepoint is None else str(self.basepoint),
        }
        return json.dumps(obj, sort_keys=True)


def fold_check(g: LabeledGraph):
    """True iff no vertex has two outgoing darts starting with the same
    letter; on failure also returns (vertex, dart, dart)."""
    for v in g.vertices:
        seen: dict[int, Dart] = {}
        for d in g.out_darts(v):
            first = g.dart_label(d)[0]
            if first in seen:
                return False, (v, seen[first], d)
            seen[first] = d
    return True, None


# -- piece classification --------------------------------------------------


class PieceKind(Enum):
    FOOTBALL = "football"
    BIZENE = "bizene"
    BICROWN = "bicrown"
    OTHER = "other"


def _edge_multiset(g: LabeledGraph, order: dict) -> tuple:
    pairs = []
    for src, dst in g.edge_ends.values():
        a, b = order[src], order[dst]
        pairs.append((a, b) if a <= b else (b, a))
    return tuple(sorted(pairs))


_FOOTBALL_REF = tuple(sorted([(0, 1)] * 3))
# square 0-1-2-3 with the two non-adjacent sides 0-1 and 2-3 doubled
_BIZENE_REF = tuple(sorted([(0, 1), (0, 1), (1, 2), (2, 3), (2, 3), (0, 3)]))
_BICROWN_REF = tuple(sorted((a, b) for a in (0, 1, 2) for b in (3, 4, 5)))


def _isomorphic_to(g: LabeledGraph, ref: tuple, nverts: int) -> bool:
    verts = sorted(g.vertices, key=str)
    if len(verts) != nverts:
        return False
    for perm in itertools.permutations(range(nverts)):
        order = {v: perm[i] for i, v in enumerate(verts)}
        if _edge_multiset(g, order) == ref:
            return True
    return False


def classify_piece(g: LabeledGraph) -> PieceKind:
    """Combinatorial isomorphism type of a small connected graph, ignoring
    labels: theta, doubled-square, K_{3,3}, or other."""
    if len(g.connected_components()) != 1:
        raise GraphError("piece classification expects a connected graph")
    ne = len(g.edge_ends)
    nv = len(g.vertices)
    if (nv, ne) == (2, 3) and _isomorphic_to(g, _FOOTBALL_REF, 2):
        return PieceKind.FOOTBALL
    if (nv, ne) == (4, 6) and _isomorphic_to(g, _BIZENE_REF, 4):
        return PieceKind.BIZENE
    if (nv, ne) == (6, 9) and _isomorphic_to(g, _BICROWN_REF, 6):
        return PieceKind.BICROWN
    return PieceKind.OTHER


def covering_type_check(piece: LabeledGraph, football: LabeledGraph) -> bool:
    """True iff the labels on a bizene or bicrown are pulled back from the
    football along a 2- or 3-fold covering map."""
    kind = classify_piece(piece)
    if kind not in (PieceKind.BIZENE, PieceKind.BICROWN):
        raise GraphError("piece must be a bizene or a bicrown")
    if classify_piece(football) is not PieceKind.FOOTBALL:
        raise GraphError("target must be a football (theta graph)")
    fverts = sorted(football.vertices, key=str)
    pverts = sorted(piece.vertices, key=str)
    pedges = sorted(piece.edge_ends, key=str)

    def try_assignment(vmap: dict) -> bool:
        def extend(i: int, emap: dict) -> bool:
            if i == len(pedges):
                # covering condition: dart map bijective at every vertex
                for pv in pverts:
                    images = []
                    for d in piece.out_darts(pv):
                        fe, sign = emap[d[0]]
                        images.append((fe, sign * d[1]))
                    target = football.out_darts(vmap[pv])
                    if sorted(map(str, images)) != sorted(map(str, target)):
                        return False
                return True
            eid = pedges[i]
            src, dst = piece.edge_ends[eid]
            lab = piece.edge_label[eid]
            for fe, (fsrc, fdst) in football.edge_ends.items():
                flab = football.edge_label[fe]
                if vmap[src] == fsrc and vmap[dst] == fdst and lab == flab:
                    emap[eid] = (fe, 1)
                    if extend(i + 1, emap):
                        return True
                    del emap[eid]
                if vmap[src] == fdst and vmap[dst] == fsrc and lab == inverse_word(flab):
                    emap[eid] = (fe, -1)
                    if extend(i + 1, emap):
                        return True
                    del emap[eid]
            return False

        return extend(0, {})

    for assignment in itertools.product(fverts, repeat=len(pverts)):
        vmap = dict(zip(pverts, assignment))
        if try_assignment(vmap):
            return True
    return False


# -- Whitehead local models -------------------------------------------------


class LocalModel(Enum):
    GOOD = "good"
    TYPE_A = "type_a"   # two pairs, each traversed three times
    TYPE_B = "type_b"   # one pair doubled, its opposite doubled, two singles

    @property
    def is_good(self) -> bool:
        return self is LocalModel.GOOD


def whitehead_model(strands: Sequence[tuple]) -> LocalModel:
    """Classify the pattern of six strand pairs over a 4-valent vertex.

    Each strand joins two distinct incident edges; every edge must be hit
    exactly three times. Good means all six unordered pairs occur once.
    The two non-good models are named by their multiplicity patterns
    ({3,3} and {2,2,1,1}); this fixes a convention, not the figure order.
    """
    if len(strands) != 6:
        raise GraphError(f"expected 6 strands, got {len(strands)}")
    edges = sorted({e for pair in strands for e in pair}, key=str)
    if len(edges) != 4:
        raise GraphError("strands must involve exactly 4 edges")
    counts: dict[frozenset, int] = {}
    degree: dict = {e: 0 for e in edges}
    for pair in strands:
        a, b = pair
        if a == b:
            raise GraphError("a strand may not return into the same edge")
        counts[frozenset((a, b))] = counts.get(frozenset((a, b)), 0) + 1
        degree[a] += 1
        degree[b] += 1
    bad = [e for e, dg in degree.items() if dg != 3]
    if bad:
        raise GraphError(f"edges {bad} not traversed exactly three times")
    mults = sorted(counts.values(), reverse=True)
    if mults == [1, 1, 1, 1, 1, 1]:
        return LocalModel.GOOD
    if mults == [3, 3]:
        return LocalModel.TYPE_A
    if mults == [2, 2, 1, 1]:
        return LocalModel.TYPE_B
    raise GraphError(f"impossible multiplicity pattern {mults}")


# -- theta graphs and finite covers ------------------------------------------

THETA_U = "u"
THETA_V = "v"


def theta_graph(label_a: bytes, label_b: bytes, label_c: bytes,
                names: tuple = ("a", "b", "c")) -> LabeledGraph:
    """Theta graph: two vertices joined by three like-oriented edges."""
    g = LabeledGraph()
    g.add_vertex(THETA_U)
    g.add_vertex(THETA_V)
    for name, lab in zip(names, (label_a, label_b, label_c)):
        g.add_edge(name, THETA_U, THETA_V, lab)
    g.basepoint = THETA_U
    return g


@dataclass(frozen=True)
class DihedralElement:
    """Element (r, s) of the dihedral group of order 2n; s flips."""

    n: int
    r: int
    s: int

    def __mul__(self, other: "DihedralElement") -> "DihedralElement":
        if self.n != other.n:
            raise GraphError("mixing dihedral groups")
        r = (self.r + (other.r if self.s == 0 else -other.r)) % self.n
        return DihedralElement(self.n, r, (self.s + other.s) % 2)

    def inverse(self) -> "DihedralElement":
        if self.s == 0:
            return DihedralElement(self.n, (-self.r) % self.n, 0)
        return DihedralElement(self.n, self.r, 1)


def dihedral_elements(n: int) -> list[DihedralElement]:
    return [DihedralElement(n, r, s) for s in (0, 1) for r in range(n)]


@dataclass(frozen=True)
class FiniteQuotient:
    """Quotient of pi_1 of the theta graph H onto V, D8 or D12.

    pi_1(H) is free on d = a c^-1 and e = b c^-1; the quotient is given by
    the images of d and e, which must generate the target group.
    """

    name: str            # "V4" | "D8" | "D12"
    image_d: DihedralElement
    image_e: DihedralElement

    @property
    def order(self) -> int:
        return 2 * self.image_d.n

    def __post_init__(self) -> None:
        expected_n = {"V4": 2, "D8": 4, "D12": 6}.get(self.name)
        if expected_n is None:
            raise GraphError(f"unknown quotient target {self.name!r}")
        if self.image_d.n != expected_n or self.image_e.n != expected_n:
            raise GraphError("images live in the wrong dihedral group")
        gen: set = {DihedralElement(expected_n, 0, 0)}
        frontier = [DihedralElement(expected_n, 0, 0)]
        while frontier:
            g = frontier.pop()
            for h in (self.image_d, self.image_e):
                for x in (g * h, g * h.inverse()):
                    if x not in gen:
                        gen.add(x)
                        frontier.append(x)
        if len(gen) != self.order:
            raise GraphError("images do not generate the target group")


def quotient_v4() -> FiniteQuotient:
    return FiniteQuotient("V4", DihedralElement(2, 1, 0), DihedralElement(2, 0, 1))


def quotient_d8() -> FiniteQuotient:
    return FiniteQuotient("D8", DihedralElement(4, 1, 0), DihedralElement(4, 0, 1))


def quotient_d12() -> FiniteQuotient:
    return FiniteQuotient("D12", DihedralElement(6, 0, 1), DihedralElement(6, 1, 0))


@dataclass
class GraphMap:
    """Label-preserving graph map; each dart maps to a dart path."""

    domain: LabeledGraph
    codomain: LabeledGraph
    vertex_map: dict
    dart_map: dict  # forward dart -> tuple of codomain darts

    def image_path(self, dart: Dart) -> tuple:
        if dart[1] == 1:
            return self.dart_map[dart]
        path = self.dart_map[(dart[0], 1)]
        return tuple(self.codomain.reverse(d) for d in reversed(path))

    def validate(self) -> None:
        for eid, (src, dst) in self.domain.edge_ends.items():
            path = self.dart_map[(eid, 1)]
            if not path:
                raise GraphError(f"edge {eid!r} maps to an empty path")
            if self.codomain.dart_source(path[0]) != self.vertex_map[src]:
                raise GraphError(f"edge {eid!r}: path does not start at image")
            for d1, d2 in zip(path, path[1:]):
                if self.codomain.dart_target(d1) != self.codomain.dart_source(d2):
                    raise GraphError(f"edge {eid!r}: image path disconnected")
                if self.codomain.reverse(d1) == d2:
                    raise GraphError(f"edge {eid!r}: image path backtracks")
            if self.codomain.dart_target(path[-1]) != self.vertex_map[dst]:
                raise GraphError(f"edge {eid!r}: path does not end at image")
            word = b"".join(self.codomain.dart_label(d) for d in path)
            if word != self.domain.edge_label[eid]:
                raise GraphError(f"edge {eid!r}: labels not preserved")

    def is_immersion(self) -> bool:
        for v in self.domain.vertices:
            first = [self.image_path(d)[0] for d in self.domain.out_darts(v)]
            if len(set(first)) != len(first):
                return False
        return True


def identity_map(g: LabeledGraph) -> GraphMap:
    return GraphMap(
        domain=g,
        codomain=g,
        vertex_map={v: v for v in g.vertices},
        dart_map={(e, 1): ((e, 1),) for e in g.edge_ends},
    )


def theta_over_theta_map(theta: LabeledGraph, base: LabeledGraph) -> GraphMap:
    """The standard immersion of one theta over another:
    alpha -> a b^-1 c, beta -> b c^-1 a, gamma -> c a^-1 b.

    ``theta`` must carry the pulled-back labels (see
    :func:`pullback_theta_labels`).
    """
    names = sorted(base.edge_ends, key=str)
    a, b, c = names
    tnames = sorted(theta.edge_ends, key=str)
    al, be, ga = tnames
    dart_map = {
        (al, 1): ((a, 1), (b, -1), (c, 1)),
        (be, 1): ((b, 1), (c, -1), (a, 1)),
        (ga, 1): ((c, 1), (a, -1), (b, 1)),
    }
    m = GraphMap(
        domain=theta,
        codomain=base,
        vertex_map={THETA_U: THETA_U, THETA_V: THETA_V},
        dart_map=dart_map,
    )
    m.validate()
    return m


def pullback_theta_labels(base: LabeledGraph,
                          names: tuple = ("alpha", "beta", "gamma")) -> LabeledGraph:
    """Theta graph whose edges read a b^-1 c, b c^-1 a, c a^-1 b over the
    labels of ``base``; raises if the concatenations are not reduced."""
    ns = sorted(base.edge_ends, key=str)
    la, lb, lc = (base.edge_label[x] for x in ns)
    words = (
        la + inverse_word(lb) + lc,
        lb + inverse_word(lc) + la,
        lc + inverse_word(la) + lb,
    )
    for w in words:
        if not is_reduced(w):
            raise GraphError("pulled-back labels are not reduced")
    return theta_graph(*words, names=names)


def cover_from_quotient(base: LabeledGraph, q: FiniteQuotient):
    """Regular cover of the theta graph H attached to ker(q).

    Vertices are (u|v, g); the c-edges lift horizontally, the a- and b-edges
    lift by right multiplication by q(d), q(e). Returns the cover and the
    covering map; the deck group acts by left multiplication.
    """
    if classify_piece(base) is not PieceKind.FOOTBALL:
        raise GraphError("base must be a theta graph")
    names = sorted(base.edge_ends, key=str)
    a, b, c = names
    for name in names:
        src, dst = base.edge_ends[name]
        if (src, dst) != (THETA_U, THETA_V):
            raise GraphError("base theta must have all edges oriented u -> v")
    elements = dihedral_elements(q.image_d.n)
    cover = LabeledGraph()
    for g in elements:
        cover.add_vertex((THETA_U, g))
        cover.add_vertex((THETA_V, g))
    vmap = {}
    dmap = {}
    for g in elements:
        vmap[(THETA_U, g)] = THETA_U
        vmap[(THETA_V, g)] = THETA_V
        targets = {a: g * q.image_d, b: g * q.image_e, c: g}
        for name in names:
            eid = (name, g)
            cover.add_edge(eid, (THETA_U, g), (THETA_V, targets[name]),
                           base.edge_label[name])
            dmap[(eid, 1)] = ((name, 1),)
    cover.basepoint = (THETA_U, DihedralElement(q.image_d.n, 0, 0))
    cmap = GraphMap(domain=cover, codomain=base, vertex_map=vmap, dart_map=dmap)
    cmap.validate()
    return cover, cmap


# -- subdivision and fiber products ------------------------------------------


def _subdivide_to_edge_level(m: GraphMap):
    """Subdivide the domain so every dart maps to a single codomain dart.

    Returns (new_map, artificial_vertices).
    """
    dom = m.domain
    new = LabeledGraph()
    for v in dom.vertices:
        new.add_vertex(v)
    new.basepoint = dom.basepoint
    artificial: set = set()
    vmap = dict(m.vertex_map)
    dmap = {}
    for eid, (src, dst) in dom.edge_ends.items():
        path = m.dart_map[(eid, 1)]
        if len(path) == 1:
            new.add_edge(eid, src, dst, dom.edge_label[eid])
            dmap[(eid, 1)] = path
            continue
        prev = src
        for i, d in enumerate(path):
            nxt = dst if i == len(path) - 1 else ("sub", eid, i)
            if i < len(path) - 1:
                new.add_vertex(nxt)
                artificial.add(nxt)
                vmap[nxt] = m.codomain.dart_target(d)
            new.add_edge(("sub", eid, i, "e"), prev, nxt, m.codomain.dart_label(d))
            dmap[(("sub", eid, i, "e"), 1)] = (d,)
            prev = nxt
    sub = GraphMap(domain=new, codomain=m.codomain, vertex_map=vmap, dart_map=dmap)
    return sub, artificial


def fiber_product(p: GraphMap, q: GraphMap):
    """Fiber product of two immersions with a common codomain.

    Returns (product_graph, projection_to_p_domain, projection_to_q_domain).
    Chains through subdivision points are smoothed away, so the projections
    are dart-path maps on whole edges of the original domains.
    """
    if p.codomain is not q.codomain and p.codomain.to_json() != q.codomain.to_json():
        raise GraphError("maps must share a codomain")
    if not p.is_immersion() or not q.is_immersion():
        raise GraphError("fiber products are taken over immersions")
    sp, art_p = _subdivide_to_edge_level(p)
    sq, art_q = _subdivide_to_edge_level(q)

    prod = LabeledGraph()
    for x in sp.domain.vertices:
        for y in sq.domain.vertices:
            if sp.vertex_map[x] == sq.vertex_map[y]:
                prod.add_vertex((x, y))
    pproj_dart: dict = {}
    qproj_dart: dict = {}
    for e1, (s1, d1) in sp.domain.edge_ends.items():
        f1 = sp.dart_map[(e1, 1)][0]
        for e2, (s2, d2) in sq.domain.edge_ends.items():
            f2 = sq.dart_map[(e2, 1)][0]
            if f2 == f1:
                eid = ((e1, 1), (e2, 1))
                prod.add_edge(eid, (s1, s2), (d1, d2), sp.domain.edge_label[e1])
                pproj_dart[(eid, 1)] = (e1, 1)
                qproj_dart[(eid, 1)] = (e2, 1)
            elif f2 == sp.codomain.reverse(f1):
                eid = ((e1, 1), (e2, -1))
                prod.add_edge(eid, (s1, d2), (d1, s2), sp.domain.edge_label[e1])
                pproj_dart[(eid, 1)] = (e1, 1)
                qproj_dart[(eid, 1)] = (e2, -1)

    smooth, chains = _smooth_artificial(prod, art_p, art_q)

    def chain_path(chain: list[Dart], proj: dict, reverse) -> tuple:
        out = []
        for d in chain:
            base = proj[(d[0], 1)]
            out.append(base if d[1] == 1 else reverse(base))
        return tuple(out)

    pproj_map = {}
    qproj_map = {}
    for eid in smooth.edge_ends:
        chain = chains[eid]
        ppath = chain_path(chain, pproj_dart, sp.domain.reverse)
        qpath = chain_path(chain, qproj_dart, sq.domain.reverse)
        pproj_map[(eid, 1)] = _collapse_subdivided(ppath)
        qproj_map[(eid, 1)] = _collapse_subdivided(qpath)

    pvmap = {}
    qvmap = {}
    for v in smooth.vertices:
        x, y = v
        pvmap[v] = x
        qvmap[v] = y
    pmap = GraphMap(domain=smooth, codomain=p.domain, vertex_map=pvmap,
                    dart_map=pproj_map)
    qmap = GraphMap(domain=smooth, codomain=q.domain, vertex_map=qvmap,
                    dart_map=qproj_map)
    pmap.validate()
    qmap.validate()
    return smooth, pmap, qmap


def _collapse_subdivided(path: tuple) -> tuple:
    """Merge runs of subdivided darts back into whole-edge darts."""
    out: list[Dart] = []
    i = 0
    while i < len(path):
        eid, sign = path[i]
        if isinstance(eid, tuple) and len(eid) == 4 and eid[0] == "sub":
            orig_eid = eid[1]
            j = i
            while (
                j < len(path)
                and isinstance(path[j][0], tuple)
                and len(path[j][0]) == 4
                and path[j][0][0] == "sub"
                and path[j][0][1] == orig_eid
                and path[j][1] == sign
            ):
                j += 1
            out.append((orig_eid, sign))
            i = j
        else:
            out.append((eid, sign))
            i += 1
    return tuple(out)


def _smooth_artificial(prod: LabeledGraph, art_p: set, art_q: set):
    """Remove degree-2 vertices coming from subdivision points by merging
    their incident edges; returns the smoothed graph and, per new edge, the
    chain of product darts it replaces."""

    def is_artificial(v) -> bool:
        x, y = v
        return x in art_p or y in art_q

    mergeable = {
        v for v in prod.vertices if is_artificial(v) and prod.degree(v) == 2
    }
    out = LabeledGraph()
    for v in prod.vertices:
        if v not in mergeable:
            out.add_vertex(v)
    chains: dict = {}
    used: set = set()
    counter = itertools.count()
    for eid in sorted(prod.edge_ends, key=str):
        for sign in (1, -1):
            d = (eid, sign)
            if eid in used:
                continue
            src = prod.dart_source(d)
            if src in mergeable:
                continue
            # walk forward through mergeable vertices
            chain = [d]
            used.add(eid)
            cur = d
            while prod.dart_target(cur) in mergeable:
                v = prod.dart_target(cur)
                nxt = [x for x in prod.out_darts(v) if x != prod.reverse(cur)]
                cur = nxt[0]
                chain.append(cur)
                used.add(cur[0])
            label = b"".join(prod.dart_label(x) for x in chain)
            new_eid = ("m", next(counter))
            out.add_edge(new_eid, src, prod.dart_target(cur), label)
            chains[new_eid] = chain
            break
    # isolated artificial circles (no real vertex) are kept intact
    for eid in sorted(prod.edge_ends, key=str):
        if eid not in used:
            src, dst = prod.edge_ends[eid]
            for v in (src, dst):
                if v not in out.vertices:
                    out.add_vertex(v)
            out.add_edge(eid, src, dst, prod.edge_label[eid])
            chains[eid] = [(eid, 1)]
            used.add(eid)
    return out, chains


def graphs_isomorphic(g1: LabeledGraph, g2: LabeledGraph) -> bool:
    """Unlabeled multigraph isomorphism by backtracking; intended for the
    small graphs arising from covers and fiber products."""
    v1 = sorted(g1.vertices, key=str)
    v2 = sorted(g2.vertices, key=str)
    if len(v1) != len(v2) or len(g1.edge_ends) != len(g2.edge_ends):
        return False

    def neighbor_multiset(g, v):
        out = []
        for eid, (s, d) in g.edge_ends.items():
            if s == v:
                out.append(d)
            if d == v:
                out.append(s)
        return out

    deg1 = {v: len(neighbor_multiset(g1, v)) for v in v1}
    deg2 = {v: len(neighbor_multiset(g2, v)) for v in v2}
    if sorted(deg1.values()) != sorted(deg2.values()):
        return False

    adj1: dict = {}
    for eid, (s, d) in g1.edge_ends.items():
        adj1.setdefault(s, []).append(d)
        adj1.setdefault(d, []).append(s)
    adj2: dict = {}
    for eid, (s, d) in g2.edge_ends.items():
        adj2.setdefault(s, []).append(d)
        adj2.setdefault(d, []).append(s)

    order = sorted(v1, key=lambda v: -deg1[v])
    mapping: dict = {}
    used: set = set()

    def count_pairs(adj, a, b):
        return sum(1 for x in adj.get(a, []) if x == b)

    def backtrack(i: int) -> bool:
        if i == len(order):
            return True
        a = order[i]
        for b in v2:
            if b in used or deg2[b] != deg1[a]:
                continue
            ok = True
            for prev in mapping:
                if count_pairs(adj1, a, prev) != count_pairs(adj2, b, mapping[prev]):
                    ok = False
                    break
            if ok:
                mapping[a] = b
                used.add(b)
                if backtrack(i + 1):
                    return True
                del mapping[a]
                used.remove(b)
        return False

    return backtrack(0)
