"""The spine data type and the verifiers certifying its combinatorial
postconditions: degree three, good local models, minimum edge length,
co-orientability, boundary tracing and Euler consistency.

A spine holds the target graph Z, one closed dart path per circle of L, and
one framing bit per traversed dart. The verifiers recompute everything from
this data and never trust how the spine was built.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Hashable, Optional

from .graphs import (
    Dart,
    GraphError,
    LabeledGraph,
    LocalModel,
    fold_check,
    whitehead_model,
)
from .gluing import GluingError, PartialGluing, smooth_degree_two
from .words import Alphabet, CyclicWord, ResourceCapError, inverse_word


class SpineError(ValueError):
    pass


@dataclass
class Spine:
    """A co-oriented degree-3 immersion of circles into a 4-valent graph."""

    word: CyclicWord
    z: LabeledGraph
    paths: list[list[Dart]]
    framings: list[list[int]]

    @property
    def components(self) -> int:
        return len(self.paths)

    def path_word(self, i: int) -> bytes:
        return b"".join(self.z.dart_label(d) for d in self.paths[i])

    def to_json(self) -> str:
        ab = self.word.alphabet
        return json.dumps(
            {
                "schema": "v1",
                "word": str(self.word),
                "k": ab.k,
                "copies": self.components,
                "z": json.loads(self.z.to_json(ab)),
                "f": [
                    [[str(e), s] for (e, s) in path] for path in self.paths
                ],
                "framings": ["".join(str(b) for b in bits) for bits in self.framings],
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "Spine":
        obj = json.loads(text)
        word = CyclicWord.from_str(obj["k"], obj["word"])
        ab = word.alphabet
        z = LabeledGraph()
        for v in obj["z"]["vertices"]:
            z.add_vertex(v)
        for e in obj["z"]["edges"]:
            z.add_edge(
                e["id"],
                e["from"],
                e["to"],
                bytes(ab.char_to_letter(c) for c in e["label"]),
            )
        z.basepoint = obj["z"]["basepoint"]
        paths = [[(e, s) for e, s in path] for path in obj["f"]]
        framings = [[int(b) for b in bits] for bits in obj["framings"]]
        return cls(word, z, paths, framings)


def spine_from_gluing(state: PartialGluing, framings: Optional[dict] = None) -> Spine:
    """Finalize a completely glued state into a Spine.

    ``framings`` maps (circle, item_index) to a bit; missing entries are 0.
    Valence-2 classes are smoothed away first.
    """
    if state.segments:
        raise SpineError(
            f"state still has {len(state.segments)} unglued segments"
        )
    smooth_degree_two(state)
    table = state.audit(require_folded=False)
    names: dict = {}
    for i, root in enumerate(sorted(table.members, key=str)):
        names[root] = f"v{i}"
    z = LabeledGraph()
    for root in table.members:
        z.add_vertex(names[root])
    for u in state.units.values():
        src = names[table.root_of_endpoint((u.uid, "s"))]
        dst = names[table.root_of_endpoint((u.uid, "e"))]
        z.add_edge(u.uid, src, dst, u.label)
    paths: list[list[Dart]] = []
    bits: list[list[int]] = []
    cov = state.coverage()
    for c in range(state.copies):
        path = []
        pbits = []
        for idx, (start, length, kind, ident, d) in enumerate(cov[c]):
            if kind != "u":
                raise SpineError("incomplete coverage after finalization")
            path.append((ident, d))
            pbits.append(0 if framings is None else framings.get((c, idx), 0))
        paths.append(path)
        bits.append(pbits)
    return Spine(state.word, z, paths, bits)


# -- certificates ------------------------------------------------------------


@dataclass
class SpineCertificate:
    min_edge_length: int
    component_count: int
    degree_ok: bool
    models_ok: bool
    coorientation_ok: bool
    folded_ok: bool
    euler: dict
    violations: list = field(default_factory=list)

    @property
    def valid(self) -> bool:
        return (
            self.degree_ok
            and self.models_ok
            and self.coorientation_ok
            and self.folded_ok
            and self.euler.get("consistent", False)
        )

    def to_json(self) -> str:
        return json.dumps(
            {
                "schema": "v1",
                "min_edge_length": self.min_edge_length,
                "component_count": self.component_count,
                "degree_ok": self.degree_ok,
                "models_ok": self.models_ok,
                "coorientation_ok": self.coorientation_ok,
                "folded_ok": self.folded_ok,
                "euler": self.euler,
                "valid": self.valid,
                "violations": [str(v) for v in self.violations],
            }
        )


def _vertex_crossings(s: Spine) -> dict[Hashable, list[tuple]]:
    """Per vertex, the strand crossings (ci, j) -> pairs of out-darts.

    Crossing j of circle ci sits between path darts j and j+1 and pairs the
    out-darts (reverse of dart j, dart j+1).
    """
    out: dict[Hashable, list[tuple]] = {v: [] for v in s.z.vertices}
    for ci, path in enumerate(s.paths):
        m = len(path)
        for j in range(m):
            d_in = path[j]
            d_out = path[(j + 1) % m]
            v = s.z.dart_target(d_in)
            out[v].append(((ci, j), (s.z.reverse(d_in), d_out)))
    return out


def verify_spine(s: Spine, lam: int) -> SpineCertificate:
    """Check, independently of construction: fold, degree 3 on every edge,
    4-valence with good models, minimum edge length, co-orientation."""
    violations = []

    folded_ok, viol = fold_check(s.z)
    if not folded_ok:
        violations.append(("fold", viol))

    # immersion / closedness of every path
    for ci, path in enumerate(s.paths):
        if not path:
            violations.append(("empty-path", ci))
            continue
        m = len(path)
        for j in range(m):
            if s.z.dart_target(path[j]) != s.z.dart_source(path[(j + 1) % m]):
                violations.append(("path-disconnected", ci, j))
            if s.z.reverse(path[j]) == path[(j + 1) % m]:
                violations.append(("path-backtracks", ci, j))

    # degree 3 per edge
    counts = {e: 0 for e in s.z.edge_ends}
    for path in s.paths:
        for (e, _sign) in path:
            counts[e] += 1
    degree_ok = True
    for e, cnt in counts.items():
        if cnt != 3:
            degree_ok = False
            violations.append(("degree", e, cnt))

    # local models
    models_ok = True
    crossings = _vertex_crossings(s)
    for v in s.z.vertices:
        out = s.z.out_darts(v)
        if len(out) != 4:
            models_ok = False
            violations.append(("valence", v, len(out)))
            continue
        pairs = [pair for _strand, pair in crossings[v]]
        if len(pairs) != 6:
            models_ok = False
            violations.append(("strand-count", v, len(pairs)))
            continue
        try:
            model = whitehead_model(pairs)
        except GraphError as exc:
            models_ok = False
            violations.append(("model", v, str(exc)))
            continue
        if not model.is_good:
            models_ok = False
            violations.append(("model", v, model.value))

    min_len = min((len(l) for l in s.z.edge_label.values()), default=0)
    if min_len < lam:
        violations.append(("min-edge-length", min_len, lam))

    if degree_ok and models_ok:
        cocycle = coorientation_cocycle(s)
        coorientation_ok = not any(cocycle)
        if not coorientation_ok:
            violations.append(("coorientation", cocycle))
    else:
        coorientation_ok = False
        violations.append(("coorientation", "skipped: structure invalid"))

    euler = euler_checks(s) if degree_ok and models_ok else {
        "chi_Z": s.z.euler_characteristic(),
        "chi_Mbar": s.z.euler_characteristic() + s.components,
        "chi_boundary": None,
        "consistent": False,
    }
    if not euler["consistent"]:
        violations.append(("euler", euler))

    return SpineCertificate(
        min_edge_length=min_len,
        component_count=s.components,
        degree_ok=degree_ok,
        models_ok=models_ok,
        coorientation_ok=coorientation_ok,
        folded_ok=folded_ok,
        euler=euler,
        violations=violations,
    )


def spine_over_word_check(s: Spine, r: CyclicWord) -> tuple[bool, int]:
    """Every component reads r up to rotation and inversion, and the
    composite map to the rose is an immersion. Returns (ok, components)."""
    target = r.letters
    doubled = target + target
    inv = inverse_word(target)
    inv_doubled = inv + inv
    folded_ok, _ = fold_check(s.z)
    if not folded_ok:
        return False, s.components
    for ci in range(s.components):
        w = s.path_word(ci)
        if len(w) != len(target):
            return False, s.components
        if _find_sub(doubled, w) < 0 and _find_sub(inv_doubled, w) < 0:
            return False, s.components
        path = s.paths[ci]
        m = len(path)
        for j in range(m):
            if s.z.reverse(path[j]) == path[(j + 1) % m]:
                return False, s.components
    return True, s.components


def _find_sub(haystack: bytes, needle: bytes) -> int:
    return bytes(haystack).find(bytes(needle))


# -- co-orientation ----------------------------------------------------------


def _edge_traversals(s: Spine) -> dict[Hashable, list[tuple[int, int]]]:
    out: dict[Hashable, list[tuple[int, int]]] = {e: [] for e in s.z.edge_ends}
    for ci, path in enumerate(s.paths):
        for j, (e, _sign) in enumerate(path):
            out[e].append((ci, j))
    return out


class _WalkTable:
    """Precomputed crossing data for boundary walks."""

    def __init__(self, s: Spine):
        self.s = s
        self.crossings = _vertex_crossings(s)
        self.pair_to_strand: dict = {}
        for v, items in self.crossings.items():
            for strand, pair in items:
                self.pair_to_strand[(v, frozenset(pair))] = strand
        self.traversals = _edge_traversals(s)

    def step(self, trav: tuple[int, int], facing: tuple[int, int]):
        s = self.s
        ci, j = trav
        path = s.paths[ci]
        m = len(path)
        dart = path[j]
        v = s.z.dart_target(dart)
        y_t = path[(j + 1) % m]
        fc, fj = facing
        fpath = s.paths[fc]
        fm = len(fpath)
        fdart = fpath[fj]
        # The facing strand runs over the same edge; its crossing at the
        # edge-end we are exiting is found by comparing directions, which is
        # unambiguous even on loop edges.
        if fdart == dart:
            y_f = fpath[(fj + 1) % fm]
        elif fdart == s.z.reverse(dart):
            y_f = s.z.reverse(fpath[(fj - 1) % fm])
        else:
            raise SpineError("facing strand is not over the same edge")
        nxt = (ci, (j + 1) % m)
        key = (v, frozenset((y_t, y_f)))
        cross = self.pair_to_strand.get(key)
        if cross is None:
            raise SpineError(f"no strand pairs {y_t},{y_f} at {v}")
        # convert the crossing to its traversal over the next edge
        tci, tj = cross
        cpath = self.s.paths[tci]
        cm = len(cpath)
        if cpath[(tj + 1) % cm] == y_t:
            new_facing = (tci, (tj + 1) % cm)
        elif self.s.z.reverse(cpath[tj]) == y_t:
            new_facing = (tci, tj)
        else:
            raise SpineError("pairing strand does not run over the next edge")
        return nxt, new_facing

    def third_traversal(self, edge, t1, t2):
        others = [t for t in self.traversals[edge] if t not in (t1, t2)]
        if len(others) != 1:
            raise SpineError(f"edge {edge} does not carry three strands")
        return others[0]


def _side_walks(s: Spine, use_framings: bool) -> list[list[tuple]]:
    """All boundary side-walks: closed sequences of (traversal, facing)."""
    table = _WalkTable(s)
    visited: set = set()
    walks = []
    for e in sorted(s.z.edge_ends, key=str):
        travs = table.traversals[e]
        for t in travs:
            for f in travs:
                if f == t or (t, f) in visited:
                    continue
                walk = []
                state = (t, f)
                while state not in visited:
                    visited.add(state)
                    walk.append(state)
                    trav, facing = state
                    nxt, newf = table.step(trav, facing)
                    if use_framings:
                        ci, j = nxt
                        if s.framings[ci][j]:
                            newf = table.third_traversal(
                                s.paths[ci][j][0], nxt, newf
                            )
                    state = (nxt, newf)
                if walk:
                    if state != walk[0]:
                        raise SpineError("boundary walk failed to close")
                    walks.append(walk)
    return walks


def intrinsic_holonomy(s: Spine, ci: int) -> int:
    """Z/2 holonomy of the side-tracking rule around circle ci, ignoring
    framing bits: 0 when the combinatorial I-bundle is trivial."""
    table = _WalkTable(s)
    m = len(s.paths[ci])
    start = (ci, 0)
    e0 = s.paths[ci][0][0]
    others = [t for t in table.traversals[e0] if t != start]
    facing0 = others[0]
    state = (start, facing0)
    for _ in range(m):
        trav, facing = table.step(*state)
        state = (trav, facing)
    if state[0] != start:
        raise SpineError("side walk did not return to its start")
    return 0 if state[1] == facing0 else 1


def coorientation_cocycle(s: Spine) -> list[int]:
    """Per-component parity: intrinsic side-tracking holonomy xor the sum of
    the framing bits. Zero vector iff co-orientable."""
    out = []
    for ci in range(s.components):
        h = intrinsic_holonomy(s, ci)
        out.append(h ^ (sum(s.framings[ci]) % 2))
    return out


# -- boundary fatgraphs and Euler checks --------------------------------------


@dataclass
class BoundaryFatgraph:
    """Trivalent fatgraph immersed in Z, one per boundary component."""

    vertices: list          # triangles (v, frozenset of 3 out-darts)
    edges: list             # strips (edge, frozenset of 2 traversals)
    immersion_edges: dict   # strip -> edge of Z
    immersion_vertices: dict  # triangle -> vertex of Z

    @property
    def euler_characteristic(self) -> int:
        return len(self.vertices) - len(self.edges)

    def trivalent(self) -> bool:
        deg = {t: 0 for t in self.vertices}
        for strip in self.edges:
            for t in self._strip_ends[strip]:
                deg[t] += 1
        return all(d == 3 for d in deg.values())

    _strip_ends: dict = field(default_factory=dict)


def _strips_and_triangles(s: Spine):
    """Strips (3 per edge), triangles (4 per vertex), and their incidences."""
    travs = _edge_traversals(s)
    crossings = _vertex_crossings(s)
    pair_of: dict = {}
    for v, items in crossings.items():
        for strand, pair in items:
            pair_of[(v, strand)] = pair

    strips = []
    for e in sorted(s.z.edge_ends, key=str):
        ts = travs[e]
        if len(ts) != 3:
            raise SpineError(f"edge {e} carries {len(ts)} strands, not 3")
        strips.extend((e, frozenset((a, b))) for i, a in enumerate(ts)
                      for b in ts[i + 1:])

    def partner_at(trav: tuple[int, int], v) -> Dart:
        ci, j = trav
        dart = s.paths[ci][j]
        m = len(s.paths[ci])
        if s.z.dart_target(dart) == v:
            return s.paths[ci][(j + 1) % m]
        return s.z.reverse(s.paths[ci][(j - 1) % m])

    strip_ends = {}
    triangle_set = set()
    for strip in strips:
        e, pairset = strip
        t1, t2 = sorted(pairset)
        ends = []
        for v, dart_at_v in (
            (s.z.edge_ends[e][0], (e, 1)),
            (s.z.edge_ends[e][1], (e, -1)),
        ):
            y1 = partner_at(t1, v)
            y2 = partner_at(t2, v)
            tri = (v, frozenset((dart_at_v, y1, y2)))
            triangle_set.add(tri)
            ends.append(tri)
        strip_ends[strip] = tuple(ends)
    return strips, sorted(triangle_set, key=str), strip_ends


def boundary_fatgraphs(s: Spine) -> list[BoundaryFatgraph]:
    """Trace the thickened boundary: per edge three boundary strips, glued
    at each good vertex in the tetrahedral pattern; one trivalent fatgraph
    per boundary component of the (uncapped) thickening."""
    strips, triangles, strip_ends = _strips_and_triangles(s)
    parent: dict = {x: x for x in strips + triangles}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(a, b):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb

    for strip, ends in strip_ends.items():
        for tri in ends:
            union(strip, tri)
    comps: dict = {}
    for x in strips + triangles:
        comps.setdefault(find(x), ([], []))
    for strip in strips:
        comps[find(strip)][1].append(strip)
    for tri in triangles:
        comps[find(tri)][0].append(tri)
    out = []
    for tris, strps in comps.values():
        fg = BoundaryFatgraph(
            vertices=tris,
            edges=strps,
            immersion_edges={strip: strip[0] for strip in strps},
            immersion_vertices={tri: tri[0] for tri in tris},
        )
        fg._strip_ends = {strip: strip_ends[strip] for strip in strps}
        out.append(fg)
    return out


def euler_checks(s: Spine) -> dict:
    """chi of Z, of the capped thickening, and of its boundary surface;
    consistency is the 3-manifold identity chi(boundary) = 2 chi(Mbar)."""
    chi_z = s.z.euler_characteristic()
    chi_mbar = chi_z + s.components
    strips, triangles, _ = _strips_and_triangles(s)
    walks = _side_walks(s, use_framings=True)
    chi_boundary = len(triangles) - len(strips) + len(walks)
    return {
        "chi_Z": chi_z,
        "chi_Mbar": chi_mbar,
        "chi_boundary": chi_boundary,
        "side_walks": len(walks),
        "consistent": chi_boundary == 2 * chi_mbar,
    }


def uniform_edge_count(s: Spine) -> tuple[dict[int, int], bool]:
    """Edge traversal count per component and whether all agree."""
    counts = {ci: len(path) for ci, path in enumerate(s.paths)}
    values = set(counts.values())
    return counts, len(values) <= 1


# -- annulus lifting -----------------------------------------------------------


def annulus_lift_check(s: Spine, gamma: list[Dart], strand_pair: tuple):
    """Propagate two local boundary components along an immersed loop.

    ``strand_pair`` names two of the three boundary strips over gamma's
    first edge, as pairs of traversals sharing exactly one strand. The
    shared strand is the unique local lift compatible with both strips; it
    is propagated across every vertex and edge of gamma. On success the
    returned lift is re-verified against L by explicit path equality.
    """
    if not gamma:
        raise SpineError("gamma must be nonempty")
    m = len(gamma)
    for j in range(m):
        if s.z.dart_target(gamma[j]) != s.z.dart_source(gamma[(j + 1) % m]):
            raise SpineError("gamma is not a closed path")
        if s.z.reverse(gamma[j]) == gamma[(j + 1) % m]:
            raise SpineError("gamma is not immersed")
    travs = _edge_traversals(s)
    strip1, strip2 = (frozenset(p) for p in strand_pair)
    e0 = gamma[0][0]
    over_e0 = set(travs[e0])
    if not (strip1 <= over_e0 and strip2 <= over_e0):
        raise SpineError("strips must lie over gamma's first edge")
    shared = strip1 & strip2
    if len(shared) != 1 or strip1 == strip2:
        raise SpineError("strips must be distinct and share one strand")
    start = next(iter(shared))

    cur = start
    lift = []
    for step, dart in enumerate(gamma):
        ci, j = cur
        path = s.paths[ci]
        mm = len(path)
        if path[j] == dart:
            nxt = (ci, (j + 1) % mm)
        elif path[j] == s.z.reverse(dart):
            nxt = (ci, (j - 1) % mm)
        else:
            return {"status": "obstructed", "at": step}
        lift.append(cur)
        # the continuation must track gamma's next edge
        nd = gamma[(step + 1) % m]
        if s.paths[nxt[0]][nxt[1]] not in (nd, s.z.reverse(nd)):
            return {"status": "obstructed", "at": step}
        cur = nxt
    if cur != start:
        return {"status": "obstructed", "at": "holonomy"}
    # self-oracle: the lift must be an actual subpath of its circle reading
    # gamma's edges in order
    for step, (ci, j) in enumerate(lift):
        if s.paths[ci][j] not in (gamma[step], s.z.reverse(gamma[step])):
            return {"status": "obstructed", "at": "verification"}
    return {"status": "forced_lift", "lift": lift, "component": lift[0][0]}


# -- immersed path enumeration --------------------------------------------------


def immersed_paths(
    z: LabeledGraph,
    ell: int,
    max_count: int = 2_000_000,
):
    """Label words of immersed paths of length ell (in letters), with exact
    count. Paths are tracked edge-by-edge with offsets at the two ends."""
    if ell < 1:
        raise SpineError("ell must be >= 1")
    words: set[bytes] = set()
    count = 0
    darts = sorted(z.darts(), key=str)
    for start_dart in darts:
        lab = z.dart_label(start_dart)
        for offset in range(len(lab)):
            stack = [(start_dart, lab[offset:], b"")]
            while stack:
                dart, avail, acc = stack.pop()
                take = min(len(avail), ell - len(acc))
                acc2 = acc + avail[:take]
                if len(acc2) == ell:
                    count += 1
                    if count > max_count:
                        raise ResourceCapError(
                            f"immersed path count exceeds {max_count}"
                        )
                    words.add(acc2)
                    continue
                v = z.dart_target(dart)
                for nxt in z.out_darts(v):
                    if nxt == z.reverse(dart):
                        continue
                    stack.append((nxt, z.dart_label(nxt), acc2))
    return words, count
