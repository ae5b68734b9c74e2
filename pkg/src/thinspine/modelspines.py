"""Hand-constructible model spines.

The main export builds the four-football micro-spine: four theta pieces
draped over the 1-skeleton of a cube (the degree-4 cover of the theta graph
H attached to its mod-2 homology), with a bunched stub across each diagonal.
All four circles read the same word, so the result is a complete spine over
that word and exercises every verifier on a small, fully explicit object.
"""

from __future__ import annotations

from .graphs import (
    LabeledGraph,
    cover_from_quotient,
    fiber_product,
    pullback_theta_labels,
    quotient_v4,
    theta_graph,
    theta_over_theta_map,
)
from .spine import Spine, SpineError
from .words import Alphabet, CyclicWord, inverse_word, is_reduced


def cube_move_pattern(base: LabeledGraph):
    """Fiber product data of Theta -> H with the V4 (cube) cover.

    Returns (cube_graph, components) where each component is a dict with the
    three lifted edge paths over the cube, keyed by the Theta edge name.
    """
    theta = pullback_theta_labels(base)
    tmap = theta_over_theta_map(theta, base)
    cube, cmap = cover_from_quotient(base, quotient_v4())
    prod, pproj, qproj = fiber_product(tmap, cmap)
    comps = prod.connected_components()
    out = []
    for comp in comps:
        sub = prod.subgraph(comp)
        entry: dict = {"edges": {}, "vertices": {}}
        for eid in sub.edge_ends:
            tpath = pproj.dart_map[(eid, 1)]
            if len(tpath) != 1:
                raise SpineError("component edge should cover one theta edge")
            tname = tpath[0][0]
            sign = tpath[0][1]
            hpath = qproj.dart_map[(eid, 1)]
            if sign == -1:
                hpath = tuple(cube.reverse(d) for d in reversed(hpath))
            entry["edges"][tname] = hpath
        for v in comp:
            tvert = pproj.vertex_map[v]
            entry["vertices"][tvert] = qproj.vertex_map[v]
        out.append(entry)
    if len(out) != 4:
        raise SpineError(f"expected 4 components, found {len(out)}")
    return cube, out


def cube_spine(
    k: int,
    edge_a: str,
    edge_b: str,
    edge_c: str,
    stub: str,
) -> Spine:
    """The cube-move micro-spine.

    ``edge_a/b/c`` label the base theta graph H (equal lengths; distinct
    first letters and distinct last letters); ``stub`` labels the diagonal
    stub edges. Each of the four circles reads
    alpha stub^-1 beta stub^-1 gamma stub^-1.
    """
    ab = Alphabet(k)

    def enc(text: str) -> bytes:
        return bytes(ab.char_to_letter(c) for c in text)

    la, lb, lc = enc(edge_a), enc(edge_b), enc(edge_c)
    ls = enc(stub)
    base = theta_graph(la, lb, lc)
    cube, comps = cube_move_pattern(base)

    z = LabeledGraph()
    for v in cube.vertices:
        z.add_vertex(("c", v))
    for eid, (src, dst) in cube.edge_ends.items():
        z.add_edge(("c", eid), ("c", src), ("c", dst), cube.edge_label[eid])

    theta = pullback_theta_labels(base)
    word = b""
    for name in ("alpha", "beta", "gamma"):
        word += theta.edge_label[name] + inverse_word(ls)
    if not is_reduced(word):
        raise SpineError("circle word is not reduced; adjust the stub label")
    if word[0] == word[-1] ^ 1:
        raise SpineError("circle word is not cyclically reduced")
    r = CyclicWord(ab, word)

    paths = []
    for i, comp in enumerate(comps):
        u_img = comp["vertices"]["u"]
        v_img = comp["vertices"]["v"]
        stub_id = ("stub", i)
        z.add_edge(stub_id, ("c", u_img), ("c", v_img), ls)
        path = []
        for name in ("alpha", "beta", "gamma"):
            for d in comp["edges"][name]:
                path.append((("c", d[0]), d[1]))
            path.append((stub_id, -1))
        paths.append(path)
    framings = [[0] * len(p) for p in paths]
    return Spine(r, z, paths, framings)
