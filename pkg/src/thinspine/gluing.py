"""Partial gluing state: labeled circles, identified triples, and the
unglued inventory.

Every circle is a copy of the same cyclic word. Material is partitioned
into *units* (a glued edge: exactly three identified strands reading a
common label) and unglued *segments*. The quotient graph of the current
state is derived, never stored: vertex classes arise from positions shared
between unit endpoints, which keeps every move auditable.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, Optional

from .words import CyclicWord, inverse_word


class GluingError(ValueError):
    pass


@dataclass(frozen=True)
class Strand:
    """Occupied cyclic interval [start, start+length) on one circle.

    dir=+1 means the unit label equals the circle segment; dir=-1 means the
    label is the inverse word of the segment.
    """

    circle: int
    start: int
    length: int
    dir: int = 1

    def letter_indices(self, n: int) -> Iterable[int]:
        for i in range(self.length):
            yield (self.start + i) % n


@dataclass(frozen=True)
class Unit:
    """A glued edge of the quotient: three strands reading one label."""

    uid: int
    label: bytes
    strands: tuple[Strand, ...]
    kind: str = "glued"

    def __post_init__(self):
        if len(self.strands) != 3:
            raise GluingError("a unit identifies exactly three strands")


@dataclass(frozen=True)
class Segment:
    """An unglued piece of some circle."""

    sid: int
    circle: int
    start: int
    length: int
    role: str = "arc"


# endpoint node of a unit: ("s" = label start, "e" = label end)
EndNode = tuple[int, str]


def strand_start_position(s: Strand) -> tuple[int, int]:
    """Circle position where the unit label begins along this strand."""
    return (s.circle, s.start if s.dir == 1 else s.start + s.length)


def strand_end_position(s: Strand) -> tuple[int, int]:
    return (s.circle, s.start + s.length if s.dir == 1 else s.start)


class PartialGluing:
    """Mutable gluing state over ``copies`` circles labeled by ``word``."""

    def __init__(self, word: CyclicWord, copies: int = 1):
        self.word = word
        self.copies = copies
        self.units: dict[int, Unit] = {}
        self.segments: dict[int, Segment] = {}
        self._next_uid = 0
        self._next_sid = 0
        for c in range(copies):
            self._add_segment(c, 0, len(word), "arc")

    # -- low-level bookkeeping ---------------------------------------------

    @property
    def n(self) -> int:
        return len(self.word)

    def _add_segment(self, circle: int, start: int, length: int, role: str) -> int:
        sid = self._next_sid
        self._next_sid += 1
        self.segments[sid] = Segment(sid, circle, start % self.n, length, role)
        return sid

    def add_segment(self, circle: int, start: int, length: int, role: str) -> int:
        return self._add_segment(circle, start, length, role)

    def add_unit(self, label: bytes, strands: Iterable[Strand], kind: str = "glued") -> int:
        strands = tuple(strands)
        for s in strands:
            seg = self.word.segment(s.start, s.length)
            got = seg if s.dir == 1 else inverse_word(seg)
            if got != label:
                raise GluingError(
                    f"strand {s} reads {got!r}, unit label is {label!r}"
                )
        uid = self._next_uid
        self._next_uid += 1
        self.units[uid] = Unit(uid, bytes(label), strands, kind)
        return uid

    def remove_unit(self, uid: int) -> Unit:
        return self.units.pop(uid)

    def remove_segment(self, sid: int) -> Segment:
        return self.segments.pop(sid)

    def segment_word(self, sid: int) -> bytes:
        seg = self.segments[sid]
        return self.word.segment(seg.start, seg.length)

    def duplicate(self, factor: int) -> dict:
        """Replace the state by ``factor`` disjoint copies of itself.

        Existing circles keep their indices; copy j of circle c becomes
        circle c + j*copies. Returns maps from old unit/segment ids to the
        per-copy lists of new ids (copy 0 keeps the old ids).
        """
        base = self.copies
        unit_map = {uid: [uid] for uid in self.units}
        seg_map = {sid: [sid] for sid in self.segments}
        old_units = list(self.units.values())
        old_segs = list(self.segments.values())
        for j in range(1, factor):
            off = j * base
            for u in old_units:
                strands = tuple(
                    replace(s, circle=s.circle + off) for s in u.strands
                )
                unit_map[u.uid].append(self.add_unit(u.label, strands, u.kind))
            for s in old_segs:
                seg_map[s.sid].append(
                    self._add_segment(s.circle + off, s.start, s.length, s.role)
                )
        self.copies = base * factor
        return {"units": unit_map, "segments": seg_map}

    # -- derived structure ---------------------------------------------------

    def coverage(self) -> dict[int, list[tuple[int, int, str, int, int]]]:
        """Per circle, the covering items sorted by start:
        (start, length, 'u'|'s', id, dir)."""
        cov: dict[int, list] = {c: [] for c in range(self.copies)}
        for u in self.units.values():
            for s in u.strands:
                cov[s.circle].append((s.start, s.length, "u", u.uid, s.dir))
        for seg in self.segments.values():
            cov[seg.circle].append((seg.start, seg.length, "s", seg.sid, 1))
        for c in cov:
            cov[c].sort()
        return cov

    def audit_coverage(self) -> None:
        """Every letter of every circle is covered exactly once."""
        n = self.n
        for c, items in self.coverage().items():
            if not items:
                raise GluingError(f"circle {c} has no coverage")
            total = sum(length for _, length, *_ in items)
            if total != n:
                raise GluingError(
                    f"circle {c} covers {total} letters, expected {n}"
                )
            for i, (s1, l1, *_) in enumerate(items):
                s2 = items[(i + 1) % len(items)][0]
                if (s1 + l1) % n != s2 % n:
                    raise GluingError(f"circle {c}: gap or overlap at {s1 + l1}")

    def glued_mass(self) -> int:
        """Circle material inside units (three strands each)."""
        return sum(3 * len(u.label) for u in self.units.values())

    def unglued_mass(self) -> int:
        return sum(seg.length for seg in self.segments.values())

    def boundary_positions(self) -> dict[tuple[int, int], dict]:
        """Positions where some covered item starts or ends.

        Each value records the covering item on the left (ending here) and
        on the right (starting here) as ('u'|'s', id, dir) tuples.
        """
        n = self.n
        out: dict[tuple[int, int], dict] = {}
        for u in self.units.values():
            for s in u.strands:
                a = (s.circle, s.start % n)
                b = (s.circle, (s.start + s.length) % n)
                out.setdefault(a, {})["right"] = ("u", u.uid, s.dir)
                out.setdefault(b, {})["left"] = ("u", u.uid, s.dir)
        for seg in self.segments.values():
            a = (seg.circle, seg.start % n)
            b = (seg.circle, (seg.start + seg.length) % n)
            out.setdefault(a, {})["right"] = ("s", seg.sid, 1)
            out.setdefault(b, {})["left"] = ("s", seg.sid, 1)
        return out

    def vertex_classes(self) -> "ClassTable":
        return ClassTable(self)

    def audit(self, require_folded: bool = True) -> "ClassTable":
        """Full structural audit: coverage, labels, fold. Returns classes."""
        self.audit_coverage()
        table = self.vertex_classes()
        if require_folded:
            ok, viol = table.fold_check()
            if not ok:
                raise GluingError(f"state not folded: {viol}")
        return table


class ClassTable:
    """Vertex classes of the quotient graph of a partial gluing.

    Nodes are unit endpoints; a position whose two sides are glued merges
    the two endpoints. Positions with an unglued side contribute free darts.
    """

    def __init__(self, state: PartialGluing):
        self.state = state
        self.parent: dict[EndNode, EndNode] = {}
        n = state.n
        for u in state.units.values():
            self.parent[(u.uid, "s")] = (u.uid, "s")
            self.parent[(u.uid, "e")] = (u.uid, "e")

        def endpoint_at(item: tuple, pos: tuple[int, int], side: str) -> Optional[EndNode]:
            kind, ident, d = item
            if kind != "u":
                return None
            # side == 'left': item ends at pos; 'right': item starts at pos
            if side == "left":
                return (ident, "e" if d == 1 else "s")
            return (ident, "s" if d == 1 else "e")

        self.position_info: dict[tuple[int, int], dict] = {}
        for pos, sides in state.boundary_positions().items():
            if "left" not in sides or "right" not in sides:
                raise GluingError(f"dangling coverage at {pos}")
            ln = endpoint_at(sides["left"], pos, "left")
            rn = endpoint_at(sides["right"], pos, "right")
            self.position_info[pos] = {
                "left": sides["left"],
                "right": sides["right"],
                "lnode": ln,
                "rnode": rn,
            }
            if ln is not None and rn is not None:
                self._union(ln, rn)

        self.members: dict[EndNode, list[EndNode]] = {}
        for node in self.parent:
            self.members.setdefault(self._find(node), []).append(node)
        self.class_positions: dict[EndNode, list[tuple[int, int]]] = {}
        for pos, info in self.position_info.items():
            roots = set()
            for key in ("lnode", "rnode"):
                if info[key] is not None:
                    roots.add(self._find(info[key]))
            for root in roots:
                self.class_positions.setdefault(root, []).append(pos)

    def _find(self, x: EndNode) -> EndNode:
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def _union(self, a: EndNode, b: EndNode) -> None:
        ra, rb = self._find(a), self._find(b)
        if ra != rb:
            self.parent[ra] = rb

    def root_of_endpoint(self, node: EndNode) -> EndNode:
        return self._find(node)

    def outgoing_darts(self, root: EndNode) -> list[tuple]:
        """Darts leaving the class: ('unit', uid, end, first_letter) for each
        member endpoint plus ('free', pos, side, first_letter) for each
        unglued side at a class position."""
        st = self.state
        n = st.n
        word = st.word
        out = []
        for uid, end in self.members[root]:
            lab = st.units[uid].label
            letter = lab[0] if end == "s" else lab[-1] ^ 1
            out.append(("unit", uid, end, letter))
        for pos in self.class_positions.get(root, ()):
            info = self.position_info[pos]
            c, p = pos
            if info["lnode"] is None:
                out.append(("free", pos, "left", word.letter_at(p - 1) ^ 1))
            if info["rnode"] is None:
                out.append(("free", pos, "right", word.letter_at(p)))
        return out

    def fold_check(self):
        for root in self.members:
            letters = [d[-1] for d in self.outgoing_darts(root)]
            if len(set(letters)) != len(letters):
                return False, (root, self.outgoing_darts(root))
        return True, None

    def roots(self) -> list[EndNode]:
        return list(self.members)


def smooth_degree_two(state: PartialGluing) -> int:
    """Merge units across valence-2 classes (three strands running straight
    through). Returns the number of merges performed."""
    merges = 0
    while True:
        table = state.vertex_classes()
        target = None
        for root, nodes in table.members.items():
            if len(nodes) != 2:
                continue
            darts = table.outgoing_darts(root)
            if any(d[0] == "free" for d in darts):
                continue
            (u1, e1), (u2, e2) = nodes
            if u1 == u2:
                continue
            target = (root, (u1, e1), (u2, e2))
            break
        if target is None:
            return merges
        root, a_node, b_node = target
        _merge_across(state, table, root, a_node, b_node)
        merges += 1


def _merge_across(state: PartialGluing, table: ClassTable, root, a_node, b_node):
    ua = state.units[a_node[0]]
    ub = state.units[b_node[0]]
    la = ua.label if a_node[1] == "e" else inverse_word(ua.label)
    lb = ub.label if b_node[1] == "s" else inverse_word(ub.label)
    if la[-1] == lb[0] ^ 1:
        raise GluingError("merge would create an unreduced label")
    label = la + lb
    positions = table.class_positions[root]
    if len(positions) != 3:
        raise GluingError("valence-2 class without three strand positions")
    strands = []
    for pos in positions:
        info = table.position_info[pos]
        lkind, lid, ldir = info["left"]
        rkind, rid, rdir = info["right"]
        if lkind != "u" or rkind != "u":
            raise GluingError("free side at a smoothing class")
        su = next(
            s
            for s in state.units[lid].strands
            if s.circle == pos[0] and (s.start + s.length) % state.n == pos[1]
        )
        sv = next(
            s
            for s in state.units[rid].strands
            if s.circle == pos[0] and s.start % state.n == pos[1]
        )
        newdir = 1 if info["lnode"] == a_node else -1
        strands.append(Strand(pos[0], su.start, su.length + sv.length, newdir))
    state.remove_unit(ua.uid)
    state.remove_unit(ub.uid)
    state.add_unit(label, strands, kind="glued")
