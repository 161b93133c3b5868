"""Topology tree construction, leaf aggregation, layout and rendering.

The dataset's gateway estimates induce a tree: every node hangs under its
gateway, the network entry point is the root, and whatever cannot be placed
(no estimate, estimate pointing at a cycle) collects under a synthetic
"unplaced" vertex so nothing silently disappears from the picture.

Layout is a balloon tree.  Children orbit their parent; each child's
preferred angle is a hash of its identity, so a vertex keeps its direction
across scans and only yields as much as crowding requires.  The same
dataset always renders to the same bytes.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Any

from .model import (Dataset, DeviceClass, address_sort_key, canonical_json,
                    is_ipv4)

JSONDoc = dict[str, Any]

KIND_NODE = "node"
KIND_GATEWAY = "gateway"  # estimated gateway address nobody has scanned
KIND_UNPLACED = "unplaced"
KIND_BUBBLE = "bubble"

UNPLACED_ID = "unplaced"

STATUS_UNCHANGED = "unchanged"
STATUS_ADDED = "added"
STATUS_REMOVED = "removed"

#: circle radii per vertex kind, in layout units
HOST_RADIUS = 16.0
ROUTER_RADIUS = 20.0
GATEWAY_RADIUS = 14.0
UNPLACED_RADIUS = 22.0
BUBBLE_RADIUS_CAP = 64.0

#: clearance kept between any two circles
PADDING = 8.0

#: wedges may claim at most this share of the innermost ring; the rest is
#: slack that keeps hash-preferred angles attainable
RING_FILL = 0.8

#: wedge widths and ring gaps snap up to rungs of this geometric ladder, so
#: a small subtree change is absorbed by the slack below the rung instead
#: of rippling through the whole drawing
LADDER_STEP = 1.08

#: crowding level at which a fan starts easing from hash-preferred angles
#: toward evenly packed ones; easing smoothly avoids placement jumps when
#: one more vertex tips a fan over its capacity
PACK_EASE = 0.7

DEFAULT_AGGREGATION = "threshold:10"


class GraphError(Exception):
    pass


@dataclass
class TreeVertex:
    vertex_id: str
    kind: str
    label: str
    device_class: str | None = None
    os_name: str | None = None
    parent_id: str | None = None
    edge_method: str | None = None
    edge_confidence: float | None = None
    members: list[str] = field(default_factory=list)
    count: int = 1
    status: str = STATUS_UNCHANGED
    gateway_changed: bool = False


@dataclass
class Tree:
    root_id: str
    vertices: dict[str, TreeVertex]

    def children_of(self, vertex_id: str) -> list[str]:
        found = [v.vertex_id for v in self.vertices.values()
                 if v.parent_id == vertex_id]
        return sorted(found, key=_child_sort_key)

    def children_map(self) -> dict[str, list[str]]:
        out: dict[str, list[str]] = {vid: [] for vid in self.vertices}
        for v in self.vertices.values():
            if v.parent_id is not None:
                out[v.parent_id].append(v.vertex_id)
        for vid in out:
            out[vid].sort(key=_child_sort_key)
        return out

    def depth_of(self, vertex_id: str) -> int:
        depth = 0
        cursor = self.vertices[vertex_id]
        while cursor.parent_id is not None:
            cursor = self.vertices[cursor.parent_id]
            depth += 1
        return depth

    def max_depth(self) -> int:
        return max((self.depth_of(vid) for vid in self.vertices), default=0)


def _child_sort_key(vertex_id: str) -> tuple:
    if is_ipv4(vertex_id):
        return (0, address_sort_key(vertex_id), vertex_id)
    return (1, 0, vertex_id)


# -- tree construction ---------------------------------------------------------


def _node_os_name(dataset: Dataset, node_id: str) -> str | None:
    view = dataset.resolve_view(node_id)
    guess = view.summary.get("os")
    return guess["name"] if guess else None


def build_tree(dataset: Dataset) -> Tree:
    """Gateway-estimate tree over the dataset's nodes.

    Root preference: network entry point, then the scanner's own gateway,
    then the synthetic unplaced vertex.  The root's own gateway estimate is
    ignored; whatever lies beyond the entry point is not part of the map.
    """
    vertices: dict[str, TreeVertex] = {}
    for node in dataset.nodes.values():
        hostname = sorted(node.hostnames)[0] if node.hostnames else None
        vertices[node.node_id] = TreeVertex(
            vertex_id=node.node_id,
            kind=KIND_NODE,
            label=hostname or node.node_id,
            device_class=node.device_class.value,
            os_name=_node_os_name(dataset, node.node_id),
        )

    root_address = dataset.meta.network_entry_point or dataset.meta.scanner_gateway
    if root_address is not None and root_address not in vertices:
        vertices[root_address] = TreeVertex(
            vertex_id=root_address, kind=KIND_GATEWAY, label=root_address)
    root_id = root_address if root_address is not None else UNPLACED_ID

    # parent links from gateway estimates; unknown gateways become synthetic
    # gateway vertices so the estimate stays visible
    for node in dataset.nodes.values():
        if node.node_id == root_id:
            continue
        estimate = node.gateway
        vertex = vertices[node.node_id]
        if estimate is None or estimate.gateway_address == node.node_id:
            continue
        target = estimate.gateway_address
        if target not in vertices:
            vertices[target] = TreeVertex(
                vertex_id=target, kind=KIND_GATEWAY, label=target)
        vertex.parent_id = target
        vertex.edge_method = estimate.method.value
        vertex.edge_confidence = estimate.confidence

    if root_id not in vertices:
        vertices[root_id] = TreeVertex(
            vertex_id=UNPLACED_ID, kind=KIND_UNPLACED, label="unplaced")

    _break_cycles(vertices, root_id)

    # anything still unreachable from the root hangs under the synthetic
    # unplaced vertex: no estimate, detached cycle members, synthetic
    # gateways nobody scanned
    reachable = _reachable_from(vertices, root_id)
    strays = [vid for vid in vertices
              if vid not in reachable and vid != UNPLACED_ID]
    attach = [vid for vid in strays
              if vertices[vid].parent_id is None
              or vertices[vid].parent_id not in vertices]
    if attach:
        if UNPLACED_ID not in vertices:
            vertices[UNPLACED_ID] = TreeVertex(
                vertex_id=UNPLACED_ID, kind=KIND_UNPLACED, label="unplaced")
        if vertices[UNPLACED_ID].parent_id is None and root_id != UNPLACED_ID:
            vertices[UNPLACED_ID].parent_id = root_id
        for vid in attach:
            vertices[vid].parent_id = UNPLACED_ID
            vertices[vid].edge_method = None
            vertices[vid].edge_confidence = None

    vertices[root_id].parent_id = None
    return Tree(root_id=root_id, vertices=vertices)


def _break_cycles(vertices: dict[str, TreeVertex], root_id: str) -> None:
    """Detach the weakest edge of every parent-pointer cycle.

    Weakest: lowest confidence, ties by child sort order.  Detached children
    are picked up by the unplaced pass afterwards.
    """
    state: dict[str, int] = {}  # 0 visiting trail marker absent, 1 done
    for start in sorted(vertices, key=_child_sort_key):
        if state.get(start) == 1:
            continue
        trail: list[str] = []
        on_trail: set[str] = set()
        cursor: str | None = start
        while cursor is not None and state.get(cursor) != 1 and cursor not in on_trail:
            trail.append(cursor)
            on_trail.add(cursor)
            cursor = vertices[cursor].parent_id
        if cursor is not None and cursor in on_trail:
            cycle = trail[trail.index(cursor):]
            weakest = min(
                cycle,
                key=lambda vid: (vertices[vid].edge_confidence
                                 if vertices[vid].edge_confidence is not None else 2.0,
                                 _child_sort_key(vid)))
            vertices[weakest].parent_id = None
            vertices[weakest].edge_method = None
            vertices[weakest].edge_confidence = None
        for vid in trail:
            state[vid] = 1


def _reachable_from(vertices: dict[str, TreeVertex], root_id: str) -> set[str]:
    children: dict[str, list[str]] = {}
    for v in vertices.values():
        if v.parent_id is not None:
            children.setdefault(v.parent_id, []).append(v.vertex_id)
    seen = {root_id}
    stack = [root_id]
    while stack:
        for child in children.get(stack.pop(), []):
            if child not in seen:
                seen.add(child)
                stack.append(child)
    return seen


# -- aggregation -----------------------------------------------------------------


def parse_aggregation(text: str | None) -> int | None:
    """Aggregation mode string to a minimum group size; None disables.

    "none" | "os" | "threshold:<n>"; an absent value means the default.
    """
    if text is None or text == "":
        text = DEFAULT_AGGREGATION
    if text == "none":
        return None
    if text == "os":
        return 2
    if text.startswith("threshold:"):
        raw = text.partition(":")[2]
        if not raw.isdigit() or int(raw) < 2:
            raise GraphError(f"bad aggregation threshold {raw!r}")
        return int(raw)
    raise GraphError(f"unknown aggregation mode {text!r}")


def aggregate_tree(tree: Tree, min_group: int | None) -> Tree:
    """Collapse sibling leaf hosts with the same OS into bubble vertices.

    Only plain leaf nodes aggregate; routers, synthetic vertices and anything
    with children always stay individual.  Groups smaller than min_group are
    left alone.  The result partitions the original leaves: each one is
    either retained or a member of exactly one bubble.
    """
    if min_group is None:
        return Tree(root_id=tree.root_id,
                    vertices={vid: _copy_vertex(v) for vid, v in tree.vertices.items()})

    children = tree.children_map()
    out: dict[str, TreeVertex] = {}
    for vid, vertex in tree.vertices.items():
        out[vid] = _copy_vertex(vertex)

    for parent_id in sorted(tree.vertices, key=_child_sort_key):
        groups: dict[str, list[str]] = {}
        for child_id in children[parent_id]:
            v = tree.vertices[child_id]
            if (children[child_id] or v.kind != KIND_NODE
                    or v.device_class == DeviceClass.ROUTER.value
                    or v.os_name is None):
                continue
            groups.setdefault(v.os_name, []).append(child_id)
        for os_name in sorted(groups):
            members = groups[os_name]
            if len(members) < min_group:
                continue
            bubble_id = f"bubble:{parent_id}:{os_name}"
            out[bubble_id] = TreeVertex(
                vertex_id=bubble_id,
                kind=KIND_BUBBLE,
                label=f"{os_name} ({len(members)})",
                os_name=os_name,
                parent_id=parent_id,
                members=sorted(members, key=_child_sort_key),
                count=len(members),
            )
            for member in members:
                del out[member]
    return Tree(root_id=tree.root_id, vertices=out)


def _copy_vertex(v: TreeVertex) -> TreeVertex:
    return TreeVertex(
        vertex_id=v.vertex_id, kind=v.kind, label=v.label,
        device_class=v.device_class, os_name=v.os_name, parent_id=v.parent_id,
        edge_method=v.edge_method, edge_confidence=v.edge_confidence,
        members=list(v.members), count=v.count, status=v.status,
        gateway_changed=v.gateway_changed)


# -- layout ----------------------------------------------------------------------


def vertex_radius(vertex: TreeVertex) -> float:
    if vertex.kind == KIND_BUBBLE:
        return min(BUBBLE_RADIUS_CAP, HOST_RADIUS + 5.0 * math.sqrt(vertex.count))
    if vertex.kind == KIND_GATEWAY:
        return GATEWAY_RADIUS
    if vertex.kind == KIND_UNPLACED:
        return UNPLACED_RADIUS
    if vertex.device_class == DeviceClass.ROUTER.value:
        return ROUTER_RADIUS
    return HOST_RADIUS


def _hash_angle(vertex_id: str) -> float:
    digest = hashlib.md5(vertex_id.encode("utf-8")).hexdigest()
    return (int(digest[:8], 16) % 360000) / 360000.0 * 2.0 * math.pi


def _snap_up(value: float) -> float:
    """Next rung of the geometric ladder at or above `value`."""
    rung = math.ceil(math.log(value, LADDER_STEP) - 1e-9)
    return LADDER_STEP ** rung


def _wrap_near(angle: float, anchor: float) -> float:
    """The representative of `angle` (mod 2π) nearest to `anchor`."""
    turns = round((anchor - angle) / (2.0 * math.pi))
    return angle + 2.0 * math.pi * turns


def _isotonic_fit(targets: list[float]) -> list[float]:
    """L2 isotonic regression, pool adjacent violators."""
    starts: list[int] = []
    sums: list[float] = []
    counts: list[int] = []
    for i, value in enumerate(targets):
        starts.append(i)
        sums.append(value)
        counts.append(1)
        while len(sums) > 1 and sums[-2] / counts[-2] >= sums[-1] / counts[-1]:
            s, c = sums.pop(), counts.pop()
            starts.pop()
            sums[-1] += s
            counts[-1] += c
    out: list[float] = []
    for j, start in enumerate(starts):
        end = starts[j + 1] if j + 1 < len(starts) else len(targets)
        out.extend([sums[j] / counts[j]] * (end - start))
    return out


def _body_width(radius: float, ring_radius: float) -> float:
    """Angle a circle of `radius` plus clearance claims on its ring."""
    return 2.0 * math.asin(min(1.0, (radius + PADDING) / ring_radius))


def _hash_order(ordered: list[str]) -> list[str]:
    return sorted(ordered, key=lambda vid: (_hash_angle(vid), _child_sort_key(vid)))


def _fitted_angles(ideals: list[float], prefix: list[float]) -> list[float]:
    """Order-preserving angles nearest the ideals with exact-gap floors."""
    fitted = _isotonic_fit([ideals[i] - prefix[i] for i in range(len(ideals))])
    return [fitted[i] + prefix[i] for i in range(len(ideals))]


def _gap_prefix(widths: list[float]) -> list[float]:
    prefix = [0.0]
    for i in range(len(widths) - 1):
        prefix.append(prefix[-1] + (widths[i] + widths[i + 1]) / 2.0)
    return prefix


def _eased_blend(fitted: list[float], packed: list[float],
                 span: float, available: float) -> list[float]:
    """Mix the hash-preferred fan into the packed fan as crowding rises.

    Both inputs respect the pairwise gap floors, and gaps are linear in the
    angles, so every mix does too.  Easing in over a crowding band instead
    of switching at the capacity edge keeps one extra wedge from snapping
    the whole fan to new positions.
    """
    ease_from = PACK_EASE * available
    if span <= ease_from:
        return fitted
    t = min(1.0, (span - ease_from) / (available - ease_from))
    return [(1.0 - t) * f + t * p for f, p in zip(fitted, packed)]


def _fan_circle(entries: list[str], widths: list[float]) -> list[float]:
    """Angles for wedges closing around a full circle.

    Entries come in hash-angle order; an isotonic fit pushes crowded
    neighbors apart as little as possible while keeping the order.  As the
    fitted span approaches the full turn, the fan eases toward exact gaps
    with evenly shared slack; the ring fill bound guarantees that fits.
    """
    ideals = [_hash_angle(vid) for vid in entries]
    if len(entries) == 1:
        return ideals

    prefix = _gap_prefix(widths)
    fitted = _fitted_angles(ideals, prefix)

    wrap_gap = (widths[-1] + widths[0]) / 2.0
    available = 2.0 * math.pi - wrap_gap
    slack = (available - prefix[-1]) / (len(entries) - 1)
    offsets = [prefix[i] + i * slack for i in range(len(entries))]
    anchor = sum(ideals[i] - offsets[i] for i in range(len(entries))) / len(entries)
    packed = [anchor + off for off in offsets]

    span = fitted[-1] - fitted[0]
    if span > available:
        return packed
    return _eased_blend(fitted, packed, span, available)


def _fan_interval(entries: list[str], widths: list[float], lo: float,
                  hi: float, anchor: float) -> list[float]:
    """Angles for wedges packed inside [lo, hi], preferring hash angles.

    Ideals are taken as the hash-angle representatives nearest `anchor`
    (the parent's own hash angle), which does not move when the wedge
    does.  The parent wedge is at least the sum of the child wedges, so an
    order-preserving fit followed by a rigid shift lands inside whenever
    the fit is not too wide, and exact-gap packing always does.
    """
    ideals = [_wrap_near(_hash_angle(vid), anchor) for vid in entries]
    first = lo + widths[0] / 2.0
    last = hi - widths[-1] / 2.0
    if len(entries) == 1:
        return [min(max(ideals[0], first), max(first, last))]

    prefix = _gap_prefix(widths)
    fitted = _fitted_angles(ideals, prefix)
    available = max(last - first, 0.0)
    slack = max(0.0, available - prefix[-1]) / (len(entries) - 1)
    packed = [first + prefix[i] + i * slack for i in range(len(entries))]

    span = fitted[-1] - fitted[0]
    if span > available:
        return packed
    shift = min(max(0.0, first - fitted[0]), last - fitted[-1])
    shifted = [a + shift for a in fitted]
    return _eased_blend(shifted, packed, span, available)


def layout_tree(tree: Tree) -> tuple[dict[str, tuple[float, float]], dict[str, float]]:
    """Radial ring layout: positions and circle radii keyed by vertex id.

    Vertices sit on one ring per tree depth; ring gaps exceed the glyph
    maxima of both rings, so circles on different rings stay apart.  Every
    vertex owns an angular wedge at least as wide as its glyph and at least
    the sum of its children's wedges, wedges of siblings are disjoint, and
    children nest inside their parent's wedge — so circles sharing a ring
    stay apart too.  Wedge widths and ring gaps snap up to rungs of a
    geometric ladder, leaving slack that absorbs small subtree changes
    instead of rippling them through the whole drawing.  Deterministic for
    a given tree.
    """
    children = tree.children_map()
    radii = {vid: vertex_radius(v) for vid, v in tree.vertices.items()}

    rings: list[list[str]] = [[tree.root_id]]
    while True:
        nxt = [kid for vid in rings[-1] for kid in children[vid]]
        if not nxt:
            break
        rings.append(nxt)

    if len(rings) == 1:
        return {tree.root_id: (0.0, 0.0)}, radii

    ring_of = {vid: k for k, ring in enumerate(rings) for vid in ring}
    gaps = [_snap_up(max(radii[v] for v in rings[k - 1])
                     + max(radii[v] for v in rings[k]) + PADDING)
            for k in range(1, len(rings))]

    order = {vid: _hash_order(children[vid]) for vid in tree.vertices}
    below = [vid for ring in reversed(rings[1:]) for vid in ring]

    def demands(scale: float) -> tuple[dict[str, float], list[float], float]:
        ring_r = [0.0]
        for gap in gaps:
            ring_r.append(ring_r[-1] + gap * scale)
        wedges: dict[str, float] = {}
        for vid in below:
            need = _body_width(radii[vid], ring_r[ring_of[vid]])
            wedges[vid] = _snap_up(max(need, sum(wedges[k] for k in order[vid])))
        total = sum(wedges[k] for k in order[tree.root_id])
        return wedges, ring_r, total

    # smallest ring scale whose angular demand fits the fill share; the
    # bisection keeps the scale a continuous function of the demands, so
    # one extra vertex cannot jolt the whole drawing to new radii
    limit = RING_FILL * 2.0 * math.pi
    wedges, ring_r, total = demands(1.0)
    if total > limit:
        hi = 2.0
        while demands(hi)[2] > limit and hi < 1e9:
            hi *= 2.0
        lo = hi / 2.0
        for _ in range(60):
            mid = (lo + hi) / 2.0
            if demands(mid)[2] > limit:
                lo = mid
            else:
                hi = mid
        wedges, ring_r, _ = demands(hi)

    positions = {tree.root_id: (0.0, 0.0)}

    def place(vid: str, theta: float) -> None:
        kids = order[vid]
        if not kids:
            return
        widths = [wedges[k] for k in kids]
        if vid == tree.root_id:
            angles = _fan_circle(kids, widths)
        else:
            half = wedges[vid] / 2.0
            angles = _fan_interval(kids, widths, theta - half, theta + half,
                                   _hash_angle(vid))
        radius = ring_r[ring_of[vid] + 1]
        for kid, angle in zip(kids, angles):
            positions[kid] = (radius * math.cos(angle),
                              radius * math.sin(angle))
            place(kid, angle)

    place(tree.root_id, 0.0)
    return positions, radii


def bounding_box(positions: dict[str, tuple[float, float]],
                 radii: dict[str, float]) -> tuple[float, float, float, float]:
    xs_lo = min(positions[v][0] - radii[v] for v in positions)
    ys_lo = min(positions[v][1] - radii[v] for v in positions)
    xs_hi = max(positions[v][0] + radii[v] for v in positions)
    ys_hi = max(positions[v][1] + radii[v] for v in positions)
    return xs_lo, ys_lo, xs_hi, ys_hi


# -- documents -------------------------------------------------------------------


def graph_doc(dataset: Dataset, aggregate: str | None = None) -> JSONDoc:
    """Laid-out topology document for one dataset version."""
    min_group = parse_aggregation(aggregate)
    tree = aggregate_tree(build_tree(dataset), min_group)
    return _tree_doc(tree, extra_edges=[], aggregation=aggregate or DEFAULT_AGGREGATION)


def _tree_doc(tree: Tree, extra_edges: list[JSONDoc], aggregation: str | None) -> JSONDoc:
    positions, radii = layout_tree(tree)
    vertices = []
    for vid in sorted(tree.vertices, key=_child_sort_key):
        v = tree.vertices[vid]
        x, y = positions[vid]
        doc: JSONDoc = {
            "id": vid,
            "kind": v.kind,
            "label": v.label,
            "device_class": v.device_class,
            "os_name": v.os_name,
            "x": round(x, 2),
            "y": round(y, 2),
            "radius": round(radii[vid], 2),
            "depth": tree.depth_of(vid),
            "status": v.status,
        }
        if v.gateway_changed:
            doc["gateway_changed"] = True
        if v.kind == KIND_BUBBLE:
            doc["members"] = list(v.members)
            doc["count"] = v.count
        vertices.append(doc)

    edges = []
    for vid in sorted(tree.vertices, key=_child_sort_key):
        v = tree.vertices[vid]
        if v.parent_id is None:
            continue
        edges.append({
            "from": vid,
            "to": v.parent_id,
            "method": v.edge_method,
            "confidence": v.edge_confidence,
            "status": v.status,
            "structural": True,
        })
    edges.extend(extra_edges)

    return {
        "root": tree.root_id,
        "aggregation": aggregation,
        "max_depth": tree.max_depth(),
        "vertices": vertices,
        "edges": edges,
    }


def graph_json(dataset: Dataset, aggregate: str | None = None) -> str:
    return canonical_json(graph_doc(dataset, aggregate))


def compare_doc(dataset_a: Dataset, dataset_b: Dataset) -> JSONDoc:
    """Union graph of two versions, annotated added/removed/changed.

    Vertices and structural edges come from the newer dataset; vertices
    that only the older one has stay in the picture flagged removed, and a
    gateway change keeps the old edge as a removed extra edge next to the
    added new one.
    """
    tree_a = build_tree(dataset_a)
    tree_b = build_tree(dataset_b)
    union: dict[str, TreeVertex] = {vid: _copy_vertex(v)
                                    for vid, v in tree_b.vertices.items()}

    for vid in sorted(tree_a.vertices, key=_child_sort_key):
        if vid in union:
            continue
        ghost = _copy_vertex(tree_a.vertices[vid])
        ghost.status = STATUS_REMOVED
        if ghost.parent_id is not None and ghost.parent_id not in tree_a.vertices:
            ghost.parent_id = None
        union[vid] = ghost

    # re-parent ghosts whose old parent also disappeared from the union
    for vid, v in union.items():
        if v.status == STATUS_REMOVED and v.parent_id is not None and v.parent_id not in union:
            v.parent_id = None

    extra_edges: list[JSONDoc] = []
    for vid in sorted(union, key=_child_sort_key):
        v = union[vid]
        in_a = vid in tree_a.vertices
        in_b = vid in tree_b.vertices
        if in_b and not in_a:
            v.status = STATUS_ADDED
        elif in_a and in_b:
            old_parent = tree_a.vertices[vid].parent_id
            new_parent = tree_b.vertices[vid].parent_id
            if old_parent != new_parent:
                v.gateway_changed = True
                if old_parent is not None and old_parent in union:
                    extra_edges.append({
                        "from": vid,
                        "to": old_parent,
                        "method": tree_a.vertices[vid].edge_method,
                        "confidence": tree_a.vertices[vid].edge_confidence,
                        "status": STATUS_REMOVED,
                        "structural": False,
                    })

    root_id = tree_b.root_id
    tree = Tree(root_id=root_id, vertices=union)

    # Ghost parent chains always end at a surviving vertex or at the old
    # root, so re-rooting the parentless ghosts under unplaced is enough to
    # keep the union a tree.
    for vid in sorted(union, key=_child_sort_key):
        v = union[vid]
        if vid == root_id:
            continue
        if v.parent_id is None or v.parent_id not in union:
            if UNPLACED_ID not in union:
                union[UNPLACED_ID] = TreeVertex(
                    vertex_id=UNPLACED_ID, kind=KIND_UNPLACED, label="unplaced",
                    parent_id=root_id)
            if vid != UNPLACED_ID:
                v.parent_id = UNPLACED_ID
                v.edge_method = None
                v.edge_confidence = None
    if UNPLACED_ID in union and UNPLACED_ID != root_id:
        union[UNPLACED_ID].parent_id = root_id

    union[root_id].parent_id = None

    doc = _tree_doc(tree, extra_edges=extra_edges, aggregation="none")
    for edge in doc["edges"]:
        if not edge["structural"]:
            continue
        child = union[edge["from"]]
        if child.status == STATUS_ADDED:
            edge["status"] = STATUS_ADDED
        elif child.status == STATUS_REMOVED:
            edge["status"] = STATUS_REMOVED
        elif child.gateway_changed:
            edge["status"] = STATUS_ADDED
    return doc


def validate_graph_doc(doc: JSONDoc) -> None:
    """Schema check for an exported graph document; raises GraphError."""
    for key in ("root", "vertices", "edges", "max_depth"):
        if key not in doc:
            raise GraphError(f"graph document lacks {key!r}")
    ids = set()
    for v in doc["vertices"]:
        for key in ("id", "kind", "label", "x", "y", "radius", "status", "depth"):
            if key not in v:
                raise GraphError(f"vertex {v.get('id')!r} lacks {key!r}")
        ids.add(v["id"])
    if doc["root"] not in ids:
        raise GraphError("root is not among the vertices")
    for e in doc["edges"]:
        if e["from"] not in ids or e["to"] not in ids:
            raise GraphError(f"edge {e['from']}->{e['to']} references unknown vertex")


# -- rendering -------------------------------------------------------------------

_SVG_STYLE = """\
  .edge { stroke: #8a8f98; stroke-width: 1.2; fill: none; }
  .edge.added { stroke: #1a7f37; stroke-width: 2.6; }
  .edge.removed { stroke: #c0392b; stroke-dasharray: 6 4; }
  .vertex { fill: #eef1f5; stroke: #5b6472; stroke-width: 1.4; }
  .vertex.router { fill: #dbe7ff; stroke: #2f5bb7; }
  .vertex.gateway { fill: #f6f0dc; stroke: #9a7b1e; stroke-dasharray: 4 3; }
  .vertex.unplaced { fill: #f3e8f5; stroke: #8e44ad; stroke-dasharray: 2 3; }
  .vertex.bubble { fill: #e4f4e8; stroke: #1e8449; stroke-width: 2.2; }
  .vertex.added { stroke: #1a7f37; stroke-width: 3.2; }
  .vertex.removed { stroke: #c0392b; stroke-dasharray: 6 4; }
  .label { font: 10px sans-serif; fill: #30343a; text-anchor: middle; }
"""


def render_svg(doc: JSONDoc) -> str:
    """Standalone SVG for a graph document.

    Change states double-encode: green plus heavy stroke for added, red
    plus dashes for removed, so the distinction survives without color.
    """
    pos = {v["id"]: (v["x"], v["y"]) for v in doc["vertices"]}
    lo_x = min(v["x"] - v["radius"] for v in doc["vertices"])
    lo_y = min(v["y"] - v["radius"] for v in doc["vertices"])
    hi_x = max(v["x"] + v["radius"] for v in doc["vertices"])
    hi_y = max(v["y"] + v["radius"] for v in doc["vertices"])
    margin = 40.0
    view = (lo_x - margin, lo_y - margin,
            (hi_x - lo_x) + 2 * margin, (hi_y - lo_y) + 2 * margin)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" '
        f'viewBox="{view[0]:.2f} {view[1]:.2f} {view[2]:.2f} {view[3]:.2f}">',
        f"<style>\n{_SVG_STYLE}</style>",
    ]
    for e in doc["edges"]:
        (x1, y1), (x2, y2) = pos[e["from"]], pos[e["to"]]
        css = "edge" if e["status"] == STATUS_UNCHANGED else f'edge {e["status"]}'
        parts.append(f'<line class="{css}" x1="{x1:.2f}" y1="{y1:.2f}" '
                     f'x2="{x2:.2f}" y2="{y2:.2f}"/>')
    for v in doc["vertices"]:
        css = ["vertex"]
        if v["device_class"] == DeviceClass.ROUTER.value:
            css.append("router")
        if v["kind"] in (KIND_GATEWAY, KIND_UNPLACED, KIND_BUBBLE):
            css.append(v["kind"])
        if v["status"] != STATUS_UNCHANGED:
            css.append(v["status"])
        parts.append(f'<circle class="{" ".join(css)}" cx="{v["x"]:.2f}" '
                     f'cy="{v["y"]:.2f}" r="{v["radius"]:.2f}"/>')
        if v["kind"] == KIND_BUBBLE:
            parts.append(f'<circle class="{" ".join(css)}" cx="{v["x"]:.2f}" '
                         f'cy="{v["y"]:.2f}" r="{v["radius"] - 4:.2f}"/>')
        label = _escape(v["label"])
        label_y = v["y"] + v["radius"] + 11
        parts.append(f'<text class="label" x="{v["x"]:.2f}" '
                     f'y="{label_y:.2f}">{label}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def render_dot(doc: JSONDoc) -> str:
    """Graphviz text form, handy for eyeballing structure in a terminal."""
    lines = ["digraph topology {", '  rankdir="TB";']
    for v in doc["vertices"]:
        attrs = [f'label="{_escape(v["label"])}"']
        if v["status"] == STATUS_ADDED:
            attrs.append('color="green"')
        elif v["status"] == STATUS_REMOVED:
            attrs.append('color="red" style="dashed"')
        lines.append(f'  "{v["id"]}" [{" ".join(attrs)}];')
    for e in doc["edges"]:
        attrs = []
        if e["status"] == STATUS_ADDED:
            attrs.append('color="green"')
        elif e["status"] == STATUS_REMOVED:
            attrs.append('color="red" style="dashed"')
        suffix = f' [{" ".join(attrs)}]' if attrs else ""
        lines.append(f'  "{e["from"]}" -> "{e["to"]}"{suffix};')
    lines.append("}")
    return "\n".join(lines) + "\n"


def _escape(text: str) -> str:
    return (text.replace("&", "&amp;").replace("<", "&lt;")
            .replace(">", "&gt;").replace('"', "&quot;"))
