"""End-to-end acceptance suite.

Each test states one deliverable guarantee and enforces its runtime budget
where one applies, so a verbose run reads as a checklist: one pass/fail
line per guarantee.
"""

from __future__ import annotations

import math
import random
import time
from pathlib import Path

from fastapi.testclient import TestClient

from netmapper import simnet
from netmapper.adapters import MODE_SIMULATED, RawResult
from netmapper.adapters.portscan import normalize_portscan
from netmapper.adapters.snmpwalk import normalize_snmp
from netmapper.analyzers import (compute_network_entry_point,
                                 estimate_gateway_by_singleton,
                                 estimate_gateway_by_trace,
                                 estimate_gateway_by_usual_suspects,
                                 usual_suspect_candidates)
from netmapper.graph import (KIND_BUBBLE, Tree, TreeVertex, aggregate_tree,
                             bounding_box, build_tree, graph_doc, layout_tree,
                             render_svg)
from netmapper.model import (Dataset, GatewayEstimate, GatewayMethod,
                             OsGuess, TargetSpec, canonical_json)
from netmapper.orchestrator import STATUS_DONE, run_policy
from netmapper.service import create_app
from netmapper.store import DELETE, Store, diff_objects

from _builders import make_obs, make_trace, random_tree

FIXTURES = Path(__file__).parent / "fixtures"
DGW = "10.0.0.1"


def budget(started: float, limit_s: float) -> None:
    elapsed = time.perf_counter() - started
    assert elapsed < limit_s, f"took {elapsed:.1f}s, budget is {limit_s:.0f}s"


# 1. Trace-derived gateway estimates are exact on randomized networks.


def test_trace_gateway_estimates_match_ground_truth_on_100_random_topologies():
    started = time.perf_counter()
    hosts_checked = 0
    for seed in range(100):
        top = simnet.generate_topology(seed)
        scanner_dgw = top.scanner_gateway()
        ds = Dataset()
        for address in sorted(top.hosts):
            path = simnet.trace(top, address)
            assert path.complete, f"seed {seed}: unexpected hidden hop"
            node = ds.record_observation(address, make_obs(trace=path))
            estimate = estimate_gateway_by_trace(node, scanner_dgw, 1)
            assert estimate is not None
            expected = simnet.ground_truth_gateway(top, address)
            assert estimate.gateway_address == expected, \
                f"seed {seed}, host {address}"
            hosts_checked += 1
    assert hosts_checked >= 100 * 5
    budget(started, 30.0)


# 2. The network entry point equals a brute-force common-prefix oracle.


def prefix_oracle(paths: list[list[str]], dgw: str | None) -> str | None:
    if any(len(p) == 1 for p in paths):
        return dgw
    prefix = 0
    for column in zip(*paths):
        if len(set(column)) != 1:
            break
        prefix += 1
    lengths = {len(p) for p in paths}
    if prefix == min(lengths) and len(lengths) == 1:
        return paths[0][-2]  # fully identical paths
    if prefix == 0:
        return dgw
    return paths[0][prefix - 1]


def test_entry_point_matches_the_prefix_oracle_on_1000_path_sets():
    started = time.perf_counter()
    rng = random.Random(52)
    pool = [f"10.{i}.0.1" for i in range(10)]
    single_hop_cases = 0
    for case in range(1000):
        shared = rng.sample(pool, rng.randint(0, 3))
        paths = []
        for i in range(rng.randint(1, 6)):
            if rng.random() < 0.12:
                paths.append([f"10.20.{i}.15"])  # target inside scanner's net
                single_hop_cases += 1
            else:
                tail = [rng.choice(pool) for _ in range(rng.randint(0, 3))]
                paths.append(shared + tail + [f"10.30.{i}.{10 + case % 180}"])
        got = compute_network_entry_point([make_trace(p) for p in paths], DGW)
        assert got == prefix_oracle(paths, DGW), f"case {case}: {paths}"
    assert single_hop_cases > 0
    budget(started, 10.0)


# 3. Iterative scanning expands a single address to full coverage.


def test_iterative_run_expands_one_address_to_full_coverage(
        topology, registry, default_policy, tmp_path):
    started = time.perf_counter()
    store = Store(tmp_path / "db")
    report = run_policy(store, registry, default_policy,
                        TargetSpec(["10.3.0.10"]), mode=MODE_SIMULATED,
                        scanner_gateway=topology.scanner_gateway())
    assert report.status == STATUS_DONE

    counts = [it.cumulative_nodes for it in report.iterations]
    assert len(counts) == 3
    assert all(a < b for a, b in zip(counts, counts[1:])), counts
    assert counts[-1] == 120  # every reachable simulated device

    dataset = store.checkout_dataset()
    assert dataset.meta.network_entry_point == "10.1.0.1"
    assert build_tree(dataset).max_depth() == 3

    lines = report.table().splitlines()
    assert lines[0].split() == ["Module", "It.", "1", "It.", "2", "It.", "3"]
    labels = [line.split("  ")[0].rstrip() for line in lines[1:]]
    assert labels[:4] == ["portscan", "dgw-analyzer", "portscan:2", "snmpwalk"]
    assert labels[4:] == ["Modules", "Total", "Number of found nodes",
                          "Nodes per second"]
    budget(started, 60.0)


# 4. Fallback gateway heuristics follow their stated contracts exactly.


def test_singleton_and_usual_suspect_contracts():
    ds = Dataset()
    router = ds.record_observation("10.0.0.254", make_obs(
        os_guesses=[OsGuess("EdgeOS 2.0", "router os", 95)]))
    assert router.device_class.value == "router"
    ds.record_observation("10.0.0.7", make_obs())
    ds.record_observation("10.0.0.8", make_obs())
    settled = ds.record_observation("10.0.0.9", make_obs())
    ds.apply_gateway_estimate(GatewayEstimate(
        "10.0.0.9", "10.0.0.1", GatewayMethod.TRACE, 0.9, 1))

    # exactly one known router: every gateway-less non-router points at it
    estimates = estimate_gateway_by_singleton(ds, 2)
    assert {(e.node_id, e.gateway_address) for e in estimates} == {
        ("10.0.0.7", "10.0.0.254"), ("10.0.0.8", "10.0.0.254")}
    assert all(e.method is GatewayMethod.SINGLETON and e.confidence == 0.6
               for e in estimates)
    assert settled.node_id not in {e.node_id for e in estimates}

    # a second router voids the gating condition entirely
    ds.record_observation("10.0.0.253", make_obs(
        os_guesses=[OsGuess("IOS 15", "router os", 90)]))
    assert estimate_gateway_by_singleton(ds, 3) == []

    # candidate generation: first and last usable address of every /24
    # touched, duplicates across target entries collapsed
    targets = TargetSpec(["10.1.2.0/24", "10.1.2.128/25", "10.1.3.77"])
    assert usual_suspect_candidates(targets) == [
        "10.1.2.1", "10.1.2.254", "10.1.3.1", "10.1.3.254"]

    suspects = Dataset()
    suspects.record_observation("10.1.2.1", make_obs(
        os_guesses=[OsGuess("EdgeOS 2.0", "router os", 95)]))
    suspects.record_observation("10.1.2.40", make_obs())
    suspects.record_observation("10.1.3.40", make_obs())  # no router there
    estimates = estimate_gateway_by_usual_suspects(targets, suspects, 2)
    assert [(e.node_id, e.gateway_address) for e in estimates] == [
        ("10.1.2.40", "10.1.2.1")]
    assert estimates[0].method is GatewayMethod.USUAL_SUSPECT
    assert estimates[0].confidence == 0.4


# 5. The version store reproduces a keep-all-snapshots oracle.


def test_version_store_matches_a_keep_all_snapshots_oracle(tmp_path):
    started = time.perf_counter()
    rng = random.Random(17)
    store = Store(tmp_path / "db")
    keys = [f"node:10.0.0.{i}" for i in range(9)] + ["meta:links", "run:alpha"]

    state: dict[str, dict] = {}
    snapshots: list[dict[str, dict]] = [{}]
    while len(snapshots) <= 50:
        changes: dict[str, dict | None] = {}
        for key in rng.sample(keys, rng.randint(1, 4)):
            if key in state and rng.random() < 0.3:
                changes[key] = DELETE
            else:
                doc = {"v": rng.randint(0, 9), "w": rng.randint(0, 9)}
                if state.get(key) != doc:
                    changes[key] = doc
        if not changes:
            continue
        store.commit(changes, "scan_run", f"step {len(snapshots)}")
        for key, doc in changes.items():
            if doc is DELETE:
                state.pop(key)
            else:
                state[key] = doc
        snapshots.append(dict(state))

    assert store.head_seq == 50
    for seq in range(51):
        assert store.checkout(seq) == snapshots[seq], f"version {seq}"

    for _ in range(40):
        a, b = rng.randint(0, 50), rng.randint(0, 50)
        assert store.diff(a, b).to_doc() == \
            diff_objects(snapshots[a], snapshots[b], a, b).to_doc()

    target = next(seq for seq in range(49, 0, -1)
                  if snapshots[seq] != snapshots[50])
    store.rollback(target)
    assert store.head_seq == 51
    assert store.head_objects() == snapshots[target]
    budget(started, 30.0)


# 6. Manual gateway assignments outrank automation, end to end.


def test_manual_gateway_survives_an_automated_rescan_via_the_api(
        topology, tmp_path):
    client = TestClient(create_app(tmp_path / "db", mode=MODE_SIMULATED,
                                   topology=topology))

    def scan(targets: list[str]) -> dict:
        response = client.post("/api/scans", json={"targets": targets})
        assert response.status_code == 202
        run_id = response.json()["run_id"]
        deadline = time.monotonic() + 60
        while time.monotonic() < deadline:
            doc = client.get(f"/api/scans/{run_id}").json()
            if doc["status"] != "running":
                return doc
            time.sleep(0.02)
        raise AssertionError("scan did not finish")

    assert scan(["10.3.0.10"])["status"] == "done"

    edited = client.post("/api/nodes/10.3.0.11/gateway",
                         json={"gateway_address": "10.3.0.99"})
    assert edited.status_code == 200
    assert edited.json()["estimate"]["method"] == "manual"

    rescan = scan(["10.3.0.11"])   # re-observes the edited node directly
    assert rescan["status"] == "done" and rescan["iterations"]

    head = client.get("/api/health").json()["head"]
    node = client.get(f"/api/versions/{head}/nodes/10.3.0.11").json()
    gateway = node["summary"]["gateway"]
    assert gateway["method"] == "manual"
    assert gateway["gateway_address"] == "10.3.0.99"
    assert gateway["confidence"] == 1.0


# 7. Layout: disjoint glyphs, straight edges, reproducible, insert-stable.


def test_layout_invariants_hold_on_50_random_trees():
    started = time.perf_counter()
    os_pool = ["Linux 5.4", "Windows 10", "FreeBSD 13.1", None]
    for seed in range(50):
        rng = random.Random(1000 + seed)
        tree = aggregate_tree(
            random_tree(rng, rng.randint(2, 500), os_pool),
            rng.choice([None, 2, 5, 10]))
        assert len(tree.vertices) <= 500
        positions, radii = layout_tree(tree)

        ids = sorted(positions)
        for i, a in enumerate(ids):
            ax, ay = positions[a]
            for b in ids[i + 1:]:
                bx, by = positions[b]
                gap = math.hypot(ax - bx, ay - by) - radii[a] - radii[b]
                assert gap > -1e-6, f"seed {seed}: {a} overlaps {b}"

        assert layout_tree(tree) == (positions, radii)  # reproducible

        lo_x, lo_y, hi_x, hi_y = bounding_box(positions, radii)
        diagonal = math.hypot(hi_x - lo_x, hi_y - lo_y)
        parent = rng.choice(sorted(
            vid for vid, v in tree.vertices.items() if v.kind != KIND_BUBBLE))
        grown_vertices = dict(tree.vertices)
        grown_vertices["10.200.0.9"] = TreeVertex(
            vertex_id="10.200.0.9", kind="node", label="10.200.0.9",
            device_class="host", parent_id=parent)
        after, _ = layout_tree(Tree(root_id=tree.root_id,
                                    vertices=grown_vertices))
        worst = max(math.hypot(after[v][0] - positions[v][0],
                               after[v][1] - positions[v][1])
                    for v in positions)
        assert worst <= 0.25 * diagonal, \
            f"seed {seed}: moved {worst:.1f} of {diagonal:.1f}"
    budget(started, 60.0)


def test_edges_are_single_straight_segments(dataset):
    doc = graph_doc(dataset, "none")
    for edge in doc["edges"]:
        assert set(edge) == {"from", "to", "method", "confidence",
                             "status", "structural"}  # endpoints only
    svg = render_svg(doc)
    assert svg.count("<line ") == len(doc["edges"])
    assert "<polyline" not in svg and "<path" not in svg


# 8. Aggregation partitions the leaves and never touches routers.


def test_aggregation_partitions_leaves_and_spares_routers():
    for seed in range(30):
        rng = random.Random(seed)
        tree = random_tree(rng, rng.randint(2, 120),
                           ["Linux 5.4", "Windows 10", None])
        routers = {vid for vid in tree.vertices
                   if rng.random() < 0.15 or vid == "root"}
        for vid in routers:
            tree.vertices[vid].device_class = "router"

        children = tree.children_map()
        aggregatable = {vid for vid, v in tree.vertices.items()
                        if not children[vid] and vid not in routers
                        and v.os_name is not None}

        out = aggregate_tree(tree, rng.choice([2, 3, 10]))
        bubbles = [v for v in out.vertices.values() if v.kind == KIND_BUBBLE]
        absorbed = [m for b in bubbles for m in b.members]
        assert len(absorbed) == len(set(absorbed))  # each leaf at most once
        retained = [vid for vid in aggregatable if vid in out.vertices]
        assert sum(b.count for b in bubbles) + len(retained) == \
            len(aggregatable), f"seed {seed}"
        assert set(absorbed) | set(retained) == aggregatable
        assert routers <= set(out.vertices)  # routers always survive


# 9. Captured tool output normalizes to the committed golden documents.


def test_golden_captures_normalize_byte_for_byte():
    portscan_raw = RawResult(
        module_id="portscan", exit_status=0,
        captured=(FIXTURES / "portscan_capture.xml").read_bytes(),
        duration_s=0.1, tool_options="profile=full", iteration=2,
        completed_at=1723384111.5)
    got = canonical_json([r.to_doc() for r in normalize_portscan(portscan_raw)])
    assert got + "\n" == (FIXTURES / "portscan_expected.json").read_text()

    snmp_raw = RawResult(
        module_id="snmpwalk", exit_status=0,
        captured=(FIXTURES / "snmpwalk_capture.txt").read_bytes(),
        duration_s=0.1, tool_options="communities=public,private", iteration=2,
        completed_at=1723384111.5)
    got = canonical_json([r.to_doc() for r in normalize_snmp(snmp_raw)])
    assert got + "\n" == (FIXTURES / "snmpwalk_expected.json").read_text()
