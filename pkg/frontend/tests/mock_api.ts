// In-memory stand-in for the netmapper service, mirroring its documented
// semantics: versioned snapshots, server-side layout and aggregation,
// compare graphs with ghost vertices, manual-gateway precedence over
// automated runs, and the 404/409/422 error mapping.

import { ApiError, type ApiClient } from "../src/api.js";
import type {
  DiffDoc,
  DiffNodeChange,
  EdgeDoc,
  GatewayCommit,
  GraphDoc,
  HealthDoc,
  ModuleDescriptor,
  NodeViewDoc,
  ObservationDoc,
  RollbackResult,
  RunReportDoc,
  ScanRequest,
  ScanStarted,
  VertexDoc,
  VersionInfo,
} from "../src/types.js";

export interface MockNode {
  id: string;
  os_name: string;
  device_class: "host" | "router";
  gateway: { address: string; method: string; confidence: number } | null;
  manual: boolean;
}

interface Snapshot {
  seq: number;
  author: string;
  message: string;
  created_at: string;
  nodes: Map<string, MockNode>;
}

const MODULES: ModuleDescriptor[] = [
  { module_id: "dgw-analyzer", kind: "analyzer", supported_options: [], mode: "simulated" },
  {
    module_id: "portscan",
    kind: "scanner",
    supported_options: ["profile", "ports", "timeout_s"],
    mode: "simulated",
  },
  {
    module_id: "snmpwalk",
    kind: "scanner",
    supported_options: ["communities", "timeout_s"],
    mode: "simulated",
  },
];

/** The network the mock's automated scans keep re-deriving. */
const FIXTURE: [string, string, "host" | "router", string | null][] = [
  ["10.0.1.1", "EdgeOS 2.0", "router", null],
  ["10.0.2.1", "RouterOS 7.1", "router", "10.0.1.1"],
  ["10.0.1.20", "Linux 5.4", "host", "10.0.1.1"],
  ["10.0.1.21", "Linux 5.4", "host", "10.0.1.1"],
  ["10.0.1.22", "Linux 5.4", "host", "10.0.1.1"],
  ["10.0.2.30", "Windows Server 2019", "host", "10.0.2.1"],
  ["10.0.2.31", "Windows Server 2019", "host", "10.0.2.1"],
  ["10.0.2.32", "Linux 5.4", "host", "10.0.2.1"],
];

const ROOT = "10.0.1.1";
const IPV4 = /^(\d{1,3})\.(\d{1,3})\.(\d{1,3})\.(\d{1,3})$/;

function isIpv4(text: string): boolean {
  const match = IPV4.exec(text);
  return match !== null && match.slice(1).every((part) => Number(part) <= 255);
}

function cloneNodes(nodes: Map<string, MockNode>): Map<string, MockNode> {
  return new Map(
    [...nodes].map(([id, n]) => [id, { ...n, gateway: n.gateway ? { ...n.gateway } : null }]),
  );
}

function stamp(seq: number): string {
  const base = new Date("2026-08-16T00:00:00.000Z").getTime();
  return new Date(base + seq * 1000).toISOString().replace("Z", "+00:00");
}

interface TreeRow {
  id: string;
  kind: "node" | "gateway";
  parent: string | null;
  node: MockNode | null;
  depth: number;
}

/** Parent-by-gateway tree over one snapshot, depths included. */
function buildRows(nodes: Map<string, MockNode>): Map<string, TreeRow> {
  const rows = new Map<string, TreeRow>();
  for (const node of nodes.values()) {
    rows.set(node.id, {
      id: node.id,
      kind: "node",
      parent: node.gateway?.address ?? null,
      node,
      depth: 0,
    });
  }
  // gateways that were never scanned themselves still appear on the map
  for (const row of [...rows.values()]) {
    if (row.parent !== null && !rows.has(row.parent)) {
      rows.set(row.parent, { id: row.parent, kind: "gateway", parent: ROOT, node: null, depth: 0 });
    }
  }
  for (const row of rows.values()) {
    let depth = 0;
    let cursor = row.parent;
    while (cursor !== null && depth < rows.size) {
      depth += 1;
      cursor = rows.get(cursor)?.parent ?? null;
    }
    row.depth = depth;
  }
  return rows;
}

function vertexFor(row: TreeRow, x: number, y: number): VertexDoc {
  const radius = row.kind === "gateway" ? 14 : row.node?.device_class === "router" ? 20 : 16;
  return {
    id: row.id,
    kind: row.kind,
    label: row.id,
    device_class: row.node?.device_class ?? null,
    os_name: row.node?.os_name ?? null,
    x,
    y,
    radius,
    depth: row.depth,
    status: "unchanged",
  };
}

function layoutVertices(rows: Map<string, TreeRow>): Map<string, VertexDoc> {
  const byDepth = new Map<number, TreeRow[]>();
  for (const row of [...rows.values()].sort((a, b) => a.id.localeCompare(b.id))) {
    const bucket = byDepth.get(row.depth) ?? [];
    bucket.push(row);
    byDepth.set(row.depth, bucket);
  }
  const vertices = new Map<string, VertexDoc>();
  for (const [depth, bucket] of byDepth) {
    bucket.forEach((row, i) => {
      const y = (i - (bucket.length - 1) / 2) * 80;
      vertices.set(row.id, vertexFor(row, depth * 170, y));
    });
  }
  return vertices;
}

function structuralEdges(rows: Map<string, TreeRow>): EdgeDoc[] {
  const edges: EdgeDoc[] = [];
  for (const row of [...rows.values()].sort((a, b) => a.id.localeCompare(b.id))) {
    if (row.parent === null || !rows.has(row.parent)) {
      continue;
    }
    edges.push({
      from: row.id,
      to: row.parent,
      method: row.node?.gateway?.method ?? "trace",
      confidence: row.node?.gateway?.confidence ?? 0.9,
      status: "unchanged",
      structural: true,
    });
  }
  return edges;
}

function minGroup(aggregate: string | undefined): number | null {
  const mode = aggregate ?? "threshold:10";
  if (mode === "none") {
    return null;
  }
  if (mode === "os") {
    return 2;
  }
  if (mode.startsWith("threshold:")) {
    const n = Number(mode.slice("threshold:".length));
    if (!Number.isInteger(n) || n < 2) {
      throw new ApiError(422, `bad aggregation threshold '${mode}'`);
    }
    return n;
  }
  throw new ApiError(422, `unknown aggregation mode '${mode}'`);
}

export class MockApi implements ApiClient {
  snapshots: Snapshot[] = [];
  calls: string[] = [];
  private failQueue: string[] = [];
  private busy = false;
  private runs = new Map<string, RunReportDoc>();
  private runCounter = 0;

  constructor() {
    const nodes = new Map<string, MockNode>();
    for (const [id, os, cls, gateway] of FIXTURE) {
      nodes.set(id, {
        id,
        os_name: os,
        device_class: cls,
        gateway: gateway === null ? null : { address: gateway, method: "trace", confidence: 0.9 },
        manual: false,
      });
    }
    this.snapshots.push({
      seq: 1,
      author: "scan_run",
      message: "scan 'default' iteration 1",
      created_at: stamp(1),
      nodes,
    });
  }

  // -- test controls ---------------------------------------------------------

  /** Make the next API call fail with a connection-style error. */
  failNext(message = "connection refused"): void {
    this.failQueue.push(message);
  }

  /** Put the service in "a scan is running" mode for write endpoints. */
  setBusy(busy: boolean): void {
    this.busy = busy;
  }

  /** Commit an arbitrary dataset mutation, as another writer would. */
  commitMutation(author: string, message: string, mutate: (nodes: Map<string, MockNode>) => void): number {
    const nodes = cloneNodes(this.head().nodes);
    mutate(nodes);
    return this.commit(author, message, nodes);
  }

  head(): Snapshot {
    return this.snapshots[this.snapshots.length - 1];
  }

  private commit(author: string, message: string, nodes: Map<string, MockNode>): number {
    const seq = this.head().seq + 1;
    this.snapshots.push({ seq, author, message, created_at: stamp(seq), nodes });
    return seq;
  }

  private snapshot(seq: number): Snapshot {
    const found = this.snapshots.find((s) => s.seq === seq);
    if (found === undefined) {
      throw new ApiError(404, `no version ${seq}`);
    }
    return found;
  }

  private gate(endpoint: string): void {
    this.calls.push(endpoint);
    const failure = this.failQueue.shift();
    if (failure !== undefined) {
      throw new ApiError(0, `service unreachable: ${failure}`);
    }
  }

  private rejectWhileScanning(): void {
    if (this.busy) {
      throw new ApiError(409, "a scan is running; retry when it finishes");
    }
  }

  // -- read endpoints -----------------------------------------------------------

  async health(): Promise<HealthDoc> {
    this.gate("health");
    return { status: "ok", mode: "simulated", head: this.head().seq };
  }

  async modules(): Promise<ModuleDescriptor[]> {
    this.gate("modules");
    return MODULES.map((m) => ({ ...m, supported_options: [...m.supported_options] }));
  }

  async versions(): Promise<VersionInfo[]> {
    this.gate("versions");
    return this.snapshots.map((s) => ({
      seq: s.seq,
      digest: `digest-${s.seq}`,
      author: s.author,
      message: s.message,
      created_at: s.created_at,
    }));
  }

  async graph(seq: number, aggregate?: string): Promise<GraphDoc> {
    this.gate(`graph:${seq}:${aggregate ?? ""}`);
    const snapshot = this.snapshot(seq);
    const group = minGroup(aggregate);
    const rows = buildRows(snapshot.nodes);
    const vertices = layoutVertices(rows);
    let edges = structuralEdges(rows);
    let out = [...vertices.values()];

    if (group !== null) {
      // collapse same-OS leaf hosts under one parent into bubble vertices
      const children = new Map<string, TreeRow[]>();
      for (const row of rows.values()) {
        if (row.parent !== null) {
          const bucket = children.get(row.parent) ?? [];
          bucket.push(row);
          children.set(row.parent, bucket);
        }
      }
      const absorbed = new Set<string>();
      const bubbles: VertexDoc[] = [];
      for (const [parent, kids] of [...children].sort()) {
        const leaves = kids.filter(
          (k) =>
            k.node !== null &&
            k.node.device_class !== "router" &&
            (children.get(k.id) ?? []).length === 0,
        );
        const byOs = new Map<string, TreeRow[]>();
        for (const leaf of leaves) {
          const os = leaf.node!.os_name;
          byOs.set(os, [...(byOs.get(os) ?? []), leaf]);
        }
        for (const [os, members] of [...byOs].sort()) {
          if (members.length < group) {
            continue;
          }
          const ids = members.map((m) => m.id).sort();
          for (const id of ids) {
            absorbed.add(id);
          }
          const anchor = vertices.get(ids[0])!;
          bubbles.push({
            id: `bubble:${parent}:${os}`,
            kind: "bubble",
            label: `${os} (${ids.length})`,
            device_class: null,
            os_name: os,
            x: anchor.x,
            y: anchor.y,
            radius: 18 + 6 * Math.sqrt(ids.length),
            depth: anchor.depth,
            status: "unchanged",
            members: ids,
            count: ids.length,
          });
          edges.push({
            from: `bubble:${parent}:${os}`,
            to: parent,
            method: "trace",
            confidence: 0.9,
            status: "unchanged",
            structural: true,
          });
        }
      }
      out = [...out.filter((v) => !absorbed.has(v.id)), ...bubbles];
      edges = edges.filter((e) => !absorbed.has(e.from) && !absorbed.has(e.to));
    }

    return {
      root: rows.size > 0 ? ROOT : null,
      aggregation: aggregate ?? "threshold:10",
      max_depth: Math.max(0, ...out.map((v) => v.depth)),
      vertices: out,
      edges,
    };
  }

  async node(seq: number, nodeId: string): Promise<NodeViewDoc> {
    this.gate(`node:${seq}:${nodeId}`);
    const snapshot = this.snapshot(seq);
    const node = snapshot.nodes.get(nodeId);
    if (node === undefined) {
      throw new ApiError(404, `no node ${nodeId} in version ${seq}`);
    }
    const rows = buildRows(snapshot.nodes);
    const portscan: ObservationDoc = {
      tool_name: "portscan",
      tool_options: "",
      iteration: 1,
      timestamp: snapshot.created_at,
      status: "up",
      ports:
        node.device_class === "router"
          ? [
              { port: 22, protocol: "tcp", state: "open", service_name: "ssh" },
              { port: 161, protocol: "udp", state: "open", service_name: "snmp" },
            ]
          : [{ port: 22, protocol: "tcp", state: "open", service_name: "ssh" }],
      os_guesses: [
        {
          name: node.os_name,
          os_class: node.device_class === "router" ? "router" : "general purpose",
          accuracy: 90,
        },
      ],
      trace: {
        hops: [{ position: 1, address: node.gateway?.address ?? node.id, rtt_ms: 1.0 }],
        complete: true,
      },
      snmp: null,
      note: null,
    };
    const perTool: Record<string, ObservationDoc> = { portscan };
    if (node.device_class === "router") {
      const neighbors = [...rows.values()]
        .filter((r) => r.parent === node.id)
        .map((r, i) => ({ address: r.id, mac: `02:00:00:00:00:${String(i).padStart(2, "0")}` }));
      perTool["snmpwalk"] = {
        ...portscan,
        tool_name: "snmpwalk",
        ports: [],
        trace: null,
        snmp: { system_description: `${node.os_name} on ${node.id}`, neighbors },
      };
    }
    return {
      node_id: nodeId,
      per_tool: perTool,
      summary: {
        status: "up",
        ports: portscan.ports,
        os: portscan.os_guesses[0],
        hostnames: [],
        hostname_conflict: false,
        device_class: node.device_class,
        gateway:
          node.gateway === null
            ? null
            : {
                node_id: nodeId,
                gateway_address: node.gateway.address,
                method: node.gateway.method,
                confidence: node.gateway.confidence,
                iteration: 1,
              },
        first_seen_iteration: 1,
        addresses: [nodeId],
      },
    };
  }

  async diff(a: number, b: number): Promise<DiffDoc> {
    this.gate(`diff:${a}:${b}`);
    const before = this.snapshot(a).nodes;
    const after = this.snapshot(b).nodes;
    const added = [...after.keys()].filter((id) => !before.has(id)).sort();
    const removed = [...before.keys()].filter((id) => !after.has(id)).sort();
    const changed: DiffNodeChange[] = [];
    for (const [id, now] of [...after].sort()) {
      const was = before.get(id);
      if (was === undefined) {
        continue;
      }
      const gatewayMoved = was.gateway?.address !== now.gateway?.address;
      const methodMoved = was.gateway?.method !== now.gateway?.method;
      if (gatewayMoved || methodMoved) {
        const entry: DiffNodeChange = { node_id: id, fields: ["gateway"] };
        if (gatewayMoved) {
          entry.gateway_change = [was.gateway?.address ?? "", now.gateway?.address ?? ""];
        }
        changed.push(entry);
      }
    }
    return { from_seq: a, to_seq: b, added_nodes: added, removed_nodes: removed, changed_nodes: changed };
  }

  async diffGraph(a: number, b: number): Promise<GraphDoc> {
    this.gate(`diffGraph:${a}:${b}`);
    const before = this.snapshot(a).nodes;
    const after = this.snapshot(b).nodes;
    const rowsA = buildRows(before);
    const rowsB = buildRows(after);

    // union: the newer tree wins, vanished vertices stay as removed ghosts
    const union = new Map(rowsB);
    for (const [id, row] of rowsA) {
      if (!union.has(id)) {
        union.set(id, { ...row, parent: union.has(row.parent ?? "") ? row.parent : null });
      }
    }
    const vertices = layoutVertices(union);
    const edges: EdgeDoc[] = [];
    for (const [id, vertex] of vertices) {
      const inA = rowsA.has(id);
      const inB = rowsB.has(id);
      if (!inB) {
        vertex.status = "removed";
      } else if (!inA) {
        vertex.status = "added";
      }
      const row = union.get(id)!;
      if (row.parent !== null && vertices.has(row.parent)) {
        const edge: EdgeDoc = {
          from: id,
          to: row.parent,
          method: row.node?.gateway?.method ?? "trace",
          confidence: row.node?.gateway?.confidence ?? 0.9,
          status: "unchanged",
          structural: true,
        };
        if (vertex.status === "removed") {
          edge.status = "removed";
        } else if (vertex.status === "added") {
          edge.status = "added";
        }
        if (inA && inB) {
          const oldParent = rowsA.get(id)!.parent;
          if (oldParent !== row.parent) {
            vertex.gateway_changed = true;
            edge.status = "added";
            if (oldParent !== null && vertices.has(oldParent)) {
              edges.push({
                from: id,
                to: oldParent,
                method: rowsA.get(id)!.node?.gateway?.method ?? "trace",
                confidence: rowsA.get(id)!.node?.gateway?.confidence ?? 0.9,
                status: "removed",
                structural: false,
              });
            }
          }
        }
        edges.push(edge);
      }
    }
    return {
      root: ROOT,
      aggregation: "none",
      max_depth: Math.max(0, ...[...vertices.values()].map((v) => v.depth)),
      vertices: [...vertices.values()],
      edges,
    };
  }

  async scanStatus(runId: string): Promise<RunReportDoc> {
    this.gate(`scanStatus:${runId}`);
    const run = this.runs.get(runId);
    if (run === undefined) {
      throw new ApiError(404, `no run ${runId}`);
    }
    return structuredClone(run);
  }

  // -- write endpoints ----------------------------------------------------------

  async startScan(request: ScanRequest): Promise<ScanStarted> {
    this.gate("startScan");
    this.rejectWhileScanning();
    if (request.targets.length === 0) {
      throw new ApiError(422, "bad scan request: no targets");
    }
    const chain = request.policy?.chain ?? [];
    const known = new Set(MODULES.map((m) => m.module_id));
    for (const entry of chain) {
      if (!known.has(entry.module_id)) {
        throw new ApiError(422, `bad scan request: unknown module '${entry.module_id}'`);
      }
    }
    const kinds = new Map(MODULES.map((m) => [m.module_id, m.kind]));
    const warnings =
      chain.length > 0 && !chain.some((e) => kinds.get(e.module_id) === "scanner")
        ? [{ severity: "warning", message: "chain has no scanner module" }]
        : [];

    this.runCounter += 1;
    const runId = `run-${String(this.runCounter).padStart(4, "0")}`;

    // automated re-observation of the fixture network; manual gateway
    // assignments are pinned fields and survive untouched
    const nodes = cloneNodes(this.head().nodes);
    for (const [id, os, cls, gateway] of FIXTURE) {
      const existing = nodes.get(id);
      if (existing === undefined) {
        nodes.set(id, {
          id,
          os_name: os,
          device_class: cls,
          gateway: gateway === null ? null : { address: gateway, method: "trace", confidence: 0.9 },
          manual: false,
        });
      } else if (!existing.manual) {
        existing.gateway =
          gateway === null ? null : { address: gateway, method: "trace", confidence: 0.9 };
      }
    }
    const seq = this.commit("scan_run", `scan '${request.policy?.name ?? "default"}' iteration 1`, nodes);
    const report: RunReportDoc = {
      run_id: runId,
      policy_name: request.policy?.name ?? "default",
      mode: "simulated",
      status: "done",
      iterations: [
        {
          iteration: 1,
          module_timings: chain.map((e) => ({ instance_id: e.module_id, duration_s: 0.01 })),
          duration_s: 0.05,
          cumulative_nodes: nodes.size,
          nodes_per_second: nodes.size / 0.05,
          version_seq: seq,
          notes: [],
        },
      ],
      early_stopped: false,
      error: null,
    };
    this.runs.set(runId, report);
    return { run_id: runId, status: "done", warnings };
  }

  async cancelScan(runId: string): Promise<RunReportDoc> {
    this.gate(`cancelScan:${runId}`);
    const run = this.runs.get(runId);
    if (run === undefined) {
      throw new ApiError(404, `no run ${runId}`);
    }
    if (run.status === "running") {
      run.status = "cancelled";
    }
    return structuredClone(run);
  }

  async setGateway(nodeId: string, gatewayAddress: string): Promise<GatewayCommit> {
    this.gate(`setGateway:${nodeId}`);
    this.rejectWhileScanning();
    const head = this.head();
    const node = head.nodes.get(nodeId);
    if (node === undefined) {
      throw new ApiError(404, `no node ${nodeId}`);
    }
    if (!isIpv4(gatewayAddress)) {
      throw new ApiError(422, `invalid gateway address ${JSON.stringify(gatewayAddress)}`);
    }
    const nodes = cloneNodes(head.nodes);
    const target = nodes.get(nodeId)!;
    target.gateway = { address: gatewayAddress, method: "manual", confidence: 1.0 };
    target.manual = true;
    const seq = this.commit("manual_edit", `manual gateway for ${nodeId}: ${gatewayAddress}`, nodes);
    return {
      version: seq,
      estimate: {
        node_id: nodeId,
        gateway_address: gatewayAddress,
        method: "manual",
        confidence: 1.0,
        iteration: 1,
      },
    };
  }

  async rollback(seq: number): Promise<RollbackResult> {
    this.gate(`rollback:${seq}`);
    this.rejectWhileScanning();
    const target = this.snapshot(seq);
    const version = this.commit("rollback", `rollback to version ${seq}`, cloneNodes(target.nodes));
    return { version, restored: seq };
  }
}
