// Document shapes served by the netmapper HTTP API (see docs/schema.md).

export type ChangeStatus = "unchanged" | "added" | "removed" | "changed";

export type VertexKind = "node" | "gateway" | "unplaced" | "bubble";

export interface VertexDoc {
  id: string;
  kind: VertexKind;
  label: string;
  device_class: string | null;
  os_name: string | null;
  x: number;
  y: number;
  radius: number;
  depth: number;
  status: ChangeStatus;
  gateway_changed?: boolean;
  members?: string[];
  count?: number;
}

export interface EdgeDoc {
  from: string;
  to: string;
  method: string;
  confidence: number;
  status: ChangeStatus;
  structural: boolean;
}

export interface GraphDoc {
  root: string | null;
  aggregation: string;
  max_depth: number;
  vertices: VertexDoc[];
  edges: EdgeDoc[];
}

export interface VersionInfo {
  seq: number;
  digest: string;
  author: string;
  message: string;
  created_at: string;
}

export interface ModuleDescriptor {
  module_id: string;
  kind: "scanner" | "analyzer";
  supported_options: string[];
  mode: string;
}

export interface PortDoc {
  port: number;
  protocol: string;
  state: string;
  service_name: string | null;
}

export interface OsGuessDoc {
  name: string;
  os_class: string;
  accuracy: number;
}

export interface HopDoc {
  position: number;
  address: string;
  rtt_ms: number | null;
}

export interface TraceDoc {
  hops: HopDoc[];
  complete: boolean;
}

export interface SnmpDoc {
  system_description: string;
  neighbors: { address: string; mac: string }[];
}

export interface ObservationDoc {
  tool_name: string;
  tool_options: string;
  iteration: number;
  timestamp: string;
  status: string;
  ports: PortDoc[];
  os_guesses: OsGuessDoc[];
  trace: TraceDoc | null;
  snmp: SnmpDoc | null;
  note: string | null;
}

export interface GatewayEstimateDoc {
  node_id: string;
  gateway_address: string;
  method: string;
  confidence: number;
  iteration: number;
}

export interface NodeSummaryDoc {
  status: string;
  ports: PortDoc[];
  os: OsGuessDoc | null;
  hostnames: string[];
  hostname_conflict: boolean;
  device_class: string;
  gateway: GatewayEstimateDoc | null;
  first_seen_iteration: number;
  addresses: string[];
}

export interface NodeViewDoc {
  node_id: string;
  per_tool: Record<string, ObservationDoc>;
  summary: NodeSummaryDoc;
}

export interface DiffNodeChange {
  node_id: string;
  fields: string[];
  gateway_change?: [string, string];
}

export interface DiffDoc {
  from_seq: number;
  to_seq: number;
  added_nodes: string[];
  removed_nodes: string[];
  changed_nodes: DiffNodeChange[];
}

export interface IterationReportDoc {
  iteration: number;
  module_timings: { instance_id: string; duration_s: number }[];
  duration_s: number;
  cumulative_nodes: number;
  nodes_per_second: number;
  version_seq: number | null;
  notes: string[];
}

export interface RunReportDoc {
  run_id: string;
  policy_name: string;
  mode: string;
  status: "running" | "done" | "failed" | "cancelled";
  iterations: IterationReportDoc[];
  early_stopped: boolean;
  error: string | null;
}

export interface ChainEntry {
  module_id: string;
  options: Record<string, string>;
}

export interface PolicyDoc {
  name: string;
  iterations: number;
  chain: ChainEntry[];
  scope?: string[];
}

export interface ScanRequest {
  targets: string[];
  policy?: PolicyDoc;
  iterations?: number;
  scope_mode?: "enforce" | "expand";
}

export interface ScanStarted {
  run_id: string;
  status: string;
  warnings: { severity: string; message: string }[];
}

export interface GatewayCommit {
  version: number;
  estimate: GatewayEstimateDoc;
}

export interface RollbackResult {
  version: number;
  restored: number;
}

export interface HealthDoc {
  status: string;
  mode: string;
  head: number | null;
}
