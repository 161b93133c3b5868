// Typed client for the netmapper HTTP API. Every byte of topology the UI
// shows comes through this interface; nothing is computed client-side.

import type {
  DiffDoc,
  GatewayCommit,
  GraphDoc,
  HealthDoc,
  ModuleDescriptor,
  NodeViewDoc,
  RollbackResult,
  RunReportDoc,
  ScanRequest,
  ScanStarted,
  VersionInfo,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

/** The service surface the UI consumes; MockApi in the tests mirrors it. */
export interface ApiClient {
  health(): Promise<HealthDoc>;
  modules(): Promise<ModuleDescriptor[]>;
  versions(): Promise<VersionInfo[]>;
  graph(seq: number, aggregate?: string): Promise<GraphDoc>;
  node(seq: number, nodeId: string): Promise<NodeViewDoc>;
  diff(a: number, b: number): Promise<DiffDoc>;
  diffGraph(a: number, b: number): Promise<GraphDoc>;
  scanStatus(runId: string): Promise<RunReportDoc>;
  startScan(request: ScanRequest): Promise<ScanStarted>;
  cancelScan(runId: string): Promise<RunReportDoc>;
  setGateway(nodeId: string, gatewayAddress: string): Promise<GatewayCommit>;
  rollback(seq: number): Promise<RollbackResult>;
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class Api implements ApiClient {
  constructor(private readonly fetchFn: FetchLike = (...args) => fetch(...args)) {}

  private async request<T>(url: string, init?: RequestInit): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchFn(url, init);
    } catch (err) {
      throw new ApiError(0, `service unreachable: ${String(err)}`);
    }
    if (!response.ok) {
      let detail = response.statusText;
      try {
        const body = await response.json();
        if (body && typeof body === "object" && "detail" in body) {
          detail = typeof body.detail === "string" ? body.detail : JSON.stringify(body.detail);
        }
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(response.status, detail);
    }
    return (await response.json()) as T;
  }

  private get<T>(url: string): Promise<T> {
    return this.request<T>(url);
  }

  private post<T>(url: string, body?: unknown): Promise<T> {
    return this.request<T>(url, {
      method: "POST",
      headers: body === undefined ? undefined : { "Content-Type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
  }

  health(): Promise<HealthDoc> {
    return this.get("/api/health");
  }

  modules(): Promise<ModuleDescriptor[]> {
    return this.get("/api/modules");
  }

  versions(): Promise<VersionInfo[]> {
    return this.get("/api/versions");
  }

  graph(seq: number, aggregate?: string): Promise<GraphDoc> {
    const query = aggregate ? `?aggregate=${encodeURIComponent(aggregate)}` : "";
    return this.get(`/api/versions/${seq}/graph${query}`);
  }

  node(seq: number, nodeId: string): Promise<NodeViewDoc> {
    return this.get(`/api/versions/${seq}/nodes/${encodeURIComponent(nodeId)}`);
  }

  diff(a: number, b: number): Promise<DiffDoc> {
    return this.get(`/api/diff/${a}/${b}`);
  }

  diffGraph(a: number, b: number): Promise<GraphDoc> {
    return this.get(`/api/diff/${a}/${b}/graph`);
  }

  scanStatus(runId: string): Promise<RunReportDoc> {
    return this.get(`/api/scans/${encodeURIComponent(runId)}`);
  }

  startScan(request: ScanRequest): Promise<ScanStarted> {
    return this.post("/api/scans", request);
  }

  cancelScan(runId: string): Promise<RunReportDoc> {
    return this.post(`/api/scans/${encodeURIComponent(runId)}/cancel`);
  }

  setGateway(nodeId: string, gatewayAddress: string): Promise<GatewayCommit> {
    return this.post(`/api/nodes/${encodeURIComponent(nodeId)}/gateway`, {
      gateway_address: gatewayAddress,
    });
  }

  rollback(seq: number): Promise<RollbackResult> {
    return this.post(`/api/rollback/${seq}`);
  }
}
