// The one stateful component: owns the view state, talks to the API, and
// renders every region to markup. The page shell (main.ts) only swaps the
// markup in and forwards user intents back here, so this whole surface is
// testable without a DOM.

import { ApiError, type ApiClient } from "./api.js";
import {
  clearCompare,
  initialState,
  pruneExpanded,
  selectNode,
  selectVersion,
  setAggregation,
  setCompare,
  toggleBubble,
  type ViewState,
} from "./state.js";
import { renderMap } from "./svg.js";
import {
  chainWarning,
  renderBanner,
  renderDiffSummary,
  renderNodePanel,
  renderScanConsole,
  renderToolbar,
  renderVersionList,
  type ScanDraft,
} from "./views.js";
import type {
  ChainEntry,
  DiffDoc,
  GraphDoc,
  ModuleDescriptor,
  NodeViewDoc,
  RunReportDoc,
  VersionInfo,
} from "./types.js";

const DEFAULT_CHAIN: ChainEntry[] = [
  { module_id: "portscan", options: {} },
  { module_id: "dgw-analyzer", options: {} },
  { module_id: "portscan", options: { ports: "udp:161" } },
  { module_id: "snmpwalk", options: {} },
];

export interface Rendered {
  banner: string;
  toolbar: string;
  map: string;
  diffSummary: string;
  versions: string;
  panel: string;
  console: string;
}

export class App {
  state: ViewState = initialState();
  versions: VersionInfo[] = [];
  modules: ModuleDescriptor[] = [];
  graph: GraphDoc | null = null;
  nodeView: NodeViewDoc | null = null;
  diffDoc: DiffDoc | null = null;
  run: RunReportDoc | null = null;
  draft: ScanDraft = {
    targets: "",
    iterations: 3,
    scopeMode: "expand",
    chain: DEFAULT_CHAIN.map((e) => ({ module_id: e.module_id, options: { ...e.options } })),
  };
  /** First half of a compare pair while the user picks the second. */
  pendingCompare: number | null = null;
  error: string | null = null;
  gatewayMessage: string | null = null;
  scanMessage: string | null = null;

  constructor(private readonly api: ApiClient) {}

  // -- loading ---------------------------------------------------------------

  async boot(): Promise<void> {
    this.modules = await this.guard(() => this.api.modules(), []) ?? [];
    await this.refreshVersions(true);
  }

  async refreshVersions(selectHead: boolean): Promise<void> {
    const versions = await this.guard(() => this.api.versions(), null);
    if (versions === null) {
      return;
    }
    this.versions = versions;
    const head = versions.length > 0 ? versions[versions.length - 1].seq : null;
    if (head !== null && (selectHead || this.state.version === null)) {
      this.state = selectVersion(this.state, head, this.knownSeqs());
      this.nodeView = null;
    }
    await this.loadGraph();
  }

  async loadGraph(): Promise<void> {
    if (this.state.compare !== null) {
      const [a, b] = this.state.compare;
      const graph = await this.guard(() => this.api.diffGraph(a, b), null);
      if (graph === null) {
        return;
      }
      this.graph = graph;
      this.diffDoc = await this.guard(() => this.api.diff(a, b), null);
    } else {
      if (this.state.version === null) {
        this.graph = null;
        return;
      }
      const seq = this.state.version;
      const graph = await this.guard(() => this.api.graph(seq, this.state.aggregation), null);
      if (graph === null) {
        return;
      }
      this.graph = graph;
      this.diffDoc = null;
    }
    this.state = pruneExpanded(this.state, this.graph);
  }

  // -- user intents ------------------------------------------------------------

  async selectVersion(seq: number): Promise<void> {
    this.state = selectVersion(clearCompare(this.state), seq, this.knownSeqs());
    this.nodeView = null;
    this.gatewayMessage = null;
    await this.loadGraph();
  }

  async setAggregation(mode: string): Promise<void> {
    this.state = setAggregation(this.state, mode);
    await this.loadGraph();
  }

  toggleBubble(bubbleId: string): void {
    if (this.graph !== null) {
      this.state = toggleBubble(this.state, bubbleId, this.graph);
    }
  }

  async selectNode(nodeId: string): Promise<void> {
    this.state = selectNode(this.state, nodeId);
    this.gatewayMessage = null;
    const seq = this.state.compare !== null ? this.state.compare[1] : this.state.version;
    if (seq === null) {
      return;
    }
    this.nodeView = await this.guard(() => this.api.node(seq, nodeId), null);
  }

  /** Two-click compare: first call stages, second call loads the pair. */
  async pickCompare(seq: number): Promise<void> {
    if (this.pendingCompare === null) {
      this.pendingCompare = seq;
      return;
    }
    const a = Math.min(this.pendingCompare, seq);
    const b = Math.max(this.pendingCompare, seq);
    this.pendingCompare = null;
    if (a === b) {
      return;
    }
    this.state = setCompare(this.state, a, b, this.knownSeqs());
    this.nodeView = null;
    await this.loadGraph();
  }

  async clearCompare(): Promise<void> {
    this.state = clearCompare(this.state);
    this.diffDoc = null;
    await this.loadGraph();
  }

  async saveGateway(nodeId: string, gatewayAddress: string): Promise<void> {
    this.gatewayMessage = null;
    try {
      await this.api.setGateway(nodeId, gatewayAddress.trim());
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        this.gatewayMessage = "another change is in progress — retry in a moment";
      } else if (err instanceof ApiError && err.status === 422) {
        this.gatewayMessage = `not saved: ${err.message}`;
      } else {
        this.fail(err);
      }
      return;
    }
    await this.refreshVersions(true);
    await this.selectNode(nodeId);
    this.gatewayMessage = "saved";
  }

  async rollbackTo(seq: number): Promise<void> {
    try {
      await this.api.rollback(seq);
    } catch (err) {
      this.fail(err);
      return;
    }
    await this.refreshVersions(true);
  }

  // -- scan console --------------------------------------------------------------

  chainAdd(moduleId: string, optionsText: string): void {
    const options: Record<string, string> = {};
    for (const pair of optionsText.split(",")) {
      const trimmed = pair.trim();
      if (trimmed === "") {
        continue;
      }
      const eq = trimmed.indexOf("=");
      if (eq > 0) {
        options[trimmed.slice(0, eq).trim()] = trimmed.slice(eq + 1).trim();
      }
    }
    this.draft.chain.push({ module_id: moduleId, options });
  }

  chainRemove(index: number): void {
    this.draft.chain.splice(index, 1);
  }

  async startScan(): Promise<void> {
    this.scanMessage = null;
    const targets = this.draft.targets.split(/[\s,]+/).filter((t) => t !== "");
    if (targets.length === 0) {
      this.scanMessage = "give at least one target address or block";
      return;
    }
    if (chainWarning(this.draft.chain, this.modules) !== null) {
      return;
    }
    let started;
    try {
      started = await this.api.startScan({
        targets,
        policy: { name: "console", iterations: this.draft.iterations, chain: this.draft.chain },
        scope_mode: this.draft.scopeMode,
      });
    } catch (err) {
      if (err instanceof ApiError && (err.status === 409 || err.status === 422)) {
        this.scanMessage = err.message;
      } else {
        this.fail(err);
      }
      return;
    }
    if (started.warnings.length > 0) {
      this.scanMessage = started.warnings.map((w) => w.message).join("; ");
    }
    this.run = await this.guard(() => this.api.scanStatus(started.run_id), null);
    if (this.run !== null && this.run.status !== "running") {
      await this.refreshVersions(true);
    }
  }

  /** Poll a running scan; refresh versions once it settles. */
  async pollRun(): Promise<void> {
    if (this.run === null || this.run.status !== "running") {
      return;
    }
    const runId = this.run.run_id;
    const report = await this.guard(() => this.api.scanStatus(runId), null);
    if (report === null) {
      return;
    }
    const settled = report.status !== "running";
    this.run = report;
    if (settled) {
      await this.refreshVersions(true);
    }
  }

  async cancelScan(): Promise<void> {
    if (this.run === null) {
      return;
    }
    const runId = this.run.run_id;
    this.run = await this.guard(() => this.api.cancelScan(runId), this.run);
    await this.refreshVersions(true);
  }

  dismissError(): void {
    this.error = null;
  }

  // -- rendering -------------------------------------------------------------

  render(): Rendered {
    return {
      banner: renderBanner(this.error),
      toolbar: renderToolbar(this.versions, this.state, this.pendingCompare),
      map:
        this.graph === null
          ? ""
          : renderMap(this.graph, {
              expanded: this.state.expanded,
              selectedNode: this.state.selectedNode,
              legend: this.state.compare !== null,
            }),
      diffSummary: renderDiffSummary(this.diffDoc),
      versions: renderVersionList(this.versions, this.state),
      panel: renderNodePanel(this.nodeView, this.gatewayMessage),
      console: renderScanConsole(this.modules, this.draft, this.run, this.scanMessage),
    };
  }

  // -- plumbing ----------------------------------------------------------------

  private knownSeqs(): number[] {
    return this.versions.map((v) => v.seq);
  }

  /** Run an API call; on failure raise the banner and return `fallback`. */
  private async guard<T, F>(call: () => Promise<T>, fallback: F): Promise<T | F> {
    try {
      return await call();
    } catch (err) {
      this.fail(err);
      return fallback;
    }
  }

  private fail(err: unknown): void {
    this.error = err instanceof Error ? err.message : String(err);
  }
}
