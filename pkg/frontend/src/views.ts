// HTML fragments for the side panels. Pure string builders: the host page
// swaps them into fixed regions and routes clicks by data-action markers.

import { escapeXml as esc } from "./svg.js";
import type { ViewState } from "./state.js";
import type {
  ChainEntry,
  DiffDoc,
  ModuleDescriptor,
  NodeViewDoc,
  ObservationDoc,
  RunReportDoc,
  VersionInfo,
} from "./types.js";

export function renderBanner(error: string | null): string {
  if (error === null) {
    return "";
  }
  return (
    `<div class="banner" role="alert">${esc(error)}` +
    `<button data-action="dismiss-error">dismiss</button></div>`
  );
}

export function renderToolbar(
  versions: VersionInfo[],
  state: ViewState,
  pendingCompare: number | null,
): string {
  const options = versions
    .map((v) => {
      const selected = v.seq === state.version ? " selected" : "";
      return `<option value="${v.seq}"${selected}>v${v.seq} — ${esc(v.message)}</option>`;
    })
    .reverse()
    .join("");
  const aggregations = ["threshold:10", "os", "none"]
    .map((mode) => {
      const selected = mode === state.aggregation ? " selected" : "";
      return `<option value="${mode}"${selected}>${mode}</option>`;
    })
    .join("");

  let compare: string;
  if (state.compare !== null) {
    const [a, b] = state.compare;
    compare =
      `<span class="compare-active">comparing v${a} → v${b}</span>` +
      `<button data-action="clear-compare">back to single view</button>`;
  } else if (pendingCompare !== null) {
    compare = `<span class="compare-pending">comparing v${pendingCompare} → pick the other version</span>`;
  } else {
    compare = `<span class="compare-hint">pick two versions to compare</span>`;
  }

  return (
    `<label>version <select data-action="select-version">${options}</select></label>` +
    `<label>aggregation <select data-action="set-aggregation">${aggregations}</select></label>` +
    `<span class="compare-controls">${compare}</span>`
  );
}

export function renderDiffSummary(diff: DiffDoc | null): string {
  if (diff === null) {
    return "";
  }
  const moved = diff.changed_nodes.filter((c) => c.gateway_change).length;
  return (
    `<div class="diff-summary">` +
    `<span class="added">+${diff.added_nodes.length} added</span> ` +
    `<span class="removed">−${diff.removed_nodes.length} removed</span> ` +
    `<span class="changed">${diff.changed_nodes.length} changed (${moved} gateways moved)</span>` +
    `</div>`
  );
}

export function renderVersionList(versions: VersionInfo[], state: ViewState): string {
  if (versions.length === 0) {
    return `<p class="hint">no versions yet — run a scan</p>`;
  }
  const head = versions[versions.length - 1].seq;
  const rows = [...versions]
    .reverse()
    .map((v) => {
      const classes = ["version"];
      if (v.seq === state.version) {
        classes.push("selected");
      }
      if (state.compare !== null && (state.compare as number[]).includes(v.seq)) {
        classes.push("comparing");
      }
      const time = v.created_at.replace("T", " ").slice(0, 19);
      const rollback =
        v.seq === head
          ? ""
          : `<button data-action="rollback" data-seq="${v.seq}">restore</button>`;
      return (
        `<li class="${classes.join(" ")}" data-action="select-version" data-seq="${v.seq}">` +
        `<span class="seq">v${v.seq}</span>` +
        `<span class="author ${esc(v.author)}">${esc(v.author)}</span>` +
        `<span class="message">${esc(v.message)}</span>` +
        `<time>${esc(time)}</time>` +
        `<button data-action="compare-pick" data-seq="${v.seq}">compare</button>` +
        rollback +
        `</li>`
      );
    })
    .join("");
  return `<ul class="versions">${rows}</ul>`;
}

function renderObservation(tool: string, obs: ObservationDoc): string {
  const parts = [`<section class="tool"><h4>${esc(tool)}</h4>`];
  parts.push(
    `<p class="obs-meta">iteration ${obs.iteration} · ${esc(obs.timestamp)} · ` +
      `status ${esc(obs.status)}${obs.tool_options ? ` · ${esc(obs.tool_options)}` : ""}</p>`,
  );
  if (obs.ports.length > 0) {
    const rows = obs.ports
      .map(
        (p) =>
          `<tr><td>${p.protocol}/${p.port}</td><td>${esc(p.state)}</td>` +
          `<td>${esc(p.service_name ?? "")}</td></tr>`,
      )
      .join("");
    parts.push(`<table class="ports"><tbody>${rows}</tbody></table>`);
  }
  if (obs.os_guesses.length > 0) {
    const guesses = obs.os_guesses
      .map((g) => `${esc(g.name)} (${esc(g.os_class)}, ${g.accuracy}%)`)
      .join(", ");
    parts.push(`<p class="os">OS: ${guesses}</p>`);
  }
  if (obs.trace !== null) {
    const hops = obs.trace.hops.map((h) => esc(h.address)).join(" → ");
    const tail = obs.trace.complete ? "" : " … (incomplete)";
    parts.push(`<p class="trace">trace: ${hops}${tail}</p>`);
  }
  if (obs.snmp !== null) {
    parts.push(
      `<p class="snmp">${esc(obs.snmp.system_description)} — ` +
        `${obs.snmp.neighbors.length} neighbors</p>`,
    );
  }
  if (obs.note !== null) {
    parts.push(`<p class="note">${esc(obs.note)}</p>`);
  }
  parts.push("</section>");
  return parts.join("\n");
}

export function renderNodePanel(view: NodeViewDoc | null, message: string | null): string {
  if (view === null) {
    return `<p class="hint">click a node on the map to inspect it</p>`;
  }
  const s = view.summary;
  const gateway = s.gateway
    ? `${esc(s.gateway.gateway_address)} <span class="method ${esc(s.gateway.method)}">` +
      `${esc(s.gateway.method)} · ${s.gateway.confidence}</span>`
    : "unknown";
  const parts = [
    `<h3>${esc(view.node_id)}</h3>`,
    `<dl class="summary">`,
    `<dt>addresses</dt><dd>${s.addresses.map(esc).join(", ")}</dd>`,
    `<dt>hostnames</dt><dd>${s.hostnames.map(esc).join(", ") || "—"}` +
      `${s.hostname_conflict ? ' <span class="conflict">(conflicting)</span>' : ""}</dd>`,
    `<dt>class</dt><dd>${esc(s.device_class)}</dd>`,
    `<dt>os</dt><dd>${s.os ? esc(s.os.name) : "—"}</dd>`,
    `<dt>gateway</dt><dd>${gateway}</dd>`,
    `</dl>`,
    `<form class="gateway-edit" data-action="save-gateway" data-id="${esc(view.node_id)}">`,
    `<label>default gateway <input name="gateway" value="${esc(
      s.gateway?.gateway_address ?? "",
    )}" placeholder="a.b.c.d"></label>`,
    `<button type="submit">save</button>`,
    `</form>`,
  ];
  if (message !== null) {
    parts.push(`<p class="gateway-message">${esc(message)}</p>`);
  }
  for (const [tool, obs] of Object.entries(view.per_tool)) {
    parts.push(renderObservation(tool, obs));
  }
  return parts.join("\n");
}

export interface ScanDraft {
  targets: string;
  iterations: number;
  scopeMode: "expand" | "enforce";
  chain: ChainEntry[];
}

export function chainWarning(chain: ChainEntry[], modules: ModuleDescriptor[]): string | null {
  if (chain.length === 0) {
    return "the chain is empty — add at least one module";
  }
  const kinds = new Map(modules.map((m) => [m.module_id, m.kind]));
  if (!chain.some((entry) => kinds.get(entry.module_id) === "scanner")) {
    return "no scanner in the chain — analyzers alone cannot discover new nodes";
  }
  return null;
}

export function renderScanConsole(
  modules: ModuleDescriptor[],
  draft: ScanDraft,
  run: RunReportDoc | null,
  message: string | null,
): string {
  const running = run !== null && run.status === "running";
  const chainRows = draft.chain
    .map((entry, i) => {
      const options = Object.entries(entry.options)
        .map(([k, v]) => `${esc(k)}=${esc(v)}`)
        .join(", ");
      return (
        `<li class="chain-entry">${esc(entry.module_id)}` +
        (options ? ` <span class="options">${options}</span>` : "") +
        `<button data-action="chain-remove" data-index="${i}">remove</button></li>`
      );
    })
    .join("");
  const moduleOptions = modules
    .map((m) => `<option value="${esc(m.module_id)}">${esc(m.module_id)} (${m.kind})</option>`)
    .join("");
  const warning = chainWarning(draft.chain, modules);

  const parts = [
    `<form class="scan-form" data-action="start-scan">`,
    `<label>targets <input name="targets" value="${esc(draft.targets)}" ` +
      `placeholder="10.0.0.5 10.1.0.0/24"></label>`,
    `<label>iterations <input name="iterations" type="number" min="1" ` +
      `value="${draft.iterations}"></label>`,
    `<label>scope <select name="scope_mode">` +
      `<option value="expand"${draft.scopeMode === "expand" ? " selected" : ""}>expand</option>` +
      `<option value="enforce"${draft.scopeMode === "enforce" ? " selected" : ""}>enforce</option>` +
      `</select></label>`,
    `<ol class="chain">${chainRows}</ol>`,
    warning !== null ? `<p class="chain-warning">${esc(warning)}</p>` : "",
    `<span class="chain-add"><select name="module">${moduleOptions}</select>` +
      `<input name="options" placeholder="ports=udp:161">` +
      `<button type="button" data-action="chain-add">add module</button></span>`,
    running
      ? `<button type="button" data-action="cancel-scan">cancel</button>`
      : `<button type="submit"${warning !== null ? " disabled" : ""}>launch scan</button>`,
    `</form>`,
  ];
  if (run !== null) {
    const iterations = run.iterations
      .map((it) => `iteration ${it.iteration}: ${it.cumulative_nodes} nodes`)
      .join(" · ");
    parts.push(
      `<p class="run-status ${esc(run.status)}">run ${esc(run.run_id)}: ${esc(run.status)}` +
        (iterations ? ` — ${iterations}` : "") +
        (run.error !== null ? ` — ${esc(run.error)}` : "") +
        `</p>`,
    );
  }
  if (message !== null) {
    parts.push(`<p class="scan-message">${esc(message)}</p>`);
  }
  return parts.filter((p) => p !== "").join("\n");
}
