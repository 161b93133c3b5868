// Renders a graph document to SVG markup. Coordinates, radii, aggregation
// and change statuses all arrive server-computed; the only geometry added
// here is the in-place reveal of an expanded bubble's members, which stays
// inside the disc the server already reserved for the bubble.

import type { GraphDoc, VertexDoc } from "./types.js";

const MARGIN = 50;
const GOLDEN_ANGLE = 2.399963229728653;

export interface MapView {
  expanded: Set<string>;
  selectedNode: string | null;
  /** Draw the added/removed legend (compare mode). */
  legend: boolean;
}

export function escapeXml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function fmt(value: number): string {
  return value.toFixed(2);
}

/** Deterministic sunflower packing of n points inside a unit disc. */
function discPoints(n: number): { x: number; y: number }[] {
  const points: { x: number; y: number }[] = [];
  for (let i = 0; i < n; i++) {
    const r = Math.sqrt((i + 0.5) / n);
    const theta = i * GOLDEN_ANGLE;
    points.push({ x: r * Math.cos(theta), y: r * Math.sin(theta) });
  }
  return points;
}

function vertexClasses(v: VertexDoc, view: MapView): string {
  const classes = ["vertex"];
  if (v.device_class === "router") {
    classes.push("router");
  }
  if (v.kind !== "node") {
    classes.push(v.kind);
  }
  if (v.status !== "unchanged") {
    classes.push(v.status);
  }
  if (v.gateway_changed === true) {
    classes.push("changed");
  }
  if (v.kind === "bubble" && view.expanded.has(v.id)) {
    classes.push("expanded");
  }
  if (view.selectedNode !== null && v.id === view.selectedNode) {
    classes.push("selected");
  }
  return classes.join(" ");
}

function renderMembers(v: VertexDoc, view: MapView): string[] {
  const members = v.members ?? [];
  if (members.length === 0) {
    return [];
  }
  const dot = Math.min(9, (0.42 * v.radius) / Math.sqrt(members.length));
  const reach = v.radius - dot - 3;
  const points = discPoints(members.length);
  const parts: string[] = [];
  members.forEach((address, i) => {
    const x = v.x + reach * points[i].x;
    const y = v.y + reach * points[i].y;
    const selected = address === view.selectedNode ? " selected" : "";
    parts.push(
      `<circle class="member${selected}" data-action="select-node" ` +
        `data-id="${escapeXml(address)}" cx="${fmt(x)}" cy="${fmt(y)}" r="${fmt(dot)}">` +
        `<title>${escapeXml(address)}</title></circle>`,
    );
  });
  return parts;
}

function renderLegend(x: number, y: number): string {
  const rows: [string, string][] = [
    ["added", "added"],
    ["removed", "removed"],
    ["changed", "gateway moved"],
  ];
  const parts = [`<g class="legend" transform="translate(${fmt(x)} ${fmt(y)})">`];
  parts.push(`<rect x="0" y="0" width="150" height="${rows.length * 22 + 10}" rx="6"/>`);
  rows.forEach(([status, caption], i) => {
    const rowY = 16 + i * 22;
    parts.push(`<line class="edge ${status}" x1="10" y1="${rowY}" x2="40" y2="${rowY}"/>`);
    parts.push(`<text x="48" y="${rowY + 4}">${escapeXml(caption)}</text>`);
  });
  parts.push("</g>");
  return parts.join("\n");
}

export function renderMap(doc: GraphDoc, view: MapView): string {
  if (doc.vertices.length === 0) {
    return (
      '<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 400 120">' +
      '<text class="placeholder" x="200" y="60">nothing scanned yet</text></svg>'
    );
  }

  const loX = Math.min(...doc.vertices.map((v) => v.x - v.radius)) - MARGIN;
  const loY = Math.min(...doc.vertices.map((v) => v.y - v.radius)) - MARGIN;
  const hiX = Math.max(...doc.vertices.map((v) => v.x + v.radius)) + MARGIN;
  const hiY = Math.max(...doc.vertices.map((v) => v.y + v.radius)) + MARGIN;

  const position = new Map(doc.vertices.map((v) => [v.id, v]));
  const parts = [
    `<svg xmlns="http://www.w3.org/2000/svg" ` +
      `viewBox="${fmt(loX)} ${fmt(loY)} ${fmt(hiX - loX)} ${fmt(hiY - loY)}" ` +
      `preserveAspectRatio="xMidYMid meet">`,
  ];

  for (const e of doc.edges) {
    const a = position.get(e.from);
    const b = position.get(e.to);
    if (!a || !b) {
      continue;
    }
    const status = e.status === "unchanged" ? "" : ` ${e.status}`;
    parts.push(
      `<line class="edge${status}" data-from="${escapeXml(e.from)}" ` +
        `data-to="${escapeXml(e.to)}" x1="${fmt(a.x)}" y1="${fmt(a.y)}" ` +
        `x2="${fmt(b.x)}" y2="${fmt(b.y)}">` +
        `<title>${escapeXml(`${e.from} → ${e.to} (${e.method}, ${e.confidence})`)}</title></line>`,
    );
  }

  for (const v of doc.vertices) {
    const action = v.kind === "bubble" ? "toggle-bubble" : "select-node";
    parts.push(
      `<circle class="${vertexClasses(v, view)}" data-action="${action}" ` +
        `data-id="${escapeXml(v.id)}" cx="${fmt(v.x)}" cy="${fmt(v.y)}" r="${fmt(v.radius)}">` +
        `<title>${escapeXml(v.label)}</title></circle>`,
    );
    if (v.kind === "bubble" && view.expanded.has(v.id)) {
      parts.push(...renderMembers(v, view));
    }
    parts.push(
      `<text class="label" x="${fmt(v.x)}" y="${fmt(v.y + v.radius + 12)}">` +
        `${escapeXml(v.label)}</text>`,
    );
  }

  if (view.legend) {
    parts.push(renderLegend(loX + 10, loY + 10));
  }
  parts.push("</svg>");
  return parts.join("\n");
}
