// Manual gateway editing end to end: saving redraws the edge and commits a
// manual_edit version; a page reload reproduces the identical view from the
// service alone; and a later automated scan must not undo the manual edge.

import { describe, expect, it } from "vitest";
import { App } from "../src/app.js";
import { MockApi } from "./mock_api.js";

const NODE = "10.0.2.32";
const OLD_GATEWAY = "10.0.2.1";
const NEW_GATEWAY = "10.0.1.1";

function edgeTags(map: string): string[] {
  return (map.match(/<line [^>]*>[^<]*<title>[^<]*<\/title><\/line>/g) ?? []).filter((t) =>
    t.includes("data-from="),
  );
}

function edgeFrom(map: string, from: string): string[] {
  return edgeTags(map).filter((t) => t.includes(`data-from="${from}"`));
}

describe("gateway edit round trip", () => {
  it("saves the edit, commits a manual version, and redraws the edge", async () => {
    const api = new MockApi();
    const app = new App(api);
    await app.boot();
    await app.selectNode(NODE);

    await app.saveGateway(NODE, NEW_GATEWAY);

    expect(app.gatewayMessage).toBe("saved");
    const head = app.versions[app.versions.length - 1];
    expect(head.seq).toBe(2);
    expect(head.author).toBe("manual_edit");

    const view = app.render();
    const edges = edgeFrom(view.map, NODE);
    expect(edges).toHaveLength(1);
    expect(edges[0]).toContain(`data-to="${NEW_GATEWAY}"`);
    expect(edges[0]).toContain("manual, 1");
    expect(view.map).not.toContain(`data-from="${NODE}" data-to="${OLD_GATEWAY}"`);
    expect(view.panel).toContain("manual");
    expect(view.versions).toContain('class="author manual_edit"');
  });

  it("reproduces the identical view after a page reload", async () => {
    const api = new MockApi();
    const first = new App(api);
    await first.boot();
    await first.selectNode(NODE);
    await first.saveGateway(NODE, NEW_GATEWAY);
    // a later click elsewhere dismisses the transient "saved" flash
    await first.selectNode(NODE);

    const reloaded = new App(api);
    await reloaded.boot();
    await reloaded.selectNode(NODE);

    expect(reloaded.state.version).toBe(first.state.version);
    expect(reloaded.render()).toEqual(first.render());
  });

  it("keeps the manual edge through a subsequent scan run", async () => {
    const api = new MockApi();
    const app = new App(api);
    await app.boot();
    await app.saveGateway(NODE, NEW_GATEWAY);

    app.draft.targets = "10.0.0.0/16";
    await app.startScan();

    const head = app.versions[app.versions.length - 1];
    expect(head.seq).toBe(3);
    expect(head.author).toBe("scan_run");
    expect(app.run?.status).toBe("done");

    // the scan would have re-derived 10.0.2.1 for this host; the manual
    // assignment is a pinned field and must win
    const map = app.render().map;
    const edges = edgeFrom(map, NODE);
    expect(edges).toHaveLength(1);
    expect(edges[0]).toContain(`data-to="${NEW_GATEWAY}"`);
    expect(edges[0]).toContain("manual, 1");

    // a neighbor without manual edits is still re-derived as usual
    const bystander = edgeFrom(map, "10.0.2.31");
    expect(bystander).toHaveLength(1);
    expect(bystander[0]).toContain(`data-to="${OLD_GATEWAY}"`);
    expect(bystander[0]).toContain("trace");
  });

  it("rejects a malformed address without committing anything", async () => {
    const api = new MockApi();
    const app = new App(api);
    await app.boot();
    await app.selectNode(NODE);
    const before = app.render().map;

    await app.saveGateway(NODE, "not-an-address");

    expect(app.gatewayMessage).toMatch(/^not saved: /);
    expect(app.versions).toHaveLength(1);
    expect(app.render().map).toBe(before);

    await app.saveGateway(NODE, "10.0.300.1");
    expect(app.gatewayMessage).toMatch(/^not saved: /);
    expect(app.versions).toHaveLength(1);
  });

  it("turns a write conflict into a retry hint", async () => {
    const api = new MockApi();
    const app = new App(api);
    await app.boot();
    await app.selectNode(NODE);

    api.setBusy(true);
    await app.saveGateway(NODE, NEW_GATEWAY);
    expect(app.gatewayMessage).toBe("another change is in progress — retry in a moment");
    expect(app.versions).toHaveLength(1);

    api.setBusy(false);
    await app.saveGateway(NODE, NEW_GATEWAY);
    expect(app.gatewayMessage).toBe("saved");
    expect(app.versions).toHaveLength(2);
  });
});
