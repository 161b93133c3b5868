// Page shell: renders the App's markup into fixed regions and routes DOM
// events back to it by data-action markers. All behavior lives in app.ts.

import { Api } from "./api.js";
import { App, type Rendered } from "./app.js";

const POLL_MS = 700;

function region(id: string): HTMLElement {
  const el = document.getElementById(id);
  if (el === null) {
    throw new Error(`missing page region #${id}`);
  }
  return el;
}

function paint(rendered: Rendered): void {
  region("banner").innerHTML = rendered.banner;
  region("toolbar").innerHTML = rendered.toolbar;
  region("map").innerHTML = rendered.map;
  region("diff-summary").innerHTML = rendered.diffSummary;
  region("versions").innerHTML = rendered.versions;
  region("panel").innerHTML = rendered.panel;
  region("console").innerHTML = rendered.console;
}

function formValue(form: HTMLFormElement, name: string): string {
  const field = form.elements.namedItem(name);
  return field instanceof HTMLInputElement || field instanceof HTMLSelectElement
    ? field.value
    : "";
}

async function main(): Promise<void> {
  const app = new App(new Api());
  const repaint = () => paint(app.render());

  document.addEventListener("click", (event) => {
    const target = (event.target as HTMLElement).closest<HTMLElement>("[data-action]");
    if (target === null || target instanceof HTMLFormElement) {
      return;
    }
    const action = target.dataset.action ?? "";
    const id = target.dataset.id ?? "";
    const seq = Number(target.dataset.seq ?? "");
    const done = (work: Promise<void> | void) => Promise.resolve(work).then(repaint);
    switch (action) {
      case "select-node":
        event.stopPropagation();
        return void done(app.selectNode(id));
      case "toggle-bubble":
        event.stopPropagation();
        return void done(app.toggleBubble(id));
      case "select-version":
        if (target.tagName !== "SELECT") {
          return void done(app.selectVersion(seq));
        }
        return;
      case "compare-pick":
        event.stopPropagation();
        return void done(app.pickCompare(seq));
      case "clear-compare":
        return void done(app.clearCompare());
      case "rollback":
        event.stopPropagation();
        return void done(app.rollbackTo(seq));
      case "chain-remove":
        return void done(app.chainRemove(Number(target.dataset.index ?? "")));
      case "chain-add": {
        const form = target.closest("form");
        if (form !== null) {
          app.chainAdd(formValue(form, "module"), formValue(form, "options"));
        }
        return void done(undefined);
      }
      case "cancel-scan":
        return void done(app.cancelScan());
      case "dismiss-error":
        return void done(app.dismissError());
      default:
        return;
    }
  });

  document.addEventListener("change", (event) => {
    const target = event.target as HTMLElement;
    if (!(target instanceof HTMLSelectElement)) {
      return;
    }
    const action = target.dataset.action ?? "";
    if (action === "select-version") {
      void app.selectVersion(Number(target.value)).then(repaint);
    } else if (action === "set-aggregation") {
      void app.setAggregation(target.value).then(repaint);
    }
  });

  document.addEventListener("submit", (event) => {
    const form = event.target as HTMLFormElement;
    event.preventDefault();
    const action = form.dataset.action ?? "";
    if (action === "save-gateway") {
      void app
        .saveGateway(form.dataset.id ?? "", formValue(form, "gateway"))
        .then(repaint);
    } else if (action === "start-scan") {
      app.draft.targets = formValue(form, "targets");
      app.draft.iterations = Number(formValue(form, "iterations")) || 1;
      app.draft.scopeMode = formValue(form, "scope_mode") === "enforce" ? "enforce" : "expand";
      void app.startScan().then(repaint);
    }
  });

  window.setInterval(() => {
    if (app.run !== null && app.run.status === "running") {
      void app.pollRun().then(repaint);
    }
  }, POLL_MS);

  await app.boot();
  repaint();
}

void main();
