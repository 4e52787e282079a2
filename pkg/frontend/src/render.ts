/** Pure view layer: session state in, a virtual element tree out.
 *
 * The tree is plain data so tests can inspect exactly what an actor's screen
 * shows; `dom.ts` turns it into real elements in the browser.
 */

import { compact, productionText } from "./artifact.js";
import type { SessionState } from "./viewmodel.js";
import type { ArtifactDoc, ProductionDoc } from "./types.js";

export interface Props {
  class?: string;
  title?: string;
  disabled?: boolean;
  selected?: boolean;
  value?: string;
  onClick?: () => void;
  onChange?: (value: string) => void;
}

export interface VNode {
  tag: string;
  props: Props;
  children: Child[];
}

export type Child = VNode | string;

export function h(tag: string, props: Props = {}, ...children: Child[]): VNode {
  return { tag, props, children };
}

/** Everything the screen can ask the session (or the page) to do. */
export interface Handlers {
  switchActor(actor: string): void;
  createCase(): void;
  openCase(caseId: string): void;
  develop(addr: number[], production: ProductionDoc): void;
  commit(): void;
  chooseGuide(index: number): void;
  cancelGuides(): void;
  ack(): void;
  discard(): void;
}

export function render(state: SessionState, handlers: Handlers): VNode {
  return h(
    "div",
    { class: "workbench" },
    header(state, handlers),
    state.error !== null
      ? h("div", { class: "banner error" }, state.error)
      : "",
    h(
      "div",
      { class: "columns" },
      caseList(state, handlers),
      casePanel(state, handlers),
    ),
  );
}

function header(state: SessionState, handlers: Handlers): VNode {
  const actors = state.actorSpec?.actors ?? [state.actor];
  return h(
    "header",
    {},
    h("h1", {}, "arborflow workbench"),
    h(
      "select",
      { class: "actor-select", value: state.actor, onChange: handlers.switchActor },
      ...actors.map((a) =>
        h("option", { value: a, selected: a === state.actor }, a),
      ),
    ),
    h("span", { class: "role" }, `acting as ${state.actor}`),
  );
}

function caseList(state: SessionState, handlers: Handlers): VNode {
  const isInitiator = state.actorSpec?.initiator === state.actor;
  const rows = state.cases.map((row) => {
    const badges: Child[] = [];
    if (row.needsAck) badges.push(h("span", { class: "badge ack" }, "new delivery"));
    if (row.readyCount) {
      badges.push(h("span", { class: "badge ready" }, `${row.readyCount} ready`));
    }
    if (row.edited) badges.push(h("span", { class: "badge edited" }, "edited"));
    return h(
      "li",
      { class: row.id === state.caseId ? "case current" : "case" },
      h(
        "button",
        { class: "open-case", onClick: () => handlers.openCase(row.id) },
        `${row.id} — ${row.status}`,
      ),
      ...badges,
    );
  });
  return h(
    "nav",
    { class: "case-list" },
    h("h2", {}, "Cases"),
    h("ul", {}, ...rows),
    isInitiator
      ? h(
          "button",
          { class: "new-case", onClick: handlers.createCase, disabled: state.busy },
          "Start a new case",
        )
      : "",
  );
}

function casePanel(state: SessionState, handlers: Handlers): VNode {
  const doc = state.caseDoc;
  if (doc === null) {
    return h("section", { class: "case-panel empty" }, "Open a case to work on it.");
  }
  const parts: Child[] = [
    h("h2", {}, `${doc.id} — ${doc.status}`),
  ];
  if (doc.needsAck) {
    parts.push(
      h(
        "div",
        { class: "banner ack" },
        "A new version of the document arrived. ",
        h("button", { class: "ack", onClick: handlers.ack }, "Acknowledge"),
      ),
    );
  }
  if (state.lastRoute !== null) {
    parts.push(h("div", { class: "banner route" }, routeText(state.lastRoute)));
  }
  if (doc.replica !== null) {
    parts.push(
      h("h3", {}, "Your copy"),
      h("ul", { class: "artifact" }, artifactTree(doc.replica)),
    );
  } else if (doc.status === "active") {
    parts.push(h("p", { class: "elsewhere" }, "The case is currently with other actors."));
  }
  if (doc.readyTasks.length > 0) {
    parts.push(h("h3", {}, "Ready tasks"), ...doc.readyTasks.map(
      (task) =>
        h(
          "div",
          { class: "task" },
          h("span", { class: "sort" }, task.sort),
          ` at ${formatAddr(task.addr)}: `,
          ...task.productions.map((p) =>
            h(
              "button",
              {
                class: "production",
                disabled: state.busy,
                onClick: () => handlers.develop(task.addr, p),
              },
              productionText(p),
            ),
          ),
        ),
    ));
  }
  if (doc.replica !== null && doc.status === "active") {
    parts.push(
      h(
        "div",
        { class: "actions" },
        h(
          "button",
          { class: "commit", disabled: state.busy, onClick: handlers.commit },
          "Commit",
        ),
        h(
          "button",
          { class: "discard", disabled: state.busy || !doc.edited, onClick: handlers.discard },
          "Discard edits",
        ),
      ),
    );
  }
  if (state.guides !== null) {
    parts.push(guideDialog(state, handlers));
  }
  if (doc.status === "terminated" && doc.final != null) {
    parts.push(
      h("h3", {}, "Final document"),
      h("p", { class: "final compact" }, compact(doc.final)),
    );
  }
  if (doc.log.length > 0) {
    const tail = doc.log.slice(-8);
    parts.push(
      h("h3", {}, "Recent activity"),
      h(
        "ol",
        { class: "log" },
        ...tail.map((e) => h("li", {}, logLine(e))),
      ),
    );
  }
  return h("section", { class: "case-panel" }, ...parts);
}

function guideDialog(state: SessionState, handlers: Handlers): VNode {
  const guides = state.guides ?? [];
  return h(
    "div",
    { class: "guide-dialog" },
    h(
      "p",
      {},
      "Several execution scenarios fit this commit. Pick the intended one:",
    ),
    ...guides.map((g) =>
      h(
        "button",
        { class: "guide", onClick: () => handlers.chooseGuide(g.index) },
        g.compact,
      ),
    ),
    h("button", { class: "cancel", onClick: handlers.cancelGuides }, "Keep editing"),
  );
}

function artifactTree(node: ArtifactDoc): VNode {
  const marker =
    node.state === "unlocked" ? " ?" : node.state === "locked" ? " !" : "";
  const line: Child[] = [
    h("span", { class: `sort state-${node.state}` }, node.label),
    marker,
  ];
  if (node.children.length === 0) {
    return h("li", {}, ...line);
  }
  const ann = node.production?.annotation === "par" ? "∥" : "⨟";
  return h(
    "li",
    {},
    ...line,
    h("span", { class: "ann", title: ann === "∥" ? "parallel" : "sequential" }, ` ${ann}`),
    h("ul", {}, ...node.children.map(artifactTree)),
  );
}

function routeText(route: {
  mode: string;
  destinations: string[];
}): string {
  if (route.mode === "terminate") return "Committed — the case is complete.";
  if (route.destinations.length === 0) return "Committed.";
  return `Committed — sent to ${route.destinations.join(", ")}.`;
}

function formatAddr(addr: number[]): string {
  return addr.length === 0 ? "the root" : `[${addr.join(", ")}]`;
}

function logLine(e: { ts: number; op: string; [extra: string]: unknown }): string {
  const detail =
    e.op === "develop" && Array.isArray(e["addr"])
      ? ` at [${(e["addr"] as number[]).join(", ")}]`
      : e.op === "commit" && Array.isArray(e["destinations"])
        ? ` → ${(e["destinations"] as string[]).join(", ") || "done"}`
        : e.op === "receive"
          ? ` from ${String(e["sender"] ?? "?")}`
          : "";
  return `#${e.ts} ${e.op}${detail}`;
}

/** Concatenated text content (what a user reads on the screen). */
export function textOf(node: Child): string {
  if (typeof node === "string") return node;
  return node.children.map(textOf).join("");
}

/** All virtual elements matching a predicate, in document order. */
export function findAll(node: Child, pred: (n: VNode) => boolean): VNode[] {
  if (typeof node === "string") return [];
  const self = pred(node) ? [node] : [];
  return [...self, ...node.children.flatMap((c) => findAll(c, pred))];
}

export function findByClass(node: Child, cls: string): VNode[] {
  return findAll(node, (n) => (n.props.class ?? "").split(" ").includes(cls));
}
