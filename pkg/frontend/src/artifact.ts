/** Pure helpers over artifact documents (the JSON trees the API returns). */

import type { ArtifactDoc, ProductionDoc } from "./types.js";

/** One-line rendering: `A[B ; C?]` — `;` sequential, `|` parallel,
 * `X?` unlocked bud, `X!` locked bud, `X` developed leaf. */
export function compact(node: ArtifactDoc): string {
  if (node.state === "unlocked") return `${node.label}?`;
  if (node.state === "locked") return `${node.label}!`;
  if (node.children.length === 0) return node.label;
  const sep = node.production?.annotation === "par" ? " | " : " ; ";
  return `${node.label}[${node.children.map(compact).join(sep)}]`;
}

/** `lhs → a ⨟ b` / `lhs → a ∥ b` / `lhs → ε` for buttons and logs. */
export function productionText(p: ProductionDoc): string {
  if (p.rhs.length === 0) return `${p.lhs} → ε`;
  const sep = p.annotation === "par" ? " ∥ " : " ⨟ ";
  return `${p.lhs} → ${p.rhs.join(sep)}`;
}

/** Every label occurring in the tree. */
export function labelsOf(node: ArtifactDoc): Set<string> {
  const out = new Set<string>();
  const stack = [node];
  while (stack.length > 0) {
    const n = stack.pop()!;
    out.add(n.label);
    stack.push(...n.children);
  }
  return out;
}

/** Depth-first addresses of all buds, with their lock state. */
export function budAddresses(
  node: ArtifactDoc,
): { addr: number[]; label: string; unlocked: boolean }[] {
  const out: { addr: number[]; label: string; unlocked: boolean }[] = [];
  const walk = (n: ArtifactDoc, addr: number[]) => {
    if (n.state !== "developed") {
      out.push({ addr, label: n.label, unlocked: n.state === "unlocked" });
    }
    n.children.forEach((c, i) => walk(c, [...addr, i]));
  };
  walk(node, []);
  return out;
}

/** Structuring sorts (`#S1`, …) are neutral glue, not process content. */
export function isStructuring(label: string): boolean {
  return label.startsWith("#");
}

export function sameAddr(a: number[], b: number[]): boolean {
  return a.length === b.length && a.every((x, i) => x === b[i]);
}

export function sameProduction(a: ProductionDoc, b: ProductionDoc): boolean {
  return (
    a.lhs === b.lhs &&
    a.annotation === b.annotation &&
    a.rhs.length === b.rhs.length &&
    a.rhs.every((x, i) => x === b.rhs[i])
  );
}
