/** Minimal virtual-tree mounting: rebuild the container on every render.
 *
 * The trees here are tiny (one case at a time), so replacing the subtree is
 * simpler and more predictable than diffing.
 */

import type { Child, Props, VNode } from "./render.js";

export function mount(vnode: VNode, container: Element): void {
  container.replaceChildren(build(vnode));
}

function build(node: Child): globalThis.Node {
  if (typeof node === "string") {
    return document.createTextNode(node);
  }
  const el = document.createElement(node.tag);
  applyProps(el, node.props);
  for (const child of node.children) {
    el.appendChild(build(child));
  }
  return el;
}

function applyProps(el: HTMLElement, props: Props): void {
  if (props.class !== undefined) el.className = props.class;
  if (props.title !== undefined) el.title = props.title;
  if (props.disabled && "disabled" in el) {
    (el as HTMLButtonElement).disabled = true;
  }
  if (props.value !== undefined && "value" in el) {
    (el as HTMLSelectElement).value = props.value;
  }
  if (props.selected && el instanceof HTMLOptionElement) {
    el.selected = true;
  }
  if (props.onClick !== undefined) {
    el.addEventListener("click", props.onClick);
  }
  if (props.onChange !== undefined) {
    const onChange = props.onChange;
    el.addEventListener("change", (event) => {
      onChange((event.target as HTMLSelectElement).value);
    });
  }
}
