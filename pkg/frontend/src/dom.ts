// Element construction helpers. Views build plain DOM trees; there is
// no virtual layer, a view re-renders by replacing its own children.

import { formatMoney } from "./format.js";
import type { Money } from "./model.js";

type Child = Node | string | null | undefined;

export function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, unknown> = {},
  ...children: Child[]
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    if (value === null || value === undefined || value === false) continue;
    if (key.startsWith("on") && typeof value === "function") {
      node.addEventListener(key.slice(2), value as EventListener);
    } else if (value === true) {
      node.setAttribute(key, "");
    } else {
      node.setAttribute(key, String(value));
    }
  }
  append(node, ...children);
  return node;
}

export function append(node: HTMLElement, ...children: Child[]): void {
  for (const child of children) {
    if (child === null || child === undefined) continue;
    node.append(child instanceof Node ? child : document.createTextNode(child));
  }
}

export function clear(node: HTMLElement): void {
  while (node.firstChild !== null) node.removeChild(node.firstChild);
}

/** Money rendered with the raw minor units attached, so scripts and
 *  tests can read the exact wire value back off the DOM. */
export function moneyEl(value: Money): HTMLElement {
  return el(
    "span",
    { class: "money", "data-minor": String(value.amount_minor) },
    formatMoney(value),
  );
}

export function stateBadge(state: string): HTMLElement {
  return el("span", { class: `badge state-${state}` }, state);
}

export function notice(kind: "ok" | "warn" | "error", ...children: Child[]): HTMLElement {
  return el("div", { class: `notice ${kind}` }, ...children);
}
