// Entry point: hash routing between the authoring page and the published
// chat page. The API base URL comes from the page (same origin by default,
// window.PROMPTDESK_API for a split deployment).

import { Client } from "./api";
import { initApp } from "./app";
import { initShare } from "./share";

declare global {
  interface Window {
    PROMPTDESK_API?: string;
  }
}

export function route(root: HTMLElement, client: Client, hash: string): void {
  const shareMatch = /^#\/share\/(.+)$/.exec(hash);
  if (shareMatch) {
    initShare(root, client, shareMatch[1]!);
    return;
  }
  const botMatch = /^#\/bots\/(.+)$/.exec(hash);
  initApp(root, client, botMatch?.[1]);
}

export function start(): void {
  const root = document.getElementById("app");
  if (!root) throw new Error("missing #app mount point");
  const client = new Client(window.PROMPTDESK_API ?? "");
  const rerender = () => route(root, client, window.location.hash);
  window.addEventListener("hashchange", rerender);
  rerender();
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  start();
}
