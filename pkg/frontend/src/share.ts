// Student-facing chat page for a published bot. One ephemeral session per
// page load; the session id comes from the first reply.

import { ApiError, Client } from "./api";

export interface ShareHandle {
  ready: Promise<void>;
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function initShare(root: HTMLElement, client: Client, token: string): ShareHandle {
  let sessionId: string | undefined;

  root.innerHTML = "";
  const card = el("div", "share-card");
  card.dataset.testid = "share-card";
  const heading = el("h1", "share-title");
  const blurb = el("p", "share-description");
  card.append(heading, blurb);

  const log = el("div", "share-log");
  log.dataset.testid = "share-log";

  const form = el("div", "share-form");
  const input = el("input", "share-input");
  input.dataset.testid = "share-input";
  input.placeholder = "Ask the tutor…";
  const send = el("button", "share-send", "Send");
  send.dataset.testid = "share-send";
  form.append(input, send);

  root.append(card, log, form);

  function addBubble(role: "student" | "bot", text: string): void {
    log.appendChild(el("div", `share-bubble share-bubble-${role}`, text));
  }

  async function sendMessage(): Promise<void> {
    const message = input.value.trim();
    if (!message) return;
    input.value = "";
    addBubble("student", message);
    try {
      const result = await client.shareMessage(token, message, sessionId);
      sessionId = result.session_id;
      addBubble("bot", result.reply);
    } catch (err) {
      const note = el(
        "div",
        "share-error",
        err instanceof ApiError ? err.message : String(err),
      );
      note.dataset.testid = "share-error";
      log.appendChild(note);
    }
  }

  send.onclick = () => void sendMessage();
  input.onkeydown = (event) => {
    if (event.key === "Enter") void sendMessage();
  };

  const ready = (async () => {
    try {
      const info = await client.shareCard(token);
      heading.textContent = info.title;
      blurb.textContent = info.description;
    } catch (err) {
      heading.textContent = "Bot not found";
      blurb.textContent = err instanceof ApiError ? err.message : String(err);
    }
  })();

  return { ready };
}
