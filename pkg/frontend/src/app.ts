// DOM wiring for the chat page. Pure helpers live at the top so they can
// be unit tested without a DOM; everything below initApp touches elements.

import { ChatConnection, type ConnectionState } from "./connection.js";
import type { Frame, SessionInfo } from "./protocol.js";
import { parseRoster } from "./protocol.js";
import { MessageStore } from "./store.js";

/** Prefix text with the bot keyword unless it is already there. */
export function withPingPrefix(text: string, keyword: string): string {
  const trimmed = text.trimStart();
  if (trimmed.toLowerCase().startsWith(keyword.toLowerCase())) {
    return text;
  }
  return trimmed.length > 0 ? `${keyword} ${trimmed}` : `${keyword} `;
}

export function formatClock(tsMs: number): string {
  const date = new Date(tsMs);
  const hh = String(date.getHours()).padStart(2, "0");
  const mm = String(date.getMinutes()).padStart(2, "0");
  return `${hh}:${mm}`;
}

export function frameKind(frame: Frame, botName: string): "bot" | "system" | "self" | "peer" {
  if (frame.type === "system") {
    return "system";
  }
  if (frame.type === "bot_message" || frame.sender === botName) {
    return "bot";
  }
  return "peer";
}

export function statusLabel(state: ConnectionState): string {
  switch (state) {
    case "open":
      return "connected";
    case "connecting":
    case "logging_in":
      return "connecting";
    case "reconnect_wait":
      return "reconnecting";
    case "stopped":
      return "offline";
    default:
      return "idle";
  }
}

interface AppDeps {
  root: HTMLElement;
  session: SessionInfo;
  connection: ChatConnection;
  store: MessageStore;
}

export function initApp(deps: AppDeps): void {
  const { root, session, connection, store } = deps;
  const el = buildLayout(root, session);

  let myName: string | null = null;
  let everLoggedIn = false;
  let pendingText: string | null = null;
  let stickToBottom = true;

  const renderMessages = () => {
    el.messages.textContent = "";
    for (const frame of store.all()) {
      const row = document.createElement("li");
      const kind = frameKind(frame, session.bot_name);
      row.className = `msg msg-${kind}${frame.sender === myName ? " msg-self" : ""}`;
      if (kind === "system") {
        row.textContent = frame.text;
      } else {
        const meta = document.createElement("span");
        meta.className = "msg-meta";
        meta.textContent = `${frame.sender} · ${formatClock(frame.ts)}`;
        const body = document.createElement("span");
        body.className = "msg-body";
        body.textContent = frame.text;
        row.append(meta, body);
      }
      el.messages.append(row);
    }
    if (stickToBottom) {
      el.scroller.scrollTop = el.scroller.scrollHeight;
    }
  };

  const renderRoster = () => {
    el.roster.textContent = store.roster.length
      ? store.roster.join(", ")
      : session.roster.join(", ");
  };

  const updateComposer = () => {
    const connected = connection.state === "open";
    const waitingForEcho = pendingText !== null;
    el.input.disabled = !connected;
    el.send.disabled = !connected || waitingForEcho;
    el.ping.disabled = !connected;
  };

  el.scroller.addEventListener("scroll", () => {
    const gap = el.scroller.scrollHeight - el.scroller.scrollTop - el.scroller.clientHeight;
    stickToBottom = gap < 48;
  });

  store.onChange(() => {
    if (pendingText !== null && myName !== null && store.hasEcho(myName, pendingText)) {
      pendingText = null;
      el.input.value = "";
    }
    renderMessages();
    renderRoster();
    updateComposer();
  });

  connection.onState = (state) => {
    el.status.textContent = statusLabel(state);
    el.status.dataset.state = state;
    if (state !== "open") {
      // a send in flight when the link dropped may never echo
      pendingText = null;
    }
    updateComposer();
  };

  connection.onLoginOk = (name) => {
    myName = name;
    if (everLoggedIn) {
      // rejoining after a drop: the server replays nothing, so drop
      // local history rather than display a silent gap
      store.clear();
    }
    everLoggedIn = true;
    el.login.hidden = true;
    el.chat.hidden = false;
    el.loginError.textContent = "";
    el.input.focus();
    updateComposer();
  };

  connection.onLoginDenied = (reason) => {
    el.login.hidden = false;
    el.chat.hidden = true;
    el.loginError.textContent = reason;
    el.nameInput.disabled = false;
    el.join.disabled = false;
    el.nameInput.focus();
    el.nameInput.select();
  };

  connection.onFrame = (frame) => {
    if (frame.type === "roster") {
      const names = parseRoster(frame);
      if (names !== null) {
        store.setRoster(names);
      }
      return;
    }
    store.insert(frame);
  };

  el.loginForm.addEventListener("submit", (event) => {
    event.preventDefault();
    const name = el.nameInput.value.trim();
    if (!name) {
      el.loginError.textContent = "pick a name first";
      return;
    }
    el.loginError.textContent = "";
    el.nameInput.disabled = true;
    el.join.disabled = true;
    connection.login(name);
  });

  el.composer.addEventListener("submit", (event) => {
    event.preventDefault();
    const text = el.input.value.trim();
    if (!text) {
      return;
    }
    if (connection.sendMessage(text)) {
      pendingText = text;
      updateComposer();
    }
  });

  el.ping.addEventListener("click", () => {
    el.input.value = withPingPrefix(el.input.value, session.bot_keyword);
    el.input.focus();
    el.input.setSelectionRange(el.input.value.length, el.input.value.length);
  });

  renderRoster();
  updateComposer();
}

interface LayoutRefs {
  login: HTMLElement;
  loginForm: HTMLFormElement;
  nameInput: HTMLInputElement;
  join: HTMLButtonElement;
  loginError: HTMLElement;
  chat: HTMLElement;
  status: HTMLElement;
  roster: HTMLElement;
  scroller: HTMLElement;
  messages: HTMLUListElement;
  composer: HTMLFormElement;
  input: HTMLInputElement;
  send: HTMLButtonElement;
  ping: HTMLButtonElement;
}

function buildLayout(root: HTMLElement, session: SessionInfo): LayoutRefs {
  root.innerHTML = `
    <section id="login">
      <h1>${escapeHtml(session.topic)}</h1>
      <p class="hint">join the discussion facilitated by ${escapeHtml(session.bot_name)}</p>
      <form id="login-form">
        <input id="name" autocomplete="off" maxlength="40" placeholder="your name" />
        <button id="join" type="submit">join</button>
      </form>
      <p id="login-error" role="alert"></p>
    </section>
    <section id="chat" hidden>
      <header>
        <div>
          <h1>${escapeHtml(session.topic)}</h1>
          <p id="roster"></p>
        </div>
        <span id="status" data-state="idle">idle</span>
      </header>
      <div id="scroller">
        <ul id="messages"></ul>
      </div>
      <form id="composer">
        <button id="ping" type="button" title="ask ${escapeHtml(session.bot_name)} directly">${escapeHtml(session.bot_keyword)}</button>
        <input id="text" autocomplete="off" placeholder="say something" />
        <button id="send" type="submit">send</button>
      </form>
    </section>
  `;
  const get = <T extends HTMLElement>(id: string): T => {
    const node = root.querySelector(`#${id}`);
    if (node === null) {
      throw new Error(`layout is missing #${id}`);
    }
    return node as T;
  };
  return {
    login: get("login"),
    loginForm: get<HTMLFormElement>("login-form"),
    nameInput: get<HTMLInputElement>("name"),
    join: get<HTMLButtonElement>("join"),
    loginError: get("login-error"),
    chat: get("chat"),
    status: get("status"),
    roster: get("roster"),
    scroller: get("scroller"),
    messages: get<HTMLUListElement>("messages"),
    composer: get<HTMLFormElement>("composer"),
    input: get<HTMLInputElement>("text"),
    send: get<HTMLButtonElement>("send"),
    ping: get<HTMLButtonElement>("ping"),
  };
}

function escapeHtml(raw: string): string {
  return raw
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}
