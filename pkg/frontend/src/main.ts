// Entry point: fetch session metadata, then hand everything to the app.

import { initApp } from "./app.js";
import { ChatConnection } from "./connection.js";
import { fetchSessionInfo } from "./protocol.js";
import { MessageStore } from "./store.js";

function wsUrl(): string {
  const proto = location.protocol === "https:" ? "wss:" : "ws:";
  return `${proto}//${location.host}/ws`;
}

async function boot(): Promise<void> {
  const root = document.getElementById("app");
  if (root === null) {
    throw new Error("missing #app container");
  }
  let session;
  try {
    session = await fetchSessionInfo(location.origin);
  } catch (err) {
    root.textContent = "could not reach the chat service; is the server running?";
    console.error(err);
    return;
  }
  document.title = session.topic;
  const store = new MessageStore();
  const connection = new ChatConnection(wsUrl());
  initApp({ root, session, connection, store });
}

boot();
