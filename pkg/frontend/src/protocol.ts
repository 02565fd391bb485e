// Wire protocol shared with the chat server. Frames carry exactly five
// fields; anything that does not parse into this shape is dropped by the
// caller (and logged), never guessed at.

export const FRAME_TYPES = [
  "login",
  "login_ok",
  "login_denied",
  "user_message",
  "bot_message",
  "system",
  "roster",
] as const;

export type FrameType = (typeof FRAME_TYPES)[number];

export interface Frame {
  type: FrameType;
  sender: string;
  text: string;
  id: number;
  ts: number;
}

export interface SessionInfo {
  topic: string;
  bot_name: string;
  bot_keyword: string;
  participant_count: number;
  subtopics: string[];
  roster: string[];
}

/** Parse one raw websocket payload; null means "drop this frame". */
export function parseFrame(raw: string): Frame | null {
  let data: unknown;
  try {
    data = JSON.parse(raw);
  } catch {
    return null;
  }
  if (typeof data !== "object" || data === null) {
    return null;
  }
  const record = data as Record<string, unknown>;
  const type = record["type"];
  if (typeof type !== "string" || !(FRAME_TYPES as readonly string[]).includes(type)) {
    return null;
  }
  const sender = record["sender"];
  const text = record["text"];
  const id = record["id"];
  const ts = record["ts"];
  if (typeof sender !== "string" || typeof text !== "string") {
    return null;
  }
  if (typeof id !== "number" || !Number.isFinite(id)) {
    return null;
  }
  if (typeof ts !== "number" || !Number.isFinite(ts)) {
    return null;
  }
  return { type: type as FrameType, sender, text, id, ts };
}

export function loginFrame(name: string): string {
  return JSON.stringify({ type: "login", sender: name });
}

export function userMessageFrame(text: string): string {
  return JSON.stringify({ type: "user_message", text });
}

/** Roster frames carry a JSON array of names in the text field. */
export function parseRoster(frame: Frame): string[] | null {
  if (frame.type !== "roster") {
    return null;
  }
  try {
    const names = JSON.parse(frame.text);
    if (Array.isArray(names) && names.every((n) => typeof n === "string")) {
      return names;
    }
  } catch {
    // fall through
  }
  return null;
}

export async function fetchSessionInfo(baseUrl: string): Promise<SessionInfo> {
  const response = await fetch(new URL("/session", baseUrl).toString());
  if (!response.ok) {
    throw new Error(`session fetch failed: ${response.status}`);
  }
  const data = (await response.json()) as Partial<SessionInfo>;
  if (typeof data.bot_keyword !== "string" || typeof data.bot_name !== "string") {
    throw new Error("session info missing bot fields");
  }
  return {
    topic: typeof data.topic === "string" ? data.topic : "",
    bot_name: data.bot_name,
    bot_keyword: data.bot_keyword,
    participant_count:
      typeof data.participant_count === "number" ? data.participant_count : 0,
    subtopics: Array.isArray(data.subtopics) ? data.subtopics.map(String) : [],
    roster: Array.isArray(data.roster) ? data.roster.map(String) : [],
  };
}
