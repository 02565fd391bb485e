import { describe, expect, it } from "vitest";

import type { Frame } from "../src/protocol.js";
import { MessageStore } from "../src/store.js";

const msg = (id: number, over: Partial<Frame> = {}): Frame => ({
  type: "user_message",
  sender: "amy",
  text: `m${id}`,
  id,
  ts: id * 1000,
  ...over,
});

describe("MessageStore ordering", () => {
  it("appends in-order frames", () => {
    const store = new MessageStore();
    store.insert(msg(1));
    store.insert(msg(2));
    store.insert(msg(3));
    expect(store.all().map((m) => m.id)).toEqual([1, 2, 3]);
  });

  it("sorts out-of-order arrivals by id", () => {
    const store = new MessageStore();
    store.insert(msg(5));
    store.insert(msg(2));
    store.insert(msg(9));
    store.insert(msg(4));
    expect(store.all().map((m) => m.id)).toEqual([2, 4, 5, 9]);
  });

  it("drops duplicate ids", () => {
    const store = new MessageStore();
    expect(store.insert(msg(7))).toBe(true);
    expect(store.insert(msg(7, { text: "rewritten" }))).toBe(false);
    expect(store.all()).toHaveLength(1);
    expect(store.all()[0].text).toBe("m7");
  });

  it("keeps order across a shuffled burst", () => {
    const ids = Array.from({ length: 60 }, (_, i) => i + 1);
    // deterministic shuffle, no rng dependency
    const shuffled = [...ids].sort((a, b) => ((a * 37) % 61) - ((b * 37) % 61));
    const store = new MessageStore();
    for (const id of shuffled) {
      store.insert(msg(id));
    }
    expect(store.all().map((m) => m.id)).toEqual(ids);
  });
});

describe("MessageStore state", () => {
  it("notifies listeners on insert and roster change", () => {
    const store = new MessageStore();
    let calls = 0;
    store.onChange(() => {
      calls += 1;
    });
    store.insert(msg(1));
    store.insert(msg(1)); // duplicate, no notify
    store.setRoster(["mubot", "amy"]);
    expect(calls).toBe(2);
    expect(store.roster).toEqual(["mubot", "amy"]);
  });

  it("finds echoes only for matching user messages", () => {
    const store = new MessageStore();
    store.insert(msg(1, { sender: "amy", text: "hello all" }));
    store.insert(msg(2, { sender: "bo", text: "hello all" }));
    store.insert(msg(3, { type: "bot_message", sender: "mubot", text: "welcome" }));
    expect(store.hasEcho("amy", "hello all")).toBe(true);
    expect(store.hasEcho("amy", "hello")).toBe(false);
    expect(store.hasEcho("cat", "hello all")).toBe(false);
    expect(store.hasEcho("mubot", "welcome")).toBe(false);
  });

  it("clear resets messages, ids and roster", () => {
    const store = new MessageStore();
    store.insert(msg(1));
    store.setRoster(["mubot", "amy"]);
    store.clear();
    expect(store.all()).toHaveLength(0);
    expect(store.roster).toEqual([]);
    // same id is insertable again after clear
    expect(store.insert(msg(1))).toBe(true);
  });
});
