// Message store: keeps the visible transcript in server id order no matter
// what order frames arrive in, and never mutates message text. All view
// state is rebuilt from the frame stream, so a page refresh starts clean.

import type { Frame } from "./protocol.js";

export type StoreListener = () => void;

export class MessageStore {
  private messages: Frame[] = [];
  private ids = new Set<number>();
  private listeners: StoreListener[] = [];
  roster: string[] = [];

  onChange(listener: StoreListener): void {
    this.listeners.push(listener);
  }

  private notify(): void {
    for (const listener of this.listeners) {
      listener();
    }
  }

  /** Insert keeping id order; duplicate ids are dropped. Returns whether
   * anything changed. */
  insert(frame: Frame): boolean {
    if (this.ids.has(frame.id)) {
      return false;
    }
    this.ids.add(frame.id);
    // fast path: frames usually arrive in order
    if (
      this.messages.length === 0 ||
      this.messages[this.messages.length - 1].id < frame.id
    ) {
      this.messages.push(frame);
    } else {
      let low = 0;
      let high = this.messages.length;
      while (low < high) {
        const mid = (low + high) >> 1;
        if (this.messages[mid].id < frame.id) {
          low = mid + 1;
        } else {
          high = mid;
        }
      }
      this.messages.splice(low, 0, frame);
    }
    this.notify();
    return true;
  }

  setRoster(names: string[]): void {
    this.roster = names.slice();
    this.notify();
  }

  /** Most recent user_message matching sender+text, used for echo detection. */
  hasEcho(sender: string, text: string): boolean {
    for (let i = this.messages.length - 1; i >= 0; i--) {
      const m = this.messages[i];
      if (m.type === "user_message" && m.sender === sender && m.text === text) {
        return true;
      }
    }
    return false;
  }

  all(): readonly Frame[] {
    return this.messages;
  }

  clear(): void {
    this.messages = [];
    this.ids.clear();
    this.roster = [];
    this.notify();
  }
}
