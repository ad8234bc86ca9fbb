import { describe, expect, test } from "vitest";

import { parseServerEvent, ServerEvent } from "../src/protocol.js";
import {
  applyServerEvent,
  initialView,
  markOpen,
  NotConnected,
  sendUtterance,
} from "../src/reducer.js";

const TEN_EVENTS: ServerEvent[] = [
  { kind: "roster", at: 1, names: ["Ana"] },
  { kind: "stage_changed", at: 1, index: 0, title: "Warm-up" },
  { kind: "moderator_message", at: 1, text: "Welcome! How do you manage screen time?", subtitle: true },
  { kind: "roster", at: 2, names: ["Ana", "Ben"] },
  { kind: "participant_echo", at: 3, name: "Ana", text: "App timers, mostly." },
  { kind: "participant_echo", at: 4, name: "Ben", text: "I switch to grayscale at night." },
  { kind: "moderator_message", at: 9, text: "Ben, does grayscale actually help?", subtitle: true },
  { kind: "participant_echo", at: 11, name: "Ben", text: "It makes the phone boring, so yes." },
  { kind: "stage_changed", at: 20, index: 1, title: "Mental health" },
  { kind: "moderator_message", at: 20, text: "Moving on: how does screen time affect your mood?", subtitle: true },
];

function playAll(): ReturnType<typeof initialView> {
  let view = markOpen(initialView());
  for (const event of TEN_EVENTS) {
    view = applyServerEvent(view, event);
  }
  return view;
}

describe("applyServerEvent", () => {
  test("moderator message appends to feed and replaces the subtitle", () => {
    let view = markOpen(initialView());
    view = applyServerEvent(view, TEN_EVENTS[2]);
    expect(view.feed).toHaveLength(1);
    expect(view.currentSubtitle).toBe("Welcome! How do you manage screen time?");
    view = applyServerEvent(view, TEN_EVENTS[6]);
    expect(view.currentSubtitle).toBe("Ben, does grayscale actually help?");
    expect(view.feed).toHaveLength(2);
  });

  test("stage_changed updates the banner", () => {
    const view = applyServerEvent(markOpen(initialView()), TEN_EVENTS[1]);
    expect(view.stage).toEqual({ index: 0, title: "Warm-up" });
  });

  test("participant_echo appends in delivery order", () => {
    const view = playAll();
    expect(view.feed.map((m) => m.name)).toEqual([
      "Moderator", "Ana", "Ben", "Moderator", "Ben", "Moderator",
    ]);
  });

  test("session_closed closes the connection", () => {
    const view = applyServerEvent(markOpen(initialView()), { kind: "session_closed", at: 30 });
    expect(view.connection).toBe("closed");
  });

  test("reducer is pure: inputs are never mutated", () => {
    const before = markOpen(initialView());
    const snapshot = JSON.stringify(before);
    applyServerEvent(before, TEN_EVENTS[2]);
    applyServerEvent(before, TEN_EVENTS[0]);
    expect(JSON.stringify(before)).toBe(snapshot);
  });

  test("same event sequence gives the same view", () => {
    expect(playAll()).toEqual(playAll());
  });

  test("fixed 10-event sequence snapshot", () => {
    expect(playAll()).toMatchSnapshot();
  });

  test("the subtitle always mirrors the latest moderator message", () => {
    let view = markOpen(initialView());
    let lastModerator: string | null = null;
    for (const event of TEN_EVENTS) {
      view = applyServerEvent(view, event);
      if (event.kind === "moderator_message") lastModerator = event.text;
      expect(view.currentSubtitle).toBe(lastModerator);
    }
  });
});

describe("malformed frames", () => {
  test.each([
    "not json at all",
    '{"kind": "unknown_kind", "at": 1}',
    '{"kind": "moderator_message", "at": 1, "text": "x", "subtitle": false}',
    '{"kind": "roster", "at": 1, "names": [1, 2]}',
    '{"kind": "stage_changed", "at": "one", "index": 0, "title": "t"}',
  ])("dropped without changing the view: %s", (raw) => {
    expect(parseServerEvent(raw)).toBeNull();
  });

  test("valid frames parse to typed events", () => {
    expect(parseServerEvent('{"kind": "roster", "at": 2.5, "names": ["Ana"]}')).toEqual({
      kind: "roster",
      at: 2.5,
      names: ["Ana"],
    });
  });
});

describe("sendUtterance", () => {
  test("open connection emits an utterance frame", () => {
    const frame = sendUtterance(markOpen(initialView()), "I use app timers");
    expect(JSON.parse(frame!)).toEqual({ kind: "utterance", text: "I use app timers" });
  });

  test("whitespace-only input is rejected locally", () => {
    expect(sendUtterance(markOpen(initialView()), "   ")).toBeNull();
  });

  test("sending while not open throws NotConnected", () => {
    expect(() => sendUtterance(initialView(), "hello")).toThrow(NotConnected);
  });
});

describe("reconnect", () => {
  test("roster re-broadcast reproduces the pre-drop roster view", () => {
    const before = playAll();
    // Drop and reconnect: a fresh view plus the server's roster broadcast.
    let resumed = markOpen(initialView());
    resumed = applyServerEvent(resumed, { kind: "roster", at: 21, names: before.roster });
    expect(resumed.roster).toEqual(before.roster);
  });
});
