// Pure view state for a live session. The reducer never mutates its input,
// so the same event sequence always produces the same view (snapshot-testable
// without a browser). There is no local persistence: the server transcript is
// the single source of truth.

import { ServerEvent, utteranceFrame } from "./protocol.js";

export type ConnectionState = "connecting" | "open" | "closed";

export interface FeedMessage {
  from: "moderator" | "participant";
  name: string;
  text: string;
  at: number;
}

export interface ClientViewState {
  connection: ConnectionState;
  roster: string[];
  feed: FeedMessage[];
  /** Most recent moderator message; rendered as a persistent banner. */
  currentSubtitle: string | null;
  stage: { index: number; title: string } | null;
}

export function initialView(): ClientViewState {
  return {
    connection: "connecting",
    roster: [],
    feed: [],
    currentSubtitle: null,
    stage: null,
  };
}

export function applyServerEvent(view: ClientViewState, event: ServerEvent): ClientViewState {
  switch (event.kind) {
    case "moderator_message":
      return {
        ...view,
        feed: [...view.feed, { from: "moderator", name: "Moderator", text: event.text, at: event.at }],
        currentSubtitle: event.text,
      };
    case "stage_changed":
      return { ...view, stage: { index: event.index, title: event.title } };
    case "participant_echo":
      return {
        ...view,
        feed: [...view.feed, { from: "participant", name: event.name, text: event.text, at: event.at }],
      };
    case "roster":
      return { ...view, roster: [...event.names] };
    case "session_closed":
      return { ...view, connection: "closed" };
  }
}

export function markOpen(view: ClientViewState): ClientViewState {
  return { ...view, connection: "open" };
}

export function markClosed(view: ClientViewState): ClientViewState {
  return { ...view, connection: "closed" };
}

export class NotConnected extends Error {
  constructor() {
    super("the session connection is not open");
    this.name = "NotConnected";
  }
}

/**
 * Outbound utterance frame for the given input text.
 *
 * Whitespace-only input is rejected locally (returns null, nothing is sent);
 * sending while the connection is not open throws NotConnected. The caller
 * clears the input box only when a frame was actually produced.
 */
export function sendUtterance(view: ClientViewState, text: string): string | null {
  if (view.connection !== "open") {
    throw new NotConnected();
  }
  const trimmed = text.trim();
  if (!trimmed) {
    return null;
  }
  return utteranceFrame(trimmed);
}
