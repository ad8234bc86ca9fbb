// Wire protocol for live sessions: one JSON event per WebSocket text frame,
// tagged by "kind". Field names match the server's snake_case verbatim.

export interface ModeratorMessage {
  kind: "moderator_message";
  at: number;
  text: string;
  subtitle: boolean;
}

export interface StageChanged {
  kind: "stage_changed";
  at: number;
  index: number;
  title: string;
}

export interface ParticipantEcho {
  kind: "participant_echo";
  at: number;
  name: string;
  text: string;
}

export interface SessionClosed {
  kind: "session_closed";
  at: number;
}

export interface Roster {
  kind: "roster";
  at: number;
  names: string[];
}

export type ServerEvent =
  | ModeratorMessage
  | StageChanged
  | ParticipantEcho
  | SessionClosed
  | Roster;

export interface JoinFrame {
  kind: "join";
  display_name: string;
}

export interface UtteranceFrame {
  kind: "utterance";
  text: string;
}

export type ClientFrame = JoinFrame | UtteranceFrame;

/** Parse one inbound frame; malformed frames return null (caller logs and drops). */
export function parseServerEvent(raw: string): ServerEvent | null {
  let data: unknown;
  try {
    data = JSON.parse(raw);
  } catch {
    return null;
  }
  if (typeof data !== "object" || data === null) return null;
  const event = data as Record<string, unknown>;
  if (typeof event.at !== "number") return null;
  switch (event.kind) {
    case "moderator_message":
      if (typeof event.text !== "string" || event.subtitle !== true) return null;
      return { kind: "moderator_message", at: event.at, text: event.text, subtitle: true };
    case "stage_changed":
      if (typeof event.index !== "number" || typeof event.title !== "string") return null;
      return { kind: "stage_changed", at: event.at, index: event.index, title: event.title };
    case "participant_echo":
      if (typeof event.name !== "string" || typeof event.text !== "string") return null;
      return { kind: "participant_echo", at: event.at, name: event.name, text: event.text };
    case "session_closed":
      return { kind: "session_closed", at: event.at };
    case "roster":
      if (!Array.isArray(event.names) || !event.names.every((n) => typeof n === "string")) {
        return null;
      }
      return { kind: "roster", at: event.at, names: event.names as string[] };
    default:
      return null;
  }
}

export function joinFrame(displayName: string): string {
  return JSON.stringify({ kind: "join", display_name: displayName });
}

export function utteranceFrame(text: string): string {
  return JSON.stringify({ kind: "utterance", text });
}
