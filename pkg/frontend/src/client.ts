// WebSocket session wrapper: owns one connection and folds server events
// into the pure view state. Reconnecting with the same display name resumes:
// the server re-broadcasts the roster on join.

import { joinFrame, parseServerEvent } from "./protocol.js";
import {
  ClientViewState,
  applyServerEvent,
  initialView,
  markClosed,
  markOpen,
  sendUtterance,
} from "./reducer.js";

export type ViewListener = (view: ClientViewState) => void;

export class LiveSessionClient {
  private view: ClientViewState = initialView();
  private socket: WebSocket | null = null;

  constructor(
    private readonly url: string,
    private readonly displayName: string,
    private readonly onView: ViewListener,
  ) {}

  connect(): void {
    this.view = initialView();
    this.emit();
    const socket = new WebSocket(this.url);
    this.socket = socket;
    socket.onopen = () => {
      this.view = markOpen(this.view);
      socket.send(joinFrame(this.displayName));
      this.emit();
    };
    socket.onmessage = (message: MessageEvent) => {
      const event = parseServerEvent(String(message.data));
      if (event === null) {
        console.warn("dropped malformed frame", message.data);
        return; // view unchanged
      }
      this.view = applyServerEvent(this.view, event);
      this.emit();
    };
    socket.onclose = () => {
      this.view = markClosed(this.view);
      this.emit();
    };
  }

  /** Returns true when the text was sent (and the input may be cleared). */
  send(text: string): boolean {
    const frame = sendUtterance(this.view, text);
    if (frame === null || this.socket === null) {
      return false;
    }
    this.socket.send(frame);
    return true;
  }

  reconnect(): void {
    this.socket?.close();
    this.connect();
  }

  get state(): ClientViewState {
    return this.view;
  }

  private emit(): void {
    this.onView(this.view);
  }
}
