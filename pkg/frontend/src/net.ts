// Websocket client for the live-match server; the socket constructor is
// injectable so tests can run under node.

import {
  controlMessage,
  helloMessage,
  parseServerFrame,
  resetMessage,
  type ControlCommand,
  type Role,
  type ServerFrame,
} from "./protocol.js";

export interface SocketLike {
  send(data: string): void;
  close(): void;
  addEventListener(type: "open" | "message" | "close" | "error", cb: (ev: any) => void): void;
}

export type SocketFactory = (url: string) => SocketLike;

export class MatchClient {
  private socket: SocketLike | null = null;
  private seq = 0;
  private handlers: Array<(frame: ServerFrame) => void> = [];
  private closedHandlers: Array<() => void> = [];

  constructor(
    private readonly url: string,
    private readonly role: Role,
    private readonly name: string,
    private readonly socketFactory: SocketFactory = (u) => new WebSocket(u) as unknown as SocketLike,
  ) {}

  onFrame(cb: (frame: ServerFrame) => void): void {
    this.handlers.push(cb);
  }

  onClosed(cb: () => void): void {
    this.closedHandlers.push(cb);
  }

  connect(timeoutMs = 5000): Promise<void> {
    return new Promise((resolve, reject) => {
      const socket = this.socketFactory(this.url);
      this.socket = socket;
      const timer = setTimeout(() => reject(new Error("connect timed out")), timeoutMs);
      socket.addEventListener("open", () => {
        clearTimeout(timer);
        socket.send(helloMessage(this.role, this.name));
        resolve();
      });
      socket.addEventListener("error", () => {
        clearTimeout(timer);
        reject(new Error("websocket error"));
      });
      socket.addEventListener("close", () => {
        for (const cb of this.closedHandlers) cb();
      });
      socket.addEventListener("message", (ev: { data: unknown }) => {
        const frame = parseServerFrame(String(ev.data));
        if (frame) {
          for (const cb of this.handlers) cb(frame);
        }
      });
    });
  }

  /** Send a pilot command; sequence numbers grow monotonically. */
  sendControl(cmd: ControlCommand): number {
    this.seq += 1;
    this.socket?.send(controlMessage(cmd, this.seq));
    return this.seq;
  }

  sendReset(): void {
    this.socket?.send(resetMessage());
  }

  close(): void {
    this.socket?.close();
  }
}
