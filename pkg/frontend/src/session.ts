// Hub session: owns the websocket, the latest snapshot, and manual control of
// at most one vehicle. Rendered state only ever comes from received
// snapshots; this module never invents poses.

import type { Ack, Inbound, Outbound, Snapshot } from "./protocol.js";
import { parseInbound, serialize } from "./protocol.js";
import type { DriveState } from "./input.js";
import { SendLimiter, toCommand } from "./input.js";

export interface SocketLike {
  send(data: string): void;
  close(): void;
  onmessage: ((event: { data: string }) => void) | null;
  onopen: (() => void) | null;
  onclose: (() => void) | null;
}

export interface SessionEvents {
  onSnapshot?: (snapshot: Snapshot) => void;
  onAck?: (ack: Ack) => void;
  onConnection?: (connected: boolean) => void;
}

export const STALE_FEED_MS = 1000;
const COMMAND_HZ = 8;

export class UiSession {
  snapshot: Snapshot | null = null;
  lastSnapshotAtMs = -Infinity;
  selectedVehicle: string | null = null;
  controlling = false;
  viewMode: "top-down" | "follow" = "top-down";

  private limiter = new SendLimiter(COMMAND_HZ);
  private pendingControl: string | null = null;

  constructor(
    private socket: SocketLike,
    private events: SessionEvents = {},
    private now: () => number = () => Date.now(),
  ) {
    socket.onmessage = (event) => this.handleMessage(event.data);
    socket.onopen = () => {
      this.send({
        kind: "hello",
        role: "ui",
        name: "console",
        subscribe_snapshots: true,
      });
      this.events.onConnection?.(true);
    };
    socket.onclose = () => this.events.onConnection?.(false);
  }

  private send(message: Outbound): void {
    this.socket.send(serialize(message));
  }

  private handleMessage(data: string): void {
    const message: Inbound | null = parseInbound(data);
    if (message === null) {
      return;
    }
    if (message.kind === "snapshot") {
      this.snapshot = message;
      this.lastSnapshotAtMs = this.now();
      this.events.onSnapshot?.(message);
      return;
    }
    if (message.kind === "ack") {
      if (this.pendingControl !== null) {
        if (message.ok) {
          this.controlling = true;
          this.selectedVehicle = this.pendingControl;
        } else {
          this.controlling = false;
        }
        this.pendingControl = null;
      }
      this.events.onAck?.(message);
    }
  }

  feedStale(): boolean {
    return this.now() - this.lastSnapshotAtMs > STALE_FEED_MS;
  }

  selectVehicle(id: string): void {
    if (!this.controlling) {
      this.selectedVehicle = id;
    }
  }

  // switch the vehicle to direct mode; control is only considered held after
  // the hub acknowledges (manual handover stays atomic at the hub)
  takeControl(): void {
    if (this.selectedVehicle === null || this.controlling) {
      return;
    }
    this.pendingControl = this.selectedVehicle;
    this.send({
      kind: "assign_mode",
      vehicle_id: this.selectedVehicle,
      mode: "direct",
      speed_mps: 0,
      steer_rad: 0,
    });
  }

  releaseControl(): void {
    if (this.selectedVehicle === null || !this.controlling) {
      return;
    }
    this.send({
      kind: "assign_mode",
      vehicle_id: this.selectedVehicle,
      release: true,
    });
    this.controlling = false;
  }

  // called from the input sampling loop; paced to the hub's 8 Hz command rate
  drive(state: DriveState, vMax: number): boolean {
    if (!this.controlling || this.selectedVehicle === null) {
      return false;
    }
    if (!this.limiter.ready(this.now())) {
      return false;
    }
    const command = toCommand(state, vMax);
    this.send({
      kind: "command",
      vehicle_id: this.selectedVehicle,
      speed_mps: command.speed_mps,
      steer_rad: command.steer_rad,
    });
    return true;
  }

  requestSnapshot(): void {
    this.send({ kind: "snapshot_request" });
  }

  close(): void {
    if (this.controlling) {
      this.releaseControl();
    }
    this.socket.close();
  }
}
