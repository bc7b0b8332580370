// Wire protocol types, mirroring the hub's websocket messages exactly:
// hello, observe, command, assign_mode, snapshot_request, snapshot, ack.

export interface VehicleRecord {
  id: string;
  kind: "mapping" | "cloud";
  x_m: number;
  y_m: number;
  heading_rad: number;
  speed_mps: number;
  steer_rad: number;
  arc_pos_m?: number | null;
}

export interface Snapshot {
  kind: "snapshot";
  time_s: number;
  vehicles: VehicleRecord[];
}

export interface Ack {
  kind: "ack";
  ok: boolean;
  detail: string;
  vehicle_id?: string | null;
}

export interface Hello {
  kind: "hello";
  role: "ui" | "controller" | "observer";
  name: string;
  subscribe_snapshots: boolean;
}

export interface Command {
  kind: "command";
  vehicle_id: string;
  speed_mps: number;
  steer_rad: number;
}

export interface AssignMode {
  kind: "assign_mode";
  vehicle_id: string;
  mode?: "direct" | "waypoints" | "node";
  speed_mps?: number;
  steer_rad?: number;
  waypoints?: [number, number][];
  node_id?: string;
  release?: boolean;
}

export interface SnapshotRequest {
  kind: "snapshot_request";
}

export type Outbound = Hello | Command | AssignMode | SnapshotRequest;
export type Inbound = Snapshot | Ack;

export function parseInbound(text: string): Inbound | null {
  let data: unknown;
  try {
    data = JSON.parse(text);
  } catch {
    return null;
  }
  if (typeof data !== "object" || data === null || !("kind" in data)) {
    return null;
  }
  const msg = data as { kind: string };
  if (msg.kind === "snapshot") {
    const snap = data as Snapshot;
    if (typeof snap.time_s === "number" && Array.isArray(snap.vehicles)) {
      return snap;
    }
    return null;
  }
  if (msg.kind === "ack") {
    const ack = data as Ack;
    if (typeof ack.ok === "boolean") {
      return ack;
    }
    return null;
  }
  return null; // unknown kinds are ignored, never invented
}

export function serialize(message: Outbound): string {
  return JSON.stringify(message);
}
