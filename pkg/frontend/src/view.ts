// Table-to-canvas geometry. All placement math is pure so the pixel mapping
// can be verified exactly; the canvas layer just draws what layoutGlyphs says.

import type { Snapshot, VehicleRecord } from "./protocol.js";

export interface TableInfo {
  width_m: number;
  height_m: number;
  lane_width_m: number;
}

export interface ViewConfig {
  canvasWidth: number;
  canvasHeight: number;
  table: TableInfo;
  margin: number; // pixels kept free around the table
  // follow mode: keep this table point at the canvas center, magnified
  focus?: { x: number; y: number; zoom: number };
}

export interface Glyph {
  id: string;
  kind: "mapping" | "cloud";
  px: number;
  py: number;
  headingRad: number; // table convention: 0 points +Y (up)
  lengthPx: number;
  widthPx: number;
  speedMps: number;
  label: string;
}

// Uniform scale: 9 m maps to the drawable width. Y flips because canvas y
// grows downward while table y grows upward.
export function tableScale(view: ViewConfig): number {
  const sx = (view.canvasWidth - 2 * view.margin) / view.table.width_m;
  const sy = (view.canvasHeight - 2 * view.margin) / view.table.height_m;
  const s = Math.min(sx, sy);
  return view.focus ? s * view.focus.zoom : s;
}

export function tableToCanvas(view: ViewConfig, x: number, y: number): [number, number] {
  const s = tableScale(view);
  if (view.focus) {
    return [
      view.canvasWidth / 2 + (x - view.focus.x) * s,
      view.canvasHeight / 2 - (y - view.focus.y) * s,
    ];
  }
  return [view.margin + x * s, view.canvasHeight - view.margin - y * s];
}

export function canvasToTable(view: ViewConfig, px: number, py: number): [number, number] {
  const s = tableScale(view);
  if (view.focus) {
    return [
      view.focus.x + (px - view.canvasWidth / 2) / s,
      view.focus.y - (py - view.canvasHeight / 2) / s,
    ];
  }
  return [(px - view.margin) / s, (view.canvasHeight - view.margin - py) / s];
}

const BODY_LENGTH_M = 0.2;
const BODY_WIDTH_M = 0.18;

export function layoutGlyphs(snapshot: Snapshot, view: ViewConfig): Glyph[] {
  const s = tableScale(view);
  return snapshot.vehicles.map((v: VehicleRecord) => {
    const [px, py] = tableToCanvas(view, v.x_m, v.y_m);
    return {
      id: v.id,
      kind: v.kind,
      px,
      py,
      headingRad: v.heading_rad,
      lengthPx: BODY_LENGTH_M * s,
      widthPx: BODY_WIDTH_M * s,
      speedMps: v.speed_mps,
      label: `${v.id} ${v.speed_mps.toFixed(2)} m/s`,
    };
  });
}

// Spacing readout: forward gap to the nearest vehicle ahead by arc position.
export function spacingReadout(snapshot: Snapshot, trackLength: number): Map<string, number> {
  const out = new Map<string, number>();
  const known = snapshot.vehicles.filter(
    (v) => v.arc_pos_m !== undefined && v.arc_pos_m !== null,
  );
  if (known.length < 2) {
    return out;
  }
  const sorted = [...known].sort((a, b) => (a.arc_pos_m! - b.arc_pos_m!));
  for (let i = 0; i < sorted.length; i++) {
    const self = sorted[i];
    const ahead = sorted[(i + 1) % sorted.length];
    let gap = ahead.arc_pos_m! - self.arc_pos_m!;
    if (gap <= 0) {
      gap += trackLength;
    }
    out.set(self.id, gap);
  }
  return out;
}
