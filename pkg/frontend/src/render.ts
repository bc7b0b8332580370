// Canvas drawing of the table, track, nodes, and vehicle glyphs. Geometry
// comes from view.ts; this file only issues draw calls.

import type { Glyph, TableInfo, ViewConfig } from "./view.js";
import { layoutGlyphs, tableToCanvas } from "./view.js";
import type { Snapshot } from "./protocol.js";

export interface TrackInfo {
  table: TableInfo;
  centerline: [number, number][];
  length_m: number;
  nodes: { id: string; x_m: number; y_m: number }[];
}

const COLORS = {
  background: "#10141a",
  table: "#1c2430",
  lane: "#3a4a5f",
  node: "#8fd0ff",
  mapping: "#ff7043", // physical mirrors in warm color
  cloud: "#7e9bff", // cloud vehicles in cool color
  selected: "#ffee58",
  text: "#d7e0ea",
  banner: "#e53935",
};

export class WorldRenderer {
  constructor(
    private ctx: CanvasRenderingContext2D,
    private view: ViewConfig,
    private track: TrackInfo,
  ) {}

  render(snapshot: Snapshot | null, selected: string | null, stale: boolean): void {
    const { ctx, view } = this;
    ctx.fillStyle = COLORS.background;
    ctx.fillRect(0, 0, view.canvasWidth, view.canvasHeight);
    this.drawTable();
    this.drawTrack();
    this.drawNodes();
    if (snapshot !== null) {
      for (const glyph of layoutGlyphs(snapshot, view)) {
        this.drawGlyph(glyph, glyph.id === selected);
      }
      ctx.fillStyle = COLORS.text;
      ctx.font = "12px monospace";
      ctx.fillText(`t = ${snapshot.time_s.toFixed(2)} s`, 8, 16);
    }
    if (stale) {
      this.drawBanner("FEED STALE / DISCONNECTED");
    }
  }

  private drawTable(): void {
    const { ctx, view } = this;
    const [x0, y0] = tableToCanvas(view, 0, this.track.table.height_m);
    const [x1, y1] = tableToCanvas(view, this.track.table.width_m, 0);
    ctx.fillStyle = COLORS.table;
    ctx.fillRect(x0, y0, x1 - x0, y1 - y0);
  }

  private drawTrack(): void {
    const { ctx, view } = this;
    const scale =
      (view.canvasWidth - 2 * view.margin) / this.track.table.width_m;
    ctx.strokeStyle = COLORS.lane;
    ctx.lineWidth = Math.max(2, this.track.table.lane_width_m * scale);
    ctx.beginPath();
    this.track.centerline.forEach(([x, y], i) => {
      const [px, py] = tableToCanvas(view, x, y);
      if (i === 0) {
        ctx.moveTo(px, py);
      } else {
        ctx.lineTo(px, py);
      }
    });
    ctx.closePath();
    ctx.stroke();
  }

  private drawNodes(): void {
    const { ctx, view } = this;
    ctx.fillStyle = COLORS.node;
    for (const node of this.track.nodes) {
      const [px, py] = tableToCanvas(view, node.x_m, node.y_m);
      ctx.beginPath();
      ctx.arc(px, py, 3, 0, 2 * Math.PI);
      ctx.fill();
    }
  }

  private drawGlyph(glyph: Glyph, selected: boolean): void {
    const { ctx } = this;
    ctx.save();
    ctx.translate(glyph.px, glyph.py);
    // heading 0 points +Y on the table = up on canvas; positive heading turns
    // toward +X = clockwise on screen
    ctx.rotate(glyph.headingRad);
    ctx.fillStyle = glyph.kind === "mapping" ? COLORS.mapping : COLORS.cloud;
    ctx.fillRect(
      -glyph.widthPx / 2,
      -glyph.lengthPx / 2,
      glyph.widthPx,
      glyph.lengthPx,
    );
    // nose marker
    ctx.fillStyle = COLORS.text;
    ctx.fillRect(-glyph.widthPx / 4, -glyph.lengthPx / 2, glyph.widthPx / 2, 2);
    if (selected) {
      ctx.strokeStyle = COLORS.selected;
      ctx.lineWidth = 2;
      ctx.strokeRect(
        -glyph.widthPx / 2 - 2,
        -glyph.lengthPx / 2 - 2,
        glyph.widthPx + 4,
        glyph.lengthPx + 4,
      );
    }
    ctx.restore();
    ctx.fillStyle = COLORS.text;
    ctx.font = "10px monospace";
    ctx.fillText(glyph.label, glyph.px + 8, glyph.py - 8);
  }

  private drawBanner(text: string): void {
    const { ctx, view } = this;
    ctx.fillStyle = COLORS.banner;
    ctx.fillRect(0, 0, view.canvasWidth, 28);
    ctx.fillStyle = "#ffffff";
    ctx.font = "bold 14px sans-serif";
    ctx.fillText(text, 10, 19);
  }
}
