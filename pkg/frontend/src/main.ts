// Console bootstrap: query parameters pick the hub and an optional vehicle,
// e.g. index.html?hub=127.0.0.1:8000&vehicle=V2

import { KeyboardInput, gamepadState } from "./input.js";
import { UiSession } from "./session.js";
import { WorldRenderer, TrackInfo } from "./render.js";
import { layoutGlyphs, ViewConfig } from "./view.js";

const V_MAX_DEFAULT = 1.0; // the hub sandbox enforces the real envelope

async function boot(): Promise<void> {
  const params = new URLSearchParams(window.location.search);
  const hub = params.get("hub") ?? `${window.location.hostname}:8000`;
  const vehicle = params.get("vehicle");

  const trackResponse = await fetch(`http://${hub}/track`);
  const track: TrackInfo = await trackResponse.json();

  const canvas = document.getElementById("world") as HTMLCanvasElement;
  const status = document.getElementById("status") as HTMLDivElement;
  const view: ViewConfig = {
    canvasWidth: canvas.width,
    canvasHeight: canvas.height,
    table: track.table,
    margin: 24,
  };
  const renderer = new WorldRenderer(canvas.getContext("2d")!, view, track);

  const socket = new WebSocket(`ws://${hub}/ws`);
  const session = new UiSession(socket as never, {
    onConnection: (up) => {
      status.textContent = up ? "connected" : "disconnected";
    },
    onAck: (ack) => {
      if (!ack.ok) {
        status.textContent = `hub: ${ack.detail}`;
      }
    },
  });
  if (vehicle) {
    session.selectVehicle(vehicle);
  }

  const keyboard = new KeyboardInput();
  document.addEventListener("keydown", (e) => {
    keyboard.keyDown(e.code);
    if (e.code === "Space") {
      session.controlling ? session.releaseControl() : session.takeControl();
    }
    if (e.code === "KeyV") {
      session.viewMode = session.viewMode === "top-down" ? "follow" : "top-down";
    }
  });
  document.addEventListener("keyup", (e) => keyboard.keyUp(e.code));

  canvas.addEventListener("click", (e) => {
    // nearest glyph within 20 px becomes the selected vehicle
    if (session.snapshot === null) return;
    const rect = canvas.getBoundingClientRect();
    const px = e.clientX - rect.left;
    const py = e.clientY - rect.top;
    let best: { id: string; d: number } | null = null;
    for (const g of layoutGlyphs(session.snapshot, view)) {
      const d = Math.hypot(g.px - px, g.py - py);
      if (d < 20 && (best === null || d < best.d)) {
        best = { id: g.id, d };
      }
    }
    if (best !== null) {
      session.selectVehicle(best.id);
    }
  });

  // input sampling decoupled from render frames; the session limits sends to 8 Hz
  setInterval(() => {
    let state = keyboard.state();
    const pads = navigator.getGamepads?.() ?? [];
    const pad = pads.find((p) => p !== null);
    if (pad && state.throttle === 0 && state.steer === 0) {
      state = gamepadState(pad);
    }
    if (session.controlling) {
      session.drive(state, V_MAX_DEFAULT);
    }
  }, 50);

  const frame = () => {
    if (session.viewMode === "follow" && session.snapshot && session.selectedVehicle) {
      const target = session.snapshot.vehicles.find(
        (v) => v.id === session.selectedVehicle,
      );
      view.focus = target
        ? { x: target.x_m, y: target.y_m, zoom: 4 }
        : undefined;
    } else {
      view.focus = undefined;
    }
    renderer.render(session.snapshot, session.selectedVehicle, session.feedStale());
    requestAnimationFrame(frame);
  };
  requestAnimationFrame(frame);
}

boot().catch((err) => {
  const status = document.getElementById("status");
  if (status) {
    status.textContent = `failed to start: ${err}`;
  }
});
