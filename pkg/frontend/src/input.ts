// Driver input: keyboard and gamepad produce the same normalized state
// (throttle in [0, 1], steer in [-1, 1]), mapped onto the vehicle envelope
// before anything is sent.

export interface DriveState {
  throttle: number; // [0, 1]
  steer: number; // [-1, 1], positive steers toward +X when heading +Y
}

export interface DriveCommand {
  speed_mps: number;
  steer_rad: number;
}

export const MAX_STEER_RAD = (40 * Math.PI) / 180;

export function neutral(): DriveState {
  return { throttle: 0, steer: 0 };
}

function clamp(value: number, lo: number, hi: number): number {
  return Math.max(lo, Math.min(hi, value));
}

// throttle 1 asks for the vehicle's full speed range; the hub sandbox has the
// final say on whatever arrives.
export function toCommand(state: DriveState, vMax: number): DriveCommand {
  return {
    speed_mps: clamp(state.throttle, 0, 1) * vMax,
    steer_rad: clamp(state.steer, -1, 1) * MAX_STEER_RAD,
  };
}

export class KeyboardInput {
  private pressed = new Set<string>();

  keyDown(code: string): void {
    this.pressed.add(code);
  }

  keyUp(code: string): void {
    this.pressed.delete(code);
  }

  state(): DriveState {
    const up = this.pressed.has("ArrowUp") || this.pressed.has("KeyW");
    const left = this.pressed.has("ArrowLeft") || this.pressed.has("KeyA");
    const right = this.pressed.has("ArrowRight") || this.pressed.has("KeyD");
    return {
      throttle: up ? 1 : 0,
      steer: (right ? 1 : 0) - (left ? 1 : 0),
    };
  }
}

export interface GamepadLike {
  axes: ReadonlyArray<number>; // axes[0]: steer, axes[1]: forward stick (-1 up)
  buttons: ReadonlyArray<{ value: number }>;
}

const STICK_DEADZONE = 0.1;

export function gamepadState(pad: GamepadLike): DriveState {
  let steer = pad.axes.length > 0 ? pad.axes[0] : 0;
  if (Math.abs(steer) < STICK_DEADZONE) {
    steer = 0;
  }
  // right trigger if present, otherwise pushing the stick forward
  let throttle = pad.buttons.length > 7 ? pad.buttons[7].value : 0;
  if (throttle === 0 && pad.axes.length > 1 && pad.axes[1] < -STICK_DEADZONE) {
    throttle = -pad.axes[1];
  }
  return {
    throttle: clamp(throttle, 0, 1),
    steer: clamp(steer, -1, 1),
  };
}

// The hub expects at most the control rate; drop sends above maxHz.
export class SendLimiter {
  private lastSend = -Infinity;

  constructor(private maxHz: number) {}

  ready(nowMs: number): boolean {
    if (nowMs - this.lastSend >= 1000 / this.maxHz) {
      this.lastSend = nowMs;
      return true;
    }
    return false;
  }
}
