/** Keyboard driving: pressed keys reduce to joystick axes at a capped rate. */

export const SEND_INTERVAL_MS = 50; // 20 Hz joystick stream

const FORWARD_KEYS = new Set(["KeyW", "ArrowUp"]);
const BACKWARD_KEYS = new Set(["KeyS", "ArrowDown"]);
const LEFT_KEYS = new Set(["KeyA", "ArrowLeft"]);
const RIGHT_KEYS = new Set(["KeyD", "ArrowRight"]);

export const DRIVING_KEYS = new Set([
  ...FORWARD_KEYS,
  ...BACKWARD_KEYS,
  ...LEFT_KEYS,
  ...RIGHT_KEYS,
]);

export interface Axes {
  fwd: number;
  turn: number; // positive turns left (counterclockwise)
}

export function axesFromKeys(pressed: ReadonlySet<string>): Axes {
  let fwd = 0;
  let turn = 0;
  for (const code of pressed) {
    if (FORWARD_KEYS.has(code)) fwd += 1;
    else if (BACKWARD_KEYS.has(code)) fwd -= 1;
    else if (LEFT_KEYS.has(code)) turn += 1;
    else if (RIGHT_KEYS.has(code)) turn -= 1;
  }
  return { fwd: Math.max(-1, Math.min(1, fwd)), turn: Math.max(-1, Math.min(1, turn)) };
}

/**
 * Decides when a joystick frame actually goes out: immediately on any axis
 * change (so releases forward a zero right away), otherwise repeats at the
 * send interval while the stick is deflected. An idle centered stick sends
 * nothing and lets the gateway dead-man take over.
 */
export class JoystickScheduler {
  private lastSentAt = -Infinity;
  private lastAxes: Axes = { fwd: 0, turn: 0 };

  shouldSend(axes: Axes, nowMs: number): boolean {
    const changed = axes.fwd !== this.lastAxes.fwd || axes.turn !== this.lastAxes.turn;
    const deflected = axes.fwd !== 0 || axes.turn !== 0;
    const due = nowMs - this.lastSentAt >= SEND_INTERVAL_MS;
    if (changed || (deflected && due)) {
      this.lastSentAt = nowMs;
      this.lastAxes = { ...axes };
      return true;
    }
    return false;
  }

  /** Window blur or disconnect: force the next poll to emit a zero. */
  reset(): void {
    this.lastSentAt = -Infinity;
    this.lastAxes = { fwd: NaN, turn: NaN };
  }
}
