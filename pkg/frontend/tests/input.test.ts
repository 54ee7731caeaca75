import { describe, expect, it } from "vitest";

import { JoystickScheduler, SEND_INTERVAL_MS, axesFromKeys } from "../src/input.js";

describe("axesFromKeys", () => {
  it("maps wasd and arrows onto the two axes", () => {
    expect(axesFromKeys(new Set(["KeyW"]))).toEqual({ fwd: 1, turn: 0 });
    expect(axesFromKeys(new Set(["ArrowDown"]))).toEqual({ fwd: -1, turn: 0 });
    expect(axesFromKeys(new Set(["KeyA"]))).toEqual({ fwd: 0, turn: 1 });
    expect(axesFromKeys(new Set(["ArrowRight"]))).toEqual({ fwd: 0, turn: -1 });
    expect(axesFromKeys(new Set(["KeyW", "KeyD"]))).toEqual({ fwd: 1, turn: -1 });
  });

  it("cancels opposing keys and ignores everything else", () => {
    expect(axesFromKeys(new Set(["KeyW", "KeyS"]))).toEqual({ fwd: 0, turn: 0 });
    expect(axesFromKeys(new Set(["KeyA", "ArrowRight"]))).toEqual({ fwd: 0, turn: 0 });
    expect(axesFromKeys(new Set(["KeyQ", "Space"]))).toEqual({ fwd: 0, turn: 0 });
  });

  it("clamps doubled bindings to one unit of deflection", () => {
    expect(axesFromKeys(new Set(["KeyW", "ArrowUp"]))).toEqual({ fwd: 1, turn: 0 });
  });
});

describe("JoystickScheduler", () => {
  it("sends immediately on change, then repeats at the capped rate", () => {
    const sched = new JoystickScheduler();
    const forward = { fwd: 1, turn: 0 };
    expect(sched.shouldSend(forward, 0)).toBe(true);
    expect(sched.shouldSend(forward, 10)).toBe(false);
    expect(sched.shouldSend(forward, SEND_INTERVAL_MS - 1)).toBe(false);
    expect(sched.shouldSend(forward, SEND_INTERVAL_MS)).toBe(true);
  });

  it("pushes the release zero out immediately, then goes quiet", () => {
    const sched = new JoystickScheduler();
    sched.shouldSend({ fwd: 1, turn: 0 }, 0);
    expect(sched.shouldSend({ fwd: 0, turn: 0 }, 5)).toBe(true);
    expect(sched.shouldSend({ fwd: 0, turn: 0 }, 5 + SEND_INTERVAL_MS * 10)).toBe(false);
  });

  it("reset forces the next poll through, covering blur and reconnect", () => {
    const sched = new JoystickScheduler();
    sched.shouldSend({ fwd: 0, turn: 0 }, 0);
    expect(sched.shouldSend({ fwd: 0, turn: 0 }, 1)).toBe(false);
    sched.reset();
    expect(sched.shouldSend({ fwd: 0, turn: 0 }, 2)).toBe(true);
  });
});
