/** Cockpit state: everything the renderer and HUD read, DOM-free. */

import { Grid, base64ToBytes, decodeGridBlob } from "./grids.js";
import { Mode, ServerFrame, StateFrame } from "./protocol.js";

export const STALE_AFTER_MS = 1000;
const LOG_LIMIT = 200;
const GOAL_MATCH_TOLERANCE = 0.01; // state frames round goals to 3 decimals

export interface LogEntry {
  tick: number;
  text: string;
}

export class CockpitModel {
  connected = false;
  role: "driver" | "observer" | null = null;
  world: string | null = null;
  resolution = 0.05;
  sizeCells: [number, number] = [0, 0];
  goals: Record<string, [number, number]> = {};
  mode: Mode | null = null;
  hasMap = false;
  state: StateFrame | null = null;
  map: Grid | null = null;
  costmap: Grid | null = null;
  /** Click sent to the gateway, cleared once a state frame carries it. */
  pendingGoal: [number, number] | null = null;
  log: LogEntry[] = [];

  private lastStateAtMs = -Infinity;
  private frameStamps: number[] = [];

  /** World extent in meters, [width, height]. */
  worldExtent(): [number, number] {
    return [this.sizeCells[0] * this.resolution, this.sizeCells[1] * this.resolution];
  }

  applyFrame(frame: ServerFrame, nowMs: number): void {
    switch (frame.type) {
      case "hello":
        this.role = frame.role;
        this.world = frame.world;
        this.resolution = frame.resolution;
        this.sizeCells = frame.size;
        this.goals = frame.goals;
        this.mode = frame.mode;
        this.hasMap = frame.has_map;
        this.addLog(frame.tick, `connected to ${frame.world} as ${frame.role}`);
        break;
      case "state":
        this.applyState(frame, nowMs);
        break;
      case "role":
        this.role = frame.role;
        this.addLog(this.state?.tick ?? 0, `role is now ${frame.role}`);
        break;
      case "ack":
        if (frame.cmd === "set_mode" || frame.cmd === "set_goal") break; // state echoes these
        this.addLog(this.state?.tick ?? 0, `ok: ${frame.cmd}`);
        break;
      case "error": {
        const where = frame.cmd ? `${frame.cmd}: ` : "";
        this.addLog(this.state?.tick ?? 0, `refused ${where}${frame.error}`);
        if (frame.cmd === "set_goal") this.pendingGoal = null;
        break;
      }
      case "map":
        this.map = decodeGridBlob(base64ToBytes(frame.data));
        break;
      case "costmap":
        this.costmap = decodeGridBlob(base64ToBytes(frame.data));
        break;
    }
  }

  private applyState(frame: StateFrame, nowMs: number): void {
    this.state = frame;
    this.mode = frame.mode;
    this.lastStateAtMs = nowMs;
    if (this.pendingGoal && frame.goal) {
      const [px, py] = this.pendingGoal;
      if (
        Math.abs(frame.goal[0] - px) < GOAL_MATCH_TOLERANCE &&
        Math.abs(frame.goal[1] - py) < GOAL_MATCH_TOLERANCE
      ) {
        this.pendingGoal = null;
        this.addLog(frame.tick, `goal set at (${frame.goal[0].toFixed(2)}, ${frame.goal[1].toFixed(2)})`);
      }
    }
    for (const event of frame.events) {
      this.addLog(frame.tick, event);
    }
  }

  requestGoalAt(x: number, y: number): void {
    this.pendingGoal = [x, y];
  }

  installGrid(grid: Grid): void {
    if (grid.kind === "map") this.map = grid;
    else this.costmap = grid;
  }

  /** True once state frames stop arriving on a live connection. */
  isStale(nowMs: number): boolean {
    return this.connected && this.state !== null && nowMs - this.lastStateAtMs > STALE_AFTER_MS;
  }

  authorityBadge(): "user" | "system" | "offline" {
    if (!this.connected || this.state === null) return "offline";
    return this.state.authority;
  }

  /** Call once per rendered frame; fps() counts the trailing second. */
  markFrame(nowMs: number): void {
    this.frameStamps.push(nowMs);
    while (this.frameStamps.length && this.frameStamps[0] <= nowMs - 1000) {
      this.frameStamps.shift();
    }
  }

  fps(): number {
    return this.frameStamps.length;
  }

  addLog(tick: number, text: string): void {
    this.log.push({ tick, text });
    if (this.log.length > LOG_LIMIT) this.log.splice(0, this.log.length - LOG_LIMIT);
  }
}
