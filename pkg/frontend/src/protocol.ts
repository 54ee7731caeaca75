/** Wire protocol for the gateway WebSocket: typed frames in, JSON text out. */

export type Mode = "manual" | "semi_autonomous" | "autonomous";

export interface HelloFrame {
  type: "hello";
  role: "driver" | "observer";
  world: string;
  resolution: number;
  size: [number, number]; // cells, [width, height]
  goals: Record<string, [number, number]>;
  mode: Mode;
  has_map: boolean;
  tick: number;
}

export interface PoseState {
  x: number;
  y: number;
  theta: number;
  confidence: number;
}

export interface StateFrame {
  type: "state";
  tick: number;
  sim_time: number;
  pose: PoseState;
  twist: { v: number; w: number };
  mode: Mode;
  authority: "user" | "system";
  reason: string;
  goal_reached: boolean;
  events: string[];
  goal?: [number, number];
  path?: [number, number][];
}

export interface AckFrame {
  type: "ack";
  cmd: string;
  [extra: string]: unknown;
}

export interface ErrorFrame {
  type: "error";
  error: string;
  cmd?: string;
  offset?: number;
}

export interface RoleFrame {
  type: "role";
  role: "driver" | "observer";
}

export interface BlobFrame {
  type: "map" | "costmap";
  encoding: "base64";
  data: string;
}

export type ServerFrame =
  | HelloFrame
  | StateFrame
  | AckFrame
  | ErrorFrame
  | RoleFrame
  | BlobFrame;

const SERVER_TYPES = new Set(["hello", "state", "ack", "error", "role", "map", "costmap"]);

/**
 * Parse one frame off the socket. Returns null for frames this client
 * does not understand, so protocol growth never breaks the cockpit.
 * Throws only on text that is not a JSON object at all.
 */
export function parseFrame(text: string): ServerFrame | null {
  let raw: unknown;
  try {
    raw = JSON.parse(text);
  } catch {
    throw new Error("gateway sent a frame that is not valid JSON");
  }
  if (typeof raw !== "object" || raw === null || Array.isArray(raw)) {
    throw new Error("gateway frame must be a JSON object");
  }
  const frame = raw as { type?: unknown };
  if (typeof frame.type !== "string" || !SERVER_TYPES.has(frame.type)) {
    return null;
  }
  return raw as ServerFrame;
}

function clampAxis(value: number): number {
  if (!Number.isFinite(value)) return 0;
  return Math.max(-1, Math.min(1, value));
}

export function buildJoystick(fwd: number, turn: number): string {
  return JSON.stringify({ type: "joystick", fwd: clampAxis(fwd), turn: clampAxis(turn) });
}

export function buildSetMode(mode: Mode): string {
  return JSON.stringify({ type: "set_mode", mode });
}

export function buildGoalByLabel(label: string): string {
  return JSON.stringify({ type: "set_goal", label });
}

export function buildGoalAt(x: number, y: number): string {
  return JSON.stringify({ type: "set_goal", x, y });
}

export function buildBare(
  kind: "start_mapping" | "finish_mapping" | "reset" | "get_map" | "get_costmap",
): string {
  return JSON.stringify({ type: kind });
}
