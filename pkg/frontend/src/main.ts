/** Cockpit wiring: socket, HTTP layers, keyboard, mouse, HUD, render loop. */

import { Camera } from "./camera.js";
import { decodeGridBlob } from "./grids.js";
import { DRIVING_KEYS, JoystickScheduler, axesFromKeys } from "./input.js";
import {
  Mode,
  buildBare,
  buildGoalAt,
  buildGoalByLabel,
  buildJoystick,
  buildSetMode,
  parseFrame,
} from "./protocol.js";
import { LayerCache, paint } from "./render.js";
import { CockpitModel } from "./viewmodel.js";

const COSTMAP_REFRESH_MS = 2000;
const RECONNECT_MS = 1500;

function gatewayHost(): string {
  const param = new URLSearchParams(location.search).get("gw");
  if (param) return param;
  if (location.protocol.startsWith("http") && location.host) return location.host;
  return "localhost:8732";
}

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id} in the page`);
  return node as T;
}

class Cockpit {
  readonly model = new CockpitModel();
  readonly camera = new Camera();
  private readonly layers = new LayerCache();
  private readonly scheduler = new JoystickScheduler();
  private readonly pressed = new Set<string>();
  private readonly host = gatewayHost();
  private ws: WebSocket | null = null;
  private fitted = false;
  private lastCostmapFetch = 0;
  private canvas = el<HTMLCanvasElement>("view");
  private ctx = this.canvas.getContext("2d")!;
  private drag: { x: number; y: number; moved: boolean } | null = null;

  start(): void {
    this.bindControls();
    this.connect();
    this.resize();
    window.addEventListener("resize", () => this.resize());
    setInterval(() => this.pollJoystick(), 25);
    const loop = () => {
      this.frame();
      requestAnimationFrame(loop);
    };
    requestAnimationFrame(loop);
  }

  // -- connection ------------------------------------------------------

  private connect(): void {
    const scheme = location.protocol === "https:" ? "wss" : "ws";
    const ws = new WebSocket(`${scheme}://${this.host}/ws`);
    this.ws = ws;
    ws.onopen = () => {
      this.model.connected = true;
      void this.fetchLayer("map");
      void this.fetchLayer("costmap");
    };
    ws.onmessage = (msg) => {
      if (typeof msg.data !== "string") return;
      let frame;
      try {
        frame = parseFrame(msg.data);
      } catch {
        return;
      }
      if (!frame) return;
      this.model.applyFrame(frame, performance.now());
      if (frame.type === "hello") void this.fetchLayer("map");
      if (frame.type === "ack" && (frame.cmd === "finish_mapping" || frame.cmd === "reset")) {
        void this.fetchLayer("map");
        void this.fetchLayer("costmap");
      }
    };
    ws.onclose = () => {
      this.model.connected = false;
      this.ws = null;
      this.scheduler.reset();
      setTimeout(() => this.connect(), RECONNECT_MS);
    };
  }

  private send(text: string): void {
    if (this.ws && this.ws.readyState === WebSocket.OPEN) this.ws.send(text);
  }

  /** Grid layers come from the gateway's HTTP endpoints; 404 means none yet. */
  private async fetchLayer(kind: "map" | "costmap"): Promise<void> {
    try {
      const resp = await fetch(`${location.protocol === "https:" ? "https" : "http"}://${this.host}/${kind}`);
      if (!resp.ok) return;
      const grid = decodeGridBlob(await resp.arrayBuffer());
      this.model.installGrid(grid);
      if (!this.fitted && grid.kind === "map") this.fitCamera();
    } catch {
      // gateway briefly unreachable; the reconnect path retries
    }
  }

  // -- input -----------------------------------------------------------

  private bindControls(): void {
    window.addEventListener("keydown", (ev) => {
      if (DRIVING_KEYS.has(ev.code)) {
        this.pressed.add(ev.code);
        ev.preventDefault();
      }
    });
    window.addEventListener("keyup", (ev) => this.pressed.delete(ev.code));
    window.addEventListener("blur", () => {
      this.pressed.clear();
      this.scheduler.reset(); // next poll pushes an explicit zero
    });

    this.canvas.addEventListener("mousedown", (ev) => {
      this.drag = { x: ev.offsetX, y: ev.offsetY, moved: false };
    });
    this.canvas.addEventListener("mousemove", (ev) => {
      if (!this.drag) return;
      const dx = ev.offsetX - this.drag.x;
      const dy = ev.offsetY - this.drag.y;
      if (Math.abs(dx) + Math.abs(dy) > 4) this.drag.moved = true;
      if (this.drag.moved) {
        this.camera.panBy(dx, dy);
        this.drag.x = ev.offsetX;
        this.drag.y = ev.offsetY;
      }
    });
    this.canvas.addEventListener("mouseup", (ev) => {
      const wasClick = this.drag !== null && !this.drag.moved;
      this.drag = null;
      if (!wasClick) return;
      const [x, y] = this.camera.screenToWorld(ev.offsetX, ev.offsetY);
      this.model.requestGoalAt(x, y);
      this.send(buildGoalAt(x, y));
    });
    this.canvas.addEventListener("mouseleave", () => (this.drag = null));
    this.canvas.addEventListener("wheel", (ev) => {
      ev.preventDefault();
      this.camera.zoomAt(ev.offsetX, ev.offsetY, ev.deltaY < 0 ? 1.15 : 1 / 1.15);
    });

    for (const mode of ["manual", "semi_autonomous", "autonomous"] as Mode[]) {
      el(`mode-${mode}`).addEventListener("click", () => this.send(buildSetMode(mode)));
    }
    el("start-mapping").addEventListener("click", () => this.send(buildBare("start_mapping")));
    el("finish-mapping").addEventListener("click", () => this.send(buildBare("finish_mapping")));
    el("reset").addEventListener("click", () => this.send(buildBare("reset")));
    el("refresh-layers").addEventListener("click", () => {
      void this.fetchLayer("map");
      void this.fetchLayer("costmap");
    });
  }

  private pollJoystick(): void {
    if (this.model.role !== "driver") return;
    const axes = axesFromKeys(this.pressed);
    if (this.scheduler.shouldSend(axes, performance.now())) {
      this.send(buildJoystick(axes.fwd, axes.turn));
    }
  }

  // -- painting --------------------------------------------------------

  private resize(): void {
    const holder = el<HTMLDivElement>("view-holder");
    this.canvas.width = holder.clientWidth;
    this.canvas.height = holder.clientHeight;
    if (this.model.map) this.fitCamera();
  }

  private fitCamera(): void {
    const [w, h] = this.model.worldExtent();
    if (w > 0 && h > 0) {
      this.camera.fitTo(w, h, this.canvas.width, this.canvas.height);
      this.fitted = true;
    }
  }

  private frame(): void {
    const now = performance.now();
    if (this.model.connected && this.model.hasMap && now - this.lastCostmapFetch > COSTMAP_REFRESH_MS) {
      this.lastCostmapFetch = now;
      void this.fetchLayer("costmap");
    }
    paint(this.ctx, this.model, this.camera, this.layers);
    this.model.markFrame(now);
    this.refreshHud(now);
  }

  private refreshHud(now: number): void {
    const m = this.model;
    const badge = el("authority");
    const authority = m.authorityBadge();
    badge.textContent = authority.toUpperCase();
    badge.className = `badge ${authority}`;
    el("status").textContent = m.connected
      ? m.isStale(now)
        ? "stale: no state frames for over a second"
        : `live, ${m.fps()} fps`
      : "disconnected, retrying";
    el("world").textContent = m.world ?? "-";
    el("role").textContent = m.role ?? "-";
    el("mode").textContent = m.mode ?? "-";
    el("reason").textContent = m.state?.reason ?? "-";
    el("tick").textContent = m.state ? String(m.state.tick) : "-";
    const goalsNode = el("goals");
    const labels = Object.keys(m.goals);
    if (goalsNode.childElementCount !== labels.length) {
      goalsNode.textContent = "";
      for (const label of labels) {
        const button = document.createElement("button");
        button.textContent = label;
        button.addEventListener("click", () => this.send(buildGoalByLabel(label)));
        goalsNode.appendChild(button);
      }
    }
    const logNode = el("log");
    const tail = m.log.slice(-12);
    logNode.textContent = tail.map((entry) => `#${entry.tick} ${entry.text}`).join("\n");
  }
}

new Cockpit().start();
