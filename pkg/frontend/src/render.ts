/** Canvas painting: prebaked grid layers blitted per frame, vectors on top. */

import { Camera } from "./camera.js";
import { Grid, costmapToRgba, mapToRgba } from "./grids.js";
import { CockpitModel } from "./viewmodel.js";

/** Grid layers are rebaked only when a new blob arrives, never per frame. */
export class LayerCache {
  private mapSource: Grid | null = null;
  private costmapSource: Grid | null = null;
  private mapCanvas: HTMLCanvasElement | null = null;
  private costmapCanvas: HTMLCanvasElement | null = null;

  private bake(grid: Grid, rgba: Uint8ClampedArray): HTMLCanvasElement {
    const canvas = document.createElement("canvas");
    canvas.width = grid.width;
    canvas.height = grid.height;
    const ctx = canvas.getContext("2d")!;
    // copy onto a plain ArrayBuffer so ImageData accepts it in every lib version
    ctx.putImageData(new ImageData(new Uint8ClampedArray(rgba), grid.width, grid.height), 0, 0);
    return canvas;
  }

  mapLayer(model: CockpitModel): HTMLCanvasElement | null {
    if (model.map && model.map !== this.mapSource) {
      this.mapSource = model.map;
      this.mapCanvas = this.bake(model.map, mapToRgba(model.map));
    }
    return this.mapCanvas;
  }

  costmapLayer(model: CockpitModel): HTMLCanvasElement | null {
    if (model.costmap && model.costmap !== this.costmapSource) {
      this.costmapSource = model.costmap;
      this.costmapCanvas = this.bake(model.costmap, costmapToRgba(model.costmap));
    }
    return this.costmapCanvas;
  }
}

function drawGridLayer(
  ctx: CanvasRenderingContext2D,
  layer: HTMLCanvasElement,
  grid: Grid,
  camera: Camera,
): void {
  const [left, top] = camera.worldToScreen(0, grid.height * grid.resolution);
  const widthPx = grid.width * grid.resolution * camera.scale;
  const heightPx = grid.height * grid.resolution * camera.scale;
  ctx.imageSmoothingEnabled = false;
  ctx.drawImage(layer, left, top, widthPx, heightPx);
}

function drawPath(ctx: CanvasRenderingContext2D, path: [number, number][], camera: Camera): void {
  if (path.length < 2) return;
  ctx.beginPath();
  const [x0, y0] = camera.worldToScreen(path[0][0], path[0][1]);
  ctx.moveTo(x0, y0);
  for (let i = 1; i < path.length; i++) {
    const [x, y] = camera.worldToScreen(path[i][0], path[i][1]);
    ctx.lineTo(x, y);
  }
  ctx.strokeStyle = "#3da5ff";
  ctx.lineWidth = 2;
  ctx.stroke();
}

function drawGoal(
  ctx: CanvasRenderingContext2D,
  goal: [number, number],
  camera: Camera,
  pending: boolean,
): void {
  const [x, y] = camera.worldToScreen(goal[0], goal[1]);
  ctx.beginPath();
  ctx.arc(x, y, 7, 0, Math.PI * 2);
  ctx.setLineDash(pending ? [3, 3] : []);
  ctx.strokeStyle = pending ? "#9a8cff" : "#38c172";
  ctx.lineWidth = 2;
  ctx.stroke();
  ctx.setLineDash([]);
  ctx.beginPath();
  ctx.moveTo(x - 3, y);
  ctx.lineTo(x + 3, y);
  ctx.moveTo(x, y - 3);
  ctx.lineTo(x, y + 3);
  ctx.stroke();
}

function drawRobot(
  ctx: CanvasRenderingContext2D,
  x: number,
  y: number,
  theta: number,
  camera: Camera,
): void {
  const [px, py] = camera.worldToScreen(x, y);
  const r = Math.max(5, 0.35 * camera.scale); // footprint radius on screen
  ctx.beginPath();
  ctx.arc(px, py, r, 0, Math.PI * 2);
  ctx.fillStyle = "rgba(61, 165, 255, 0.25)";
  ctx.fill();
  ctx.strokeStyle = "#3da5ff";
  ctx.lineWidth = 1.5;
  ctx.stroke();
  // heading chevron; screen angles run clockwise so the sign flips
  ctx.beginPath();
  ctx.moveTo(px, py);
  ctx.lineTo(px + r * 1.4 * Math.cos(-theta), py + r * 1.4 * Math.sin(-theta));
  ctx.strokeStyle = "#e8ecf1";
  ctx.lineWidth = 2;
  ctx.stroke();
}

export function paint(
  ctx: CanvasRenderingContext2D,
  model: CockpitModel,
  camera: Camera,
  layers: LayerCache,
): void {
  const canvas = ctx.canvas;
  ctx.fillStyle = "#14161b";
  ctx.fillRect(0, 0, canvas.width, canvas.height);
  const mapLayer = layers.mapLayer(model);
  if (mapLayer && model.map) drawGridLayer(ctx, mapLayer, model.map, camera);
  const costLayer = layers.costmapLayer(model);
  if (costLayer && model.costmap) drawGridLayer(ctx, costLayer, model.costmap, camera);
  const state = model.state;
  if (state?.path) drawPath(ctx, state.path, camera);
  if (model.pendingGoal) drawGoal(ctx, model.pendingGoal, camera, true);
  if (state?.goal) drawGoal(ctx, state.goal, camera, false);
  if (state) drawRobot(ctx, state.pose.x, state.pose.y, state.pose.theta, camera);
}
