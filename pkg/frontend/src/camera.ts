/** World-to-canvas transform: meters with y up, pixels with y down. */

export class Camera {
  scale = 50; // px per meter
  // canvas position of the world origin
  originX = 0;
  originY = 0;

  /** Fit a world extent into the canvas with a small margin, centered. */
  fitTo(worldW: number, worldH: number, canvasW: number, canvasH: number): void {
    const margin = 0.95;
    this.scale = Math.min(canvasW / worldW, canvasH / worldH) * margin;
    this.originX = (canvasW - worldW * this.scale) / 2;
    this.originY = canvasH - (canvasH - worldH * this.scale) / 2;
  }

  worldToScreen(x: number, y: number): [number, number] {
    return [this.originX + x * this.scale, this.originY - y * this.scale];
  }

  screenToWorld(px: number, py: number): [number, number] {
    return [(px - this.originX) / this.scale, (this.originY - py) / this.scale];
  }

  panBy(dxPx: number, dyPx: number): void {
    this.originX += dxPx;
    this.originY += dyPx;
  }

  /** Zoom about a canvas point so the world spot under it stays put. */
  zoomAt(px: number, py: number, factor: number): void {
    const clamped = Math.max(5, Math.min(400, this.scale * factor));
    const applied = clamped / this.scale;
    this.originX = px - (px - this.originX) * applied;
    this.originY = py - (py - this.originY) * applied;
    this.scale = clamped;
  }
}
