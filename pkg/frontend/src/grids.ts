/** Binary grid blobs served over /map and /costmap, and their pixel ramps. */

const MAP_MAGIC = "WNAVMAP1";
const COSTMAP_MAGIC = "WNAVCST1";
const HEADER_BYTES = 8 + 8 + 4 + 4; // magic, f64 resolution, u32 width, u32 height

// occupancy cell values
export const FREE = 0;
export const OCCUPIED = 100;
export const UNKNOWN_CELL = 255;

// costmap cell values
export const INSCRIBED = 253;
export const LETHAL = 254;
export const UNKNOWN_COST = 255;

export interface Grid {
  kind: "map" | "costmap";
  resolution: number; // m per cell
  width: number; // cells
  height: number; // cells
  cells: Uint8Array; // row-major, row 0 at world y=0
}

/** Decode one blob; validates magic and exact payload length. */
export function decodeGridBlob(buffer: ArrayBuffer): Grid {
  if (buffer.byteLength < HEADER_BYTES) {
    throw new Error("grid blob truncated before header end");
  }
  const magic = new TextDecoder().decode(new Uint8Array(buffer, 0, 8));
  let kind: Grid["kind"];
  if (magic === MAP_MAGIC) kind = "map";
  else if (magic === COSTMAP_MAGIC) kind = "costmap";
  else throw new Error(`unrecognized grid magic ${JSON.stringify(magic)}`);
  const view = new DataView(buffer);
  const resolution = view.getFloat64(8, true);
  const width = view.getUint32(16, true);
  const height = view.getUint32(20, true);
  if (buffer.byteLength !== HEADER_BYTES + width * height) {
    throw new Error("grid blob length does not match its header");
  }
  const cells = new Uint8Array(buffer, HEADER_BYTES).slice();
  return { kind, resolution, width, height, cells };
}

/** Decode the base64 payload of a ws map/costmap frame. */
export function base64ToBytes(data: string): ArrayBuffer {
  const binary = atob(data);
  const bytes = new Uint8Array(binary.length);
  for (let i = 0; i < binary.length; i++) bytes[i] = binary.charCodeAt(i);
  return bytes.buffer;
}

/**
 * Occupancy to RGBA. Row 0 of the grid is world y=0 (bottom), row 0 of the
 * image is the top, so rows are flipped here once instead of per frame.
 */
export function mapToRgba(grid: Grid): Uint8ClampedArray {
  const { width, height, cells } = grid;
  const rgba = new Uint8ClampedArray(width * height * 4);
  for (let row = 0; row < height; row++) {
    const srcRow = height - 1 - row;
    for (let col = 0; col < width; col++) {
      const v = cells[srcRow * width + col];
      const o = (row * width + col) * 4;
      if (v === OCCUPIED) {
        rgba[o] = 34;
        rgba[o + 1] = 38;
        rgba[o + 2] = 46;
      } else if (v === FREE) {
        rgba[o] = 225;
        rgba[o + 1] = 228;
        rgba[o + 2] = 232;
      } else {
        rgba[o] = 148;
        rgba[o + 1] = 152;
        rgba[o + 2] = 158;
      }
      rgba[o + 3] = 255;
    }
  }
  return rgba;
}

/**
 * Costmap to a translucent overlay: free space fully transparent, the
 * inflation ramp warming toward the inscribed band, lethal solid.
 */
export function costmapToRgba(grid: Grid): Uint8ClampedArray {
  const { width, height, cells } = grid;
  const rgba = new Uint8ClampedArray(width * height * 4);
  for (let row = 0; row < height; row++) {
    const srcRow = height - 1 - row;
    for (let col = 0; col < width; col++) {
      const v = cells[srcRow * width + col];
      const o = (row * width + col) * 4;
      if (v === LETHAL) {
        rgba[o] = 208;
        rgba[o + 1] = 42;
        rgba[o + 2] = 42;
        rgba[o + 3] = 235;
      } else if (v === INSCRIBED) {
        rgba[o] = 226;
        rgba[o + 1] = 106;
        rgba[o + 2] = 44;
        rgba[o + 3] = 190;
      } else if (v === UNKNOWN_COST) {
        rgba[o + 3] = 0;
      } else if (v > 0) {
        rgba[o] = 235;
        rgba[o + 1] = 170 - Math.round((v / 252) * 120);
        rgba[o + 2] = 40;
        rgba[o + 3] = 28 + Math.round((v / 252) * 130);
      } else {
        rgba[o + 3] = 0;
      }
    }
  }
  return rgba;
}
