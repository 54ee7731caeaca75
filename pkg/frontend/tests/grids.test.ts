import { describe, expect, it } from "vitest";

import {
  FREE,
  INSCRIBED,
  LETHAL,
  OCCUPIED,
  UNKNOWN_CELL,
  UNKNOWN_COST,
  base64ToBytes,
  costmapToRgba,
  decodeGridBlob,
  mapToRgba,
} from "../src/grids.js";

/** Build a blob exactly as the gateway's binary endpoints do. */
function makeBlob(magic: string, resolution: number, width: number, height: number, cells: number[]): ArrayBuffer {
  const buffer = new ArrayBuffer(24 + cells.length);
  const bytes = new Uint8Array(buffer);
  new TextEncoder().encodeInto(magic, bytes);
  const view = new DataView(buffer);
  view.setFloat64(8, resolution, true);
  view.setUint32(16, width, true);
  view.setUint32(20, height, true);
  bytes.set(cells, 24);
  return buffer;
}

describe("decodeGridBlob", () => {
  it("reads the header and cells of a map blob", () => {
    const cells = [FREE, OCCUPIED, UNKNOWN_CELL, FREE, FREE, OCCUPIED];
    const grid = decodeGridBlob(makeBlob("WNAVMAP1", 0.05, 3, 2, cells));
    expect(grid.kind).toBe("map");
    expect(grid.resolution).toBeCloseTo(0.05, 12);
    expect(grid.width).toBe(3);
    expect(grid.height).toBe(2);
    expect(Array.from(grid.cells)).toEqual(cells);
  });

  it("distinguishes costmap blobs by magic", () => {
    const grid = decodeGridBlob(makeBlob("WNAVCST1", 0.1, 2, 2, [0, 100, 253, 254]));
    expect(grid.kind).toBe("costmap");
  });

  it("rejects foreign magic and truncated payloads", () => {
    expect(() => decodeGridBlob(makeBlob("NOTAGRID", 0.05, 1, 1, [0]))).toThrow(/magic/);
    const short = makeBlob("WNAVMAP1", 0.05, 4, 4, [0, 0]);
    expect(() => decodeGridBlob(short)).toThrow(/length/);
    expect(() => decodeGridBlob(new ArrayBuffer(10))).toThrow(/truncated/);
  });
});

describe("base64ToBytes", () => {
  it("round-trips a blob through the ws frame encoding", () => {
    const blob = makeBlob("WNAVMAP1", 0.05, 2, 1, [FREE, OCCUPIED]);
    const base64 = btoa(String.fromCharCode(...new Uint8Array(blob)));
    const grid = decodeGridBlob(base64ToBytes(base64));
    expect(grid.width).toBe(2);
    expect(Array.from(grid.cells)).toEqual([FREE, OCCUPIED]);
  });
});

describe("pixel ramps", () => {
  it("paints free, occupied and unknown map cells distinctly and opaquely", () => {
    const grid = decodeGridBlob(makeBlob("WNAVMAP1", 0.05, 3, 1, [FREE, OCCUPIED, UNKNOWN_CELL]));
    const rgba = mapToRgba(grid);
    const pixel = (i: number) => Array.from(rgba.slice(i * 4, i * 4 + 4));
    expect(new Set([pixel(0).join(), pixel(1).join(), pixel(2).join()]).size).toBe(3);
    expect(pixel(0)[3]).toBe(255);
    expect(pixel(1)[3]).toBe(255);
    expect(pixel(2)[3]).toBe(255);
  });

  it("flips rows so world y=0 lands at the bottom of the image", () => {
    // 1x2 grid: bottom row occupied, top row free
    const grid = decodeGridBlob(makeBlob("WNAVMAP1", 0.05, 1, 2, [OCCUPIED, FREE]));
    const rgba = mapToRgba(grid);
    const top = Array.from(rgba.slice(0, 4));
    const bottom = Array.from(rgba.slice(4, 8));
    expect(top[0]).toBe(225); // free
    expect(bottom[0]).toBe(34); // occupied
  });

  it("keeps zero-cost and unknown costmap cells transparent, lethal nearly solid", () => {
    const values = [0, 1, 126, 252, INSCRIBED, LETHAL, UNKNOWN_COST];
    const grid = decodeGridBlob(makeBlob("WNAVCST1", 0.05, values.length, 1, values));
    const rgba = costmapToRgba(grid);
    const alpha = (i: number) => rgba[i * 4 + 3];
    expect(alpha(0)).toBe(0);
    expect(alpha(6)).toBe(0);
    expect(alpha(1)).toBeGreaterThan(0);
    expect(alpha(2)).toBeGreaterThan(alpha(1));
    expect(alpha(3)).toBeGreaterThan(alpha(2));
    expect(alpha(5)).toBeGreaterThanOrEqual(230);
    // inscribed and lethal read as different colors
    const inscribed = Array.from(rgba.slice(4 * 4, 4 * 4 + 3));
    const lethal = Array.from(rgba.slice(5 * 4, 5 * 4 + 3));
    expect(inscribed).not.toEqual(lethal);
  });
});
