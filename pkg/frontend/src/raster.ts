/** Minimal deterministic rasteriser and PNG writer for the raster output
 * format.  Geometry only: text shapes are skipped in raster mode. */

import * as zlib from "node:zlib";

import { Scene, Shape } from "./scene";

const COLORS: Record<string, [number, number, number, number]> = {
  white: [255, 255, 255, 255],
  black: [20, 20, 20, 255],
  "#ffffff": [255, 255, 255, 255],
  "#222222": [34, 34, 34, 255],
  "#888888": [136, 136, 136, 255],
  "#dddddd": [221, 221, 221, 255],
  "#1f77b4": [31, 119, 180, 255],
  "#2ca02c": [44, 160, 44, 255],
  "#d62728": [214, 39, 40, 255],
  "#ff7f0e": [255, 127, 14, 255],
  "#e8f1fa": [232, 241, 250, 255],
  "#fdf2d9": [253, 242, 217, 255],
  "#f2f2f2": [242, 242, 242, 255],
};

function colorOf(name: string): [number, number, number, number] {
  const c = COLORS[name];
  if (c) return c;
  if (/^#[0-9a-f]{6}$/i.test(name)) {
    return [
      parseInt(name.slice(1, 3), 16),
      parseInt(name.slice(3, 5), 16),
      parseInt(name.slice(5, 7), 16),
      255,
    ];
  }
  return [0, 0, 0, 255];
}

export class Canvas {
  readonly data: Uint8Array;

  constructor(readonly width: number, readonly height: number) {
    this.data = new Uint8Array(width * height * 4);
    this.data.fill(255);
  }

  set(x: number, y: number, rgba: [number, number, number, number]): void {
    const xi = Math.round(x);
    const yi = Math.round(y);
    if (xi < 0 || yi < 0 || xi >= this.width || yi >= this.height) return;
    const o = (yi * this.width + xi) * 4;
    this.data[o] = rgba[0];
    this.data[o + 1] = rgba[1];
    this.data[o + 2] = rgba[2];
    this.data[o + 3] = rgba[3];
  }

  fillRect(x: number, y: number, w: number, h: number, fill: string): void {
    const rgba = colorOf(fill);
    for (let yy = Math.max(0, Math.round(y)); yy < Math.min(this.height, Math.round(y + h)); yy++) {
      for (let xx = Math.max(0, Math.round(x)); xx < Math.min(this.width, Math.round(x + w)); xx++) {
        this.set(xx, yy, rgba);
      }
    }
  }

  line(x1: number, y1: number, x2: number, y2: number, stroke: string, width: number): void {
    const rgba = colorOf(stroke);
    const steps = Math.max(1, Math.ceil(Math.max(Math.abs(x2 - x1), Math.abs(y2 - y1))));
    const r = Math.max(0, Math.floor(width / 2));
    for (let i = 0; i <= steps; i++) {
      const x = x1 + ((x2 - x1) * i) / steps;
      const y = y1 + ((y2 - y1) * i) / steps;
      for (let dx = -r; dx <= r; dx++) {
        for (let dy = -r; dy <= r; dy++) {
          this.set(x + dx, y + dy, rgba);
        }
      }
    }
  }
}

export function rasterize(scene: Scene): Canvas {
  const canvas = new Canvas(scene.width, scene.height);
  for (const s of scene.shapes as Shape[]) {
    switch (s.kind) {
      case "rect":
        canvas.fillRect(s.x, s.y, s.w, s.h, s.fill);
        break;
      case "line":
        canvas.line(s.x1, s.y1, s.x2, s.y2, s.stroke, s.width);
        break;
      case "polyline":
        for (let i = 1; i < s.points.length; i++) {
          canvas.line(s.points[i - 1][0], s.points[i - 1][1],
                      s.points[i][0], s.points[i][1], s.stroke, s.width);
        }
        break;
      case "text":
        break; // raster output carries geometry only
    }
  }
  return canvas;
}

const CRC_TABLE = (() => {
  const table = new Uint32Array(256);
  for (let n = 0; n < 256; n++) {
    let c = n;
    for (let k = 0; k < 8; k++) {
      c = c & 1 ? 0xedb88320 ^ (c >>> 1) : c >>> 1;
    }
    table[n] = c >>> 0;
  }
  return table;
})();

function crc32(buf: Uint8Array): number {
  let c = 0xffffffff;
  for (let i = 0; i < buf.length; i++) {
    c = CRC_TABLE[(c ^ buf[i]) & 0xff] ^ (c >>> 8);
  }
  return (c ^ 0xffffffff) >>> 0;
}

function chunk(type: string, body: Uint8Array): Buffer {
  const head = Buffer.alloc(8);
  head.writeUInt32BE(body.length, 0);
  head.write(type, 4, "ascii");
  const crcInput = Buffer.concat([Buffer.from(type, "ascii"), Buffer.from(body)]);
  const tail = Buffer.alloc(4);
  tail.writeUInt32BE(crc32(crcInput), 0);
  return Buffer.concat([head, Buffer.from(body), tail]);
}

export function encodePng(canvas: Canvas): Buffer {
  const { width, height, data } = canvas;
  const ihdr = Buffer.alloc(13);
  ihdr.writeUInt32BE(width, 0);
  ihdr.writeUInt32BE(height, 4);
  ihdr[8] = 8;   // bit depth
  ihdr[9] = 6;   // RGBA
  const raw = Buffer.alloc(height * (1 + width * 4));
  for (let y = 0; y < height; y++) {
    raw[y * (1 + width * 4)] = 0; // no filter
    data.subarray(y * width * 4, (y + 1) * width * 4)
      .forEach((v, i) => { raw[y * (1 + width * 4) + 1 + i] = v; });
  }
  const idat = zlib.deflateSync(raw, { level: 9 });
  return Buffer.concat([
    Buffer.from([0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a]),
    chunk("IHDR", ihdr),
    chunk("IDAT", idat),
    chunk("IEND", new Uint8Array(0)),
  ]);
}
