/** Figures are flat shape lists so one builder feeds both SVG and PNG output. */

export type Shape =
  | { kind: "rect"; x: number; y: number; w: number; h: number; fill: string }
  | { kind: "line"; x1: number; y1: number; x2: number; y2: number;
      stroke: string; width: number }
  | { kind: "polyline"; points: [number, number][]; stroke: string;
      width: number }
  | { kind: "text"; x: number; y: number; text: string; size: number;
      fill: string; anchor: "start" | "middle" | "end" };

export interface Scene {
  width: number;
  height: number;
  shapes: Shape[];
}

export interface LinearScale {
  (v: number): number;
  domain: [number, number];
  range: [number, number];
}

export function linearScale(domain: [number, number], range: [number, number]): LinearScale {
  const [d0, d1] = domain;
  const [r0, r1] = range;
  const span = d1 - d0 === 0 ? 1 : d1 - d0;
  const fn = ((v: number) => r0 + ((v - d0) / span) * (r1 - r0)) as LinearScale;
  fn.domain = domain;
  fn.range = range;
  return fn;
}

export function ticks(lo: number, hi: number, count: number): number[] {
  const span = hi - lo;
  if (span <= 0) return [lo];
  const step = Math.pow(10, Math.floor(Math.log10(span / count)));
  const err = (span / count) / step;
  const unit = err >= 7.5 ? 10 * step : err >= 3.5 ? 5 * step : err >= 1.5 ? 2 * step : step;
  const out: number[] = [];
  for (let v = Math.ceil(lo / unit) * unit; v <= hi + 1e-12 * span; v += unit) {
    out.push(Math.abs(v) < unit * 1e-9 ? 0 : v);
  }
  return out;
}

const fmt = (x: number): string => {
  const s = x.toFixed(3);
  return s === "-0.000" ? "0.000" : s;
};

export function renderSvg(scene: Scene): string {
  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${scene.width}" ` +
      `height="${scene.height}" viewBox="0 0 ${scene.width} ${scene.height}">`,
  );
  for (const s of scene.shapes) {
    switch (s.kind) {
      case "rect":
        parts.push(
          `<rect x="${fmt(s.x)}" y="${fmt(s.y)}" width="${fmt(s.w)}" ` +
            `height="${fmt(s.h)}" fill="${s.fill}"/>`,
        );
        break;
      case "line":
        parts.push(
          `<line x1="${fmt(s.x1)}" y1="${fmt(s.y1)}" x2="${fmt(s.x2)}" ` +
            `y2="${fmt(s.y2)}" stroke="${s.stroke}" stroke-width="${s.width}"/>`,
        );
        break;
      case "polyline": {
        const pts = s.points.map(([x, y]) => `${fmt(x)},${fmt(y)}`).join(" ");
        parts.push(
          `<polyline points="${pts}" fill="none" stroke="${s.stroke}" ` +
            `stroke-width="${s.width}"/>`,
        );
        break;
      }
      case "text":
        parts.push(
          `<text x="${fmt(s.x)}" y="${fmt(s.y)}" font-size="${s.size}" ` +
            `font-family="sans-serif" fill="${s.fill}" ` +
            `text-anchor="${s.anchor}">${escapeXml(s.text)}</text>`,
        );
        break;
    }
  }
  parts.push("</svg>");
  return parts.join("\n") + "\n";
}

function escapeXml(text: string): string {
  return text.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}
