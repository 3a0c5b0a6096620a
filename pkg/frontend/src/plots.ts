/** The three report figures: energy profile, bad-set raster, inequality
 * ledger.  Builders return plain scenes so tests can inspect geometry and the
 * writer can emit either SVG or PNG. */

import { ReportBundle, StageReport } from "./report";
import { LinearScale, Scene, Shape, linearScale, ticks } from "./scene";

const W = 720;
const H = 420;
const MARGIN = { left: 70, right: 20, top: 28, bottom: 44 };

function frame(title: string): Shape[] {
  return [
    { kind: "rect", x: 0, y: 0, w: W, h: H, fill: "#ffffff" },
    { kind: "text", x: W / 2, y: 18, text: title, size: 14, fill: "#222222",
      anchor: "middle" },
  ];
}

function axes(sx: LinearScale, sy: LinearScale, xlabel: string,
              ylabel: string): Shape[] {
  const [x0, x1] = sx.range;
  const [y0, y1] = sy.range;
  const shapes: Shape[] = [];
  shapes.push({ kind: "line", x1: x0, y1: y0, x2: x1, y2: y0,
                stroke: "#222222", width: 1 });
  shapes.push({ kind: "line", x1: x0, y1: y0, x2: x0, y2: y1,
                stroke: "#222222", width: 1 });
  for (const v of ticks(sx.domain[0], sx.domain[1], 8)) {
    shapes.push({ kind: "line", x1: sx(v), y1: y0, x2: sx(v), y2: y0 + 4,
                  stroke: "#222222", width: 1 });
    shapes.push({ kind: "text", x: sx(v), y: y0 + 16, text: trimNum(v),
                  size: 10, fill: "#222222", anchor: "middle" });
  }
  for (const v of ticks(sy.domain[0], sy.domain[1], 6)) {
    shapes.push({ kind: "line", x1: x0 - 4, y1: sy(v), x2: x0, y2: sy(v),
                  stroke: "#222222", width: 1 });
    shapes.push({ kind: "text", x: x0 - 6, y: sy(v) + 3, text: trimNum(v),
                  size: 10, fill: "#222222", anchor: "end" });
  }
  shapes.push({ kind: "text", x: (x0 + x1) / 2, y: H - 8, text: xlabel,
                size: 11, fill: "#222222", anchor: "middle" });
  shapes.push({ kind: "text", x: 14, y: (y0 + y1) / 2, text: ylabel,
                size: 11, fill: "#222222", anchor: "middle" });
  return shapes;
}

function trimNum(v: number): string {
  if (v === 0) return "0";
  if (Math.abs(v) >= 1e4 || Math.abs(v) < 1e-3) return v.toExponential(1);
  return String(Math.round(v * 1e6) / 1e6);
}

export function energySeries(bundle: ReportBundle): { t: number; energy: number }[] {
  const stage = bundle.stages[bundle.stages.length - 1];
  return stage.times.map((r) => ({ t: r.t, energy: r.energy }));
}

export function buildEnergyScene(bundle: ReportBundle): Scene {
  const stage = bundle.stages[bundle.stages.length - 1];
  const series = energySeries(bundle);
  const shapes = frame(`kinetic energy, stage ${stage.stage}`);
  const tmin = Math.min(...series.map((p) => p.t), stage.support[0]);
  const tmax = Math.max(...series.map((p) => p.t), stage.support[1]);
  const emax = Math.max(...series.map((p) => p.energy), 1e-300);
  const sx = linearScale([tmin, tmax], [MARGIN.left, W - MARGIN.right]);
  const sy = linearScale([0, 1.1 * emax], [H - MARGIN.bottom, MARGIN.top]);
  shapes.push({ kind: "rect", x: sx(stage.support[0]), y: MARGIN.top,
                w: sx(stage.support[1]) - sx(stage.support[0]),
                h: H - MARGIN.top - MARGIN.bottom, fill: "#e8f1fa" });
  const lo = Math.max(-0.125, tmin);
  const hi = Math.min(0.125, tmax);
  if (hi > lo) {
    shapes.push({ kind: "rect", x: sx(lo), y: MARGIN.top,
                  w: sx(hi) - sx(lo), h: H - MARGIN.top - MARGIN.bottom,
                  fill: "#fdf2d9" });
  }
  shapes.push(...axes(sx, sy, "t", "energy"));
  shapes.push({
    kind: "polyline",
    points: series.map((p) => [sx(p.t), sy(p.energy)] as [number, number]),
    stroke: "#1f77b4",
    width: 2,
  });
  return { width: W, height: H, shapes };
}

export function badsetRows(bundle: ReportBundle): { stage: number;
    intervals: [number, number][] }[] {
  return bundle.stages
    .filter((s) => s.stage >= 1)
    .map((s) => ({ stage: s.stage, intervals: s.badsetIntervals }));
}

export function buildBadsetScene(bundle: ReportBundle): Scene {
  const rows = badsetRows(bundle);
  const shapes = frame("cutoff-overlap intervals by stage");
  const support = bundle.stages[bundle.stages.length - 1].support;
  const sx = linearScale([support[0], support[1]],
                         [MARGIN.left, W - MARGIN.right]);
  const nRows = Math.max(rows.length, 1);
  const rowH = (H - MARGIN.top - MARGIN.bottom) / nRows;
  const sy = linearScale([0, nRows], [H - MARGIN.bottom, MARGIN.top]);
  shapes.push(...axes(sx, sy, "t", "stage"));
  rows.forEach((row, i) => {
    const y = H - MARGIN.bottom - (i + 1) * rowH + 0.15 * rowH;
    shapes.push({ kind: "text", x: MARGIN.left - 8, y: y + 0.35 * rowH + 3,
                  text: `q=${row.stage}`, size: 10, fill: "#222222",
                  anchor: "end" });
    for (const [a, b] of row.intervals) {
      const xa = Math.max(sx(Math.max(a, support[0])), MARGIN.left);
      const xb = Math.min(sx(Math.min(b, support[1])), W - MARGIN.right);
      if (xb > xa) {
        shapes.push({ kind: "rect", x: xa, y, w: xb - xa, h: 0.7 * rowH,
                      fill: "#ff7f0e" });
      }
    }
  });
  return { width: W, height: H, shapes };
}

export interface LedgerPoint {
  stage: number;
  name: string;
  t: number;
  logRatio: number;
  passed: boolean;
}

export function ledgerPoints(bundle: ReportBundle): LedgerPoint[] {
  const out: LedgerPoint[] = [];
  for (const stage of bundle.stages) {
    for (const row of stage.ledger) {
      if (row.status !== "checked" || !(row.measured > 0) || !(row.bound > 0)) {
        continue;
      }
      out.push({
        stage: stage.stage,
        name: row.name,
        t: row.t,
        logRatio: Math.log10(row.measured / row.bound),
        passed: row.passed === true,
      });
    }
  }
  return out;
}

export function buildLedgerScene(bundle: ReportBundle): Scene {
  const points = ledgerPoints(bundle);
  const shapes = frame("inequality ledger: log10(measured / bound)");
  const lo = Math.min(0, ...points.map((p) => p.logRatio));
  const hi = Math.max(0, ...points.map((p) => p.logRatio));
  const pad = 0.1 * Math.max(hi - lo, 1);
  const sx = linearScale([0, Math.max(points.length, 1)],
                         [MARGIN.left, W - MARGIN.right]);
  const sy = linearScale([lo - pad, hi + pad], [H - MARGIN.bottom, MARGIN.top]);
  shapes.push(...axes(sx, sy, "ledger row", "log10 ratio"));
  shapes.push({ kind: "line", x1: MARGIN.left, y1: sy(0), x2: W - MARGIN.right,
                y2: sy(0), stroke: "#888888", width: 1 });
  const groups = new Map<string, number>();
  points.forEach((p, i) => {
    const color = p.passed ? "#2ca02c" : "#d62728";
    shapes.push({ kind: "rect", x: sx(i + 0.25), y: Math.min(sy(0), sy(p.logRatio)),
                  w: Math.max(sx(0.5) - sx(0), 2),
                  h: Math.abs(sy(p.logRatio) - sy(0)), fill: color });
    if (!groups.has(p.name)) groups.set(p.name, i);
  });
  for (const [name, i] of groups) {
    shapes.push({ kind: "text", x: sx(i + 0.5), y: MARGIN.top + 10, text: name,
                  size: 9, fill: "#888888", anchor: "start" });
  }
  return { width: W, height: H, shapes };
}
