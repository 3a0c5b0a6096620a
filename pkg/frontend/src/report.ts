import * as fs from "node:fs";
import * as path from "node:path";

import { parseCsv, toNumber } from "./csv";

export const SUPPORTED_SCHEMAS = [1];

export interface TimeRow {
  t: number;
  residual: number;
  energy: number;
  holder13_v: number;
  holder23_p: number;
  in_bad_set: number;
}

export interface LedgerRow {
  name: string;
  t: number;
  measured: number;
  bound: number;
  passed: boolean | null;
  status: string;
}

export interface StageReport {
  dir: string;
  stage: number;
  manifest: Record<string, unknown>;
  support: [number, number];
  badsetIntervals: [number, number][];
  times: TimeRow[];
  ledger: LedgerRow[];
}

export interface ReportBundle {
  stages: StageReport[];
}

export function loadStage(dir: string): StageReport {
  const manifest = JSON.parse(
    fs.readFileSync(path.join(dir, "manifest.json"), "utf8"),
  ) as Record<string, unknown>;
  const schema = manifest["schema_version"];
  if (typeof schema !== "number" || !SUPPORTED_SCHEMAS.includes(schema)) {
    throw new Error(`unsupported schema version ${String(schema)} in ${dir}`);
  }
  const files = manifest["files"] as Record<string, string>;
  const times = parseCsv(
    fs.readFileSync(path.join(dir, files["timeseries"]), "utf8"),
  ).map((row, i) => ({
    t: toNumber(row["t"], `timeseries row ${i}`),
    residual: toNumber(row["residual"], `timeseries row ${i}`),
    energy: toNumber(row["energy"], `timeseries row ${i}`),
    holder13_v: toNumber(row["holder13_v"], `timeseries row ${i}`),
    holder23_p: toNumber(row["holder23_p"], `timeseries row ${i}`),
    in_bad_set: toNumber(row["in_bad_set"], `timeseries row ${i}`),
  }));
  const ledger = parseCsv(
    fs.readFileSync(path.join(dir, files["ledger"]), "utf8"),
  ).map((row) => ({
    name: row["name"],
    t: row["t"] === "" ? NaN : Number(row["t"]),
    measured: Number(row["measured"]),
    bound: Number(row["bound"]),
    passed: row["passed"] === "True" ? true : row["passed"] === "False" ? false : null,
    status: row["status"],
  }));
  const support = manifest["support"] as [number, number];
  const badset = (manifest["badset_intervals"] ?? []) as [number, number][];
  return {
    dir,
    stage: manifest["stage"] as number,
    manifest,
    support,
    badsetIntervals: badset,
    times,
    ledger,
  };
}

/** A bundle directory is either one stage report or a run root of stage dirs. */
export function loadBundle(root: string): ReportBundle {
  if (fs.existsSync(path.join(root, "manifest.json"))) {
    return { stages: [loadStage(root)] };
  }
  const stages = fs
    .readdirSync(root)
    .filter((name) => /^stage\d+$/.test(name))
    .sort((a, b) => Number(a.slice(5)) - Number(b.slice(5)))
    .map((name) => loadStage(path.join(root, name)));
  if (stages.length === 0) {
    throw new Error(`no stage reports under ${root}`);
  }
  return { stages };
}
