import * as assert from "node:assert/strict";
import * as crypto from "node:crypto";
import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";
import { test } from "node:test";

import { main } from "../src/main";
import { badsetRows, buildBadsetScene, buildEnergyScene, energySeries,
         ledgerPoints } from "../src/plots";
import { encodePng, rasterize } from "../src/raster";
import { loadBundle, loadStage } from "../src/report";
import { renderSvg } from "../src/scene";

const GOLDEN = path.join(__dirname, "..", "..", "testdata", "golden_q1");
const HASHES = path.join(__dirname, "..", "..", "testdata", "golden_hashes.json");

function sha256(buf: Buffer | string): string {
  return crypto.createHash("sha256").update(buf).digest("hex");
}

function tmpdir(): string {
  return fs.mkdtempSync(path.join(os.tmpdir(), "cilab-plots-"));
}

test("bundle loads both stages", () => {
  const bundle = loadBundle(GOLDEN);
  assert.equal(bundle.stages.length, 2);
  assert.equal(bundle.stages[0].stage, 0);
  assert.equal(bundle.stages[1].stage, 1);
  assert.ok(bundle.stages[1].times.length > 0);
});

test("figures have stable content hashes across runs", () => {
  const a = tmpdir();
  const b = tmpdir();
  assert.equal(main(["--in", GOLDEN, "--out", a]), 0);
  assert.equal(main(["--in", GOLDEN, "--out", b]), 0);
  const expected = JSON.parse(fs.readFileSync(HASHES, "utf8")) as
    Record<string, string>;
  for (const name of ["energy.svg", "badset.svg", "ledger.svg"]) {
    const bytesA = fs.readFileSync(path.join(a, name));
    const bytesB = fs.readFileSync(path.join(b, name));
    assert.deepEqual(bytesA, bytesB, `${name} differs between runs`);
    assert.equal(sha256(bytesA), expected[name], `${name} hash drifted`);
  }
});

test("png output is deterministic and well-formed", () => {
  const out = tmpdir();
  assert.equal(main(["--in", GOLDEN, "--out", out, "--format", "png"]), 0);
  const png = fs.readFileSync(path.join(out, "energy.png"));
  assert.deepEqual([...png.subarray(0, 8)],
                   [0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a]);
  const again = encodePng(rasterize(buildEnergyScene(loadBundle(GOLDEN))));
  assert.deepEqual(png, again);
});

test("energy profile is flat on the plateau and zero outside support", () => {
  const bundle = loadBundle(GOLDEN);
  const series = energySeries(bundle);
  // inner plateau: seed bump is 1 and the oscillation windows (which start
  // at 1.25/12 for this seed) are silent
  const plateau = series.filter((p) => Math.abs(p.t) <= 0.1);
  assert.ok(plateau.length >= 3, "no plateau samples in the golden report");
  const top = Math.max(...plateau.map((p) => p.energy));
  const bottom = Math.min(...plateau.map((p) => p.energy));
  assert.ok(top > 0);
  assert.ok((top - bottom) / top <= 1e-9, "plateau is not flat");
  const support = bundle.stages[bundle.stages.length - 1].support;
  for (const p of series) {
    if (p.t < support[0] - 1e-9 || p.t > support[1] + 1e-9) {
      assert.equal(p.energy, 0);
    }
  }
  // the seed-stage profile is exactly the squared plateau bump
  const seed = energySeries({ stages: [bundle.stages[0]] });
  const seedTop = Math.max(...seed.map((p) => p.energy));
  for (const p of seed) {
    if (Math.abs(p.t) <= 0.125) assert.ok(Math.abs(p.energy - seedTop) <= 1e-9 * seedTop);
    if (Math.abs(p.t) >= 0.25) assert.equal(p.energy, 0);
    assert.ok(p.energy <= seedTop * (1 + 1e-9));
  }
});

test("energy polyline maps the series monotonically in t", () => {
  const bundle = loadBundle(GOLDEN);
  const scene = buildEnergyScene(bundle);
  const poly = scene.shapes.find((s) => s.kind === "polyline");
  assert.ok(poly && poly.kind === "polyline");
  const xs = poly.points.map((p) => p[0]);
  for (let i = 1; i < xs.length; i++) {
    assert.ok(xs[i] >= xs[i - 1]);
  }
  assert.equal(poly.points.length, energySeries(bundle).length);
});

test("badset raster draws one rect per interval", () => {
  const bundle = loadBundle(GOLDEN);
  const rows = badsetRows(bundle);
  const total = rows.reduce((acc, r) => acc + r.intervals.length, 0);
  assert.ok(total > 0, "golden stage 1 should carry overlap intervals");
  const scene = buildBadsetScene(bundle);
  const bars = scene.shapes.filter((s) => s.kind === "rect" && s.fill === "#ff7f0e");
  const support = bundle.stages[bundle.stages.length - 1].support;
  const visible = rows.reduce(
    (acc, r) => acc + r.intervals.filter(
      ([a, b]) => Math.min(b, support[1]) > Math.max(a, support[0])).length,
    0);
  assert.equal(bars.length, visible);
  assert.ok(visible <= total);
});

test("ledger points carry pass and fail colours", () => {
  const bundle = loadBundle(GOLDEN);
  const points = ledgerPoints(bundle);
  assert.ok(points.length > 0);
  for (const p of points) {
    assert.ok(Number.isFinite(p.logRatio));
    assert.equal(p.passed, p.logRatio <= 0);
  }
});

test("schema mismatch is rejected", () => {
  const dir = tmpdir();
  const stage = path.join(dir, "stage0");
  fs.cpSync(path.join(GOLDEN, "stage0"), stage, { recursive: true });
  const manifest = JSON.parse(
    fs.readFileSync(path.join(stage, "manifest.json"), "utf8"));
  manifest.schema_version = 99;
  fs.writeFileSync(path.join(stage, "manifest.json"), JSON.stringify(manifest));
  assert.throws(() => loadStage(stage), /unsupported schema/);
  assert.equal(main(["--in", dir, "--out", tmpdir()]), 2);
});

test("usage errors", () => {
  assert.equal(main(["--in", GOLDEN]), 64);
  assert.equal(main(["--in", GOLDEN, "--out", "/tmp/x", "--format", "gif"]), 64);
});

test("empty timeseries still renders", () => {
  const dir = tmpdir();
  const stage = path.join(dir, "stage0");
  fs.cpSync(path.join(GOLDEN, "stage0"), stage, { recursive: true });
  const files = fs.readdirSync(stage);
  assert.ok(files.includes("timeseries.csv"));
  fs.writeFileSync(path.join(stage, "timeseries.csv"),
                   "t,residual,energy,holder13_v,holder23_p,in_bad_set\n");
  const out = tmpdir();
  assert.equal(main(["--in", stage, "--out", out]), 0);
  assert.ok(fs.existsSync(path.join(out, "energy.svg")));
});
