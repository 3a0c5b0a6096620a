/** cilab-plots: render report figures.
 *
 * Usage: cilab-plots --in <report dir> --out <fig dir> [--format svg|png]
 *
 * The input is a stage report directory or a run root containing stage
 * subdirectories.  Output bytes are deterministic for fixed input.  Exit
 * codes: 0 ok, 2 unreadable or schema-mismatched input, 64 usage.
 */

import * as fs from "node:fs";
import * as path from "node:path";

import { buildBadsetScene, buildEnergyScene, buildLedgerScene } from "./plots";
import { encodePng, rasterize } from "./raster";
import { loadBundle } from "./report";
import { Scene, renderSvg } from "./scene";

interface Args {
  indir: string;
  outdir: string;
  format: "svg" | "png";
}

function parseArgs(argv: string[]): Args | null {
  let indir = "";
  let outdir = "";
  let format: "svg" | "png" = "svg";
  for (let i = 0; i < argv.length; i++) {
    const a = argv[i];
    if (a === "--in") indir = argv[++i] ?? "";
    else if (a === "--out") outdir = argv[++i] ?? "";
    else if (a === "--format") {
      const f = argv[++i];
      if (f !== "svg" && f !== "png") return null;
      format = f;
    } else return null;
  }
  if (!indir || !outdir) return null;
  return { indir, outdir, format };
}

function writeScene(scene: Scene, file: string, format: "svg" | "png"): void {
  if (format === "svg") {
    fs.writeFileSync(file, renderSvg(scene));
  } else {
    fs.writeFileSync(file, encodePng(rasterize(scene)));
  }
}

export function main(argv: string[]): number {
  const args = parseArgs(argv);
  if (!args) {
    process.stderr.write(
      "usage: cilab-plots --in <report dir> --out <fig dir> [--format svg|png]\n",
    );
    return 64;
  }
  let bundle;
  try {
    bundle = loadBundle(args.indir);
  } catch (err) {
    process.stderr.write(`report rejected: ${String(err)}\n`);
    return 2;
  }
  fs.mkdirSync(args.outdir, { recursive: true });
  const figures: [string, Scene][] = [
    ["energy", buildEnergyScene(bundle)],
    ["badset", buildBadsetScene(bundle)],
    ["ledger", buildLedgerScene(bundle)],
  ];
  for (const [name, scene] of figures) {
    writeScene(scene, path.join(args.outdir, `${name}.${args.format}`), args.format);
  }
  process.stdout.write(`wrote ${figures.length} figures to ${args.outdir}\n`);
  return 0;
}

if (require.main === module) {
  process.exit(main(process.argv.slice(2)));
}
