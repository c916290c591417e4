/** Command-line figure generation from harness logs.
 *
 * Usage:
 *   logviz plot-residuals <run.jsonl> [--cycle N] [--out fig.svg]
 *   logviz plot-timing    <timing.csv> [--out fig.svg]
 *   logviz plot-birdseye  <run.jsonl> [--cycle N] [--out fig.svg]
 */

import { readFileSync, writeFileSync } from "node:fs";
import process from "node:process";

import { renderBirdseye } from "./birdseye.js";
import { renderResiduals } from "./residuals.js";
import { renderTiming } from "./timing.js";

interface Args {
  input: string;
  cycle: number;
  out: string | null;
}

function parseArgs(argv: string[], defaultOut: string): Args {
  const positional: string[] = [];
  let cycle = 0;
  let out: string | null = null;
  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i];
    if (arg === "--cycle") {
      cycle = Number(argv[++i]);
      if (!Number.isInteger(cycle)) throw new Error(`--cycle needs an integer, got ${argv[i]}`);
    } else if (arg === "--out") {
      out = argv[++i];
    } else if (arg.startsWith("--")) {
      throw new Error(`unknown flag ${arg}`);
    } else {
      positional.push(arg);
    }
  }
  if (positional.length !== 1) {
    throw new Error("expected exactly one input file");
  }
  return { input: positional[0], cycle, out: out ?? defaultOut };
}

export function main(argv: string[]): number {
  const [command, ...rest] = argv;
  try {
    switch (command) {
      case "plot-residuals": {
        const args = parseArgs(rest, "residuals.svg");
        const fig = renderResiduals(readFileSync(args.input, "utf8"), args.cycle);
        writeFileSync(args.out!, fig.svg);
        const worst = Math.max(fig.finalValues.obs, fig.finalValues.acc, fig.finalValues.nonhol);
        console.log(
          `wrote ${args.out} (${fig.iterations} iterations, final max residual ${worst.toExponential(2)})`,
        );
        return 0;
      }
      case "plot-timing": {
        const args = parseArgs(rest, "timing.svg");
        const fig = renderTiming(readFileSync(args.input, "utf8"));
        writeFileSync(args.out!, fig.svg);
        console.log(`wrote ${args.out} (${fig.rows.length} batch sizes)`);
        return 0;
      }
      case "plot-birdseye": {
        const args = parseArgs(rest, "birdseye.svg");
        const fig = renderBirdseye(readFileSync(args.input, "utf8"), args.cycle);
        writeFileSync(args.out!, fig.svg);
        console.log(`wrote ${args.out} (${fig.candidateCount} candidates, best ${fig.bestIndex})`);
        return 0;
      }
      default:
        console.error(
          "usage: logviz <plot-residuals|plot-timing|plot-birdseye> <file> [--cycle N] [--out fig.svg]",
        );
        return 2;
    }
  } catch (err) {
    console.error(`error: ${err instanceof Error ? err.message : err}`);
    return 1;
  }
}

if (process.argv[1] && process.argv[1].endsWith("cli.js")) {
  process.exit(main(process.argv.slice(2)));
}
