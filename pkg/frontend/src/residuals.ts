/** Semilog residual-components figure for one cycle's best candidate. */

import { parseRunLog, recordForCycle } from "./jsonl.js";
import { linTicks, log10Scale, linearScale, logTicks, SvgCanvas } from "./svg.js";

const SERIES: Array<{ key: "obs" | "acc" | "nonhol"; label: string; color: string }> = [
  { key: "obs", label: "collision", color: "#d62728" },
  { key: "acc", label: "acceleration", color: "#1f77b4" },
  { key: "nonhol", label: "non-holonomic", color: "#2ca02c" },
];

const FLOOR = 1e-16; // keeps exact zeros drawable on the log axis

export interface ResidualFigure {
  svg: string;
  finalValues: { obs: number; acc: number; nonhol: number };
  iterations: number;
}

export function renderResiduals(logText: string, cycle: number): ResidualFigure {
  const log = parseRunLog(logText);
  const rec = recordForCycle(log, cycle);
  const hist = rec.residuals_best;
  if (!hist || !hist.obs || hist.obs.length === 0) {
    throw new Error(`cycle ${cycle} carries no residual history`);
  }
  const iters = hist.obs.length;
  const all = [...hist.obs, ...hist.acc, ...hist.nonhol].map((v) => Math.max(v, FLOOR));
  const lo = Math.min(...all);
  const hi = Math.max(...all, lo * 10);

  const width = 640;
  const height = 420;
  const canvas = new SvgCanvas(width, height);
  const sx = linearScale([1, iters], [56, width - 16]);
  const sy = log10Scale([lo, hi], [height - 36, 20]);
  canvas.axes(sx, sy, linTicks(1, iters), logTicks(lo, hi), "iteration", "residual norm");
  const xs = Array.from({ length: iters }, (_, i) => i + 1);
  for (const s of SERIES) {
    const ys = hist[s.key].map((v) => Math.max(v, FLOOR));
    canvas.polyline(xs, ys, sx, sy, s.color, 1.5, `data-series="${s.key}"`);
  }
  SERIES.forEach((s, i) => {
    canvas.add(
      `<line x1="${width - 180}" y1="${26 + 14 * i}" x2="${width - 160}" y2="${26 + 14 * i}" ` +
        `stroke="${s.color}" stroke-width="2"/>`,
    );
    canvas.text(width - 154, 29 + 14 * i, s.label, "start", 10);
  });
  canvas.text(width / 2, 14, `residual components, cycle ${cycle}`, "middle", 12);
  return {
    svg: canvas.render(),
    finalValues: {
      obs: hist.obs[iters - 1],
      acc: hist.acc[iters - 1],
      nonhol: hist.nonhol[iters - 1],
    },
    iterations: iters,
  };
}
