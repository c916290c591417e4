/** Bird's-eye figure of one cycle: candidate fan, best highlighted, obstacle
 * ellipses, lane lines. Requires a log written with --emit-candidates. */

import { parseRunLog, recordForCycle } from "./jsonl.js";
import { linearScale, linTicks, SvgCanvas } from "./svg.js";

export interface BirdseyeFigure {
  svg: string;
  candidateCount: number;
  bestIndex: number | null;
}

const PALETTE = [
  "#9edae5", "#c5b0d5", "#ffbb78", "#98df8a", "#f7b6d2",
  "#c49c94", "#dbdb8d", "#aec7e8", "#e377c2", "#bcbd22", "#17becf",
];

export function renderBirdseye(logText: string, cycle: number): BirdseyeFigure {
  const log = parseRunLog(logText);
  const rec = recordForCycle(log, cycle);
  if (!rec.candidates) {
    throw new Error(
      `cycle ${cycle} has no candidate trajectories; rerun the scenario with --emit-candidates`,
    );
  }
  const cand = rec.candidates;
  const l = cand.x.length;
  const { a, b } = log.meta.ellipse;
  const roadTop = log.meta.lanes * log.meta.lane_width - log.meta.lane_width / 2;
  const roadBottom = -log.meta.lane_width / 2;

  const xsAll = cand.x.flat().concat(rec.obstacles.map((o) => o.x), [rec.ego.x]);
  const xLo = Math.min(...xsAll) - 2 * a;
  const xHi = Math.max(...xsAll) + 2 * a;

  const width = 860;
  const laneSpan = roadTop - roadBottom;
  const plotH = Math.max(120, Math.min(260, (laneSpan / (xHi - xLo)) * (width - 72) * 4));
  const height = plotH + 56;
  const canvas = new SvgCanvas(width, height);
  const sx = linearScale([xLo, xHi], [56, width - 16]);
  const sy = linearScale([roadBottom, roadTop], [height - 36, 20]);

  // lane boundaries
  for (let k = 0; k <= log.meta.lanes; k++) {
    const yb = roadBottom + k * log.meta.lane_width;
    const py = sy.toPixel(yb).toFixed(1);
    canvas.add(
      `<line x1="${sx.range[0]}" y1="${py}" x2="${sx.range[1]}" y2="${py}" ` +
        `stroke="#999" stroke-dasharray="6 6"/>`,
    );
  }
  canvas.axes(sx, sy, linTicks(xLo, xHi), linTicks(roadBottom, roadTop, 4), "x [m]", "y [m]");

  for (const obs of rec.obstacles) {
    canvas.ellipse(obs.x, obs.y, a, b, sx, sy, 'fill="#1f77b4" opacity="0.35" data-kind="obstacle"');
  }
  for (let i = 0; i < l; i++) {
    if (i === rec.best_index) continue;
    canvas.polyline(cand.x[i], cand.y[i], sx, sy, PALETTE[i % PALETTE.length], 1.2,
      `data-candidate="${i}"`);
  }
  if (rec.best_index !== null) {
    canvas.polyline(cand.x[rec.best_index], cand.y[rec.best_index], sx, sy, "#d62728", 3,
      `data-candidate="${rec.best_index}" data-best="true"`);
  }
  canvas.ellipse(rec.ego.x, rec.ego.y, a / 2, b / 2, sx, sy, 'fill="#d62728" opacity="0.8" data-kind="ego"');
  canvas.text(width / 2, 14, `candidate trajectories, cycle ${cycle}`, "middle", 12);
  return { svg: canvas.render(), candidateCount: l, bestIndex: rec.best_index };
}
