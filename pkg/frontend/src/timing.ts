/** Solve-time vs batch-size figure from a bench-batch timing.csv. */

import { linearScale, linTicks, SvgCanvas } from "./svg.js";

export interface TimingRow {
  l: number;
  n_solves: number;
  mean: number;
  min: number;
  max: number;
}

export function parseTimingCsv(text: string): TimingRow[] {
  const lines = text
    .split("\n")
    .map((l) => l.trim())
    .filter((l) => l.length > 0);
  if (lines.length < 2) {
    throw new Error("timing CSV has no data rows");
  }
  const header = lines[0].split(",");
  const expected = ["l", "n_solves", "mean", "min", "max"];
  if (expected.some((name, i) => header[i] !== name)) {
    throw new Error(`timing CSV header must be ${expected.join(",")}, got ${lines[0]}`);
  }
  const rows = lines.slice(1).map((line) => {
    const cells = line.split(",").map(Number);
    if (cells.length !== 5 || cells.some((c) => Number.isNaN(c))) {
      throw new Error(`malformed timing row: ${line}`);
    }
    return { l: cells[0], n_solves: cells[1], mean: cells[2], min: cells[3], max: cells[4] };
  });
  if (rows.length < 2) {
    throw new Error("need at least two batch sizes to plot scaling");
  }
  return rows.sort((a, b) => a.l - b.l);
}

export function renderTiming(csvText: string): { svg: string; rows: TimingRow[] } {
  const rows = parseTimingCsv(csvText);
  const width = 560;
  const height = 400;
  const canvas = new SvgCanvas(width, height);
  const lMax = rows[rows.length - 1].l;
  const tMax = Math.max(...rows.map((r) => r.max)) * 1.1;
  const sx = linearScale([0, lMax * 1.05], [56, width - 16]);
  const sy = linearScale([0, tMax * 1e3], [height - 36, 20]);
  canvas.axes(
    sx, sy, linTicks(0, lMax * 1.05), linTicks(0, tMax * 1e3),
    "batch size", "solve time [ms]",
  );
  // min/max band
  const band = [
    ...rows.map((r) => `${sx.toPixel(r.l).toFixed(2)},${sy.toPixel(r.min * 1e3).toFixed(2)}`),
    ...rows
      .slice()
      .reverse()
      .map((r) => `${sx.toPixel(r.l).toFixed(2)},${sy.toPixel(r.max * 1e3).toFixed(2)}`),
  ].join(" ");
  canvas.add(`<polygon points="${band}" fill="#1f77b4" opacity="0.18" data-band="minmax"/>`);
  canvas.polyline(
    rows.map((r) => r.l),
    rows.map((r) => r.mean * 1e3),
    sx, sy, "#1f77b4", 2, 'data-series="mean"',
  );
  for (const r of rows) {
    canvas.add(
      `<circle cx="${sx.toPixel(r.l).toFixed(2)}" cy="${sy.toPixel(r.mean * 1e3).toFixed(2)}" ` +
        `r="3" fill="#1f77b4"/>`,
    );
  }
  canvas.text(width / 2, 14, "solve time vs batch size", "middle", 12);
  return { svg: canvas.render(), rows };
}
