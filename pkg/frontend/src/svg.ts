/** Minimal SVG plotting helpers: axes, scales, polylines, ellipses. */

export interface Scale {
  toPixel(v: number): number;
  fromPixel(p: number): number;
  domain: [number, number];
  range: [number, number];
}

export function linearScale(domain: [number, number], range: [number, number]): Scale {
  const [d0, d1] = domain;
  const [r0, r1] = range;
  const span = d1 - d0 || 1;
  return {
    domain,
    range,
    toPixel: (v) => r0 + ((v - d0) / span) * (r1 - r0),
    fromPixel: (p) => d0 + ((p - r0) / (r1 - r0)) * span,
  };
}

export function log10Scale(domain: [number, number], range: [number, number]): Scale {
  const inner = linearScale([Math.log10(domain[0]), Math.log10(domain[1])], range);
  return {
    domain,
    range,
    toPixel: (v) => inner.toPixel(Math.log10(v)),
    fromPixel: (p) => Math.pow(10, inner.fromPixel(p)),
  };
}

export function fmt(v: number): string {
  if (v === 0) return "0";
  const a = Math.abs(v);
  if (a >= 1e4 || a < 1e-3) return v.toExponential(1);
  return String(Math.round(v * 1000) / 1000);
}

export class SvgCanvas {
  readonly width: number;
  readonly height: number;
  private parts: string[] = [];

  constructor(width: number, height: number) {
    this.width = width;
    this.height = height;
  }

  add(fragment: string): void {
    this.parts.push(fragment);
  }

  polyline(
    xs: number[],
    ys: number[],
    sx: Scale,
    sy: Scale,
    stroke: string,
    width = 1.5,
    attrs = "",
  ): void {
    const pts = xs
      .map((x, i) => `${sx.toPixel(x).toFixed(2)},${sy.toPixel(ys[i]).toFixed(2)}`)
      .join(" ");
    this.add(
      `<polyline fill="none" stroke="${stroke}" stroke-width="${width}" points="${pts}" ${attrs}/>`,
    );
  }

  ellipse(cx: number, cy: number, rx: number, ry: number, sx: Scale, sy: Scale, style: string): void {
    const prx = Math.abs(sx.toPixel(cx + rx) - sx.toPixel(cx));
    const pry = Math.abs(sy.toPixel(cy + ry) - sy.toPixel(cy));
    this.add(
      `<ellipse cx="${sx.toPixel(cx).toFixed(2)}" cy="${sy.toPixel(cy).toFixed(2)}" ` +
        `rx="${prx.toFixed(2)}" ry="${pry.toFixed(2)}" ${style}/>`,
    );
  }

  text(x: number, y: number, content: string, anchor = "start", size = 11): void {
    this.add(
      `<text x="${x.toFixed(1)}" y="${y.toFixed(1)}" text-anchor="${anchor}" ` +
        `font-family="sans-serif" font-size="${size}">${content}</text>`,
    );
  }

  axes(sx: Scale, sy: Scale, xTicks: number[], yTicks: number[], xLabel: string, yLabel: string): void {
    const [x0, x1] = sx.range;
    const [y0, y1] = sy.range;
    this.add(
      `<g data-x0="${sx.domain[0]}" data-x1="${sx.domain[1]}" data-y0="${sy.domain[0]}" ` +
        `data-y1="${sy.domain[1]}" data-px-x0="${x0}" data-px-x1="${x1}" data-px-y0="${y0}" data-px-y1="${y1}">` +
        `<line x1="${x0}" y1="${y0}" x2="${x1}" y2="${y0}" stroke="black"/>` +
        `<line x1="${x0}" y1="${y0}" x2="${x0}" y2="${y1}" stroke="black"/></g>`,
    );
    for (const t of xTicks) {
      const px = sx.toPixel(t);
      this.add(`<line x1="${px.toFixed(1)}" y1="${y0}" x2="${px.toFixed(1)}" y2="${y0 + 4}" stroke="black"/>`);
      this.text(px, y0 + 16, fmt(t), "middle", 10);
    }
    for (const t of yTicks) {
      const py = sy.toPixel(t);
      this.add(`<line x1="${x0 - 4}" y1="${py.toFixed(1)}" x2="${x0}" y2="${py.toFixed(1)}" stroke="black"/>`);
      this.text(x0 - 6, py + 3, fmt(t), "end", 10);
    }
    this.text((x0 + x1) / 2, this.height - 4, xLabel, "middle");
    this.add(
      `<text x="12" y="${(y0 + y1) / 2}" text-anchor="middle" font-family="sans-serif" ` +
        `font-size="11" transform="rotate(-90 12 ${(y0 + y1) / 2})">${yLabel}</text>`,
    );
  }

  render(): string {
    return (
      `<svg xmlns="http://www.w3.org/2000/svg" width="${this.width}" height="${this.height}" ` +
      `viewBox="0 0 ${this.width} ${this.height}">` +
      `<rect width="100%" height="100%" fill="white"/>` +
      this.parts.join("\n") +
      `</svg>`
    );
  }
}

export function logTicks(lo: number, hi: number): number[] {
  const ticks: number[] = [];
  for (let e = Math.ceil(Math.log10(lo)); e <= Math.floor(Math.log10(hi)); e++) {
    ticks.push(Math.pow(10, e));
  }
  return ticks;
}

export function linTicks(lo: number, hi: number, count = 6): number[] {
  const raw = (hi - lo) / count;
  const mag = Math.pow(10, Math.floor(Math.log10(raw || 1)));
  const step = [1, 2, 5, 10].map((m) => m * mag).find((s) => (hi - lo) / s <= count) ?? mag * 10;
  const ticks: number[] = [];
  for (let t = Math.ceil(lo / step) * step; t <= hi + 1e-12; t += step) {
    ticks.push(Number(t.toFixed(10)));
  }
  return ticks;
}
