/**
 * Deterministic SVG chart primitives: fixed canvas, nice-number ticks,
 * linear and log10 axes. No randomness, no timestamps, no locale formatting.
 */

export const WIDTH = 800;
export const HEIGHT = 520;
export const MARGIN = { top: 48, right: 32, bottom: 58, left: 76 };

export interface Scale {
  toPx(value: number): number;
  ticks: number[];
  min: number;
  max: number;
  log: boolean;
}

function niceStep(span: number, count: number): number {
  const raw = span / Math.max(count, 1);
  const power = Math.floor(Math.log10(raw));
  const base = raw / 10 ** power;
  const nice = base <= 1 ? 1 : base <= 2 ? 2 : base <= 5 ? 5 : 10;
  return nice * 10 ** power;
}

export function linearScale(
  lo: number,
  hi: number,
  pxLo: number,
  pxHi: number,
  tickCount = 6
): Scale {
  if (!(hi > lo)) {
    hi = lo + (lo === 0 ? 1 : Math.abs(lo) * 0.1);
  }
  const step = niceStep(hi - lo, tickCount);
  const min = Math.floor(lo / step) * step;
  const max = Math.ceil(hi / step) * step;
  const ticks: number[] = [];
  for (let v = min; v <= max + step * 1e-9; v += step) {
    ticks.push(Math.abs(v) < step * 1e-9 ? 0 : v);
  }
  return {
    toPx: (value: number) => pxLo + ((value - min) / (max - min)) * (pxHi - pxLo),
    ticks,
    min,
    max,
    log: false,
  };
}

export function logScale(lo: number, hi: number, pxLo: number, pxHi: number): Scale {
  if (!(lo > 0)) {
    lo = 1e-6;
  }
  if (!(hi > lo)) {
    hi = lo * 10;
  }
  const emin = Math.floor(Math.log10(lo));
  const emax = Math.ceil(Math.log10(hi));
  const ticks: number[] = [];
  for (let e = emin; e <= emax; e += 1) {
    ticks.push(10 ** e);
  }
  const lmin = Math.log10(10 ** emin);
  const lmax = Math.log10(10 ** emax);
  return {
    toPx: (value: number) =>
      pxLo + ((Math.log10(value) - lmin) / (lmax - lmin)) * (pxHi - pxLo),
    ticks,
    min: 10 ** emin,
    max: 10 ** emax,
    log: true,
  };
}

export function fmt(value: number): string {
  if (value === 0) return "0";
  const abs = Math.abs(value);
  if (abs >= 1e5 || abs < 1e-3) {
    const exponent = Math.floor(Math.log10(abs));
    const mantissa = value / 10 ** exponent;
    const m = Number(mantissa.toPrecision(3));
    return `${m}e${exponent}`;
  }
  return String(Number(value.toPrecision(6)));
}

export function px(value: number): string {
  return value.toFixed(2);
}

export class Svg {
  private parts: string[] = [];

  constructor(title: string) {
    this.parts.push(
      `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" height="${HEIGHT}" ` +
        `viewBox="0 0 ${WIDTH} ${HEIGHT}" font-family="Helvetica, Arial, sans-serif">`
    );
    this.parts.push(`<rect width="${WIDTH}" height="${HEIGHT}" fill="white"/>`);
    this.text(WIDTH / 2, 26, title, { anchor: "middle", size: 17, weight: "bold" });
  }

  raw(markup: string): void {
    this.parts.push(markup);
  }

  line(x1: number, y1: number, x2: number, y2: number, stroke: string, width = 1, dash = ""): void {
    const dashAttr = dash ? ` stroke-dasharray="${dash}"` : "";
    this.parts.push(
      `<line x1="${px(x1)}" y1="${px(y1)}" x2="${px(x2)}" y2="${px(y2)}" ` +
        `stroke="${stroke}" stroke-width="${width}"${dashAttr}/>`
    );
  }

  circle(x: number, y: number, r: number, fill: string, opacity = 1): void {
    const op = opacity < 1 ? ` fill-opacity="${opacity}"` : "";
    this.parts.push(`<circle cx="${px(x)}" cy="${px(y)}" r="${r}" fill="${fill}"${op}/>`);
  }

  path(points: Array<[number, number]>, stroke: string, width = 1.5, dash = ""): void {
    if (points.length === 0) return;
    const d = points
      .map(([x, y], i) => `${i === 0 ? "M" : "L"}${px(x)} ${px(y)}`)
      .join(" ");
    const dashAttr = dash ? ` stroke-dasharray="${dash}"` : "";
    this.parts.push(
      `<path d="${d}" fill="none" stroke="${stroke}" stroke-width="${width}"${dashAttr}/>`
    );
  }

  text(
    x: number,
    y: number,
    content: string,
    opts: { anchor?: string; size?: number; weight?: string; rotate?: boolean; fill?: string } = {}
  ): void {
    const anchor = opts.anchor ?? "start";
    const size = opts.size ?? 12;
    const weight = opts.weight ? ` font-weight="${opts.weight}"` : "";
    const fill = opts.fill ?? "#222";
    const transform = opts.rotate ? ` transform="rotate(-90 ${px(x)} ${px(y)})"` : "";
    this.parts.push(
      `<text x="${px(x)}" y="${px(y)}" text-anchor="${anchor}" font-size="${size}"` +
        `${weight} fill="${fill}"${transform}>${escapeXml(content)}</text>`
    );
  }

  finish(): string {
    return this.parts.join("\n") + "\n</svg>\n";
  }
}

function escapeXml(s: string): string {
  return s
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export interface Frame {
  svg: Svg;
  x: Scale;
  y: Scale;
}

export function frame(
  title: string,
  xLabel: string,
  yLabel: string,
  xScale: Scale,
  yScale: Scale
): Frame {
  const svg = new Svg(title);
  const left = MARGIN.left;
  const right = WIDTH - MARGIN.right;
  const top = MARGIN.top;
  const bottom = HEIGHT - MARGIN.bottom;
  // gridlines and ticks
  for (const t of xScale.ticks) {
    const xp = xScale.toPx(t);
    svg.line(xp, top, xp, bottom, "#e6e6e6");
    svg.text(xp, bottom + 18, fmt(t), { anchor: "middle", size: 11 });
  }
  for (const t of yScale.ticks) {
    const yp = yScale.toPx(t);
    svg.line(left, yp, right, yp, "#e6e6e6");
    svg.text(left - 8, yp + 4, fmt(t), { anchor: "end", size: 11 });
  }
  svg.line(left, bottom, right, bottom, "#333", 1.2);
  svg.line(left, top, left, bottom, "#333", 1.2);
  svg.text((left + right) / 2, HEIGHT - 16, xLabel, { anchor: "middle", size: 13 });
  svg.text(20, (top + bottom) / 2, yLabel, { anchor: "middle", size: 13, rotate: true });
  return { svg, x: xScale, y: yScale };
}

export function plotArea(): { left: number; right: number; top: number; bottom: number } {
  return {
    left: MARGIN.left,
    right: WIDTH - MARGIN.right,
    top: MARGIN.top,
    bottom: HEIGHT - MARGIN.bottom,
  };
}
