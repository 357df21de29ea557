/**
 * Figure builders for the analyzer's output files. Execution and relaxation
 * phases are drawn in blue and red; distribution figures use log-log axes;
 * the square-root scatter colors points by duration from dark blue to dark
 * red; the fair-pricing figure carries the identity reference line.
 */
import {
  Frame,
  frame,
  linearScale,
  logScale,
  plotArea,
  px,
  Svg,
} from "./chart.js";
import { numericColumn, requireColumns, Table } from "./table.js";

const EXECUTION_COLOR = "#1f4e9c";
const RELAXATION_COLOR = "#c0392b";
const FIT_COLOR = "#2c8a4b";
const IDENTITY_COLOR = "#c0392b";

export type FigureStyle = "dynamics" | "distribution" | "sqrt" | "fairpricing";

export const FIGURE_STYLES: FigureStyle[] = [
  "dynamics",
  "distribution",
  "sqrt",
  "fairpricing",
];

export interface RenderOutcome {
  svg: string;
  warnings: string[];
}

function emptyFigure(title: string, warnings: string[]): RenderOutcome {
  const area = plotArea();
  const f = frame(
    title,
    "",
    "",
    linearScale(0, 1, area.left, area.right),
    linearScale(0, 1, area.bottom, area.top)
  );
  f.svg.text((area.left + area.right) / 2, (area.top + area.bottom) / 2, "no data", {
    anchor: "middle",
    size: 15,
    fill: "#888",
  });
  warnings.push("input carries a valid header but no data rows");
  return { svg: f.svg.finish(), warnings };
}

function fitLogLog(xs: number[], ys: number[]): { a: number; b: number } | null {
  const lx: number[] = [];
  const ly: number[] = [];
  for (let i = 0; i < xs.length; i += 1) {
    if (xs[i] > 0 && ys[i] > 0) {
      lx.push(Math.log(xs[i]));
      ly.push(Math.log(ys[i]));
    }
  }
  if (lx.length < 3) return null;
  const n = lx.length;
  const mx = lx.reduce((s, v) => s + v, 0) / n;
  const my = ly.reduce((s, v) => s + v, 0) / n;
  let sxx = 0;
  let sxy = 0;
  for (let i = 0; i < n; i += 1) {
    sxx += (lx[i] - mx) ** 2;
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  if (sxx === 0) return null;
  const b = sxy / sxx;
  const a = Math.exp(my - b * mx);
  return { a, b };
}

function legend(svg: Svg, entries: Array<[string, string]>): void {
  const area = plotArea();
  let y = area.top + 14;
  for (const [color, label] of entries) {
    svg.circle(area.left + 14, y - 4, 4, color);
    svg.text(area.left + 26, y, label, { size: 12 });
    y += 18;
  }
}

export function dynamicsFigure(table: Table): RenderOutcome {
  requireColumns(table, ["phase", "rescaled_time", "mean_signed_impact", "count", "artifact"]);
  const warnings: string[] = [];
  if (table.rows.length === 0) return emptyFigure("Impact dynamics", warnings);
  const phase = table.columns.indexOf("phase");
  const t = numericColumn(table, "rescaled_time");
  const y = numericColumn(table, "mean_signed_impact");
  const artifact = numericColumn(table, "artifact");
  const isExec = table.rows.map((row) => row[phase] === "execution");

  const area = plotArea();
  const tMax = Math.max(...t) > 1 ? 2 : 1;
  const xScale = linearScale(0, tMax, area.left, area.right, 8);
  const yLo = Math.min(0, ...y);
  const yHi = Math.max(...y);
  const yScale = linearScale(yLo, yHi * 1.05, area.bottom, area.top);
  const f = frame(
    "Impact dynamics",
    "rescaled time (execution 0-1, relaxation 1-2)",
    "mean signed impact",
    xScale,
    yScale
  );

  const execX: number[] = [];
  const execY: number[] = [];
  for (let i = 0; i < t.length; i += 1) {
    if (isExec[i] && artifact[i] === 0) {
      execX.push(t[i]);
      execY.push(y[i]);
    }
  }
  const fit = fitLogLog(execX, execY);
  if (fit) {
    const pts: Array<[number, number]> = [];
    const lo = Math.max(Math.min(...execX), 1e-6);
    const hi = Math.max(...execX);
    for (let i = 0; i <= 100; i += 1) {
      const xv = lo + ((hi - lo) * i) / 100;
      pts.push([xScale.toPx(xv), yScale.toPx(fit.a * xv ** fit.b)]);
    }
    f.svg.path(pts, FIT_COLOR, 1.8, "6 3");
  }
  for (let i = 0; i < t.length; i += 1) {
    const color = isExec[i] ? EXECUTION_COLOR : RELAXATION_COLOR;
    const r = artifact[i] !== 0 ? 5 : 3.4;
    f.svg.circle(xScale.toPx(t[i]), yScale.toPx(y[i]), r, color, artifact[i] !== 0 ? 0.55 : 1);
  }
  const entries: Array<[string, string]> = [[EXECUTION_COLOR, "execution (fill prices)"]];
  if (isExec.some((v) => !v)) entries.push([RELAXATION_COLOR, "relaxation (mid prices)"]);
  if (fit) entries.push([FIT_COLOR, `fit y = ${fit.a.toPrecision(3)} x^${fit.b.toPrecision(3)}`]);
  legend(f.svg, entries);
  return { svg: f.svg.finish(), warnings };
}

export function distributionFigure(table: Table): RenderOutcome {
  requireColumns(table, ["bin_center", "frequency"]);
  const warnings: string[] = [];
  if (table.rows.length === 0) return emptyFigure("Distribution", warnings);
  const x = numericColumn(table, "bin_center");
  const y = numericColumn(table, "frequency");
  const pos: Array<[number, number]> = [];
  for (let i = 0; i < x.length; i += 1) {
    if (x[i] > 0 && y[i] > 0) pos.push([x[i], y[i]]);
  }
  if (pos.length === 0) return emptyFigure("Distribution", warnings);
  const area = plotArea();
  const xScale = logScale(
    Math.min(...pos.map((p) => p[0])),
    Math.max(...pos.map((p) => p[0])),
    area.left,
    area.right
  );
  const yScale = logScale(
    Math.min(...pos.map((p) => p[1])),
    Math.max(...pos.map((p) => p[1])),
    area.bottom,
    area.top
  );
  const f = frame("Distribution (log-log)", "value", "frequency", xScale, yScale);
  const fit = fitLogLog(pos.map((p) => p[0]), pos.map((p) => p[1]));
  if (fit) {
    const lo = Math.min(...pos.map((p) => p[0]));
    const hi = Math.max(...pos.map((p) => p[0]));
    const pts: Array<[number, number]> = [];
    for (let i = 0; i <= 100; i += 1) {
      const xv = lo * (hi / lo) ** (i / 100);
      const yv = fit.a * xv ** fit.b;
      if (yv >= yScale.min && yv <= yScale.max) {
        pts.push([xScale.toPx(xv), yScale.toPx(yv)]);
      }
    }
    f.svg.path(pts, FIT_COLOR, 1.8, "6 3");
  }
  for (const [xv, yv] of pos) {
    f.svg.circle(xScale.toPx(xv), yScale.toPx(yv), 3.4, EXECUTION_COLOR);
  }
  const entries: Array<[string, string]> = [[EXECUTION_COLOR, "observed frequency"]];
  if (fit) entries.push([FIT_COLOR, `fit slope ${fit.b.toPrecision(3)}`]);
  legend(f.svg, entries);
  return { svg: f.svg.finish(), warnings };
}

function durationColor(fraction: number): string {
  // dark blue (#00008b) to dark red (#8b0000)
  const c = Math.max(0, Math.min(1, fraction));
  const r = Math.round(0x00 + c * (0x8b - 0x00));
  const g = 0;
  const b = Math.round(0x8b - c * (0x8b - 0x00));
  const hex = (v: number) => v.toString(16).padStart(2, "0");
  return `#${hex(r)}${hex(g)}${hex(b)}`;
}

export function sqrtFigure(table: Table): RenderOutcome {
  requireColumns(table, ["participation", "signed_impact", "duration_s"]);
  const warnings: string[] = [];
  if (table.rows.length === 0) return emptyFigure("Impact vs participation", warnings);
  const qv = numericColumn(table, "participation");
  const impact = numericColumn(table, "signed_impact");
  const duration = numericColumn(table, "duration_s");
  const keep: number[] = [];
  for (let i = 0; i < qv.length; i += 1) {
    if (qv[i] > 0 && impact[i] > 0) keep.push(i);
  }
  if (keep.length === 0) return emptyFigure("Impact vs participation", warnings);
  const dropped = qv.length - keep.length;
  if (dropped > 0) {
    warnings.push(`${dropped} points with non-positive impact omitted from the log-log scatter`);
  }
  const area = plotArea();
  const xScale = logScale(
    Math.min(...keep.map((i) => qv[i])),
    Math.max(...keep.map((i) => qv[i])),
    area.left,
    area.right
  );
  const yScale = logScale(
    Math.min(...keep.map((i) => impact[i])),
    Math.max(...keep.map((i) => impact[i])),
    area.bottom,
    area.top
  );
  const f = frame(
    "Impact vs participation rate",
    "participation Q/V",
    "signed impact",
    xScale,
    yScale
  );
  const logDur = keep.map((i) => Math.log(Math.max(duration[i], 1e-9)));
  const dLo = Math.min(...logDur);
  const dHi = Math.max(...logDur);
  const span = dHi > dLo ? dHi - dLo : 1;
  const fit = fitLogLog(keep.map((i) => qv[i]), keep.map((i) => impact[i]));
  if (fit) {
    const lo = Math.min(...keep.map((i) => qv[i]));
    const hi = Math.max(...keep.map((i) => qv[i]));
    const pts: Array<[number, number]> = [];
    for (let i = 0; i <= 100; i += 1) {
      const xv = lo * (hi / lo) ** (i / 100);
      const yv = fit.a * xv ** fit.b;
      if (yv >= yScale.min && yv <= yScale.max) {
        pts.push([xScale.toPx(xv), yScale.toPx(yv)]);
      }
    }
    f.svg.path(pts, FIT_COLOR, 1.8, "6 3");
  }
  keep.forEach((i, j) => {
    const color = durationColor((logDur[j] - dLo) / span);
    f.svg.circle(xScale.toPx(qv[i]), yScale.toPx(impact[i]), 2.6, color, 0.8);
  });
  const entries: Array<[string, string]> = [
    [durationColor(0), "short duration"],
    [durationColor(1), "long duration"],
  ];
  if (fit) entries.push([FIT_COLOR, `fit exponent ${fit.b.toPrecision(3)}`]);
  legend(f.svg, entries);
  return { svg: f.svg.finish(), warnings };
}

export function fairPricingFigure(table: Table): RenderOutcome {
  requireColumns(table, ["one_plus_r_vwap", "one_plus_r_final"]);
  const warnings: string[] = [];
  if (table.rows.length === 0) return emptyFigure("Fair pricing", warnings);
  const x = numericColumn(table, "one_plus_r_vwap");
  const y = numericColumn(table, "one_plus_r_final");
  const lo = Math.min(...x, ...y);
  const hi = Math.max(...x, ...y);
  const pad = (hi - lo || 0.01) * 0.05;
  const area = plotArea();
  const xScale = linearScale(lo - pad, hi + pad, area.left, area.right);
  const yScale = linearScale(lo - pad, hi + pad, area.bottom, area.top);
  const f = frame(
    "Fair pricing: post-relaxation price vs VWAP",
    "1 + R_vwap",
    "1 + R at t0+2T",
    xScale,
    yScale
  );
  const start = Math.max(xScale.min, yScale.min);
  const end = Math.min(xScale.max, yScale.max);
  f.svg.line(
    xScale.toPx(start),
    yScale.toPx(start),
    xScale.toPx(end),
    yScale.toPx(end),
    IDENTITY_COLOR,
    1.8
  );
  for (let i = 0; i < x.length; i += 1) {
    f.svg.circle(xScale.toPx(x[i]), yScale.toPx(y[i]), 2.8, EXECUTION_COLOR, 0.75);
  }
  legend(f.svg, [
    [EXECUTION_COLOR, "metaorders"],
    [IDENTITY_COLOR, "identity (perfect fair pricing)"],
  ]);
  return { svg: f.svg.finish(), warnings };
}

export function renderFigure(style: FigureStyle, table: Table): RenderOutcome {
  switch (style) {
    case "dynamics":
      return dynamicsFigure(table);
    case "distribution":
      return distributionFigure(table);
    case "sqrt":
      return sqrtFigure(table);
    case "fairpricing":
      return fairPricingFigure(table);
  }
}
