import { execFileSync } from "node:child_process";
import { mkdtempSync, readFileSync, statSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { describe, expect, it } from "vitest";

import { renderFigure, FIGURE_STYLES, FigureStyle } from "../src/figures.js";
import { parseTable, SchemaError } from "../src/table.js";

const FIXTURES: Record<FigureStyle, string> = {
  dynamics: "dynamics_full.csv",
  distribution: "length_distribution.csv",
  sqrt: "sqrt_scatter.csv",
  fairpricing: "fair_pricing_points.csv",
};

const fixturePath = (name: string) => join(__dirname, "fixtures", name);
const goldenPath = (style: string) => join(__dirname, "golden", `${style}.svg`);

describe("figure rendering", () => {
  for (const style of FIGURE_STYLES) {
    it(`renders ${style} matching the golden file`, () => {
      const table = parseTable(readFileSync(fixturePath(FIXTURES[style]), "utf-8"));
      const outcome = renderFigure(style, table);
      expect(outcome.svg).toBe(readFileSync(goldenPath(style), "utf-8"));
    });

    it(`produces well-formed SVG for ${style}`, () => {
      const table = parseTable(readFileSync(fixturePath(FIXTURES[style]), "utf-8"));
      const { svg } = renderFigure(style, table);
      expect(svg.startsWith("<svg ")).toBe(true);
      expect(svg.trimEnd().endsWith("</svg>")).toBe(true);
      // every opened circle/line/path/text element is self-closed
      expect(svg).not.toContain("NaN");
      expect(svg).not.toContain("Infinity");
    });
  }

  it("is deterministic", () => {
    const table = parseTable(readFileSync(fixturePath(FIXTURES.dynamics), "utf-8"));
    expect(renderFigure("dynamics", table).svg).toBe(renderFigure("dynamics", table).svg);
  });

  it("does not modify its input", () => {
    const path = fixturePath(FIXTURES.dynamics);
    const before = readFileSync(path, "utf-8");
    renderFigure("dynamics", parseTable(before));
    expect(readFileSync(path, "utf-8")).toBe(before);
  });

  it("names the missing column on schema mismatch", () => {
    const table = parseTable("# metaimpact 0.1.0 analyze\nwrong,columns\n1,2\n");
    expect(() => renderFigure("dynamics", table)).toThrowError(
      /missing column: phase/
    );
    expect(() => renderFigure("dynamics", table)).toThrowError(SchemaError);
  });

  it("renders an empty-axes figure with a warning for header-only input", () => {
    const table = parseTable(
      "# metaimpact 0.1.0 analyze\nphase,rescaled_time,mean_signed_impact,count,artifact\n"
    );
    const outcome = renderFigure("dynamics", table);
    expect(outcome.warnings.length).toBeGreaterThan(0);
    expect(outcome.svg).toContain("no data");
  });

  it("includes the two-phase convention and fit overlay in dynamics", () => {
    const table = parseTable(readFileSync(fixturePath(FIXTURES.dynamics), "utf-8"));
    const { svg } = renderFigure("dynamics", table);
    expect(svg).toContain("#1f4e9c"); // execution series
    expect(svg).toContain("#c0392b"); // relaxation series
    expect(svg).toContain("fit y = "); // power-law overlay legend
  });

  it("draws the identity reference line on the fair-pricing figure", () => {
    const table = parseTable(readFileSync(fixturePath(FIXTURES.fairpricing), "utf-8"));
    const { svg } = renderFigure("fairpricing", table);
    expect(svg).toContain("identity (perfect fair pricing)");
  });
});

describe("command line", () => {
  const renderJs = join(__dirname, "..", "dist", "render.js");

  it("writes the requested SVG and exits zero", () => {
    const out = join(mkdtempSync(join(tmpdir(), "fig-")), "out.svg");
    execFileSync("node", [renderJs, fixturePath(FIXTURES.sqrt), "sqrt", out]);
    const svg = readFileSync(out, "utf-8");
    expect(svg).toBe(readFileSync(goldenPath("sqrt"), "utf-8"));
    expect(statSync(out).size).toBeGreaterThan(1000);
  });

  it("exits non-zero naming the missing column", () => {
    const dir = mkdtempSync(join(tmpdir(), "fig-"));
    const bad = join(dir, "bad.csv");
    writeFileSync(bad, "a,b\n1,2\n");
    let failed = false;
    try {
      execFileSync("node", [renderJs, bad, "fairpricing", join(dir, "out.svg")], {
        stdio: "pipe",
      });
    } catch (err: any) {
      failed = true;
      expect(String(err.stderr)).toContain("missing column: one_plus_r_vwap");
    }
    expect(failed).toBe(true);
  });

  it("rejects unknown styles", () => {
    const dir = mkdtempSync(join(tmpdir(), "fig-"));
    let failed = false;
    try {
      execFileSync(
        "node",
        [renderJs, fixturePath(FIXTURES.dynamics), "sparklines", join(dir, "out.svg")],
        { stdio: "pipe" }
      );
    } catch (err: any) {
      failed = true;
      expect(String(err.stderr)).toContain("unknown style");
    }
    expect(failed).toBe(true);
  });
});
