/**
 * Standalone renderer: ``node dist/render.js <input.csv> <style> <output.svg>``.
 *
 * Styles: dynamics, distribution, sqrt, fairpricing. The input file is never
 * modified. Exits non-zero naming the problem on a schema mismatch.
 */
import { readFileSync, writeFileSync } from "node:fs";

import { FIGURE_STYLES, FigureStyle, renderFigure } from "./figures.js";
import { parseTable, SchemaError } from "./table.js";

export function main(argv: string[]): number {
  if (argv.length !== 3) {
    console.error("usage: render <input.csv> <style> <output.svg>");
    console.error(`styles: ${FIGURE_STYLES.join(", ")}`);
    return 1;
  }
  const [inputPath, style, outputPath] = argv;
  if (!FIGURE_STYLES.includes(style as FigureStyle)) {
    console.error(`unknown style: ${style} (expected one of ${FIGURE_STYLES.join(", ")})`);
    return 1;
  }
  let text: string;
  try {
    text = readFileSync(inputPath, "utf-8");
  } catch (err) {
    console.error(`cannot read ${inputPath}: ${(err as Error).message}`);
    return 1;
  }
  try {
    const table = parseTable(text);
    const outcome = renderFigure(style as FigureStyle, table);
    for (const warning of outcome.warnings) {
      console.warn(`warning: ${warning}`);
    }
    writeFileSync(outputPath, outcome.svg, "utf-8");
    return 0;
  } catch (err) {
    if (err instanceof SchemaError) {
      console.error(`schema mismatch: ${err.message}`);
      return 1;
    }
    throw err;
  }
}

const invokedDirectly =
  process.argv[1] !== undefined &&
  import.meta.url === new URL(`file://${process.argv[1]}`).href;
if (invokedDirectly) {
  process.exit(main(process.argv.slice(2)));
}
