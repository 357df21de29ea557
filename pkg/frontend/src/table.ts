/**
 * Reader for the analyzer's delimited output files: an optional provenance
 * comment line (`# metaimpact <version> <subcommand>`), a column header row,
 * then comma-separated data rows.
 */

export interface Table {
  provenance: string | null;
  columns: string[];
  rows: string[][];
}

export class SchemaError extends Error {}

export function parseTable(text: string): Table {
  const lines = text.split(/\r?\n/).filter((line) => line.length > 0);
  let provenance: string | null = null;
  let start = 0;
  if (lines.length > 0 && lines[0].startsWith("#")) {
    provenance = lines[0].slice(1).trim();
    start = 1;
  }
  if (lines.length <= start) {
    throw new SchemaError("missing column header row");
  }
  const columns = lines[start].split(",").map((c) => c.trim());
  const rows = lines.slice(start + 1).map((line) => line.split(","));
  return { provenance, columns, rows };
}

export function requireColumns(table: Table, needed: string[]): void {
  for (const name of needed) {
    if (!table.columns.includes(name)) {
      throw new SchemaError(`missing column: ${name}`);
    }
  }
}

export function numericColumn(table: Table, name: string): number[] {
  const index = table.columns.indexOf(name);
  if (index < 0) {
    throw new SchemaError(`missing column: ${name}`);
  }
  return table.rows.map((row) => Number(row[index]));
}

export function stringColumn(table: Table, name: string): string[] {
  const index = table.columns.indexOf(name);
  if (index < 0) {
    throw new SchemaError(`missing column: ${name}`);
  }
  return table.rows.map((row) => row[index]);
}
