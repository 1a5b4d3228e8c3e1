/** Reader for the flowchain CSV dialect: header row, numeric cells, trailing `# ...` metadata. */

export interface Table {
  header: string[];
  rows: string[][];
}

export function parseCsv(text: string): Table {
  const lines = text
    .split("\n")
    .map((line) => line.trimEnd())
    .filter((line) => line.length > 0 && !line.startsWith("#"));
  if (lines.length === 0) {
    throw new Error("empty CSV");
  }
  const header = lines[0].split(",");
  const rows = lines.slice(1).map((line) => line.split(","));
  for (const row of rows) {
    if (row.length !== header.length) {
      throw new Error(`row has ${row.length} cells, header has ${header.length}`);
    }
  }
  if (rows.length === 0) {
    throw new Error("CSV has a header but no data rows");
  }
  return { header, rows };
}

/** Extract named columns as numbers, failing loudly on missing columns. */
export function numericColumns(table: Table, names: string[]): number[][] {
  const indices = names.map((name) => {
    const index = table.header.indexOf(name);
    if (index < 0) {
      throw new Error(`missing column ${name}; have ${table.header.join(",")}`);
    }
    return index;
  });
  return names.map((_, j) =>
    table.rows.map((row) => {
      const value = Number(row[indices[j]]);
      if (!Number.isFinite(value)) {
        throw new Error(`non-numeric cell in column ${names[j]}: ${row[indices[j]]}`);
      }
      return value;
    })
  );
}

/** Extract one column as raw strings. */
export function stringColumn(table: Table, name: string): string[] {
  const index = table.header.indexOf(name);
  if (index < 0) {
    throw new Error(`missing column ${name}; have ${table.header.join(",")}`);
  }
  return table.rows.map((row) => row[index]);
}

/** Keep rows whose `section` column equals the given tag (compare.csv layout). */
export function filterSection(table: Table, section: string): Table {
  const index = table.header.indexOf("section");
  if (index < 0) {
    throw new Error(`missing column section; have ${table.header.join(",")}`);
  }
  const rows = table.rows.filter((row) => row[index] === section);
  if (rows.length === 0) {
    throw new Error(`no rows with section=${section}`);
  }
  return { header: table.header, rows };
}
