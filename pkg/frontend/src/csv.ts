// Minimal CSV reading and writing for table hand-off to the matching engine.
// Values travel as strings end to end so numeric tokens reach the engine
// byte-for-byte as the caller supplied them.

export type Row = Record<string, string>;

export interface Table {
  columns: string[];
  rows: Row[];
}

function needsQuoting(value: string): boolean {
  return /[",\n\r]/.test(value) || value !== value.trim();
}

function quote(value: string): string {
  return needsQuoting(value) ? `"${value.replace(/"/g, '""')}"` : value;
}

// Serialize rows in a fixed column order; missing keys become empty cells.
export function serializeCsv(columns: string[], rows: Row[]): string {
  const lines = [columns.map(quote).join(",")];
  for (const row of rows) {
    lines.push(columns.map((c) => quote(row[c] ?? "")).join(","));
  }
  return lines.join("\n") + "\n";
}

// Parse CSV text with standard double-quote escaping.
export function parseCsv(text: string): Table {
  const records: string[][] = [];
  let field = "";
  let record: string[] = [];
  let inQuotes = false;
  let i = 0;
  while (i < text.length) {
    const ch = text[i];
    if (inQuotes) {
      if (ch === '"') {
        if (text[i + 1] === '"') {
          field += '"';
          i += 2;
          continue;
        }
        inQuotes = false;
        i += 1;
        continue;
      }
      field += ch;
      i += 1;
      continue;
    }
    if (ch === '"') {
      inQuotes = true;
      i += 1;
      continue;
    }
    if (ch === ",") {
      record.push(field);
      field = "";
      i += 1;
      continue;
    }
    if (ch === "\n" || ch === "\r") {
      if (ch === "\r" && text[i + 1] === "\n") i += 1;
      record.push(field);
      records.push(record);
      field = "";
      record = [];
      i += 1;
      continue;
    }
    field += ch;
    i += 1;
  }
  if (field.length > 0 || record.length > 0) {
    record.push(field);
    records.push(record);
  }
  if (records.length === 0) {
    return { columns: [], rows: [] };
  }
  const columns = records[0];
  const rows = records.slice(1).map((cells) => {
    const row: Row = {};
    columns.forEach((c, j) => {
      row[c] = cells[j] ?? "";
    });
    return row;
  });
  return { columns, rows };
}
