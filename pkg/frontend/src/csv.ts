export function parseCsv(text: string): Record<string, string>[] {
  const lines = text.split(/\r?\n/).filter((l) => l.length > 0);
  if (lines.length === 0) return [];
  const header = lines[0].split(",");
  return lines.slice(1).map((line) => {
    const cells = line.split(",");
    const row: Record<string, string> = {};
    header.forEach((h, i) => {
      row[h] = cells[i] ?? "";
    });
    return row;
  });
}

export function toNumber(raw: string, context: string): number {
  if (raw === "" || raw === "nan") return NaN;
  const v = Number(raw);
  if (!Number.isFinite(v)) {
    throw new Error(`non-finite value '${raw}' in ${context}`);
  }
  return v;
}
