// Functional-series CSV parsing and the log-log power-law fit.
//
// Series files carry a JSON metadata header in a leading `# {...}` comment,
// then a two-column CSV (parameter,value). The fit reproduces the solver
// side's least squares through (log(1 + |u|), log v), so annotated slopes are
// directly comparable with report verdicts.

export interface SeriesMeta {
  label?: string;
  param?: string;
  d?: number;
  p?: number;
  gamma0?: number;
  epsilon?: number;
  record?: string;
  [key: string]: unknown;
}

export interface Series {
  meta: SeriesMeta;
  paramName: string;
  parameters: number[];
  values: number[];
}

export interface PowerLawFit {
  exponent: number;
  intercept: number;
  rSquared: number;
  nPoints: number;
}

export class SchemaError extends Error {}

export function parseSeriesCsv(text: string): Series {
  const lines = text.split(/\r?\n/).filter((l) => l.trim().length > 0);
  if (lines.length === 0) {
    throw new SchemaError("empty series file");
  }
  let meta: SeriesMeta = {};
  let idx = 0;
  if (lines[0].startsWith("#")) {
    try {
      meta = JSON.parse(lines[0].slice(1).trim());
    } catch (err) {
      throw new SchemaError(`unreadable metadata header: ${(err as Error).message}`);
    }
    idx = 1;
  }
  if (idx >= lines.length) {
    throw new SchemaError("series file has no header row");
  }
  const header = lines[idx].split(",").map((s) => s.trim());
  if (header.length !== 2 || header[1] !== "value") {
    throw new SchemaError(`unexpected columns [${header.join(", ")}]; expected <param>,value`);
  }
  const paramName = header[0];
  const parameters: number[] = [];
  const values: number[] = [];
  for (const line of lines.slice(idx + 1)) {
    const cells = line.split(",");
    if (cells.length !== 2) {
      throw new SchemaError(`malformed row: ${line}`);
    }
    const x = Number(cells[0]);
    const y = Number(cells[1]);
    if (!Number.isFinite(x) || !Number.isFinite(y)) {
      throw new SchemaError(`non-numeric row: ${line}`);
    }
    parameters.push(x);
    values.push(y);
  }
  if (parameters.length === 0) {
    throw new SchemaError("series contains no data rows");
  }
  return { meta, paramName, parameters, values };
}

export function fitPowerLaw(series: Series): PowerLawFit {
  const pts = series.parameters
    .map((u, i) => ({ x: Math.log(1 + Math.abs(u)), y: series.values[i] }))
    .filter((p) => p.y > 0)
    .map((p) => ({ x: p.x, y: Math.log(p.y) }));
  if (pts.length < 4) {
    throw new SchemaError(`power-law fit needs >= 4 positive values, got ${pts.length}`);
  }
  const n = pts.length;
  const mx = pts.reduce((s, p) => s + p.x, 0) / n;
  const my = pts.reduce((s, p) => s + p.y, 0) / n;
  let sxx = 0;
  let sxy = 0;
  for (const p of pts) {
    sxx += (p.x - mx) * (p.x - mx);
    sxy += (p.x - mx) * (p.y - my);
  }
  if (sxx === 0) {
    throw new SchemaError("degenerate abscissa: all parameters coincide");
  }
  const exponent = sxy / sxx;
  const intercept = my - exponent * mx;
  let ssRes = 0;
  let ssTot = 0;
  for (const p of pts) {
    const pred = exponent * p.x + intercept;
    ssRes += (p.y - pred) * (p.y - pred);
    ssTot += (p.y - my) * (p.y - my);
  }
  const rSquared = ssTot === 0 ? 1 : 1 - ssRes / ssTot;
  return { exponent, intercept, rSquared, nPoints: n };
}
