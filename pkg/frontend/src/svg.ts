// Minimal hand-rolled SVG charting: log-log scatter plus straight lines.
// Output is a pure function of the inputs (stable across re-renders).

export interface Point {
  x: number;
  y: number;
}

export interface LineSpec {
  slope: number;
  intercept: number; // in log-log coordinates: log y = slope * log x + intercept
  color: string;
  dash?: string;
  label: string;
}

export interface LogLogChartSpec {
  title: string;
  xLabel: string;
  yLabel: string;
  points: Point[]; // raw (not log) coordinates; must be positive
  lines: LineSpec[];
  annotation: string;
  width?: number;
  height?: number;
}

const MARGIN = { left: 64, right: 24, top: 40, bottom: 48 };

function fmt(v: number): string {
  return Number.isInteger(v) ? v.toString() : v.toPrecision(6);
}

function logTicks(lo: number, hi: number): number[] {
  const ticks: number[] = [];
  for (let e = Math.floor(lo); e <= Math.ceil(hi); e++) {
    if (e >= lo - 1e-9 && e <= hi + 1e-9) {
      ticks.push(e);
    }
  }
  if (ticks.length < 2) {
    ticks.push(lo, hi);
  }
  return ticks;
}

export function renderLogLogChart(spec: LogLogChartSpec): string {
  const W = spec.width ?? 640;
  const H = spec.height ?? 440;
  if (spec.points.length === 0) {
    throw new Error("no data points to draw");
  }
  const lx = spec.points.map((p) => Math.log10(p.x));
  const ly = spec.points.map((p) => Math.log10(p.y));
  const xLo = Math.min(...lx);
  const xHi = Math.max(...lx);
  const yLo = Math.min(...ly);
  const yHi = Math.max(...ly);
  const padX = 0.05 * (xHi - xLo || 1);
  const padY = 0.05 * (yHi - yLo || 1);
  const x0 = xLo - padX;
  const x1 = xHi + padX;
  const y0 = yLo - padY;
  const y1 = yHi + padY;

  const toX = (v: number) => MARGIN.left + ((v - x0) / (x1 - x0)) * (W - MARGIN.left - MARGIN.right);
  const toY = (v: number) => H - MARGIN.bottom - ((v - y0) / (y1 - y0)) * (H - MARGIN.top - MARGIN.bottom);

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${W}" height="${H}" viewBox="0 0 ${W} ${H}" font-family="Helvetica, Arial, sans-serif">`,
  );
  parts.push(`<rect width="${W}" height="${H}" fill="white"/>`);
  parts.push(`<text x="${W / 2}" y="22" text-anchor="middle" font-size="15">${spec.title}</text>`);

  // axes
  const axX0 = MARGIN.left;
  const axX1 = W - MARGIN.right;
  const axY0 = H - MARGIN.bottom;
  const axY1 = MARGIN.top;
  parts.push(`<line x1="${axX0}" y1="${axY0}" x2="${axX1}" y2="${axY0}" stroke="#333"/>`);
  parts.push(`<line x1="${axX0}" y1="${axY0}" x2="${axX0}" y2="${axY1}" stroke="#333"/>`);
  for (const t of logTicks(x0, x1)) {
    const px = toX(t);
    parts.push(`<line x1="${px}" y1="${axY0}" x2="${px}" y2="${axY0 + 5}" stroke="#333"/>`);
    parts.push(
      `<text x="${px}" y="${axY0 + 20}" text-anchor="middle" font-size="11">1e${fmt(t)}</text>`,
    );
  }
  for (const t of logTicks(y0, y1)) {
    const py = toY(t);
    parts.push(`<line x1="${axX0 - 5}" y1="${py}" x2="${axX0}" y2="${py}" stroke="#333"/>`);
    parts.push(
      `<text x="${axX0 - 8}" y="${py + 4}" text-anchor="end" font-size="11">1e${fmt(t)}</text>`,
    );
  }
  parts.push(
    `<text x="${(axX0 + axX1) / 2}" y="${H - 10}" text-anchor="middle" font-size="12">${spec.xLabel}</text>`,
  );
  parts.push(
    `<text x="16" y="${(axY0 + axY1) / 2}" text-anchor="middle" font-size="12" transform="rotate(-90 16 ${(axY0 + axY1) / 2})">${spec.yLabel}</text>`,
  );

  // straight lines in log-log space (natural-log slope/intercept)
  const LN10 = Math.LN10;
  for (const line of spec.lines) {
    const yAt = (lx10: number) => (line.slope * (lx10 * LN10) + line.intercept) / LN10;
    const p0 = { x: toX(xLo), y: toY(yAt(xLo)) };
    const p1 = { x: toX(xHi), y: toY(yAt(xHi)) };
    const dash = line.dash ? ` stroke-dasharray="${line.dash}"` : "";
    parts.push(
      `<line x1="${p0.x.toFixed(2)}" y1="${p0.y.toFixed(2)}" x2="${p1.x.toFixed(2)}" y2="${p1.y.toFixed(2)}" stroke="${line.color}" stroke-width="1.6"${dash}/>`,
    );
  }

  // scatter
  for (let i = 0; i < lx.length; i++) {
    parts.push(
      `<circle cx="${toX(lx[i]).toFixed(2)}" cy="${toY(ly[i]).toFixed(2)}" r="3" fill="#1f4e96" fill-opacity="0.85"/>`,
    );
  }

  // legend + annotation
  let ly0 = MARGIN.top + 8;
  for (const line of spec.lines) {
    parts.push(
      `<line x1="${axX1 - 170}" y1="${ly0}" x2="${axX1 - 140}" y2="${ly0}" stroke="${line.color}" stroke-width="1.6"${line.dash ? ` stroke-dasharray="${line.dash}"` : ""}/>`,
    );
    parts.push(`<text x="${axX1 - 132}" y="${ly0 + 4}" font-size="11">${line.label}</text>`);
    ly0 += 16;
  }
  parts.push(
    `<text x="${axX0 + 8}" y="${MARGIN.top + 8}" font-size="12" fill="#111">${spec.annotation}</text>`,
  );
  parts.push("</svg>");
  return parts.join("\n") + "\n";
}
