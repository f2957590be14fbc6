// Standalone HTML report: one section per headline estimate of the run,
// collated from the diagnostics report.json plus any figures already
// rendered next to it. Missing figures are noted inline, never fatal.

import { SchemaError } from "./series.js";

export interface DiagnosticsReport {
  schema_version: number;
  record_id: string;
  params: { d: number; p: number; gamma0: number; epsilon: number };
  grid: { dr: number; r_max: number; t_max: number };
  items: Record<string, Record<string, unknown>>;
}

// headline verdicts in presentation order, keyed by the item's verdict tag
const BULLETS: Array<{ verdict: string; title: string }> = [
  { verdict: "energy_conservation", title: "Global solution and energy conservation" },
  { verdict: "iled_uniformity", title: "Integrated local energy decay" },
  { verdict: "flux_decay", title: "Energy-flux decay on the hybrid foliation" },
  { verdict: "rweighted_bound", title: "Uniform r-weighted energy bound" },
  { verdict: "critical_spacetime_norm", title: "Critical spacetime norm" },
  { verdict: "scattering", title: "Scattering to linear waves" },
  { verdict: "exterior_flux_decay", title: "Exterior energy-flux decay" },
  { verdict: "energy_identity", title: "Energy-identity audits" },
];

export function parseReport(text: string): DiagnosticsReport {
  let data: unknown;
  try {
    data = JSON.parse(text);
  } catch (err) {
    throw new SchemaError(`report is not valid JSON: ${(err as Error).message}`);
  }
  const rep = data as Partial<DiagnosticsReport>;
  if (typeof rep !== "object" || rep === null || typeof rep.items !== "object" ||
      rep.params === undefined || rep.grid === undefined) {
    throw new SchemaError("report is missing items/params/grid");
  }
  return rep as DiagnosticsReport;
}

function escapeHtml(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

function fmtValue(v: unknown): string {
  if (typeof v === "number") {
    if (v === 0) return "0";
    const a = Math.abs(v);
    return a >= 1e4 || a < 1e-3 ? v.toExponential(4) : v.toPrecision(6);
  }
  if (typeof v === "boolean") return v ? "yes" : "no";
  if (typeof v === "string") return escapeHtml(v);
  return escapeHtml(JSON.stringify(v));
}

function rowsFor(item: Record<string, unknown>, depth = 0): string[] {
  const rows: string[] = [];
  for (const [key, value] of Object.entries(item)) {
    if (key === "series" || key === "flux_series" || key === "verdict") continue;
    if (typeof value === "object" && value !== null && !Array.isArray(value) && depth === 0) {
      for (const [k2, v2] of Object.entries(value as Record<string, unknown>)) {
        rows.push(`<tr><td>${escapeHtml(key)}.${escapeHtml(k2)}</td><td>${fmtValue(v2)}</td></tr>`);
      }
    } else {
      rows.push(`<tr><td>${escapeHtml(key)}</td><td>${fmtValue(value)}</td></tr>`);
    }
  }
  return rows;
}

function badge(item: Record<string, unknown>): string {
  if ("error" in item) return `<span class="badge err">error</span>`;
  if (!("passed" in item)) return `<span class="badge info">measured</span>`;
  return item["passed"]
    ? `<span class="badge ok">pass</span>`
    : `<span class="badge fail">fail</span>`;
}

// suites whose items errored carry no verdict tag; recover it from the name
const NAME_TO_VERDICT: Record<string, string> = {
  conservation: "energy_conservation",
  iled: "iled_uniformity",
  flux_decay: "flux_decay",
  rweighted: "rweighted_bound",
  spacetime: "critical_spacetime_norm",
  scattering: "scattering",
  exterior: "exterior_flux_decay",
  audit: "energy_identity",
};

export function renderReportHtml(
  report: DiagnosticsReport,
  figures: Record<string, string> = {},
): string {
  const p = report.params;
  const g = report.grid;
  const sections: string[] = [];
  const byVerdict = new Map<string, [string, Record<string, unknown>]>();
  for (const [name, item] of Object.entries(report.items)) {
    const tag = (item["verdict"] as string) ?? NAME_TO_VERDICT[name] ?? name;
    byVerdict.set(tag, [name, item]);
  }
  for (const bullet of BULLETS) {
    const entry = byVerdict.get(bullet.verdict);
    if (!entry) continue;
    const [name, item] = entry;
    const fig = figures[name];
    const figureBlock = fig
      ? `<div class="figure">${fig}</div>`
      : `<p class="nofig">figure not rendered for this section</p>`;
    const body =
      "error" in item
        ? `<p class="error">${escapeHtml(String(item["error"]))}</p>`
        : `<table>${rowsFor(item).join("")}</table>`;
    sections.push(
      `<section id="${bullet.verdict}">\n<h2>${bullet.title} ${badge(item)}</h2>\n${body}\n${figureBlock}\n</section>`,
    );
  }
  return `<!DOCTYPE html>
<html lang="en">
<head>
<meta charset="utf-8"/>
<title>wavedecay report ${escapeHtml(report.record_id)}</title>
<style>
body { font-family: Helvetica, Arial, sans-serif; margin: 2rem auto; max-width: 60rem; color: #1a1a1a; }
table { border-collapse: collapse; margin: 0.6rem 0; }
td { border: 1px solid #ccc; padding: 0.25rem 0.6rem; font-size: 0.9rem; }
.badge { font-size: 0.75rem; padding: 0.15rem 0.5rem; border-radius: 0.6rem; color: white; vertical-align: middle; }
.ok { background: #2d6a4f; } .fail { background: #c23b22; } .err { background: #8a5a00; } .info { background: #4361ee; }
.nofig { color: #777; font-style: italic; }
.error { color: #8a2d22; }
section { margin-bottom: 2rem; border-top: 1px solid #ddd; padding-top: 0.8rem; }
</style>
</head>
<body>
<h1>Defocusing wave run report</h1>
<p>record <code>${escapeHtml(report.record_id)}</code> &mdash; d = ${p.d}, p = ${p.p}, gamma0 = ${p.gamma0}, epsilon = ${p.epsilon};
grid dr = ${g.dr}, r_max = ${g.r_max}, T = ${g.t_max}</p>
${sections.join("\n")}
</body>
</html>
`;
}
