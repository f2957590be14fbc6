// CLI: build the standalone HTML report for a diagnosed run directory.
//
//   node dist/render_report.js <run-dir> <out.html>
//
// Figures: for every item whose series CSV exists, the decay figure is
// rendered inline when the series is a positive decay sequence; otherwise the
// section notes that no figure is available.

import { existsSync, readFileSync, writeFileSync } from "fs";
import { join } from "path";
import { renderDecayFigure } from "./decay.js";
import { parseReport, renderReportHtml } from "./report.js";

function main(argv: string[]): number {
  if (argv.length !== 2) {
    console.error("usage: render_report <run-dir> <out.html>");
    return 2;
  }
  const [runDir, outPath] = argv;
  const report = parseReport(readFileSync(join(runDir, "report.json"), "utf-8"));
  const gamma0 = report.params.gamma0;

  const figures: Record<string, string> = {};
  for (const [name, item] of Object.entries(report.items)) {
    const series = item["series"];
    if (typeof series !== "string") continue;
    const path = join(runDir, series);
    if (!existsSync(path)) continue;
    try {
      figures[name] = renderDecayFigure(readFileSync(path, "utf-8"), gamma0).svg;
    } catch {
      // non-decay series (zeros, growing T-ladders): leave the note in place
    }
  }
  writeFileSync(outPath, renderReportHtml(report, figures), "utf-8");
  console.log(`wrote ${outPath} (${Object.keys(figures).length} figures inline)`);
  return 0;
}

process.exit(main(process.argv.slice(2)));
