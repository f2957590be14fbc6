// CLI: render a log-log decay figure from a functional-series CSV.
//
//   node dist/render_decay.js <series.csv> <out.svg> [--gamma0 1.5]

import { readFileSync, writeFileSync } from "fs";
import { renderDecayFigure } from "./decay.js";
import { parseSeriesCsv } from "./series.js";

function main(argv: string[]): number {
  const args = argv.filter((a) => !a.startsWith("--"));
  if (args.length !== 2) {
    console.error("usage: render_decay <series.csv> <out.svg> [--gamma0 G]");
    return 2;
  }
  const flagIdx = argv.indexOf("--gamma0");
  let gamma0: number | undefined =
    flagIdx >= 0 ? Number(argv[flagIdx + 1]) : undefined;

  const text = readFileSync(args[0], "utf-8");
  if (gamma0 === undefined || !Number.isFinite(gamma0)) {
    const meta = parseSeriesCsv(text).meta;
    gamma0 = typeof meta.gamma0 === "number" ? meta.gamma0 : 1.5;
  }
  const fig = renderDecayFigure(text, gamma0);
  writeFileSync(args[1], fig.svg, "utf-8");
  console.log(
    `wrote ${args[1]} (fitted slope ${fig.fittedSlope.toFixed(3)}, R^2 ${fig.rSquared.toFixed(4)})`,
  );
  return 0;
}

process.exit(main(process.argv.slice(2)));
