// Decay figure: log-log flux series with the fitted line and the reference
// slope -gamma0. The annotated slope is the same least-squares fit the
// diagnostics report carries, so the two agree to full precision.

import { fitPowerLaw, parseSeriesCsv, Series } from "./series.js";
import { renderLogLogChart } from "./svg.js";

export interface DecayFigure {
  svg: string;
  fittedSlope: number;
  rSquared: number;
}

export function renderDecayFigure(csvText: string, gamma0: number): DecayFigure {
  const series: Series = parseSeriesCsv(csvText);
  const fit = fitPowerLaw(series);

  const points = series.parameters
    .map((u, i) => ({ x: 1 + Math.abs(u), y: series.values[i] }))
    .filter((p) => p.y > 0);

  // reference slope -gamma0 anchored at the first fitted point
  const x0 = Math.log(points[0].x);
  const y0 = fit.exponent * x0 + fit.intercept;
  const refIntercept = y0 + gamma0 * x0;

  const label = series.meta.label ?? "flux";
  const svg = renderLogLogChart({
    title: `${label}: decay along the foliation`,
    xLabel: `1 + |${series.paramName}|`,
    yLabel: "flux",
    points,
    lines: [
      {
        slope: fit.exponent,
        intercept: fit.intercept,
        color: "#c23b22",
        label: `fit slope ${fit.exponent.toFixed(3)}`,
      },
      {
        slope: -gamma0,
        intercept: refIntercept,
        color: "#2d6a4f",
        dash: "6 4",
        label: `reference slope ${(-gamma0).toFixed(2)}`,
      },
    ],
    annotation: `fitted exponent = ${fit.exponent.toFixed(3)} (R^2 = ${fit.rSquared.toFixed(4)}); reference = ${(-gamma0).toFixed(3)}`,
  });
  return { svg, fittedSlope: fit.exponent, rSquared: fit.rSquared };
}
