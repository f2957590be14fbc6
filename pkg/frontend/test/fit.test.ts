import { describe, expect, it } from "vitest";
import { readFileSync } from "fs";
import { join } from "path";
import { fitPowerLaw, parseSeriesCsv, SchemaError } from "../src/series.js";

const FIXTURES = join(__dirname, "..", "fixtures");

describe("series CSV parsing", () => {
  it("reads the metadata header and rows", () => {
    const series = parseSeriesCsv(readFileSync(join(FIXTURES, "sigma_flux.csv"), "utf-8"));
    expect(series.paramName).toBe("u");
    expect(series.meta.gamma0).toBe(1.5);
    expect(series.parameters.length).toBe(31);
    expect(series.parameters[0]).toBe(2);
  });

  it("rejects empty and malformed inputs", () => {
    expect(() => parseSeriesCsv("")).toThrow(SchemaError);
    expect(() => parseSeriesCsv("u,value\n")).toThrow(SchemaError);
    expect(() => parseSeriesCsv("a,b,c\n1,2,3\n")).toThrow(/columns/);
    expect(() => parseSeriesCsv("u,value\n1,apple\n")).toThrow(/non-numeric/);
  });
});

describe("power-law fit", () => {
  it("recovers a synthetic exponent exactly", () => {
    const rows = ["u,value"];
    for (let u = 2; u <= 32; u += 2) {
      rows.push(`${u},${Math.pow(1 + u, -1.5)}`);
    }
    const fit = fitPowerLaw(parseSeriesCsv(rows.join("\n")));
    expect(fit.exponent).toBeCloseTo(-1.5, 12);
    expect(fit.rSquared).toBeCloseTo(1.0, 12);
  });

  it("matches the diagnostics verdict on the reference run to 3 decimals", () => {
    const series = parseSeriesCsv(readFileSync(join(FIXTURES, "sigma_flux.csv"), "utf-8"));
    const report = JSON.parse(readFileSync(join(FIXTURES, "report.json"), "utf-8"));
    const fit = fitPowerLaw(series);
    const verdict = report.items.flux_decay.fit;
    expect(Math.abs(fit.exponent - verdict.exponent)).toBeLessThan(5e-4);
    expect(Math.abs(fit.r_squared ?? fit.rSquared - verdict.r_squared)).toBeLessThan(5e-4);
  });

  it("needs at least four positive values", () => {
    expect(() => fitPowerLaw(parseSeriesCsv("u,value\n1,1\n2,0.5\n3,0.3\n"))).toThrow(
      SchemaError,
    );
  });
});
