import { describe, expect, it } from "vitest";

import {
  DEFAULT_INPUTS,
  parseGrid,
  toConfigDoc,
  validate,
} from "../src/validation.js";

describe("parseGrid", () => {
  it("parses comma and space separated doses", () => {
    expect(parseGrid("0, 0.25, 0.5, 0.75, 1")).toEqual([0, 0.25, 0.5, 0.75, 1]);
    expect(parseGrid("0 0.5 1")).toEqual([0, 0.5, 1]);
  });

  it("returns null on non-numeric entries", () => {
    expect(parseGrid("0, x, 1")).toBeNull();
  });

  it("returns empty array for blank text", () => {
    expect(parseGrid("  ")).toEqual([]);
  });
});

describe("validate", () => {
  it("accepts the prefilled defaults", () => {
    expect(validate(DEFAULT_INPUTS)).toEqual([]);
  });

  it("rejects theta of zero with an inline error", () => {
    const errors = validate({ ...DEFAULT_INPUTS, theta: "0" });
    expect(errors).toHaveLength(1);
    expect(errors[0].field).toBe("theta");
  });

  it("rejects a non-monotone grid", () => {
    const errors = validate({
      ...DEFAULT_INPUTS,
      schemeKind: "discrete",
      gridText: "0, 0.5, 0.25",
    });
    expect(errors.some((e) => e.field === "scheme.grid")).toBe(true);
  });

  it("rejects a starting dose off the grid", () => {
    const errors = validate({
      ...DEFAULT_INPUTS,
      schemeKind: "discrete",
      gridText: "0, 0.25, 0.5",
      startingDose: "0.3",
    });
    expect(errors.some((e) => e.field === "starting_dose")).toBe(true);
  });

  it("accepts a five-dose grid with on-grid start", () => {
    const errors = validate({
      ...DEFAULT_INPUTS,
      schemeKind: "discrete",
      gridText: "0, 0.25, 0.5, 0.75, 1",
      startingDose: "0",
    });
    expect(errors).toEqual([]);
  });

  it("flags every invalid field at once", () => {
    const errors = validate({
      ...DEFAULT_INPUTS,
      theta: "1.5",
      sampleSize: "0",
      alpha0: "0.9",
    });
    expect(errors.map((e) => e.field).sort()).toEqual([
      "feasibility.alpha0",
      "sample_size",
      "theta",
    ]);
  });
});

describe("toConfigDoc", () => {
  it("builds the discrete scheme request body", () => {
    const doc = toConfigDoc({
      ...DEFAULT_INPUTS,
      schemeKind: "discrete",
      gridText: "0, 0.25, 0.5, 0.75, 1",
      startingDose: "0.25",
    });
    expect(doc.scheme).toEqual({
      kind: "discrete",
      grid: [0, 0.25, 0.5, 0.75, 1],
    });
    expect(doc.starting_dose).toBe(0.25);
    expect((doc.model as { theta: number }).theta).toBeCloseTo(0.33);
  });

  it("omits starting dose when blank", () => {
    const doc = toConfigDoc(DEFAULT_INPUTS);
    expect("starting_dose" in doc).toBe(false);
    expect(doc.scheme).toEqual({ kind: "continuous" });
  });
});
