/**
 * Client-side mirrors of the server's trial-config validation rules, so
 * obvious mistakes are caught before a round trip.  The server remains
 * authoritative: its 422 responses are rendered inline regardless.
 */

export interface FormInputs {
  theta: string;
  sampleSize: string;
  cohortSize: string;
  schemeKind: "continuous" | "discrete";
  gridText: string;
  startingDose: string;
  feasibilityKind: "fixed" | "increasing" | "conditional";
  alpha0: string;
  step: string;
}

export interface FieldError {
  field: string;
  message: string;
}

export const DEFAULT_INPUTS: FormInputs = {
  theta: "0.33",
  sampleSize: "20",
  cohortSize: "1",
  schemeKind: "continuous",
  gridText: "",
  startingDose: "",
  feasibilityKind: "conditional",
  alpha0: "0.05",
  step: "0.05",
};

/** Parse comma/space separated dose text into a numeric grid. */
export function parseGrid(text: string): number[] | null {
  const parts = text
    .split(/[\s,;]+/)
    .map((t) => t.trim())
    .filter((t) => t.length > 0);
  if (parts.length === 0) return [];
  const values = parts.map(Number);
  if (values.some((v) => !Number.isFinite(v))) return null;
  return values;
}

export function validate(inputs: FormInputs): FieldError[] {
  const errors: FieldError[] = [];
  const theta = Number(inputs.theta);
  if (!Number.isFinite(theta) || theta <= 0 || theta >= 1) {
    errors.push({ field: "theta", message: "theta must be in (0, 1)" });
  }
  const n = Number(inputs.sampleSize);
  if (!Number.isInteger(n) || n < 1) {
    errors.push({ field: "sample_size", message: "sample size must be a positive integer" });
  }
  const cohort = Number(inputs.cohortSize);
  if (!Number.isInteger(cohort) || cohort < 1) {
    errors.push({ field: "cohort_size", message: "cohort size must be a positive integer" });
  }
  const alpha0 = Number(inputs.alpha0);
  if (!Number.isFinite(alpha0) || alpha0 <= 0 || alpha0 > 0.5) {
    errors.push({ field: "feasibility.alpha0", message: "alpha0 must be in (0, 0.5]" });
  }
  const step = Number(inputs.step);
  if (!Number.isFinite(step) || step < 0) {
    errors.push({ field: "feasibility.step", message: "step must be >= 0" });
  }

  let grid: number[] | null = [];
  if (inputs.schemeKind === "discrete") {
    grid = parseGrid(inputs.gridText);
    if (grid === null) {
      errors.push({ field: "scheme.grid", message: "grid contains non-numeric entries" });
    } else if (grid.length < 2) {
      errors.push({ field: "scheme.grid", message: "grid needs at least two doses" });
    } else if (!grid.every((v, i) => i === 0 || v > grid![i - 1])) {
      errors.push({ field: "scheme.grid", message: "grid doses must be strictly increasing" });
    }
  }

  if (inputs.startingDose.trim() !== "") {
    const start = Number(inputs.startingDose);
    if (!Number.isFinite(start)) {
      errors.push({ field: "starting_dose", message: "starting dose must be a number" });
    } else if (
      inputs.schemeKind === "discrete" &&
      grid !== null &&
      grid.length >= 2 &&
      !grid.some((g) => Math.abs(g - start) < 1e-9)
    ) {
      errors.push({ field: "starting_dose", message: "starting dose must be one of the grid doses" });
    }
  }
  return errors;
}

/** Assemble the create-trial request body from validated form inputs. */
export function toConfigDoc(inputs: FormInputs): Record<string, unknown> {
  const doc: Record<string, unknown> = {
    model: { theta: Number(inputs.theta) },
    sample_size: Number(inputs.sampleSize),
    cohort_size: Number(inputs.cohortSize),
    feasibility: {
      kind: inputs.feasibilityKind,
      alpha0: Number(inputs.alpha0),
      step: Number(inputs.step),
    },
  };
  if (inputs.schemeKind === "discrete") {
    doc.scheme = { kind: "discrete", grid: parseGrid(inputs.gridText) ?? [] };
  } else {
    doc.scheme = { kind: "continuous" };
  }
  if (inputs.startingDose.trim() !== "") {
    doc.starting_dose = Number(inputs.startingDose);
  }
  return doc;
}
