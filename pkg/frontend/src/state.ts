/**
 * Conduct-flow state: a pure projection of the latest server responses plus
 * in-flight form state.  Every transition is a plain function so the flow
 * can be exercised headlessly in tests; DOM wiring lives in main.ts.
 */

import {
  ApiClient,
  PatientRecord,
  Recommendation,
  RevisionConflictError,
  TrialComplete,
} from "./api.js";

export type Banner =
  | { kind: "none" }
  | { kind: "conflict"; message: string }
  | { kind: "error"; message: string };

export type OutcomeEntry =
  | { step: "idle" }
  // two-step confirm: first pick the outcome, then confirm the administered
  // dose matches what is on screen
  | { step: "selected"; dlt: 0 | 1 }
  | { step: "posting"; dlt: 0 | 1 };

export interface TrialView {
  id: string;
  status: string;
  revision: number;
  patients: PatientRecord[];
  recommendation: Recommendation | null;
  finalEstimate: TrialComplete | null;
  banner: Banner;
  entry: OutcomeEntry;
}

export function emptyView(id: string): TrialView {
  return {
    id,
    status: "",
    revision: -1,
    patients: [],
    recommendation: null,
    finalEstimate: null,
    banner: { kind: "none" },
    entry: { step: "idle" },
  };
}

/** Rebuild the whole view from the GET endpoints (also used after reload). */
export async function refreshView(
  api: ApiClient,
  id: string,
): Promise<TrialView> {
  const detail = await api.getTrial(id);
  const view = emptyView(id);
  view.status = detail.snapshot.status;
  view.revision = detail.revision;
  view.patients = detail.snapshot.records;
  const rec = await api.getRecommendation(id);
  if (rec.kind === "recommendation") {
    view.recommendation = rec.value;
  } else if (rec.kind === "complete") {
    view.finalEstimate = rec.value;
    view.status = rec.value.status;
  }
  return view;
}

export function selectOutcome(view: TrialView, dlt: 0 | 1): TrialView {
  if (view.recommendation === null || view.finalEstimate !== null) {
    return view;
  }
  return { ...view, entry: { step: "selected", dlt }, banner: { kind: "none" } };
}

export function cancelOutcome(view: TrialView): TrialView {
  return { ...view, entry: { step: "idle" } };
}

/**
 * Second step of the confirm flow: post the outcome at the displayed dose
 * with the displayed revision.  On a revision conflict the view is refetched
 * and flagged so the clinician re-confirms against fresh data.
 */
export async function confirmOutcome(
  api: ApiClient,
  view: TrialView,
): Promise<TrialView> {
  if (view.entry.step !== "selected" || view.recommendation === null) {
    return view;
  }
  const dlt = view.entry.dlt;
  const dose = view.recommendation.administered_dose;
  try {
    await api.postOutcome(view.id, dose, dlt, view.revision);
  } catch (err) {
    if (err instanceof RevisionConflictError) {
      const fresh = await refreshView(api, view.id);
      return {
        ...fresh,
        banner: {
          kind: "conflict",
          message:
            "Another session updated this trial. Review the refreshed " +
            "state and re-confirm the outcome.",
        },
      };
    }
    const message = err instanceof Error ? err.message : String(err);
    return { ...view, entry: { step: "idle" }, banner: { kind: "error", message } };
  }
  return refreshView(api, view.id);
}
