/**
 * DOM wiring for the conduct dashboard.  All state lives in TrialView
 * objects produced by state.ts; this module only renders them and forwards
 * user events.  The active trial id is kept in the URL hash so a reload
 * reconstructs the identical view from the GET endpoints.
 */

import { ApiClient, FetchLike } from "./api.js";
import { renderPosteriorSvg } from "./chart.js";
import {
  TrialView,
  cancelOutcome,
  confirmOutcome,
  refreshView,
  selectOutcome,
} from "./state.js";
import { DEFAULT_INPUTS, toConfigDoc, validate, FormInputs } from "./validation.js";

const api = new ApiClient(
  ((url, init) => fetch(url, init)) as FetchLike,
);

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function readForm(): FormInputs {
  return {
    theta: el<HTMLInputElement>("theta").value,
    sampleSize: el<HTMLInputElement>("sample-size").value,
    cohortSize: el<HTMLInputElement>("cohort-size").value,
    schemeKind: el<HTMLSelectElement>("scheme-kind").value as
      | "continuous"
      | "discrete",
    gridText: el<HTMLInputElement>("grid").value,
    startingDose: el<HTMLInputElement>("starting-dose").value,
    feasibilityKind: el<HTMLSelectElement>("feasibility-kind").value as
      | "fixed"
      | "increasing"
      | "conditional",
    alpha0: el<HTMLInputElement>("alpha0").value,
    step: el<HTMLInputElement>("step").value,
  };
}

function showFormErrors(errors: { field: string; message: string }[]): void {
  el("form-errors").innerHTML = errors
    .map((e) => `<li><strong>${e.field}</strong>: ${e.message}</li>`)
    .join("");
}

let view: TrialView | null = null;

function renderPatients(v: TrialView): string {
  if (v.patients.length === 0) {
    return "<tr><td colspan='3' class='muted'>no patients yet</td></tr>";
  }
  return v.patients
    .map(
      (p, i) =>
        `<tr><td>${i + 1}</td><td>${p.dose.toFixed(4)}</td>` +
        `<td>${p.dlt ? "DLT" : "no DLT"}</td></tr>`,
    )
    .join("");
}

function render(): void {
  const panel = el("trial-panel");
  if (view === null) {
    panel.hidden = true;
    return;
  }
  panel.hidden = false;
  el("trial-id").textContent = view.id;
  el("trial-status").textContent = view.status;
  el("trial-revision").textContent = String(view.revision);
  el("patient-rows").innerHTML = renderPatients(view);

  const banner = el("banner");
  banner.hidden = view.banner.kind === "none";
  banner.className = `banner banner--${view.banner.kind}`;
  banner.textContent = view.banner.kind === "none" ? "" : view.banner.message;

  const dosePanel = el("dose-panel");
  const finalPanel = el("final-panel");
  if (view.finalEstimate !== null) {
    dosePanel.hidden = true;
    finalPanel.hidden = false;
    el("final-estimate").textContent =
      view.finalEstimate.final_mtd_estimate.toFixed(4);
  } else if (view.recommendation !== null) {
    dosePanel.hidden = false;
    finalPanel.hidden = true;
    const rec = view.recommendation;
    el("rec-administered").textContent = rec.administered_dose.toFixed(4);
    el("rec-continuous").textContent = rec.continuous_dose.toFixed(4);
    el("rec-alpha").textContent = rec.alpha.toFixed(3);
    el("rec-interim").textContent = rec.interim_mtd.dose.toFixed(4);
    el("chart").innerHTML = renderPosteriorSvg(rec.posterior.density_trace, {
      alphaQuantile: rec.continuous_dose,
      median: rec.posterior.gamma_median,
      alpha: rec.alpha,
    });
    const confirming = view.entry.step !== "idle";
    el("entry-select").hidden = confirming;
    el("entry-confirm").hidden = !confirming;
    if (view.entry.step === "selected") {
      el("confirm-text").textContent =
        `Record ${view.entry.dlt ? "a DLT" : "no DLT"} at dose ` +
        `${rec.administered_dose.toFixed(4)}?`;
    }
  }
}

async function withView(update: Promise<TrialView>): Promise<void> {
  view = await update;
  window.location.hash = view.id;
  render();
}

function wire(): void {
  const defaults = DEFAULT_INPUTS;
  el<HTMLInputElement>("theta").value = defaults.theta;
  el<HTMLInputElement>("sample-size").value = defaults.sampleSize;
  el<HTMLInputElement>("cohort-size").value = defaults.cohortSize;
  el<HTMLInputElement>("alpha0").value = defaults.alpha0;
  el<HTMLInputElement>("step").value = defaults.step;

  el("create-form").addEventListener("submit", async (ev) => {
    ev.preventDefault();
    const inputs = readForm();
    const errors = validate(inputs);
    if (errors.length > 0) {
      showFormErrors(errors);
      return;
    }
    const result = await api.createTrial(toConfigDoc(inputs));
    if (Array.isArray(result)) {
      showFormErrors(result);
      return;
    }
    showFormErrors([]);
    await withView(refreshView(api, result.id));
  });

  el("dlt-yes").addEventListener("click", () => {
    if (view) {
      view = selectOutcome(view, 1);
      render();
    }
  });
  el("dlt-no").addEventListener("click", () => {
    if (view) {
      view = selectOutcome(view, 0);
      render();
    }
  });
  el("confirm-cancel").addEventListener("click", () => {
    if (view) {
      view = cancelOutcome(view);
      render();
    }
  });
  el("confirm-ok").addEventListener("click", async () => {
    if (view) await withView(confirmOutcome(api, view));
  });

  const fromHash = window.location.hash.replace(/^#/, "");
  if (fromHash) {
    void withView(refreshView(api, fromHash));
  }
}

document.addEventListener("DOMContentLoaded", wire);
