import { describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import {
  cancelOutcome,
  confirmOutcome,
  refreshView,
  selectOutcome,
} from "../src/state.js";
import { FixtureServer } from "./fixture-server.js";

function setup(sampleSize = 3) {
  const server = new FixtureServer();
  const api = new ApiClient(server.fetch);
  const id = server.createDirect({ sample_size: sampleSize });
  return { server, api, id };
}

describe("conduct flow", () => {
  it("create, recommend, record, recommend matches server payloads", async () => {
    const { server, api } = setup();
    const created = await api.createTrial({ sample_size: 3 });
    expect(Array.isArray(created)).toBe(false);
    const id = (created as { id: string }).id;

    let view = await refreshView(api, id);
    expect(view.patients).toHaveLength(0);
    expect(view.recommendation?.administered_dose).toBe(
      server.doseSequence[0],
    );

    view = selectOutcome(view, 0);
    expect(view.entry).toEqual({ step: "selected", dlt: 0 });
    view = await confirmOutcome(api, view);

    expect(view.patients).toEqual([{ dose: 0.0, dlt: 0 }]);
    expect(view.revision).toBe(1);
    expect(view.recommendation?.administered_dose).toBe(
      server.doseSequence[1],
    );
    expect(view.banner.kind).toBe("none");
    expect(view.entry.step).toBe("idle");
  });

  it("server-side validation errors surface from createTrial", async () => {
    const { api } = setup();
    const result = await api.createTrial({
      sample_size: 3,
      model: { theta: 1.4 },
    });
    expect(Array.isArray(result)).toBe(true);
  });

  it("completion replaces the recommendation with the final estimate", async () => {
    const { api, id } = setup(1);
    let view = await refreshView(api, id);
    view = selectOutcome(view, 1);
    view = await confirmOutcome(api, view);
    expect(view.status).toBe("Complete");
    expect(view.recommendation).toBeNull();
    expect(view.finalEstimate?.final_mtd_estimate).toBeCloseTo(0.5);
  });

  it("a simulated race shows the conflict banner, never a silent overwrite", async () => {
    const { server, api, id } = setup();
    let view = await refreshView(api, id);
    view = selectOutcome(view, 0);

    // another session records an outcome while our confirm dialog is open
    server.interleaveOutcome(id, 0.0, 0);

    view = await confirmOutcome(api, view);
    expect(view.banner.kind).toBe("conflict");
    // the refetched view reflects the other session's record; ours was not
    // applied
    expect(view.patients).toHaveLength(1);
    expect(view.revision).toBe(1);
    expect(view.entry.step).toBe("idle");
  });

  it("cancel returns to the selection step without posting", async () => {
    const { api, id } = setup();
    let view = await refreshView(api, id);
    view = selectOutcome(view, 1);
    view = cancelOutcome(view);
    expect(view.entry.step).toBe("idle");
    expect(view.patients).toHaveLength(0);
  });

  it("a reload rebuilds the identical view from GET endpoints", async () => {
    const { api, id } = setup();
    let view = await refreshView(api, id);
    view = selectOutcome(view, 0);
    view = await confirmOutcome(api, view);
    const reloaded = await refreshView(api, id);
    expect(reloaded).toEqual(view);
  });
});
