/**
 * In-memory fixture server implementing the trial-conduct HTTP contract:
 * enough of the real service's payload shapes and status codes to exercise
 * the client, with canned posterior numbers instead of real inference.
 */

import { FetchLike } from "../src/api.js";

interface FixtureTrial {
  id: string;
  config: Record<string, unknown>;
  records: { dose: number; dlt: number }[];
  revision: number;
}

function response(status: number, body: unknown) {
  return { status, json: async () => body };
}

export class FixtureServer {
  private trials = new Map<string, FixtureTrial>();
  private nextId = 1;
  /** Doses the fixture recommends, in patient order. */
  doseSequence = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5];

  get fetch(): FetchLike {
    return async (url, init) => this.handle(url, init);
  }

  createDirect(config: Record<string, unknown>): string {
    const id = `fixture-${this.nextId++}`;
    this.trials.set(id, { id, config, records: [], revision: 0 });
    return id;
  }

  /** Simulate another session recording an outcome behind our back. */
  interleaveOutcome(id: string, dose: number, dlt: number): void {
    const trial = this.trials.get(id)!;
    trial.records.push({ dose, dlt });
    trial.revision += 1;
  }

  private status(trial: FixtureTrial): string {
    const n = trial.config.sample_size as number;
    return trial.records.length >= n ? "Complete" : "ReadyToDose";
  }

  private recommendation(trial: FixtureTrial) {
    const idx = trial.records.length;
    const dose = this.doseSequence[idx % this.doseSequence.length];
    const points = 201;
    const doses = Array.from({ length: points }, (_, i) => i / (points - 1));
    const density = doses.map(() => 1.0);
    return {
      revision: trial.revision,
      continuous_dose: dose,
      administered_dose: dose,
      alpha: 0.25,
      posterior: {
        gamma_median: 0.5,
        gamma_mean: 0.5,
        gamma_quantiles: { "0.25": dose, "0.5": 0.5 },
        density_trace: { dose: doses, density },
      },
      interim_mtd: { dose: 0.5, interim: true },
      patients_treated: trial.records.length,
      sample_size: trial.config.sample_size as number,
      status: this.status(trial),
    };
  }

  private async handle(url: string, init?: Parameters<FetchLike>[1]) {
    const method = init?.method ?? "GET";
    const body = init?.body ? JSON.parse(init.body) : null;

    if (url === "/trials" && method === "POST") {
      const theta = (body.model as { theta?: number } | undefined)?.theta;
      if (theta !== undefined && (theta <= 0 || theta >= 1)) {
        return response(422, {
          detail: [{ field: "model", message: "theta must be in (0, 1)" }],
        });
      }
      const id = this.createDirect(body);
      return response(201, { id, revision: 0, config: body });
    }

    const detail = url.match(/^\/trials\/([^/]+)$/);
    if (detail && method === "GET") {
      const trial = this.trials.get(detail[1]);
      if (!trial) return response(404, { detail: "unknown trial id" });
      return response(200, {
        id: trial.id,
        revision: trial.revision,
        snapshot: {
          config: trial.config,
          records: trial.records,
          status: this.status(trial),
        },
        audit: [],
      });
    }

    const rec = url.match(/^\/trials\/([^/]+)\/recommendation$/);
    if (rec && method === "GET") {
      const trial = this.trials.get(rec[1]);
      if (!trial) return response(404, { detail: "unknown trial id" });
      if (this.status(trial) === "Complete") {
        return response(409, {
          detail: "trial complete",
          status: "Complete",
          final_mtd_estimate: 0.5,
        });
      }
      return response(200, this.recommendation(trial));
    }

    const outcome = url.match(/^\/trials\/([^/]+)\/outcomes$/);
    if (outcome && method === "POST") {
      const trial = this.trials.get(outcome[1]);
      if (!trial) return response(404, { detail: "unknown trial id" });
      if (body.expected_revision !== trial.revision) {
        return response(409, {
          detail: "revision conflict",
          current_revision: trial.revision,
        });
      }
      const expected = this.recommendation(trial).administered_dose;
      if (Math.abs(body.dose - expected) > 1e-9) {
        return response(422, { detail: "dose mismatch" });
      }
      trial.records.push({ dose: body.dose, dlt: body.dlt });
      trial.revision += 1;
      return response(200, { revision: trial.revision });
    }

    return response(404, { detail: "no route" });
  }
}
