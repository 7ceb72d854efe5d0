/**
 * Typed client for the trial-conduct JSON endpoints.
 *
 * The fetch implementation is injected so tests can run against an in-memory
 * fixture server; the browser entry point passes window.fetch.
 */

export interface TrialSummary {
  id: string;
  patients: number;
  sample_size: number;
  status: string;
  revision: number;
  last_updated: string;
}

export interface PatientRecord {
  dose: number;
  dlt: number;
}

export interface TrialDetail {
  id: string;
  revision: number;
  snapshot: {
    config: Record<string, unknown>;
    records: PatientRecord[];
    status: string;
  };
  audit: { timestamp: string; action: string; digest: string }[];
}

export interface DensityTrace {
  dose: number[];
  density: number[];
}

export interface Recommendation {
  revision: number;
  continuous_dose: number;
  administered_dose: number;
  alpha: number;
  posterior: {
    gamma_median: number;
    gamma_mean: number;
    gamma_quantiles: Record<string, number>;
    density_trace: DensityTrace;
  };
  interim_mtd: { dose: number; interim: boolean };
  patients_treated: number;
  sample_size: number;
  status: string;
}

export interface TrialComplete {
  detail: string;
  status: string;
  final_mtd_estimate: number;
}

export interface ValidationProblem {
  field: string;
  message: string;
}

export type FetchLike = (
  url: string,
  init?: { method?: string; headers?: Record<string, string>; body?: string },
) => Promise<{ status: number; json(): Promise<unknown> }>;

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly body: unknown,
  ) {
    super(`request failed with status ${status}`);
  }
}

/** Raised by postOutcome when the server's revision is ahead of ours. */
export class RevisionConflictError extends Error {
  constructor(readonly currentRevision: number) {
    super(`revision conflict; server is at revision ${currentRevision}`);
  }
}

export class ApiClient {
  constructor(
    private readonly fetchImpl: FetchLike,
    private readonly baseUrl: string = "",
  ) {}

  private async request(url: string, init?: Parameters<FetchLike>[1]) {
    const resp = await this.fetchImpl(this.baseUrl + url, init);
    return { status: resp.status, body: await resp.json() };
  }

  async createTrial(
    config: Record<string, unknown>,
  ): Promise<{ id: string; revision: number } | ValidationProblem[]> {
    const { status, body } = await this.request("/trials", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(config),
    });
    if (status === 201) return body as { id: string; revision: number };
    if (status === 422) {
      return (body as { detail: ValidationProblem[] }).detail;
    }
    throw new ApiError(status, body);
  }

  async listTrials(): Promise<TrialSummary[]> {
    const { status, body } = await this.request("/trials");
    if (status !== 200) throw new ApiError(status, body);
    return body as TrialSummary[];
  }

  async getTrial(id: string): Promise<TrialDetail> {
    const { status, body } = await this.request(`/trials/${id}`);
    if (status !== 200) throw new ApiError(status, body);
    return body as TrialDetail;
  }

  /** Returns the recommendation, or the completion payload once the trial
   *  is over (the server answers 409 with the final estimate). */
  async getRecommendation(
    id: string,
  ): Promise<
    | { kind: "recommendation"; value: Recommendation }
    | { kind: "complete"; value: TrialComplete }
    | { kind: "pending" }
  > {
    const { status, body } = await this.request(`/trials/${id}/recommendation`);
    if (status === 200) {
      return { kind: "recommendation", value: body as Recommendation };
    }
    if (status === 409) {
      const doc = body as TrialComplete;
      if (doc.status === "Complete") return { kind: "complete", value: doc };
      return { kind: "pending" };
    }
    throw new ApiError(status, body);
  }

  async postOutcome(
    id: string,
    dose: number,
    dlt: 0 | 1,
    expectedRevision: number,
  ): Promise<number> {
    const { status, body } = await this.request(`/trials/${id}/outcomes`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ dose, dlt, expected_revision: expectedRevision }),
    });
    if (status === 200) return (body as { revision: number }).revision;
    if (status === 409) {
      const doc = body as { current_revision: number };
      throw new RevisionConflictError(doc.current_revision);
    }
    throw new ApiError(status, body);
  }
}
