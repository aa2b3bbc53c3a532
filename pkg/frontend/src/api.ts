/**
 * Typed HTTP client for the linkspace session service.
 *
 * This is the only boundary between the workbench and the analysis engine:
 * everything goes through the REST endpoints plus the SSE event stream.
 */

export interface UploadSummary {
  n: number;
  p_clustering: number;
  p_linked: number;
  p_extras: number;
  n_groups: number;
}

export interface Roles {
  clustering: string[];
  linked: string[];
  label?: string | null;
  flags?: string[];
}

export interface StatsRow {
  k: number;
  ch_index: number;
  wb_ratio: number;
  avg_silhouette: number;
  max_radius: number;
  min_benchmark_separation: number;
}

export interface JobDoc {
  id: string;
  kind: string;
  panel: string;
  status: "pending" | "running" | "done" | "cancelled" | "error";
  progress: number;
  result: Record<string, unknown> | null;
  error: string | null;
}

export interface TourPathDoc {
  kind: string;
  seed: number | null;
  step: number;
  base_frames: number[][][];
  index_trace: number[] | null;
  interpolated?: number[][][];
}

export interface SelectionEvent {
  type: "selection";
  revision: number;
  selected: number[];
  origin: string;
}

export class ApiError extends Error {
  constructor(public readonly status: number, detail: string) {
    super(detail);
    this.name = "ApiError";
  }
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class SessionApi {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: FetchLike = (...args) => fetch(...args),
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method, headers: { "content-type": "application/json" } };
    if (body !== undefined) init.body = JSON.stringify(body);
    const res = await this.fetchFn(`${this.baseUrl}${path}`, init);
    const payload = await res.json().catch(() => ({}));
    if (!res.ok) {
      const detail =
        typeof (payload as { detail?: unknown }).detail === "string"
          ? (payload as { detail: string }).detail
          : `request failed with status ${res.status}`;
      throw new ApiError(res.status, detail);
    }
    return payload as T;
  }

  createSession(): Promise<{ id: string; revision: number }> {
    return this.request("POST", "/sessions");
  }

  uploadData(sid: string, csv: string, roles: Roles, distances?: number[][]): Promise<UploadSummary> {
    return this.request("POST", `/sessions/${sid}/data`, { csv, roles, distances: distances ?? null });
  }

  patchConfig(sid: string, patch: Record<string, unknown>): Promise<{ revision: number; merge_tree_reused: boolean }> {
    return this.request("PATCH", `/sessions/${sid}/config`, patch);
  }

  getConfig(sid: string): Promise<Record<string, unknown>> {
    return this.request("GET", `/sessions/${sid}/config`);
  }

  getOverview(sid: string): Promise<Record<string, unknown>> {
    return this.request("GET", `/sessions/${sid}/overview`);
  }

  getStats(sid: string): Promise<{ rows: StatsRow[] }> {
    return this.request("GET", `/sessions/${sid}/stats`);
  }

  getBenchmarks(sid: string): Promise<Record<string, unknown>> {
    return this.request("GET", `/sessions/${sid}/benchmarks`);
  }

  getCoordinates(
    sid: string,
    variable: string,
    opts: { center?: boolean; scale?: boolean; hidden?: number[] } = {},
  ): Promise<Record<string, unknown>> {
    const params = new URLSearchParams({ variable });
    if (opts.center !== undefined) params.set("center", String(opts.center));
    if (opts.scale !== undefined) params.set("scale", String(opts.scale));
    if (opts.hidden?.length) params.set("hidden", opts.hidden.join(","));
    return this.request("GET", `/sessions/${sid}/coordinates?${params}`);
  }

  getBreakdown(sid: string, cluster: number): Promise<Record<string, number[]>> {
    return this.request("GET", `/sessions/${sid}/breakdown?cluster=${cluster}`);
  }

  getComparison(sid: string): Promise<{ table: number[][] }> {
    return this.request("GET", `/sessions/${sid}/comparison`);
  }

  startEmbedding(sid: string, panel: string, method: string, opts: { space?: string; seed?: number } = {}): Promise<JobDoc> {
    return this.request("POST", `/sessions/${sid}/jobs/embedding`, { panel, method, ...opts });
  }

  startTour(sid: string, panel: string, spec: Record<string, unknown>): Promise<JobDoc> {
    return this.request("POST", `/sessions/${sid}/jobs/tour`, { panel, spec });
  }

  copyTour(sid: string, fromPanel: string, toPanel: string): Promise<TourPathDoc> {
    return this.request("POST", `/sessions/${sid}/tours/copy`, { from_panel: fromPanel, to_panel: toPanel });
  }

  getJob(sid: string, jobId: string): Promise<JobDoc> {
    return this.request("GET", `/sessions/${sid}/jobs/${jobId}`);
  }

  cancelJob(sid: string, jobId: string): Promise<JobDoc> {
    return this.request("DELETE", `/sessions/${sid}/jobs/${jobId}`);
  }

  setSelection(sid: string, selected: number[], origin = ""): Promise<{ revision: number; selected: number[] }> {
    return this.request("POST", `/sessions/${sid}/selection`, { selected, origin });
  }

  getSelection(sid: string): Promise<{ revision: number; selected: number[] }> {
    return this.request("GET", `/sessions/${sid}/selection`);
  }

  getExport(sid: string): Promise<{ assignments_csv: string; settings: Record<string, unknown> }> {
    return this.request("GET", `/sessions/${sid}/export`);
  }

  eventStreamUrl(sid: string): string {
    return `${this.baseUrl}/sessions/${sid}/events`;
  }
}
