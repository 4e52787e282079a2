/** Typed fetch client for the workbench API. */

import type {
  ActorSpecDoc,
  ArtifactDoc,
  CaseDoc,
  CaseRow,
  CommitResult,
  ProblemDoc,
  ProductionDoc,
  ReadyTaskDoc,
  SpecDoc,
  TraceDoc,
} from "./types.js";

/** Non-2xx response, carrying the structured problem body. */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly problem: ProblemDoc,
  ) {
    super(problem.message ?? `request failed with status ${status}`);
    this.name = "ApiError";
  }
}

export interface DevelopBody {
  actor: string;
  addr: number[];
  production: ProductionDoc;
  payload?: string;
}

export interface CommitBody {
  actor: string;
  guidePolicy?: string;
  seed?: number;
  guideIndex?: number;
}

/** The client surface the rest of the UI depends on (fakeable in tests). */
export interface WorkbenchApi {
  spec(): Promise<SpecDoc>;
  actorSpec(actor: string): Promise<ActorSpecDoc>;
  listCases(actor?: string): Promise<CaseRow[]>;
  createCase(actor: string): Promise<{ caseId: string; status: string }>;
  getCase(caseId: string, actor: string): Promise<CaseDoc>;
  develop(
    caseId: string,
    body: DevelopBody,
  ): Promise<{ replica: ArtifactDoc; readyTasks: ReadyTaskDoc[] }>;
  commit(caseId: string, body: CommitBody): Promise<CommitResult>;
  routeAck(caseId: string, actor: string): Promise<{ id: string; needsAck: boolean }>;
  discard(
    caseId: string,
    actor: string,
  ): Promise<{ replica: ArtifactDoc; readyTasks: ReadyTaskDoc[] }>;
  trace(caseId: string): Promise<TraceDoc>;
}

export class WorkbenchClient implements WorkbenchApi {
  constructor(readonly baseUrl: string = "") {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const res = await fetch(this.baseUrl + path, {
      headers: { "Content-Type": "application/json" },
      ...init,
    });
    if (!res.ok) {
      let problem: ProblemDoc;
      try {
        problem = (await res.json()) as ProblemDoc;
      } catch {
        problem = { code: "http-error", message: `status ${res.status}` };
      }
      throw new ApiError(res.status, problem);
    }
    return (await res.json()) as T;
  }

  spec(): Promise<SpecDoc> {
    return this.request("/api/spec");
  }

  actorSpec(actor: string): Promise<ActorSpecDoc> {
    return this.request(`/api/spec?actor=${encodeURIComponent(actor)}`);
  }

  listCases(actor?: string): Promise<CaseRow[]> {
    const query = actor ? `?actor=${encodeURIComponent(actor)}` : "";
    return this.request(`/api/cases${query}`);
  }

  createCase(actor: string): Promise<{ caseId: string; status: string }> {
    return this.request("/api/cases", {
      method: "POST",
      body: JSON.stringify({ actor }),
    });
  }

  getCase(caseId: string, actor: string): Promise<CaseDoc> {
    return this.request(
      `/api/cases/${encodeURIComponent(caseId)}?actor=${encodeURIComponent(actor)}`,
    );
  }

  develop(
    caseId: string,
    body: DevelopBody,
  ): Promise<{ replica: ArtifactDoc; readyTasks: ReadyTaskDoc[] }> {
    return this.request(`/api/cases/${encodeURIComponent(caseId)}/develop`, {
      method: "POST",
      body: JSON.stringify(body),
    });
  }

  commit(caseId: string, body: CommitBody): Promise<CommitResult> {
    return this.request(`/api/cases/${encodeURIComponent(caseId)}/commit`, {
      method: "POST",
      body: JSON.stringify(body),
    });
  }

  routeAck(
    caseId: string,
    actor: string,
  ): Promise<{ id: string; needsAck: boolean }> {
    return this.request(`/api/cases/${encodeURIComponent(caseId)}/route-ack`, {
      method: "POST",
      body: JSON.stringify({ actor }),
    });
  }

  discard(
    caseId: string,
    actor: string,
  ): Promise<{ replica: ArtifactDoc; readyTasks: ReadyTaskDoc[] }> {
    return this.request(`/api/cases/${encodeURIComponent(caseId)}/discard`, {
      method: "POST",
      body: JSON.stringify({ actor }),
    });
  }

  trace(caseId: string): Promise<TraceDoc> {
    return this.request(`/api/cases/${encodeURIComponent(caseId)}/trace`);
  }
}
