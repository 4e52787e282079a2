/** Per-actor screen state and the operations the screen can trigger.
 *
 * One `ActorSession` is one actor's workbench: the local grammar, the case
 * list, the open case with its replica and ready tasks, a pending
 * guide-choice dialog when a commit was ambiguous, and the last routing
 * outcome.  All mutations go through the HTTP client; the session never
 * computes projections or merges itself.
 */

import { ApiError, type WorkbenchApi } from "./api.js";
import type {
  ActorSpecDoc,
  CaseDoc,
  CaseRow,
  CommitResult,
  GuideSummary,
  ProductionDoc,
} from "./types.js";

export interface SessionState {
  actor: string;
  actorSpec: ActorSpecDoc | null;
  cases: CaseRow[];
  caseId: string | null;
  caseDoc: CaseDoc | null;
  /** Non-null while a commit waits for the user to pick a scenario. */
  guides: GuideSummary[] | null;
  lastRoute: CommitResult | null;
  error: string | null;
  busy: boolean;
}

export type Listener = (state: SessionState) => void;

export class ActorSession {
  readonly state: SessionState;
  private listeners: Listener[] = [];

  constructor(
    readonly client: WorkbenchApi,
    actor: string,
  ) {
    this.state = {
      actor,
      actorSpec: null,
      cases: [],
      caseId: null,
      caseDoc: null,
      guides: null,
      lastRoute: null,
      error: null,
      busy: false,
    };
  }

  subscribe(listener: Listener): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  private notify(): void {
    for (const listener of this.listeners) listener(this.state);
  }

  /** Run one API operation: busy flag, error banner, guide dialog on 409. */
  private async guard<T>(op: () => Promise<T>): Promise<T | undefined> {
    this.state.busy = true;
    this.state.error = null;
    this.notify();
    try {
      return await op();
    } catch (err) {
      if (err instanceof ApiError && err.problem.code === "guide-choice-required") {
        this.state.guides = err.problem.guides ?? [];
      } else if (err instanceof ApiError) {
        this.state.error = `${err.problem.code}: ${err.problem.message}`;
      } else {
        this.state.error = String(err);
      }
      return undefined;
    } finally {
      this.state.busy = false;
      this.notify();
    }
  }

  async init(): Promise<void> {
    await this.guard(async () => {
      this.state.actorSpec = await this.client.actorSpec(this.state.actor);
      this.state.cases = await this.client.listCases(this.state.actor);
    });
  }

  /** Poll tick: refresh the case list and the open case. */
  async refresh(): Promise<void> {
    await this.guard(async () => {
      this.state.cases = await this.client.listCases(this.state.actor);
      if (this.state.caseId !== null) {
        this.state.caseDoc = await this.client.getCase(
          this.state.caseId,
          this.state.actor,
        );
      }
    });
  }

  async openCase(caseId: string): Promise<void> {
    await this.guard(async () => {
      this.state.caseDoc = await this.client.getCase(caseId, this.state.actor);
      this.state.caseId = caseId;
      this.state.guides = null;
      this.state.lastRoute = null;
    });
  }

  async createCase(): Promise<string | undefined> {
    return this.guard(async () => {
      const created = await this.client.createCase(this.state.actor);
      this.state.cases = await this.client.listCases(this.state.actor);
      await this.openCaseInner(created.caseId);
      return created.caseId;
    });
  }

  private async openCaseInner(caseId: string): Promise<void> {
    this.state.caseDoc = await this.client.getCase(caseId, this.state.actor);
    this.state.caseId = caseId;
  }

  async develop(addr: number[], production: ProductionDoc): Promise<void> {
    const caseId = this.requireCase();
    await this.guard(async () => {
      const res = await this.client.develop(caseId, {
        actor: this.state.actor,
        addr,
        production,
      });
      if (this.state.caseDoc !== null) {
        this.state.caseDoc.replica = res.replica;
        this.state.caseDoc.readyTasks = res.readyTasks;
        this.state.caseDoc.edited = true;
      }
    });
  }

  /** Commit with the interactive policy: an ambiguous commit opens the
   * guide dialog instead of silently picking a scenario. */
  async commit(guideIndex?: number): Promise<CommitResult | undefined> {
    const caseId = this.requireCase();
    return this.guard(async () => {
      const result = await this.client.commit(caseId, {
        actor: this.state.actor,
        guidePolicy: "external",
        ...(guideIndex !== undefined ? { guideIndex } : {}),
      });
      this.state.guides = null;
      this.state.lastRoute = result;
      await this.openCaseInner(caseId);
      this.state.cases = await this.client.listCases(this.state.actor);
      return result;
    });
  }

  async chooseGuide(index: number): Promise<CommitResult | undefined> {
    return this.commit(index);
  }

  cancelGuides(): void {
    this.state.guides = null;
    this.notify();
  }

  async ack(): Promise<void> {
    const caseId = this.requireCase();
    await this.guard(async () => {
      await this.client.routeAck(caseId, this.state.actor);
      await this.openCaseInner(caseId);
    });
  }

  async discardEdits(): Promise<void> {
    const caseId = this.requireCase();
    await this.guard(async () => {
      const res = await this.client.discard(caseId, this.state.actor);
      if (this.state.caseDoc !== null) {
        this.state.caseDoc.replica = res.replica;
        this.state.caseDoc.readyTasks = res.readyTasks;
        this.state.caseDoc.edited = false;
        this.state.caseDoc.needsAck = false;
      }
    });
  }

  private requireCase(): string {
    if (this.state.caseId === null) {
      throw new Error("no case is open");
    }
    return this.state.caseId;
  }
}
