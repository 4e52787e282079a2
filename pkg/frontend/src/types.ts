/** Wire types of the workbench JSON API, mirrored field by field. */

export type Annotation = "seq" | "par";

export interface ProductionDoc {
  lhs: string;
  rhs: string[];
  annotation: Annotation;
}

/** `locked`/`unlocked` are buds; a `developed` node carries its production. */
export type NodeStateDoc = "locked" | "unlocked" | "developed";

export interface ArtifactDoc {
  label: string;
  state: NodeStateDoc;
  children: ArtifactDoc[];
  production?: ProductionDoc;
  payload?: string;
}

export interface GrammarDoc {
  sorts: { name: string }[];
  axioms: string[];
  productions: ProductionDoc[];
}

/** `GET /api/spec` without an actor: the whole process spec. */
export interface SpecDoc extends GrammarDoc {
  actors: string[];
  accreditations: {
    actor: string;
    read: string[];
    write: string[];
    execute: string[];
  }[];
  initiator: string;
  distinguishedAxiom: string;
}

/** `GET /api/spec?actor=a`: the actor's local grammar and accreditation. */
export interface ActorSpecDoc {
  actor: string;
  actors: string[];
  initiator: string;
  grammar: GrammarDoc;
  write: string[];
  read: string[];
}

export interface CaseRow {
  id: string;
  status: string;
  hasReplica?: boolean;
  edited?: boolean;
  needsAck?: boolean;
  readyCount?: number;
}

export interface ReadyTaskDoc {
  addr: number[];
  sort: string;
  productions: ProductionDoc[];
}

export interface LogEntry {
  ts: number;
  caseId: string;
  actor: string;
  op: string;
  [extra: string]: unknown;
}

export interface CaseDoc {
  id: string;
  status: string;
  actor: string;
  replica: ArtifactDoc | null;
  readyTasks: ReadyTaskDoc[];
  log: LogEntry[];
  needsAck: boolean;
  edited: boolean;
  final?: ArtifactDoc | null;
}

export type RouteModeDoc = "forward" | "returnToSender" | "terminate";

export interface CommitResult {
  mode: RouteModeDoc;
  destinations: string[];
  status: string;
  replica: ArtifactDoc | null;
  final?: ArtifactDoc | null;
}

export interface GuideSummary {
  index: number;
  compact: string;
}

export interface TraceDoc {
  id: string;
  status: string;
  events: LogEntry[];
  final: ArtifactDoc | null;
}

/** Error body of every non-2xx domain response. */
export interface ProblemDoc {
  code: string;
  message: string;
  guides?: GuideSummary[];
  [extra: string]: unknown;
}
