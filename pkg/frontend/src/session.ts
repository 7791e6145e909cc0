/**
 * Session state and the submit flow.
 *
 * A session is one database plus an append-only list of turns. Submitting
 * posts to /v1/query; while a request is in flight further submissions are
 * refused. Error responses surface inline and never append a turn.
 */

import type { AblationFlags, QueryRequest, QueryTrace } from "./contract.js";
import { DEFAULT_FLAGS } from "./contract.js";
import type { HttpClient } from "./http.js";

export interface Turn {
  question: string;
  trace: QueryTrace;
}

export interface SessionView {
  databaseId: string;
  turns: Turn[];
  flags: AblationFlags;
  inFlight: boolean;
  error: string | null;
}

export type SubmitResult =
  | { kind: "turn"; turn: Turn }
  | { kind: "error"; message: string }
  | { kind: "busy" };

function describeError(status: number, body: unknown): string {
  const detail =
    body && typeof body === "object" && "detail" in body
      ? JSON.stringify((body as { detail: unknown }).detail)
      : JSON.stringify(body);
  return `request failed (${status}): ${detail}`;
}

export class SessionController {
  readonly view: SessionView;
  private readonly http: HttpClient;
  private lastQuestion: string | null = null;

  constructor(http: HttpClient, databaseId: string, flags: Partial<AblationFlags> = {}) {
    this.http = http;
    this.view = {
      databaseId,
      turns: [],
      flags: { ...DEFAULT_FLAGS, ...flags },
      inFlight: false,
      error: null,
    };
  }

  setFlag<K extends keyof AblationFlags>(name: K, value: AblationFlags[K]): void {
    this.view.flags[name] = value;
  }

  /** Re-submit the question that last failed. */
  async retry(): Promise<SubmitResult> {
    if (this.lastQuestion === null) {
      return { kind: "error", message: "nothing to retry" };
    }
    return this.submitQuestion(this.lastQuestion);
  }

  async submitQuestion(question: string): Promise<SubmitResult> {
    if (this.view.inFlight) {
      return { kind: "busy" };
    }
    this.view.inFlight = true;
    this.view.error = null;
    this.lastQuestion = question;
    const request: QueryRequest = {
      question,
      database_id: this.view.databaseId,
      flags: this.view.flags,
    };
    let status: number;
    let body: unknown;
    try {
      ({ status, body } = await this.http.post("/v1/query", request));
    } catch (error) {
      this.view.inFlight = false;
      this.view.error = `network failure: ${String(error)}`;
      return { kind: "error", message: this.view.error };
    }
    this.view.inFlight = false;
    if (status < 200 || status >= 300) {
      this.view.error = describeError(status, body);
      return { kind: "error", message: this.view.error };
    }
    const turn: Turn = { question, trace: body as QueryTrace };
    this.view.turns.push(turn);
    this.lastQuestion = null;
    return { kind: "turn", turn };
  }
}

export async function listDatabases(http: HttpClient): Promise<string[]> {
  const { status, body } = await http.get("/v1/databases");
  if (status !== 200) {
    throw new Error(`cannot list databases (${status})`);
  }
  return (body as { databases: string[] }).databases;
}
