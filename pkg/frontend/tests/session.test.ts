import { describe, expect, it } from "vitest";

import { RecordedServer, REPAIR, SIMPLE } from "./recorded_server.js";
import type { QueryRequest, QueryTrace } from "../src/contract.js";
import { escapeHtml, renderSession } from "../src/render.js";
import { SessionController, listDatabases } from "../src/session.js";

const simpleTrace = SIMPLE.body as QueryTrace;
const repairTrace = REPAIR.body as QueryTrace;

describe("SessionController against the recorded /v1 server", () => {
  it("appends exactly one turn whose trace byte-matches the recording", async () => {
    const server = new RecordedServer();
    const session = new SessionController(server, "demo_db");
    const result = await session.submitQuestion(SIMPLE.request.question);

    expect(result.kind).toBe("turn");
    expect(session.view.turns.length).toBe(1);
    const turn = session.view.turns[0]!;
    // byte-for-byte fidelity to the mock trace
    expect(JSON.stringify(turn.trace)).toBe(JSON.stringify(simpleTrace));
    expect(turn.trace.chosen_sql).toBe(simpleTrace.chosen_sql);
    expect(turn.trace.candidates.length).toBe(simpleTrace.candidates.length);

    const html = renderSession(session.view);
    expect(html).toContain(escapeHtml(simpleTrace.chosen_sql));
    const rows = html.match(/<li class="candidate/g) ?? [];
    expect(rows.length).toBe(simpleTrace.candidates.length);
  });

  it("renders repair diffs that byte-match the recorded trace", async () => {
    const server = new RecordedServer();
    const session = new SessionController(server, "demo_db");
    await session.submitQuestion(REPAIR.request.question);

    expect(session.view.turns.length).toBe(1);
    const repairs = session.view.turns[0]!.trace.candidates.flatMap((c) => c.repairs);
    const expected = repairTrace.candidates.flatMap((c) => c.repairs);
    expect(JSON.stringify(repairs)).toBe(JSON.stringify(expected));

    const html = renderSession(session.view);
    for (const repair of expected) {
      expect(html).toContain(`<del>${escapeHtml(repair.before)}</del>`);
      expect(html).toContain(`<ins>${escapeHtml(repair.after)}</ins>`);
    }
  });

  it("appends no turn on a 4xx response and surfaces the error inline", async () => {
    const server = new RecordedServer();
    const session = new SessionController(server, "demo_db");
    const result = await session.submitQuestion("   ");

    expect(result.kind).toBe("error");
    expect(session.view.turns.length).toBe(0);
    expect(session.view.error).toMatch(/request failed \(4\d\d\)/);
    expect(renderSession(session.view)).toContain("inline-error");
  });

  it("keeps the session intact across a network failure and supports retry", async () => {
    const server = new RecordedServer();
    const session = new SessionController(server, "demo_db");
    await session.submitQuestion(SIMPLE.request.question);

    server.failNext = true;
    const failed = await session.submitQuestion(REPAIR.request.question);
    expect(failed.kind).toBe("error");
    expect(session.view.turns.length).toBe(1); // previous turn survives

    const retried = await session.retry();
    expect(retried.kind).toBe("turn");
    expect(session.view.turns.length).toBe(2);
    expect(session.view.error).toBeNull();
  });

  it("refuses concurrent submissions while a request is in flight", async () => {
    const server = new RecordedServer();
    const session = new SessionController(server, "demo_db");
    const first = session.submitQuestion(SIMPLE.request.question);
    const second = await session.submitQuestion(SIMPLE.request.question);
    expect(second.kind).toBe("busy");
    await first;
    expect(session.view.turns.length).toBe(1);
  });

  it("carries toggled flags in the request body", async () => {
    const server = new RecordedServer();
    const session = new SessionController(server, "demo_db");
    session.setFlag("use_critic", false);
    session.setFlag("prompt_style", "code_representation");
    await session.submitQuestion(SIMPLE.request.question);

    const sent = server.requests[0]!.body as QueryRequest;
    expect(sent.flags?.use_critic).toBe(false);
    expect(sent.flags?.prompt_style).toBe("code_representation");
    expect(sent.database_id).toBe("demo_db");
  });

  it("turns are append-only within a session", async () => {
    const server = new RecordedServer();
    const session = new SessionController(server, "demo_db");
    await session.submitQuestion(SIMPLE.request.question);
    const snapshot = [...session.view.turns];
    await session.submitQuestion(REPAIR.request.question);
    expect(session.view.turns.slice(0, 1)).toEqual(snapshot);
    expect(session.view.turns.length).toBe(2);
  });
});

describe("listDatabases", () => {
  it("returns the recorded database ids", async () => {
    const server = new RecordedServer();
    expect(await listDatabases(server)).toEqual(["demo_db", "library"]);
  });
});
