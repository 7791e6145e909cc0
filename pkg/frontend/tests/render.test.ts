import { describe, expect, it } from "vitest";

import degradedFixture from "./fixtures/recorded/query_degraded.json";
import { REPAIR, SIMPLE } from "./recorded_server.js";
import type { QueryTrace } from "../src/contract.js";
import { escapeHtml, renderResultRows, renderSession, renderTrace } from "../src/render.js";
import type { SessionView } from "../src/session.js";

const simpleTrace = SIMPLE.body as QueryTrace;
const repairTrace = REPAIR.body as QueryTrace;
const degradedTrace = (degradedFixture as { body: QueryTrace }).body;

describe("renderTrace", () => {
  it("lists every candidate and highlights the verdict's row", () => {
    const html = renderTrace(simpleTrace);
    const rows = html.match(/<li class="candidate/g) ?? [];
    expect(rows.length).toBe(simpleTrace.candidates.length);
    const chosen = html.match(/<li class="candidate chosen"/g) ?? [];
    expect(chosen.length).toBe(1);
    expect(html).toContain(`data-index="${simpleTrace.verdict.chosen_index}"`);
  });

  it("shows stages in pipeline order", () => {
    const html = renderTrace(simpleTrace);
    const order = ["stage-link", "stage-candidates", "stage-verdict", "stage-chosen", "stage-results"];
    const positions = order.map((cls) => html.indexOf(cls));
    expect(positions.every((p) => p >= 0)).toBe(true);
    expect([...positions].sort((a, b) => a - b)).toEqual(positions);
  });

  it("renders executable badges", () => {
    const html = renderTrace(simpleTrace);
    expect(html).toContain("badge-ok");
  });

  it("renders constant-fix repairs as before/after diff chips", () => {
    const html = renderTrace(repairTrace);
    const repairs = repairTrace.candidates.flatMap((c) => c.repairs);
    expect(repairs.length).toBeGreaterThan(0);
    for (const repair of repairs) {
      expect(html).toContain(`<del>${escapeHtml(repair.before)}</del>`);
      expect(html).toContain(`<ins>${escapeHtml(repair.after)}</ins>`);
    }
    expect(html).toContain("repair-constant_fix");
  });

  it("shows 'not executed' when result rows are absent", () => {
    expect(renderResultRows(null)).toContain("not executed");
    const html = renderTrace(degradedTrace);
    expect(html).toContain("not executed");
  });

  it("renders a degraded trace without failing on absent sections", () => {
    const html = renderTrace(degradedTrace);
    expect(html).toContain("stage-results");
    expect(html).toContain("badge-fail");
  });

  it("renders result rows as a table", () => {
    const html = renderResultRows([[3]]);
    expect(html).toContain("<table");
    expect(html).toContain("<td>3</td>");
    expect(renderResultRows([["a", null]])).toContain("<td>NULL</td>");
  });

  it("escapes markup in SQL and values", () => {
    const html = renderResultRows([["<script>alert(1)</script>"]]);
    expect(html).not.toContain("<script>");
    expect(html).toContain("&lt;script&gt;");
  });
});

describe("renderSession", () => {
  const view: SessionView = {
    databaseId: "demo_db",
    turns: [{ question: simpleTrace.question, trace: simpleTrace }],
    flags: {} as SessionView["flags"],
    inFlight: false,
    error: null,
  };

  it("is a pure function of the session view", () => {
    expect(renderSession(view)).toBe(renderSession(view));
  });

  it("renders one section per turn", () => {
    const html = renderSession(view);
    expect((html.match(/<section class="turn"/g) ?? []).length).toBe(1);
    expect(html).toContain(escapeHtml(simpleTrace.question));
  });

  it("renders the inline error with a retry control", () => {
    const failed = { ...view, error: "request failed (422): bad" };
    const html = renderSession(failed);
    expect(html).toContain("inline-error");
    expect(html).toContain('data-action="retry"');
  });
});
