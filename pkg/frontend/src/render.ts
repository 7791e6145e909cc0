/**
 * Pure rendering: QueryTrace / SessionView in, HTML string out.
 *
 * No fetches, no SQL, no recomputation — every displayed value is lifted
 * verbatim from a trace field, so the view is a pure function of state.
 */

import type { QueryTrace, Repair, SqlCandidate } from "./contract.js";
import type { SessionView } from "./session.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;")
    .replace(/'/g, "&#39;");
}

function repairChip(repair: Repair): string {
  const kind = escapeHtml(repair.kind);
  return (
    `<span class="repair-chip repair-${kind}" title="${escapeHtml(repair.reason)}">` +
    `<del>${escapeHtml(repair.before)}</del> &rarr; <ins>${escapeHtml(repair.after)}</ins>` +
    `</span>`
  );
}

function candidateRow(candidate: SqlCandidate, index: number, chosen: boolean): string {
  const badge = candidate.executable
    ? `<span class="badge badge-ok">executable</span>`
    : `<span class="badge badge-fail">not executable</span>`;
  const chips = candidate.repairs.map(repairChip).join(" ");
  const error = candidate.last_error
    ? `<div class="candidate-error">${escapeHtml(candidate.last_error)}</div>`
    : "";
  const classes = chosen ? "candidate chosen" : "candidate";
  return (
    `<li class="${classes}" data-index="${index}">` +
    `<code class="sql">${escapeHtml(candidate.sql)}</code> ${badge}` +
    `<span class="turn">turn ${candidate.turn}</span>` +
    (chips ? `<div class="repairs">${chips}</div>` : "") +
    error +
    `</li>`
  );
}

export function renderResultRows(rows: unknown[][] | null): string {
  if (rows === null) {
    return `<p class="results-empty">not executed</p>`;
  }
  if (rows.length === 0) {
    return `<p class="results-empty">empty result</p>`;
  }
  const body = rows
    .map(
      (row) =>
        `<tr>` +
        row.map((value) => `<td>${escapeHtml(value === null ? "NULL" : String(value))}</td>`).join("") +
        `</tr>`,
    )
    .join("");
  return `<table class="results"><tbody>${body}</tbody></table>`;
}

function linkedSection(trace: QueryTrace): string {
  const { linked } = trace;
  const tables = linked.tables.map((t) => `<li>${escapeHtml(t)}</li>`).join("");
  const columns = linked.columns
    .map((c) => `<li>${escapeHtml(`${c.table}.${c.column}`)}</li>`)
    .join("");
  const joins = linked.join_relations
    .map(
      (j) =>
        `<li>${escapeHtml(`${j.left.table}.${j.left.column} = ${j.right.table}.${j.right.column}`)}</li>`,
    )
    .join("");
  const rationale = linked.rationale
    ? `<details class="rationale"><summary>reasoning</summary><pre>${escapeHtml(linked.rationale)}</pre></details>`
    : "";
  return (
    `<section class="stage stage-link"><h3>Linked schema</h3>` +
    `<div class="linked-lists">` +
    `<ul class="linked-tables">${tables}</ul>` +
    `<ul class="linked-columns">${columns}</ul>` +
    (joins ? `<ul class="linked-joins">${joins}</ul>` : "") +
    `</div>${rationale}</section>`
  );
}

/** Stages in pipeline order: linking, candidates, verdict, results. */
export function renderTrace(trace: QueryTrace): string {
  const candidates = trace.candidates
    .map((candidate, i) => candidateRow(candidate, i, i === trace.verdict.chosen_index))
    .join("");
  const verdict =
    `<section class="stage stage-verdict"><h3>Critic verdict</h3>` +
    `<p>picked <strong>#${trace.verdict.chosen_index + 1}</strong>` +
    ` <span class="method">(${escapeHtml(trace.verdict.method)})</span></p></section>`;
  return (
    `<article class="trace">` +
    linkedSection(trace) +
    `<section class="stage stage-candidates"><h3>Candidates</h3><ol>${candidates}</ol></section>` +
    verdict +
    `<section class="stage stage-chosen"><h3>Chosen SQL</h3>` +
    `<pre class="chosen-sql">${escapeHtml(trace.chosen_sql)}</pre></section>` +
    `<section class="stage stage-results"><h3>Results</h3>${renderResultRows(trace.result_rows)}</section>` +
    `</article>`
  );
}

export function renderSession(view: SessionView): string {
  const turns = view.turns
    .map(
      (turn, i) =>
        `<section class="turn" data-turn="${i}">` +
        `<h2 class="question">${escapeHtml(turn.question)}</h2>` +
        renderTrace(turn.trace) +
        `</section>`,
    )
    .join("");
  const error = view.error
    ? `<div class="inline-error" role="alert">${escapeHtml(view.error)} <button data-action="retry">retry</button></div>`
    : "";
  const busy = view.inFlight ? `<div class="busy">running…</div>` : "";
  return `<div class="session" data-database="${escapeHtml(view.databaseId)}">${turns}${error}${busy}</div>`;
}
