/** Browser bootstrap: wires the DOM to the session controller. */

import { DEFAULT_FLAGS, type AblationFlags } from "./contract.js";
import { fetchClient } from "./http.js";
import { renderSession } from "./render.js";
import { SessionController, listDatabases } from "./session.js";

const FLAG_NAMES = Object.keys(DEFAULT_FLAGS).filter(
  (name) => name !== "prompt_style",
) as (keyof AblationFlags)[];

export async function start(root: HTMLElement, baseUrl = ""): Promise<void> {
  const http = fetchClient(baseUrl);
  const databases = await listDatabases(http);

  root.innerHTML = `
    <header>
      <select id="database"></select>
      <form id="ask">
        <input id="question" type="text" placeholder="Ask a question about the data…" autocomplete="off" />
        <button id="submit" type="submit">Ask</button>
      </form>
      <details id="flags"><summary>flags</summary><div id="flag-list"></div></details>
    </header>
    <main id="view"></main>
  `;

  const select = root.querySelector<HTMLSelectElement>("#database")!;
  const form = root.querySelector<HTMLFormElement>("#ask")!;
  const input = root.querySelector<HTMLInputElement>("#question")!;
  const submit = root.querySelector<HTMLButtonElement>("#submit")!;
  const flagList = root.querySelector<HTMLDivElement>("#flag-list")!;
  const view = root.querySelector<HTMLElement>("#view")!;

  for (const id of databases) {
    const option = document.createElement("option");
    option.value = id;
    option.textContent = id;
    select.appendChild(option);
  }

  let controller = new SessionController(http, databases[0] ?? "");

  const redraw = () => {
    view.innerHTML = renderSession(controller.view);
    input.disabled = controller.view.inFlight;
    submit.disabled = controller.view.inFlight;
    view.querySelector<HTMLButtonElement>("[data-action=retry]")?.addEventListener(
      "click",
      async () => {
        await controller.retry();
        redraw();
      },
    );
  };

  const drawFlags = () => {
    flagList.innerHTML = "";
    for (const name of FLAG_NAMES) {
      const label = document.createElement("label");
      const box = document.createElement("input");
      box.type = "checkbox";
      box.checked = controller.view.flags[name] as boolean;
      box.addEventListener("change", () => {
        controller.setFlag(name, box.checked as never);
      });
      label.appendChild(box);
      label.appendChild(document.createTextNode(` ${name}`));
      flagList.appendChild(label);
    }
    const style = document.createElement("select");
    for (const value of ["sqlfuse", "code_representation", "natural_language"]) {
      const option = document.createElement("option");
      option.value = value;
      option.textContent = value;
      style.appendChild(option);
    }
    style.value = controller.view.flags.prompt_style;
    style.addEventListener("change", () => {
      controller.setFlag("prompt_style", style.value as AblationFlags["prompt_style"]);
    });
    flagList.appendChild(style);
  };

  select.addEventListener("change", () => {
    // a new database starts a fresh session; other tabs are unaffected
    controller = new SessionController(http, select.value, controller.view.flags);
    drawFlags();
    redraw();
  });

  form.addEventListener("submit", async (event) => {
    event.preventDefault();
    const question = input.value.trim();
    if (!question) {
      return;
    }
    const pending = controller.submitQuestion(question);
    redraw(); // disabled state while in flight
    const result = await pending;
    if (result.kind === "turn") {
      input.value = "";
    }
    redraw();
  });

  drawFlags();
  redraw();
}
