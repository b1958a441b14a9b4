/** DOM glue: wires the state machine to the page.  The service base URL
 *  comes from the `?service=` query param (default: same origin); an
 *  existing session resumes via `#<session-id>` in the URL hash. */

import { ApiClient } from "./api.js";
import { SessionFlow } from "./state.js";
import { choiceViewHtml, completionViewHtml, errorViewHtml } from "./view.js";

const qs = new URLSearchParams(window.location.search);
const api = new ApiClient(qs.get("service") ?? "");
const flow = new SessionFlow(api);
const root = document.getElementById("app")!;

function render(): void {
  const s = flow.getState();
  switch (s.phase) {
    case "idle":
    case "loading":
      root.innerHTML = `<p>Loading…</p>`;
      break;
    case "choosing":
    case "submitting":
      root.innerHTML = choiceViewHtml(s.pair!, s.phase === "submitting");
      for (const btn of root.querySelectorAll<HTMLButtonElement>("button[data-side]")) {
        btn.addEventListener("click", () => {
          void flow.choose(btn.dataset.side as "i" | "j");
        });
      }
      break;
    case "completed":
      root.innerHTML = completionViewHtml(s.best);
      break;
    case "error":
      root.innerHTML = errorViewHtml(s.error ?? "Something went wrong.");
      break;
  }
  if (s.sessionId) window.location.hash = s.sessionId;
}

flow.subscribe(render);
render();

const resumeId = window.location.hash.slice(1);
if (resumeId) {
  void flow.resume(resumeId);
} else {
  void flow.start({
    design_space: {
      parameters: [0, 1, 2, 3, 4, 5].map((k) => ({ name: `p${k}`, lo: 0, hi: 1 })),
      render_template: "banner-colors",
      constraint: "contrast",
    },
    seed: Math.floor(Math.random() * 1e9),
  });
}
