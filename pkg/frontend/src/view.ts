/** Pure HTML builders for the three screens.  No feasibility numbers ever
 *  appear in the choice view; the human judges on preference alone. */

import { BestPayload, PairPayload } from "./api.js";
import { bannerSvg } from "./banner.js";

export function choiceViewHtml(pair: PairPayload, submitting: boolean): string {
  const cards = pair.candidates
    .map(
      (c) => `
    <div class="card">
      ${bannerSvg(c.params)}
      <button data-side="${c.side}" ${submitting ? "disabled" : ""}>I prefer this one</button>
    </div>`
    )
    .join("\n");
  return `
  <p class="progress">Choice ${pair.iteration + 1} of ${pair.budget}</p>
  <div class="pair">${cards}</div>`;
}

export function completionViewHtml(best: BestPayload["best"]): string {
  if (!best) {
    return `<p>Session complete. No best design is available.</p>`;
  }
  return `
  <p>Session complete — your best design:</p>
  <div class="card best">${bannerSvg(best.params)}</div>`;
}

export function errorViewHtml(message: string): string {
  return `<p class="error">${message}</p>`;
}
