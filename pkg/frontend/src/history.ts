import { strategyLabel, type SessionView } from "./types.js";

/** Interleaved timeline: each sweep followed by the verdict that judged it. */
export function renderHistory(session: SessionView): HTMLElement {
  const panel = document.createElement("section");
  panel.className = "history";
  const heading = document.createElement("h3");
  heading.textContent = "History";
  panel.appendChild(heading);

  const list = document.createElement("ol");
  session.sweeps.forEach((sweep, i) => {
    const sweepItem = document.createElement("li");
    sweepItem.textContent =
      `${sweep.id}: ${sweep.mode} sweep, strategy ${strategyLabel(sweep.strategy)}, ` +
      `${sweep.images.filter((x) => x !== null).length}/${sweep.grid.length} images`;
    list.appendChild(sweepItem);
    const verdict = session.verdicts[i];
    if (verdict) {
      const verdictItem = document.createElement("li");
      let text = `verdict: ${verdict.kind}`;
      if (verdict.intention) text += ` (${verdict.intention})`;
      if (verdict.chosen_image !== null && verdict.chosen_image !== undefined) {
        text += `, chose image ${verdict.chosen_image}`;
      }
      verdictItem.textContent = text;
      list.appendChild(verdictItem);
    }
  });
  if (!list.childElementCount) {
    const empty = document.createElement("li");
    empty.textContent = "nothing yet";
    list.appendChild(empty);
  }
  panel.appendChild(list);
  return panel;
}
