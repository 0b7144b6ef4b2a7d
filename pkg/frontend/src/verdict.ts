import { strategyLabel, type NextAction, type Verdict } from "./types.js";
import { ApiError } from "./api.js";

export interface VerdictFormHandlers {
  submit: (verdict: Verdict) => Promise<NextAction | { done: true }>;
  runRecommended: (action: NextAction) => Promise<void>;
  onDone?: () => void;
}

const INTENTIONS: { value: "Structure" | "Appearance"; label: string }[] = [
  { value: "Structure", label: "space and structure" },
  { value: "Appearance", label: "appearance and texture" },
];

/** The recommendation panel renders the API's NextAction verbatim; the raw
 * JSON is kept on the element so tests can prove no strategy logic ran
 * client-side. */
export function renderRecommendation(action: NextAction, onRun?: (action: NextAction) => void): HTMLElement {
  const panel = document.createElement("div");
  panel.className = "recommendation";
  panel.dataset.actionJson = JSON.stringify(action);
  panel.dataset.strategy = strategyLabel(action.strategy);
  panel.dataset.mode = action.mode;

  const text = document.createElement("p");
  const modeLabel = action.mode === "Projection" ? "vector projection" : "vector subtraction";
  text.textContent = `Recommended next: ${modeLabel} sweep, strategy ${strategyLabel(action.strategy)}`;
  panel.appendChild(text);

  if (action.needs_manual) {
    const note = document.createElement("p");
    note.className = "needs-manual";
    note.textContent = "Both default strategies were tried; supply a custom rule to continue.";
    panel.appendChild(note);
  } else if (onRun) {
    const run = document.createElement("button");
    run.type = "button";
    run.className = "run-recommended";
    run.textContent = "Run recommended sweep";
    run.addEventListener("click", () => onRun(action));
    panel.appendChild(run);
  }
  return panel;
}

export class VerdictForm {
  readonly element: HTMLElement;
  private kindSelect: HTMLSelectElement;
  private intentionBox: HTMLElement;
  private submitButton: HTMLButtonElement;
  private errorBox: HTMLElement;
  private recommendationSlot: HTMLElement;
  private selectedTile: { sweepId: string; index: number } | null = null;

  constructor(private handlers: VerdictFormHandlers) {
    this.element = document.createElement("form");
    this.element.className = "verdict-form";

    const kindLabel = document.createElement("label");
    kindLabel.textContent = "Verdict ";
    this.kindSelect = document.createElement("select");
    for (const kind of ["Success", "Overfit", "Underfit"]) {
      const option = document.createElement("option");
      option.value = kind;
      option.textContent = kind;
      this.kindSelect.appendChild(option);
    }
    this.kindSelect.addEventListener("change", () => this.refresh());
    kindLabel.appendChild(this.kindSelect);
    this.element.appendChild(kindLabel);

    this.intentionBox = document.createElement("fieldset");
    this.intentionBox.className = "intention";
    const legend = document.createElement("legend");
    legend.textContent = "What should the edit change?";
    this.intentionBox.appendChild(legend);
    for (const intention of INTENTIONS) {
      const label = document.createElement("label");
      const radio = document.createElement("input");
      radio.type = "radio";
      radio.name = "intention";
      radio.value = intention.value;
      radio.addEventListener("change", () => this.refresh());
      label.appendChild(radio);
      label.append(` ${intention.label}`);
      this.intentionBox.appendChild(label);
    }
    this.element.appendChild(this.intentionBox);

    this.submitButton = document.createElement("button");
    this.submitButton.type = "submit";
    this.submitButton.textContent = "Submit verdict";
    this.element.appendChild(this.submitButton);

    this.errorBox = document.createElement("p");
    this.errorBox.className = "form-error";
    this.errorBox.hidden = true;
    this.element.appendChild(this.errorBox);

    this.recommendationSlot = document.createElement("div");
    this.element.appendChild(this.recommendationSlot);

    this.element.addEventListener("submit", (event) => {
      event.preventDefault();
      void this.submit();
    });
    this.refresh();
  }

  get kind(): "Success" | "Overfit" | "Underfit" {
    return this.kindSelect.value as "Success" | "Overfit" | "Underfit";
  }

  private intention(): "Structure" | "Appearance" | null {
    const checked = this.element.querySelector<HTMLInputElement>("input[name=intention]:checked");
    return (checked?.value as "Structure" | "Appearance") ?? null;
  }

  selectTile(sweepId: string, index: number): void {
    this.selectedTile = { sweepId, index };
    this.refresh();
  }

  get selected(): { sweepId: string; index: number } | null {
    return this.selectedTile;
  }

  /** Form validation is the only client-side rule: Success needs a chosen
   * tile, Overfit needs an intention. */
  refresh(): void {
    this.intentionBox.hidden = this.kind !== "Overfit";
    let valid = true;
    if (this.kind === "Success" && this.selectedTile === null) valid = false;
    if (this.kind === "Overfit" && this.intention() === null) valid = false;
    this.submitButton.disabled = !valid;
  }

  private async submit(): Promise<void> {
    this.errorBox.hidden = true;
    const verdict: Verdict = { kind: this.kind };
    if (this.kind === "Success" && this.selectedTile) {
      verdict.chosen_image = this.selectedTile.index;
      verdict.sweep_id = this.selectedTile.sweepId;
    }
    if (this.kind === "Overfit") verdict.intention = this.intention();
    this.submitButton.disabled = true;
    try {
      const result = await this.handlers.submit(verdict);
      if ("done" in result && result.done) {
        this.handlers.onDone?.();
        return;
      }
      this.showRecommendation(result as NextAction);
    } catch (error) {
      this.errorBox.hidden = false;
      this.errorBox.textContent =
        error instanceof ApiError ? `(${error.status}) ${error.message}` : String(error);
    } finally {
      this.refresh();
    }
  }

  showRecommendation(action: NextAction): void {
    this.recommendationSlot.replaceChildren(
      renderRecommendation(action, (a) => void this.handlers.runRecommended(a)),
    );
  }
}
