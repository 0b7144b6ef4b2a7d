import { strategyLabel, type Sweep } from "./types.js";

export function formatStrength(value: number): string {
  return Number(value.toFixed(4)).toString();
}

export interface GridOptions {
  imageUrl: (imageId: string) => string;
  onSelect?: (sweepId: string, index: number) => void;
  selected?: { sweepId: string; index: number } | null;
}

/** One tile per grid value, labeled with its edit strength and the sweep's
 * strategy; failed slots render as error tiles without shrinking the grid. */
export function renderSweepGrid(sweep: Sweep, options: GridOptions): HTMLElement {
  const section = document.createElement("section");
  section.className = "sweep";
  section.dataset.sweepId = sweep.id;

  const heading = document.createElement("h3");
  const axis = sweep.mode === "Projection" ? "β" : "γ";
  heading.textContent = `${sweep.id} · ${sweep.mode} · strategy ${strategyLabel(sweep.strategy)}`;
  section.appendChild(heading);

  const grid = document.createElement("div");
  grid.className = "sweep-grid";
  sweep.grid.forEach((value, index) => {
    const tile = document.createElement("figure");
    tile.className = "tile";
    tile.dataset.index = String(index);
    const imageId = sweep.images[index];
    if (imageId === null || imageId === undefined) {
      tile.classList.add("tile--failed");
      const message = document.createElement("p");
      message.className = "tile-error";
      message.textContent = sweep.errors[index] ?? "failed";
      tile.appendChild(message);
    } else {
      const img = document.createElement("img");
      img.src = options.imageUrl(imageId);
      img.alt = `${axis}=${formatStrength(value)}`;
      tile.appendChild(img);
      tile.addEventListener("click", () => {
        options.onSelect?.(sweep.id, index);
      });
      if (options.selected && options.selected.sweepId === sweep.id && options.selected.index === index) {
        tile.classList.add("tile--selected");
      }
    }
    const caption = document.createElement("figcaption");
    caption.textContent = `${axis}=${formatStrength(value)}`;
    tile.appendChild(caption);
    grid.appendChild(tile);
  });
  section.appendChild(grid);
  return section;
}

/** Newest sweep first; an empty list renders the empty-state panel. */
export function renderSweepStack(sweeps: Sweep[], options: GridOptions): HTMLElement {
  const container = document.createElement("div");
  container.className = "sweep-stack";
  if (sweeps.length === 0) {
    const empty = document.createElement("p");
    empty.className = "empty-state";
    empty.textContent = "No sweeps yet. The first sweep runs automatically after finetuning.";
    container.appendChild(empty);
    return container;
  }
  for (const sweep of [...sweeps].reverse()) {
    container.appendChild(renderSweepGrid(sweep, options));
  }
  return container;
}
