import { describe, expect, it, vi } from "vitest";

import { formatStrength, renderSweepGrid, renderSweepStack } from "../dist/grid.js";
import type { SessionView, Sweep } from "../dist/types.js";
import { loadFixture } from "./fixtures.js";

const session = loadFixture<SessionView>("session_awaiting.json");
const imageUrl = (id: string) => `/api/images/${id}`;

describe("sweep grid (acceptance: cockpit contract)", () => {
  it("renders 8 tiles labeled 0.8 through 1.6 from the recorded sweep", () => {
    const sweep = session.sweeps[0];
    const grid = renderSweepGrid(sweep, { imageUrl });
    const tiles = grid.querySelectorAll(".tile");
    expect(tiles).toHaveLength(8);
    const labels = [...grid.querySelectorAll("figcaption")].map((c) => c.textContent);
    expect(labels[0]).toBe("γ=0.8");
    expect(labels[labels.length - 1]).toBe("γ=1.6");
    expect(labels).toEqual(sweep.grid.map((v) => `γ=${formatStrength(v)}`));
  });

  it("labels the sweep with its strategy name straight from the API document", () => {
    const grid = renderSweepGrid(session.sweeps[0], { imageUrl });
    expect(grid.querySelector("h3")?.textContent).toContain("strategy none");
  });

  it("points every tile image at the artifact endpoint", () => {
    const grid = renderSweepGrid(session.sweeps[0], { imageUrl });
    const sources = [...grid.querySelectorAll("img")].map((img) => img.getAttribute("src"));
    expect(sources).toEqual(session.sweeps[0].images.map((id) => `/api/images/${id}`));
  });

  it("click selects a candidate tile", () => {
    const onSelect = vi.fn();
    const grid = renderSweepGrid(session.sweeps[0], { imageUrl, onSelect });
    (grid.querySelectorAll(".tile")[3] as HTMLElement).click();
    expect(onSelect).toHaveBeenCalledWith(session.sweeps[0].id, 3);
  });

  it("renders failed slots as error tiles without shrinking the grid", () => {
    const sweep: Sweep = structuredClone(session.sweeps[0]);
    sweep.images[2] = null;
    sweep.errors[2] = "sampling error";
    const grid = renderSweepGrid(sweep, { imageUrl });
    const tiles = grid.querySelectorAll(".tile");
    expect(tiles).toHaveLength(8);
    expect(tiles[2].classList.contains("tile--failed")).toBe(true);
    expect(tiles[2].querySelector(".tile-error")?.textContent).toBe("sampling error");
    expect(tiles[2].querySelector("img")).toBeNull();
    expect(tiles[3].querySelector("img")).not.toBeNull();
  });

  it("renders the empty-state panel when there are no sweeps", () => {
    const stack = renderSweepStack([], { imageUrl });
    expect(stack.querySelector(".empty-state")).not.toBeNull();
    expect(stack.querySelectorAll(".sweep")).toHaveLength(0);
  });

  it("stacks newest sweep first", () => {
    const second: Sweep = structuredClone(session.sweeps[0]);
    second.id = "sweep-001";
    const stack = renderSweepStack([session.sweeps[0], second], { imageUrl });
    const ids = [...stack.querySelectorAll(".sweep")].map((s) => (s as HTMLElement).dataset.sweepId);
    expect(ids).toEqual(["sweep-001", "sweep-000"]);
  });
});
