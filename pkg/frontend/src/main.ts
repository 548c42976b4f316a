/** DOM wiring for the mixing studio: controls on the left, orbit view on
 * the right, optional mixing grid below. */

import { StudioApi } from "./api.js";
import type { GenerateResponse } from "./api.js";
import { gridPlan } from "./grid.js";
import { Sequencer, debounce } from "./sequencer.js";
import {
  StudioState,
  buildRequest,
  heatColor,
  initialState,
  rootColor,
  rootOfPoint,
} from "./state.js";
import { CloudViewer, project } from "./viewer.js";

const api = new StudioApi("");
const seq = new Sequencer();

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

async function colorize(
  state: StudioState,
  resp: GenerateResponse,
): Promise<string[]> {
  const n = Math.floor(resp.points.length / 3);
  if (state.coloring === "by-root") {
    return Array.from({ length: n }, (_, i) =>
      rootColor(rootOfPoint(i, resp.points_per_root)),
    );
  }
  // heatmap vs the pure parent-A shape, fetched from the service
  const hm = await api.heatmap({ bundle: state.bundleA }, buildRequest(state));
  return hm.distances.map((d) => heatColor(d, hm.min, hm.max));
}

async function main(): Promise<void> {
  const info = await api.info();
  const a = await api.sample();
  const b = await api.sample();
  const state = initialState(info, a.id, b.id);
  const viewer = new CloudViewer(el<HTMLCanvasElement>("view"));
  const status = el<HTMLSpanElement>("status");

  async function refresh(): Promise<void> {
    const mySeq = seq.issue();
    const t0 = performance.now();
    try {
      const resp = await api.generate(buildRequest(state));
      if (!seq.accept(mySeq)) return; // a newer edit already rendered
      const colors = await colorize(state, resp);
      viewer.setCloud(resp.points, colors);
      status.textContent = `${resp.points.length / 3} points, ${Math.round(
        performance.now() - t0,
      )} ms`;
    } catch (err) {
      status.textContent = String(err);
    }
  }

  const debouncedRefresh = debounce(refresh, 80);

  // per-root controls
  const controls = el<HTMLDivElement>("roots");
  for (let r = 0; r < info.roots; r++) {
    const row = document.createElement("div");
    row.className = "root-row";
    const swatch = document.createElement("span");
    swatch.className = "swatch";
    swatch.style.background = rootColor(r);
    const select = document.createElement("select");
    for (const opt of ["A", "B", "fresh"]) {
      const o = document.createElement("option");
      o.value = opt;
      o.textContent = `root ${r}: ${opt}`;
      select.appendChild(o);
    }
    select.addEventListener("change", async () => {
      const value = select.value as "A" | "B" | "fresh";
      if (value === "fresh" && state.freshBundles[r] === undefined) {
        state.freshBundles[r] = (await api.sample()).id;
      }
      state.sources[r] = value;
      void refresh();
    });
    const slider = document.createElement("input");
    slider.type = "range";
    slider.min = "0";
    slider.max = "1";
    slider.step = "0.01";
    slider.value = "0";
    slider.title = `interpolate root ${r} toward the other parent`;
    slider.addEventListener("input", () => {
      state.t[r] = Number(slider.value);
      state.activeInterp = r;
      debouncedRefresh();
    });
    row.append(swatch, select, slider);
    controls.appendChild(row);
  }

  // dropped-root selector
  const drop = el<HTMLSelectElement>("drop");
  const none = document.createElement("option");
  none.value = "";
  none.textContent = "drop: none";
  drop.appendChild(none);
  for (let r = 0; r < info.roots; r++) {
    const o = document.createElement("option");
    o.value = String(r);
    o.textContent = `drop root ${r}`;
    drop.appendChild(o);
  }
  drop.addEventListener("change", () => {
    state.droppedRoot = drop.value === "" ? null : Number(drop.value);
    void refresh();
  });

  el<HTMLSelectElement>("coloring").addEventListener("change", (e) => {
    state.coloring = (e.target as HTMLSelectElement).value as
      | "by-root"
      | "heatmap";
    void refresh();
  });

  el<HTMLButtonElement>("resample-a").addEventListener("click", async () => {
    state.bundleA = (await api.sample()).id;
    void refresh();
  });
  el<HTMLButtonElement>("resample-b").addEventListener("click", async () => {
    state.bundleB = (await api.sample()).id;
    void refresh();
  });

  el<HTMLButtonElement>("grid-btn").addEventListener("click", () => {
    void renderGrid(info.roots);
  });

  async function renderGrid(roots: number): Promise<void> {
    const k = Number(el<HTMLInputElement>("grid-k").value);
    const parentsA: string[] = [];
    const parentsB: string[] = [];
    for (let i = 0; i < k; i++) {
      parentsA.push((await api.sample()).id);
      parentsB.push((await api.sample()).id);
    }
    const table = el<HTMLDivElement>("grid");
    table.innerHTML = "";
    table.style.gridTemplateColumns = `repeat(${k + 1}, 1fr)`;
    const cache = new Map<string, GenerateResponse>();
    for (const cell of gridPlan(parentsA, parentsB, roots)) {
      const canvas = document.createElement("canvas");
      canvas.width = 140;
      canvas.height = 140;
      table.appendChild(canvas);
      if (!cell.request) continue;
      let resp: GenerateResponse;
      if (cell.reuseOf && cache.has(cell.reuseOf)) {
        resp = cache.get(cell.reuseOf)!;
      } else {
        resp = await api.generate(cell.request);
        if (cell.reuseOf) cache.set(cell.reuseOf, resp);
      }
      drawThumb(canvas, resp);
    }
  }

  function drawThumb(canvas: HTMLCanvasElement, resp: GenerateResponse): void {
    const ctx = canvas.getContext("2d");
    if (!ctx) return;
    ctx.fillStyle = "#101014";
    ctx.fillRect(0, 0, canvas.width, canvas.height);
    const pts = project(
      resp.points,
      { yaw: 0.6, pitch: 0.4, zoom: 1 },
      canvas.width,
      canvas.height,
    );
    for (const p of pts) {
      ctx.fillStyle = rootColor(rootOfPoint(p.index, resp.points_per_root));
      ctx.fillRect(p.x, p.y, 2, 2);
    }
  }

  await refresh();
}

void main();
