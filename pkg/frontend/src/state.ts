/** Studio state and the pure request-building logic behind the controls. */

import type { GenerateRequest, ModelInfo } from "./api.js";

export type RootSource = "A" | "B" | "fresh";
export type Coloring = "by-root" | "heatmap";

export interface StudioState {
  info: ModelInfo;
  bundleA: string;
  bundleB: string;
  /** bundle id of the fresh sample backing each root set to "fresh" */
  freshBundles: Record<number, string>;
  sources: RootSource[];
  /** per-root interpolation position toward the *other* parent */
  t: number[];
  /** root whose slider was touched last; only one interpolation is active */
  activeInterp: number | null;
  droppedRoot: number | null;
  coloring: Coloring;
}

export function initialState(
  info: ModelInfo,
  bundleA: string,
  bundleB: string,
): StudioState {
  return {
    info,
    bundleA,
    bundleB,
    freshBundles: {},
    sources: Array.from({ length: info.roots }, () => "A" as RootSource),
    t: Array.from({ length: info.roots }, () => 0),
    activeInterp: null,
    droppedRoot: null,
    coloring: "by-root",
  };
}

export function sourceBundle(state: StudioState, root: number): string {
  const src = state.sources[root];
  if (src === "A") return state.bundleA;
  if (src === "B") return state.bundleB;
  const fresh = state.freshBundles[root];
  if (fresh === undefined) {
    throw new Error(`root ${root} set to fresh but no bundle sampled`);
  }
  return fresh;
}

/** Build the /generate request for the current control settings. */
export function buildRequest(state: StudioState): GenerateRequest {
  const req: GenerateRequest = { bundle: state.bundleA };
  const overrides: Record<number, string> = {};
  for (let r = 0; r < state.info.roots; r++) {
    const bundle = sourceBundle(state, r);
    if (bundle !== state.bundleA) overrides[r] = bundle;
  }
  if (Object.keys(overrides).length > 0) req.root_sources = overrides;
  const r = state.activeInterp;
  if (r !== null && state.t[r] > 0) {
    // interpolate toward the parent the root is *not* sourced from
    const target =
      sourceBundle(state, r) === state.bundleB ? state.bundleA : state.bundleB;
    req.interpolation = { root: r, t: clamp01(state.t[r]), target };
  }
  if (state.droppedRoot !== null) req.dropped_root = state.droppedRoot;
  return req;
}

export function clamp01(t: number): number {
  return Math.min(1, Math.max(0, t));
}

/** Fixed, documented per-root palette so screenshots are comparable. */
export const ROOT_PALETTE: readonly string[] = [
  "#e6194b", // red
  "#3cb44b", // green
  "#4363d8", // blue
  "#f58231", // orange
  "#911eb4", // purple
  "#42d4f4", // cyan
  "#f032e6", // magenta
  "#9a6324", // brown
];

export function rootColor(root: number): string {
  return ROOT_PALETTE[root % ROOT_PALETTE.length];
}

/** Displacement -> green..red ramp used by the heatmap view. */
export function heatColor(d: number, min: number, max: number): string {
  const span = max - min;
  const u = span > 0 ? clamp01((d - min) / span) : 0;
  const r = Math.round(255 * u);
  const g = Math.round(255 * (1 - u));
  return `rgb(${r},${g},0)`;
}

/** Index of the root that owns a point, given block-contiguous output. */
export function rootOfPoint(index: number, pointsPerRoot: number): number {
  return Math.floor(index / pointsPerRoot);
}
