/** The (k+1) x (k+1) mixing grid: row 0 / column 0 are pure parents, and
 * interior cell (i, j) takes the first ceil(R/2) roots from column parent
 * a[j] and the rest from row parent b[i]. */

import type { GenerateRequest } from "./api.js";

export interface GridCell {
  row: number;
  col: number;
  /** null for the unused top-left corner */
  request: GenerateRequest | null;
  /** header cells reuse their pure-parent response; no extra request */
  reuseOf: string | null;
}

export function mixRequest(
  colParent: string,
  rowParent: string,
  roots: number,
): GenerateRequest {
  const half = Math.ceil(roots / 2);
  const sources: Record<number, string> = {};
  for (let r = 0; r < half; r++) sources[r] = colParent;
  return { bundle: rowParent, root_sources: sources };
}

export function gridPlan(
  parentsA: string[],
  parentsB: string[],
  roots: number,
): GridCell[] {
  const cells: GridCell[] = [{ row: 0, col: 0, request: null, reuseOf: null }];
  parentsA.forEach((a, j) => {
    cells.push({ row: 0, col: j + 1, request: { bundle: a }, reuseOf: a });
  });
  parentsB.forEach((b, i) => {
    cells.push({ row: i + 1, col: 0, request: { bundle: b }, reuseOf: b });
  });
  parentsB.forEach((b, i) => {
    parentsA.forEach((a, j) => {
      cells.push({
        row: i + 1,
        col: j + 1,
        request: mixRequest(a, b, roots),
        reuseOf: null,
      });
    });
  });
  return cells;
}

/** Number of /generate calls the grid needs: one per header parent plus
 * one per interior cell — the empty corner costs nothing. */
export function requestCount(k: number): number {
  return 2 * k + k * k;
}
