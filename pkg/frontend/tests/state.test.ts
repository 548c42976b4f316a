import { describe, expect, it } from "vitest";

import {
  ROOT_PALETTE,
  buildRequest,
  clamp01,
  heatColor,
  initialState,
  rootColor,
  rootOfPoint,
} from "../src/state.js";

const info = { roots: 4, points_per_root: 256, z_dim: 96 };

describe("buildRequest", () => {
  it("all-A selectors reproduce parent A with no overrides", () => {
    const s = initialState(info, "a", "b");
    expect(buildRequest(s)).toEqual({ bundle: "a" });
  });

  it("one flipped selector differs in exactly one root entry", () => {
    const s = initialState(info, "a", "b");
    s.sources[2] = "B";
    const req = buildRequest(s);
    expect(req.root_sources).toEqual({ 2: "b" });
  });

  it("fresh selector uses the sampled bundle", () => {
    const s = initialState(info, "a", "b");
    s.sources[1] = "fresh";
    s.freshBundles[1] = "f9";
    expect(buildRequest(s).root_sources).toEqual({ 1: "f9" });
  });

  it("fresh selector without a sampled bundle is an error", () => {
    const s = initialState(info, "a", "b");
    s.sources[0] = "fresh";
    expect(() => buildRequest(s)).toThrow(/fresh/);
  });

  it("t = 0 interpolation is omitted (request equals the source)", () => {
    const s = initialState(info, "a", "b");
    s.activeInterp = 1;
    s.t[1] = 0;
    expect(buildRequest(s).interpolation).toBeUndefined();
  });

  it("active slider interpolates toward the other parent, clamped", () => {
    const s = initialState(info, "a", "b");
    s.activeInterp = 3;
    s.t[3] = 1.7;
    expect(buildRequest(s).interpolation).toEqual({
      root: 3,
      t: 1,
      target: "b",
    });
    s.sources[3] = "B";
    expect(buildRequest(s).interpolation!.target).toBe("a");
  });

  it("dropped root is forwarded", () => {
    const s = initialState(info, "a", "b");
    s.droppedRoot = 2;
    expect(buildRequest(s).dropped_root).toBe(2);
  });
});

describe("coloring", () => {
  it("six roots get six distinct colors", () => {
    const colors = new Set(
      Array.from({ length: 6 }, (_, r) => rootColor(r)),
    );
    expect(colors.size).toBe(6);
  });

  it("palette is fixed and documented", () => {
    expect(ROOT_PALETTE.length).toBeGreaterThanOrEqual(8);
    expect(rootColor(ROOT_PALETTE.length)).toBe(rootColor(0));
  });

  it("heatmap of identical shapes is all green", () => {
    expect(heatColor(0, 0, 0)).toBe("rgb(0,255,0)");
  });

  it("heatmap ramps green to red", () => {
    expect(heatColor(0, 0, 1)).toBe("rgb(0,255,0)");
    expect(heatColor(1, 0, 1)).toBe("rgb(255,0,0)");
    expect(heatColor(0.5, 0, 1)).toBe("rgb(128,128,0)");
  });

  it("block boundaries at multiples of points-per-root", () => {
    expect(rootOfPoint(255, 256)).toBe(0);
    expect(rootOfPoint(256, 256)).toBe(1);
    expect(rootOfPoint(1535, 256)).toBe(5);
  });
});

describe("clamp01", () => {
  it("clamps into [0,1]", () => {
    expect(clamp01(-0.5)).toBe(0);
    expect(clamp01(0.25)).toBe(0.25);
    expect(clamp01(2)).toBe(1);
  });
});
