import { describe, expect, it } from "vitest";

import { Brush, EditorSession, ResultInfo } from "../src/editor.js";
import { decodePng, encodePng, RawImage } from "../src/png.js";

function solidImage(width: number, height: number, value = 128): RawImage {
  return { width, height, channels: 3, data: new Uint8Array(width * height * 3).fill(value) };
}

function newSession(width = 64, height = 64): EditorSession {
  const pixels = solidImage(width, height);
  return new EditorSession(encodePng(pixels), pixels);
}

const paint = (radius = 4): Brush => ({ radius, mode: "paint" });
const erase = (radius = 4): Brush => ({ radius, mode: "erase" });

describe("brush stamping", () => {
  it("single point paints a disc of the brush radius", () => {
    const s = newSession();
    s.paintStroke([{ x: 32, y: 32 }], paint(5));
    for (let y = 0; y < 64; y++) {
      for (let x = 0; x < 64; x++) {
        const inside = (x - 32) ** 2 + (y - 32) ** 2 <= 25;
        expect(s.mask[y * 64 + x]).toBe(inside ? 255 : 0);
      }
    }
  });

  it("paint then erase the same stroke restores the pre-stroke mask", () => {
    const s = newSession();
    s.paintStroke([{ x: 10, y: 10 }, { x: 40, y: 30 }], paint(6));
    expect(s.canSubmit()).toBe(true);
    s.paintStroke([{ x: 10, y: 10 }, { x: 40, y: 30 }], erase(6));
    expect(s.mask.every((v) => v === 0)).toBe(true);
  });

  it("strokes across the corner are clipped to canvas bounds", () => {
    const s = newSession();
    s.paintStroke([{ x: -10, y: -10 }, { x: 5, y: 5 }], paint(8));
    expect(s.holeRatio()).toBeGreaterThan(0);
    // nothing outside the canvas to check; the mask length is unchanged
    expect(s.mask.length).toBe(64 * 64);
  });

  it("interpolates between far-apart path points", () => {
    const s = newSession();
    s.paintStroke([{ x: 4, y: 32 }, { x: 60, y: 32 }], paint(2));
    for (let x = 4; x <= 60; x++) {
      expect(s.mask[32 * 64 + x]).toBe(255);
    }
  });

  it("clamps brush radius to the allowed range", () => {
    const s = newSession();
    expect(s.clampBrush(1)).toBe(2);
    expect(s.clampBrush(1000)).toBe(128);
  });
});

describe("undo/redo", () => {
  it("one undo entry per stroke; undo then redo restores the exact bitmap", () => {
    const s = newSession();
    const states: Uint8Array[] = [s.mask.slice()];
    for (let i = 0; i < 20; i++) {
      s.paintStroke(
        [{ x: 3 + i * 3, y: 5 + i * 2 }, { x: 10 + i * 2, y: 30 }],
        i % 3 === 2 ? erase(3 + (i % 5)) : paint(3 + (i % 5)),
      );
      states.push(s.mask.slice());
    }
    expect(s.undoDepth).toBe(20);
    for (let i = 19; i >= 0; i--) {
      expect(s.undo()).toBe(true);
      expect(s.mask).toEqual(states[i]);
    }
    expect(s.undo()).toBe(false);
    for (let i = 1; i <= 20; i++) {
      expect(s.redo()).toBe(true);
      expect(s.mask).toEqual(states[i]);
    }
    expect(s.redo()).toBe(false);
  });

  it("a new stroke clears the redo stack", () => {
    const s = newSession();
    s.paintStroke([{ x: 10, y: 10 }], paint());
    s.undo();
    s.paintStroke([{ x: 50, y: 50 }], paint());
    expect(s.redo()).toBe(false);
  });

  it("history never mutates the source image", () => {
    const s = newSession();
    const before = s.sourcePixels.data.slice();
    s.paintStroke([{ x: 10, y: 10 }, { x: 20, y: 20 }], paint(10));
    s.undo();
    s.redo();
    expect(s.sourcePixels.data).toEqual(before);
  });
});

describe("mask export", () => {
  it("exported PNG decodes to exactly the painted bitmap", () => {
    const s = newSession(48, 32);
    s.paintStroke([{ x: 8, y: 8 }, { x: 40, y: 20 }], paint(5));
    const decoded = decodePng(s.maskPng());
    expect(decoded.width).toBe(48);
    expect(decoded.height).toBe(32);
    expect(decoded.channels).toBe(1);
    expect(decoded.data).toEqual(s.mask);
  });

  it("hole ratio matches the painted area", () => {
    const s = newSession();
    expect(s.holeRatio()).toBe(0);
    expect(s.canSubmit()).toBe(false);
    s.paintStroke([{ x: 32, y: 32 }], paint(10));
    const painted = s.mask.filter((v) => v === 255).length;
    expect(s.holeRatio()).toBeCloseTo(painted / (64 * 64), 10);
  });
});

describe("results and refinement", () => {
  function fakeResult(s: EditorSession, value = 200): ResultInfo {
    const pixels = solidImage(s.width, s.height, value);
    return {
      png: encodePng(pixels),
      pixels,
      fingerprint: "abc123",
      holeRatio: 0.1,
      timingMs: 12,
    };
  }

  it("applyResult rejects size mismatches", () => {
    const s = newSession(64, 64);
    const wrong = solidImage(32, 32);
    expect(() =>
      s.applyResult({ png: encodePng(wrong), pixels: wrong, fingerprint: "x", holeRatio: 0, timingMs: 0 }),
    ).toThrow(/result size/);
  });

  it("continue-on-result swaps the source to the exact previous response", () => {
    const s = newSession();
    s.paintStroke([{ x: 32, y: 32 }], paint(6));
    const result = fakeResult(s);
    s.applyResult(result);
    expect(s.continueOnResult()).toBe(true);
    expect(Buffer.from(s.sourcePng).equals(Buffer.from(result.png))).toBe(true);
    expect(s.sourcePixels.data).toEqual(result.pixels.data);
    expect(s.mask.every((v) => v === 0)).toBe(true);
    expect(s.lastResult).toBeNull();
    expect(s.undoDepth).toBe(0);
  });

  it("continue without a result is a no-op", () => {
    const s = newSession();
    expect(s.continueOnResult()).toBe(false);
  });
});
