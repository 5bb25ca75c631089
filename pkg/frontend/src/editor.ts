/**
 * Editor session state: source image, binary mask layer, brush strokes with
 * undo/redo, and the refinement loop where the last result becomes the new
 * source. Pure data + logic, no DOM, so the whole workflow is unit-testable.
 */

import { encodePng, RawImage } from "./png.js";

export interface Point {
  x: number;
  y: number;
}

export interface Brush {
  radius: number; // pixels, 2..128
  mode: "paint" | "erase";
}

export interface ResultInfo {
  png: Uint8Array;
  pixels: RawImage; // decoded result for display / refinement
  fingerprint: string;
  holeRatio: number;
  timingMs: number;
}

export const MIN_BRUSH_RADIUS = 2;
export const MAX_BRUSH_RADIUS = 128;
export const UNDO_DEPTH = 50;

export class EditorSession {
  readonly width: number;
  readonly height: number;
  sourcePng: Uint8Array;
  sourcePixels: RawImage;
  mask: Uint8Array; // width*height, 0 = known, 255 = hole
  lastResult: ResultInfo | null = null;
  private undoStack: Uint8Array[] = [];
  private redoStack: Uint8Array[] = [];

  constructor(sourcePng: Uint8Array, sourcePixels: RawImage) {
    if (sourcePixels.width <= 0 || sourcePixels.height <= 0) {
      throw new Error("empty source image");
    }
    this.width = sourcePixels.width;
    this.height = sourcePixels.height;
    this.sourcePng = sourcePng;
    this.sourcePixels = sourcePixels;
    this.mask = new Uint8Array(this.width * this.height);
  }

  clampBrush(radius: number): number {
    return Math.min(MAX_BRUSH_RADIUS, Math.max(MIN_BRUSH_RADIUS, Math.round(radius)));
  }

  private stampDisc(cx: number, cy: number, radius: number, value: number): void {
    const r2 = radius * radius;
    const x0 = Math.max(0, Math.floor(cx - radius));
    const x1 = Math.min(this.width - 1, Math.ceil(cx + radius));
    const y0 = Math.max(0, Math.floor(cy - radius));
    const y1 = Math.min(this.height - 1, Math.ceil(cy + radius));
    for (let y = y0; y <= y1; y++) {
      for (let x = x0; x <= x1; x++) {
        const dx = x - cx;
        const dy = y - cy;
        if (dx * dx + dy * dy <= r2) {
          this.mask[y * this.width + x] = value;
        }
      }
    }
  }

  /** Stamp the brush disc along the interpolated path; one undo entry per stroke. */
  paintStroke(path: Point[], brush: Brush): void {
    if (path.length === 0) return;
    const radius = this.clampBrush(brush.radius);
    const value = brush.mode === "paint" ? 255 : 0;
    this.pushUndo();
    let prev = path[0];
    this.stampDisc(prev.x, prev.y, radius, value);
    for (let i = 1; i < path.length; i++) {
      const next = path[i];
      const dist = Math.hypot(next.x - prev.x, next.y - prev.y);
      const steps = Math.max(1, Math.ceil(dist));
      for (let s = 1; s <= steps; s++) {
        const t = s / steps;
        this.stampDisc(prev.x + (next.x - prev.x) * t, prev.y + (next.y - prev.y) * t, radius, value);
      }
      prev = next;
    }
  }

  private pushUndo(): void {
    this.undoStack.push(this.mask.slice());
    if (this.undoStack.length > UNDO_DEPTH) this.undoStack.shift();
    this.redoStack.length = 0;
  }

  get undoDepth(): number {
    return this.undoStack.length;
  }

  undo(): boolean {
    const prev = this.undoStack.pop();
    if (!prev) return false;
    this.redoStack.push(this.mask);
    this.mask = prev;
    return true;
  }

  redo(): boolean {
    const next = this.redoStack.pop();
    if (!next) return false;
    this.undoStack.push(this.mask);
    this.mask = next;
    return true;
  }

  clearMask(): void {
    this.pushUndo();
    this.mask = new Uint8Array(this.width * this.height);
  }

  holeRatio(): number {
    let holes = 0;
    for (let i = 0; i < this.mask.length; i++) {
      if (this.mask[i] === 255) holes++;
    }
    return holes / this.mask.length;
  }

  canSubmit(): boolean {
    return this.mask.some((v) => v === 255);
  }

  /** Bit-faithful mask export: grayscale PNG, 255 = hole. */
  maskPng(): Uint8Array {
    return encodePng({
      width: this.width,
      height: this.height,
      channels: 1,
      data: this.mask.slice(),
    });
  }

  applyResult(result: ResultInfo): void {
    if (result.pixels.width !== this.width || result.pixels.height !== this.height) {
      throw new Error(
        `result size ${result.pixels.width}x${result.pixels.height} != session ${this.width}x${this.height}`,
      );
    }
    this.lastResult = result;
  }

  /**
   * Refinement loop: the last result becomes the source, the mask clears, and
   * history resets; returns false when there is no result yet.
   */
  continueOnResult(): boolean {
    if (!this.lastResult) return false;
    this.sourcePng = this.lastResult.png;
    this.sourcePixels = this.lastResult.pixels;
    this.mask = new Uint8Array(this.width * this.height);
    this.undoStack = [];
    this.redoStack = [];
    this.lastResult = null;
    return true;
  }
}
