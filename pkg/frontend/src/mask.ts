/**
 * The editable mask under the brush: a plain label array plus an
 * undo/redo history. Pure data — rendering and upload encoding live
 * elsewhere, so this model is directly testable.
 */

const HISTORY_LIMIT = 64; // undo depth; the tool promises at least 20

export interface BrushState {
  /** Label painted by the brush; erasing paints label 0. */
  label: number;
  radius: number;
  erase: boolean;
}

export class MaskModel {
  readonly width: number;
  readonly height: number;
  private data: Uint8Array;
  private undoStack: Uint8Array[] = [];
  private redoStack: Uint8Array[] = [];

  constructor(width: number, height: number, labels?: Uint8Array) {
    if (labels && labels.length !== width * height) {
      throw new Error(`label array has ${labels.length} entries, expected ${width * height}`);
    }
    this.width = width;
    this.height = height;
    this.data = labels ? labels.slice() : new Uint8Array(width * height);
  }

  /** Current labels (a copy; the model owns its buffer). */
  labels(): Uint8Array {
    return this.data.slice();
  }

  labelAt(x: number, y: number): number {
    return this.data[y * this.width + x];
  }

  isEmpty(): boolean {
    return this.data.every((v) => v === 0);
  }

  /** Distinct nonzero labels present, ascending. */
  objectIds(): number[] {
    const seen = new Set<number>();
    for (const v of this.data) if (v !== 0) seen.add(v);
    return [...seen].sort((a, b) => a - b);
  }

  // --- gestures ---------------------------------------------------------------
  // One history entry per gesture: beginGesture() snapshots, then any
  // number of stamp/stroke calls mutate freely until the pointer lifts.

  beginGesture(): void {
    this.undoStack.push(this.data.slice());
    if (this.undoStack.length > HISTORY_LIMIT) this.undoStack.shift();
    this.redoStack.length = 0;
  }

  /** Stamp one brush disk. Erasing is just painting label 0. */
  stamp(cx: number, cy: number, brush: BrushState): void {
    const label = brush.erase ? 0 : brush.label;
    const r = Math.max(0, brush.radius);
    const r2 = r * r;
    const y0 = Math.max(0, Math.ceil(cy - r));
    const y1 = Math.min(this.height - 1, Math.floor(cy + r));
    for (let y = y0; y <= y1; y++) {
      const x0 = Math.max(0, Math.ceil(cx - r));
      const x1 = Math.min(this.width - 1, Math.floor(cx + r));
      for (let x = x0; x <= x1; x++) {
        const dx = x - cx;
        const dy = y - cy;
        if (dx * dx + dy * dy <= r2) this.data[y * this.width + x] = label;
      }
    }
  }

  /**
   * Stamp along a pointer-move segment at sub-pixel steps, so a fast
   * drag leaves a solid line instead of separated dots.
   */
  stroke(x0: number, y0: number, x1: number, y1: number, brush: BrushState): void {
    const steps = Math.max(1, Math.ceil(Math.hypot(x1 - x0, y1 - y0)));
    for (let i = 0; i <= steps; i++) {
      const t = i / steps;
      this.stamp(x0 + (x1 - x0) * t, y0 + (y1 - y0) * t, brush);
    }
  }

  /** Fill the whole canvas with one label (a gesture of its own). */
  fillAll(label: number): void {
    this.beginGesture();
    this.data.fill(label);
  }

  /** Erase everything (a gesture of its own). */
  clear(): void {
    this.beginGesture();
    this.data.fill(0);
  }

  /** Replace the contents outright, e.g. with a fetched annotation. */
  load(labels: Uint8Array): void {
    if (labels.length !== this.data.length) {
      throw new Error(`label array has ${labels.length} entries, expected ${this.data.length}`);
    }
    this.beginGesture();
    this.data.set(labels);
  }

  // --- history ----------------------------------------------------------------

  canUndo(): boolean {
    return this.undoStack.length > 0;
  }

  canRedo(): boolean {
    return this.redoStack.length > 0;
  }

  undo(): boolean {
    const prev = this.undoStack.pop();
    if (!prev) return false;
    this.redoStack.push(this.data);
    this.data = prev;
    return true;
  }

  redo(): boolean {
    const next = this.redoStack.pop();
    if (!next) return false;
    this.undoStack.push(this.data);
    this.data = next;
    return true;
  }
}
