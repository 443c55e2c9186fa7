/**
 * Client-side session state: which frame is selected, what the brush
 * does, which run's masks are on screen, and whether the local edit
 * differs from what the server has. Pure state — the DOM layer renders
 * it, tests drive it directly.
 */

import { RunSummary, SequenceSummary } from "./api";
import { BrushState } from "./mask";

export type Direction = "forward" | "backward" | "both";

export type MaskSource =
  | { kind: "local" }
  | { kind: "annotation" }
  | { kind: "run"; run: string }
  | { kind: "none" };

export class UiSession {
  readonly sequence: SequenceSummary;
  frame = 0;
  brush: BrushState = { label: 1, radius: 6, erase: false };
  overlayOpacity = 0.5;
  direction: Direction = "both";
  /** Which run the strip displays; per-frame "latest" by default. */
  selectedRun = "latest";
  runStatus: "idle" | "running" | "done" | "error" = "idle";
  activeRun: string | null = null;
  /** True while the canvas holds edits the server has not seen. */
  dirty = false;
  private savedAnnotations: Set<number>;
  private framesWithMasks = new Set<number>();

  constructor(sequence: SequenceSummary) {
    this.sequence = sequence;
    this.savedAnnotations = new Set(sequence.annotations);
    for (const run of sequence.runs) {
      for (const f of run.frames_done) this.framesWithMasks.add(f);
    }
    if (sequence.runs.length > 0) {
      const last = sequence.runs[sequence.runs.length - 1];
      this.runStatus = last.status === "running" ? "running" : last.status;
      this.activeRun = last.run_id;
    }
  }

  selectFrame(index: number): void {
    if (!Number.isInteger(index) || index < 0 || index >= this.sequence.frame_count) {
      throw new Error(`frame ${index} out of range 0..${this.sequence.frame_count - 1}`);
    }
    this.frame = index;
  }

  /** Record that the brush touched the canvas. */
  markEdited(): void {
    this.dirty = true;
  }

  /** Record that the current frame's annotation reached the server. */
  markSaved(): void {
    this.savedAnnotations.add(this.frame);
    this.dirty = false;
  }

  hasAnnotation(frame: number): boolean {
    return this.savedAnnotations.has(frame);
  }

  /** Badge for the toolbar; non-null whenever edits are unsaved. */
  editBadge(): string | null {
    return this.dirty ? "unsaved edits" : null;
  }

  /**
   * Whether the propagate button is live: the current frame's
   * annotation must be saved, non-empty, with no edits pending and no
   * run in flight.
   */
  canPropagate(maskEmpty: boolean): boolean {
    return (
      !maskEmpty &&
      !this.dirty &&
      this.savedAnnotations.has(this.frame) &&
      this.runStatus !== "running"
    );
  }

  /** Fold a polled run summary into the session. */
  applyRun(run: RunSummary): void {
    this.activeRun = run.run_id;
    this.runStatus = run.status;
    for (const f of run.frames_done) this.framesWithMasks.add(f);
  }

  hasMask(frame: number): boolean {
    return this.framesWithMasks.has(frame);
  }

  /** What the canvas should display for the selected frame. */
  maskSource(): MaskSource {
    if (this.dirty) return { kind: "local" };
    if (this.savedAnnotations.has(this.frame)) return { kind: "annotation" };
    if (this.framesWithMasks.has(this.frame)) {
      return { kind: "run", run: this.selectedRun };
    }
    return { kind: "none" };
  }
}
