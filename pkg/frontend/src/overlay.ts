/**
 * Compositing helpers: blend label masks over grayscale frames and
 * track which frames of the strip changed between runs.
 */

import { FrameScore } from "./api";
import { maskPalette } from "./png";

const PALETTE = maskPalette();

/**
 * Render a grayscale frame with a label overlay into an RGBA buffer
 * suitable for `putImageData`. Background pixels show the frame;
 * labeled pixels blend the frame with the label's palette color at the
 * requested opacity (0 = frame only, 1 = solid color).
 */
export function compositeOverlay(
  gray: Uint8Array,
  labels: Uint8Array | null,
  opacity: number,
): Uint8ClampedArray<ArrayBuffer> {
  if (labels && labels.length !== gray.length) {
    throw new Error(`mask has ${labels.length} pixels, frame has ${gray.length}`);
  }
  const alpha = Math.min(1, Math.max(0, opacity));
  const out = new Uint8ClampedArray(gray.length * 4);
  for (let i = 0; i < gray.length; i++) {
    const g = gray[i];
    const label = labels ? labels[i] : 0;
    if (label === 0) {
      out[i * 4] = g;
      out[i * 4 + 1] = g;
      out[i * 4 + 2] = g;
    } else {
      out[i * 4] = g + (PALETTE[label * 3] - g) * alpha;
      out[i * 4 + 1] = g + (PALETTE[label * 3 + 1] - g) * alpha;
      out[i * 4 + 2] = g + (PALETTE[label * 3 + 2] - g) * alpha;
    }
    out[i * 4 + 3] = 255;
  }
  return out;
}

/**
 * Indices whose masks differ between two frame strips (null = no mask
 * yet; a mask appearing or disappearing counts as a change).
 */
export function changedFrames(
  before: (Uint8Array | null)[],
  after: (Uint8Array | null)[],
): number[] {
  const changed: number[] = [];
  const n = Math.max(before.length, after.length);
  for (let i = 0; i < n; i++) {
    const a = before[i] ?? null;
    const b = after[i] ?? null;
    if (a === null && b === null) continue;
    if (a === null || b === null || a.length !== b.length) {
      changed.push(i);
      continue;
    }
    for (let k = 0; k < a.length; k++) {
      if (a[k] !== b[k]) {
        changed.push(i);
        break;
      }
    }
  }
  return changed;
}

/** Badge text for a frame's scores, or null when no ground truth. */
export function scoreBadge(scores: FrameScore[] | null, frame: number): string | null {
  const hit = scores?.find((s) => s.frame === frame);
  if (!hit) return null;
  return `J ${hit.j.toFixed(3)} F ${hit.f.toFixed(3)}`;
}
