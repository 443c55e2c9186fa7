import { describe, expect, it } from "vitest";

import { changedFrames, compositeOverlay, scoreBadge } from "../src/overlay";

describe("compositeOverlay", () => {
  const gray = new Uint8Array([0, 100, 200, 255]);
  const labels = new Uint8Array([0, 1, 2, 0]);

  it("shows the frame untouched where the label is background", () => {
    const rgba = compositeOverlay(gray, labels, 1.0);
    expect([...rgba.slice(0, 4)]).toEqual([0, 0, 0, 255]);
    expect([...rgba.slice(12, 16)]).toEqual([255, 255, 255, 255]);
  });

  it("paints solid palette colors at opacity 1", () => {
    const rgba = compositeOverlay(gray, labels, 1.0);
    expect([...rgba.slice(4, 8)]).toEqual([128, 0, 0, 255]); // label 1
    expect([...rgba.slice(8, 12)]).toEqual([0, 128, 0, 255]); // label 2
  });

  it("is the plain frame at opacity 0, even on labeled pixels", () => {
    const rgba = compositeOverlay(gray, labels, 0.0);
    expect([...rgba.slice(4, 8)]).toEqual([100, 100, 100, 255]);
  });

  it("blends halfway at opacity 0.5", () => {
    const rgba = compositeOverlay(gray, labels, 0.5);
    expect([...rgba.slice(4, 8)]).toEqual([114, 50, 50, 255]); // (100+128)/2, 100/2
  });

  it("treats a missing mask as all background and checks sizes", () => {
    const rgba = compositeOverlay(gray, null, 0.8);
    expect([...rgba.slice(8, 12)]).toEqual([200, 200, 200, 255]);
    expect(() => compositeOverlay(gray, new Uint8Array(3), 0.5))
      .toThrow(/3 pixels, frame has 4/);
  });
});

describe("changedFrames", () => {
  const a = new Uint8Array([1, 1]);
  const b = new Uint8Array([1, 2]);

  it("reports only frames whose pixels differ", () => {
    expect(changedFrames([a, a, a], [a, b, new Uint8Array([1, 1])])).toEqual([1]);
  });

  it("counts masks appearing or disappearing as changes", () => {
    expect(changedFrames([null, a, null], [a, null, null])).toEqual([0, 1]);
  });

  it("handles strips of different lengths", () => {
    expect(changedFrames([a], [a, b])).toEqual([1]);
  });
});

describe("scoreBadge", () => {
  const scores = [
    { frame: 0, j: 1, f: 1, jf: 1 },
    { frame: 3, j: 0.8512, f: 0.9049, jf: 0.878 },
  ];

  it("formats the frame's J and F when ground truth exists", () => {
    expect(scoreBadge(scores, 3)).toBe("J 0.851 F 0.905");
  });

  it("is null without scores for the frame", () => {
    expect(scoreBadge(scores, 2)).toBeNull();
    expect(scoreBadge(null, 0)).toBeNull();
  });
});
