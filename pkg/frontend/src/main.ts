/**
 * Browser wiring: sequence picker, brush canvas, frame strip with
 * overlays, direction selector, and the propagate/correct loop. All
 * state lives in UiSession + MaskModel; all I/O goes through ApiClient.
 */

import { ApiClient, FrameScore, SequenceSummary } from "./api";
import { MaskModel } from "./mask";
import { compositeOverlay, scoreBadge } from "./overlay";
import { decodePng, encodeIndexedPng } from "./png";
import { pollRun } from "./poll";
import { UiSession } from "./session";

const client = new ApiClient(location.origin);

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id} in the page`);
  return node as T;
}

const ui = {
  sequences: el<HTMLSelectElement>("sequences"),
  open: el<HTMLButtonElement>("open"),
  canvas: el<HTMLCanvasElement>("canvas"),
  strip: el<HTMLDivElement>("strip"),
  direction: el<HTMLSelectElement>("direction"),
  opacity: el<HTMLInputElement>("opacity"),
  label: el<HTMLInputElement>("brush-label"),
  radius: el<HTMLInputElement>("brush-radius"),
  erase: el<HTMLInputElement>("erase"),
  undo: el<HTMLButtonElement>("undo"),
  redo: el<HTMLButtonElement>("redo"),
  clear: el<HTMLButtonElement>("clear"),
  save: el<HTMLButtonElement>("save"),
  propagate: el<HTMLButtonElement>("propagate"),
  status: el<HTMLSpanElement>("status"),
  badge: el<HTMLSpanElement>("badge"),
};

class App {
  session!: UiSession;
  model!: MaskModel;
  frames = new Map<number, Uint8Array>(); // decoded grayscale pixels
  masks = new Map<number, Uint8Array>(); // displayed mask per frame
  scores: FrameScore[] | null = null;
  private lastPoint: { x: number; y: number } | null = null;

  async open(summary: SequenceSummary): Promise<void> {
    this.session = new UiSession(summary);
    const [h, w] = summary.dims;
    this.model = new MaskModel(w, h);
    this.frames.clear();
    this.masks.clear();
    this.scores = null;
    ui.canvas.width = w;
    ui.canvas.height = h;
    this.buildStrip();
    await this.refreshMasks();
    await this.selectFrame(0);
    this.render();
  }

  // --- data ------------------------------------------------------------------

  private async frame(i: number): Promise<Uint8Array> {
    let pixels = this.frames.get(i);
    if (!pixels) {
      pixels = (await decodePng(await client.getFrame(this.session.sequence.id, i))).pixels;
      this.frames.set(i, pixels);
    }
    return pixels;
  }

  private async refreshMasks(): Promise<void> {
    for (let i = 0; i < this.session.sequence.frame_count; i++) {
      if (this.masks.has(i) || !this.session.hasMask(i)) continue;
      const png = await client.getMask(this.session.sequence.id, i, this.session.selectedRun);
      this.masks.set(i, (await decodePng(png)).pixels);
    }
  }

  private async refreshReport(): Promise<void> {
    if (this.session.sequence.ground_truth_frames.length === 0) return;
    try {
      this.scores = (await client.getReport(this.session.sequence.id)).frames;
    } catch {
      this.scores = null; // e.g. missing predictions before the first run
    }
  }

  // --- drawing ---------------------------------------------------------------

  async selectFrame(i: number): Promise<void> {
    this.session.selectFrame(i);
    const source = this.session.maskSource();
    if (source.kind === "annotation") {
      const png = await client.getAnnotation(this.session.sequence.id, i);
      this.model = new MaskModel(this.model.width, this.model.height,
        (await decodePng(png)).pixels);
    } else if (source.kind === "run") {
      const shown = this.masks.get(i);
      this.model = new MaskModel(this.model.width, this.model.height, shown);
    } else if (source.kind === "none") {
      this.model = new MaskModel(this.model.width, this.model.height);
    }
    await this.frame(i);
    this.render();
  }

  render(): void {
    const pixels = this.frames.get(this.session.frame);
    if (!pixels) return;
    const rgba = compositeOverlay(pixels, this.model.labels(), this.session.overlayOpacity);
    const ctx = ui.canvas.getContext("2d");
    if (!ctx) return;
    ctx.putImageData(new ImageData(rgba, this.model.width, this.model.height), 0, 0);
    ui.propagate.disabled = !this.session.canPropagate(this.model.isEmpty());
    ui.badge.textContent = [
      this.session.editBadge(),
      scoreBadge(this.scores, this.session.frame),
    ].filter(Boolean).join(" | ");
    this.renderStrip();
  }

  private buildStrip(): void {
    ui.strip.replaceChildren();
    for (let i = 0; i < this.session.sequence.frame_count; i++) {
      const cell = document.createElement("button");
      cell.className = "strip-cell";
      cell.textContent = String(i);
      cell.addEventListener("click", () => void this.selectFrame(i));
      ui.strip.appendChild(cell);
    }
  }

  private renderStrip(): void {
    const cells = ui.strip.children;
    for (let i = 0; i < cells.length; i++) {
      const cell = cells[i] as HTMLButtonElement;
      cell.classList.toggle("current", i === this.session.frame);
      cell.classList.toggle("has-mask", this.session.hasMask(i));
      cell.classList.toggle("annotated", this.session.hasAnnotation(i));
      const badge = scoreBadge(this.scores, i);
      cell.title = badge ?? "";
    }
  }

  // --- gestures --------------------------------------------------------------

  private canvasPoint(event: PointerEvent): { x: number; y: number } {
    const rect = ui.canvas.getBoundingClientRect();
    return {
      x: ((event.clientX - rect.left) / rect.width) * this.model.width,
      y: ((event.clientY - rect.top) / rect.height) * this.model.height,
    };
  }

  pointerDown(event: PointerEvent): void {
    ui.canvas.setPointerCapture(event.pointerId);
    const p = this.canvasPoint(event);
    this.model.beginGesture();
    this.model.stamp(p.x, p.y, this.session.brush);
    this.session.markEdited();
    this.lastPoint = p;
    this.render();
  }

  pointerMove(event: PointerEvent): void {
    if (!this.lastPoint) return;
    const p = this.canvasPoint(event);
    this.model.stroke(this.lastPoint.x, this.lastPoint.y, p.x, p.y, this.session.brush);
    this.lastPoint = p;
    this.render();
  }

  pointerUp(): void {
    this.lastPoint = null;
  }

  // --- server round trips ------------------------------------------------------

  async save(): Promise<void> {
    const png = await encodeIndexedPng(this.model.labels(), this.model.width, this.model.height);
    await client.putAnnotation(this.session.sequence.id, this.session.frame, png);
    this.session.markSaved();
    ui.status.textContent = `annotation saved for frame ${this.session.frame}`;
    this.render();
  }

  async propagate(): Promise<void> {
    const seq = this.session.sequence.id;
    const { run_id } = await client.propagate(seq, {
      from: this.session.frame,
      direction: this.session.direction,
    });
    this.session.runStatus = "running";
    this.render();
    const total = this.session.sequence.frame_count;
    const run = await pollRun(client, seq, run_id, {
      onProgress: (done, summary) => {
        ui.status.textContent = `run ${run_id}: ${done}/${total} frames`;
        this.session.applyRun(summary);
        // newly finished frames may replace stale masks from older runs
        for (const f of summary.frames_done) this.masks.delete(f);
        void this.refreshMasks().then(() => this.render());
      },
    });
    this.session.applyRun(run);
    await this.refreshMasks();
    await this.refreshReport();
    ui.status.textContent = `run ${run_id} done`;
    this.render();
  }
}

const app = new App();

async function boot(): Promise<void> {
  const { sequences } = await client.listSequences();
  ui.sequences.replaceChildren(
    ...sequences.map((s) => new Option(`${s.id} (${s.frame_count} frames)`, s.id)),
  );
  ui.open.addEventListener("click", () => {
    void client.getSequence(ui.sequences.value).then((s) => app.open(s));
  });
  ui.canvas.addEventListener("pointerdown", (e) => app.pointerDown(e));
  ui.canvas.addEventListener("pointermove", (e) => app.pointerMove(e));
  ui.canvas.addEventListener("pointerup", () => app.pointerUp());
  ui.direction.addEventListener("change", () => {
    app.session.direction = ui.direction.value as UiSession["direction"];
  });
  ui.opacity.addEventListener("input", () => {
    app.session.overlayOpacity = Number(ui.opacity.value);
    app.render();
  });
  ui.label.addEventListener("input", () => {
    app.session.brush.label = Math.max(1, Number(ui.label.value) | 0);
  });
  ui.radius.addEventListener("input", () => {
    app.session.brush.radius = Math.max(1, Number(ui.radius.value));
  });
  ui.erase.addEventListener("change", () => {
    app.session.brush.erase = ui.erase.checked;
  });
  ui.undo.addEventListener("click", () => {
    if (app.model.undo()) {
      app.session.markEdited();
      app.render();
    }
  });
  ui.redo.addEventListener("click", () => {
    if (app.model.redo()) {
      app.session.markEdited();
      app.render();
    }
  });
  ui.clear.addEventListener("click", () => {
    app.model.clear();
    app.session.markEdited();
    app.render();
  });
  ui.save.addEventListener("click", () => void app.save().catch(showError));
  ui.propagate.addEventListener("click", () => void app.propagate().catch(showError));
}

function showError(err: unknown): void {
  const code = err instanceof Error && "code" in err ? ` [${(err as { code: string }).code}]` : "";
  ui.status.textContent = `error${code}: ${err instanceof Error ? err.message : String(err)}`;
}

void boot().catch(showError);
