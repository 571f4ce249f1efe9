// Interactive non-blind restoration: load an image, paint per-region
// attribute strength, and iterate on live restored previews.

import {
  AttributeMap,
  BrushState,
  CHANNEL_NAMES,
  Channel,
  Point,
  paintStroke,
  strokeBounds,
} from "./attrmap.js";
import { RestoreClient, ServiceError } from "./client.js";
import { UndoHistory } from "./history.js";
import { encodePng16 } from "./png16.js";

interface Session {
  imagePng: Uint8Array;
  bitmap: ImageBitmap;
  map: AttributeMap;
  history: UndoHistory;
  restored: ImageBitmap | null;
  lastPsnr: number | string | null;
}

const $ = <T extends HTMLElement>(id: string): T =>
  document.getElementById(id) as T;

class App {
  private client = new RestoreClient(
    (document.body.dataset.serviceUrl ?? "http://127.0.0.1:8590"));
  private session: Session | null = null;
  private brush: BrushState = { channel: 0, value: 1, radius: 24, softness: 0.5 };
  private stroke: Point[] = [];
  private painting = false;
  private inFlight = false;
  private pendingRestore = false;
  private wipe = 0.5;

  private readonly paintCanvas = $<HTMLCanvasElement>("paint-canvas");
  private readonly compareCanvas = $<HTMLCanvasElement>("compare-canvas");

  constructor() {
    this.bindControls();
    this.refreshServiceBadge();
  }

  private bindControls(): void {
    $<HTMLInputElement>("file-input").addEventListener("change", (e) => {
      const file = (e.target as HTMLInputElement).files?.[0];
      if (file) void this.loadFile(file);
    });
    for (const [i, name] of CHANNEL_NAMES.entries()) {
      $<HTMLInputElement>(`global-${name}`).addEventListener("input", (e) => {
        this.setGlobal(i as Channel,
                       Number((e.target as HTMLInputElement).value));
      });
    }
    $<HTMLSelectElement>("brush-channel").addEventListener("change", (e) => {
      this.brush.channel =
        Number((e.target as HTMLSelectElement).value) as Channel;
    });
    const bind = (id: string, apply: (v: number) => void) =>
      $<HTMLInputElement>(id).addEventListener("input", (e) =>
        apply(Number((e.target as HTMLInputElement).value)));
    bind("brush-value", (v) => (this.brush.value = v));
    bind("brush-radius", (v) => (this.brush.radius = v));
    bind("brush-softness", (v) => (this.brush.softness = v));
    bind("wipe", (v) => {
      this.wipe = v;
      this.drawCompare();
    });
    $("btn-restore").addEventListener("click", () => this.requestRestore());
    $("btn-undo").addEventListener("click", () => this.undo());
    $("btn-redo").addEventListener("click", () => this.redo());
    $("btn-ramp").addEventListener("click", () => this.gradientFill());

    this.paintCanvas.addEventListener("pointerdown", (e) => {
      this.painting = true;
      this.stroke = [this.canvasPoint(e)];
      this.paintCanvas.setPointerCapture(e.pointerId);
    });
    this.paintCanvas.addEventListener("pointermove", (e) => {
      if (this.painting) this.stroke.push(this.canvasPoint(e));
      if (this.painting) this.previewStroke();
    });
    this.paintCanvas.addEventListener("pointerup", () => this.endStroke());
  }

  private canvasPoint(e: PointerEvent): Point {
    const rect = this.paintCanvas.getBoundingClientRect();
    return {
      x: ((e.clientX - rect.left) / rect.width) * this.paintCanvas.width,
      y: ((e.clientY - rect.top) / rect.height) * this.paintCanvas.height,
    };
  }

  private async refreshServiceBadge(): Promise<void> {
    const badge = $("service-badge");
    try {
      const info = await this.client.modelInfo();
      const config = info.config as { layers: number; features: number };
      badge.textContent =
        `model: ${config.layers} layers x ${config.features} features`;
      badge.className = "badge ok";
    } catch {
      badge.textContent = "service unreachable";
      badge.className = "badge err";
    }
  }

  private async loadFile(file: File): Promise<void> {
    const bytes = new Uint8Array(await file.arrayBuffer());
    const bitmap = await createImageBitmap(new Blob([bytes as BlobPart]));
    const map = new AttributeMap(bitmap.width, bitmap.height);
    this.session = {
      imagePng: bytes,
      bitmap,
      map,
      history: new UndoHistory(),
      restored: null,
      lastPsnr: null,
    };
    this.paintCanvas.width = bitmap.width;
    this.paintCanvas.height = bitmap.height;
    this.compareCanvas.width = bitmap.width;
    this.compareCanvas.height = bitmap.height;
    this.drawPaint();
    this.drawCompare();
    this.updateBadges();
  }

  private setGlobal(channel: Channel, value: number): void {
    const s = this.session;
    if (!s) return;
    const rect = { x0: 0, y0: 0, x1: s.map.width, y1: s.map.height };
    s.history.apply(s.map, channel, rect, () =>
      s.map.fillChannel(channel, value));
    this.drawPaint();
    this.scheduleRestore();
  }

  private gradientFill(): void {
    const s = this.session;
    if (!s) return;
    const rect = { x0: 0, y0: 0, x1: s.map.width, y1: s.map.height };
    s.history.apply(s.map, this.brush.channel, rect, () =>
      s.map.gradientFill(this.brush.channel, 0, 1, "horizontal"));
    this.drawPaint();
    this.scheduleRestore();
  }

  private previewStroke(): void {
    // live feedback: paint incrementally on a copy-free preview pass
    this.drawPaint();
  }

  private endStroke(): void {
    const s = this.session;
    this.painting = false;
    if (!s || this.stroke.length === 0) return;
    const rect = strokeBounds(s.map, this.brush, this.stroke);
    const points = this.stroke;
    this.stroke = [];
    if (rect.x1 <= rect.x0 || rect.y1 <= rect.y0) return;
    s.history.apply(s.map, this.brush.channel, rect, () =>
      paintStroke(s.map, this.brush, points));
    this.drawPaint();
    this.scheduleRestore();
  }

  private undo(): void {
    const s = this.session;
    if (s && s.history.undo(s.map)) {
      this.drawPaint();
      this.scheduleRestore();
    }
  }

  private redo(): void {
    const s = this.session;
    if (s && s.history.redo(s.map)) {
      this.drawPaint();
      this.scheduleRestore();
    }
  }

  private drawPaint(): void {
    const s = this.session;
    if (!s) return;
    const ctx = this.paintCanvas.getContext("2d")!;
    ctx.drawImage(s.bitmap, 0, 0);
    const { width: w, height: h } = s.map;
    const overlay = ctx.createImageData(w, h);
    for (let i = 0; i < w * h; i++) {
      overlay.data[i * 4] = s.map.planes[0][i] * 255;
      overlay.data[i * 4 + 1] = s.map.planes[1][i] * 255;
      overlay.data[i * 4 + 2] = s.map.planes[2][i] * 255;
      overlay.data[i * 4 + 3] = 110;
    }
    void createImageBitmap(overlay).then((bm) => {
      ctx.drawImage(bm, 0, 0);
    });
  }

  private drawCompare(): void {
    const s = this.session;
    if (!s) return;
    const ctx = this.compareCanvas.getContext("2d")!;
    ctx.drawImage(s.bitmap, 0, 0);
    if (s.restored) {
      const split = Math.round(this.wipe * s.bitmap.width);
      ctx.save();
      ctx.beginPath();
      ctx.rect(0, 0, split, s.bitmap.height);
      ctx.clip();
      ctx.drawImage(s.restored, 0, 0);
      ctx.restore();
      ctx.fillStyle = "#ff9800";
      ctx.fillRect(split - 1, 0, 2, s.bitmap.height);
    }
  }

  private updateBadges(): void {
    const s = this.session;
    const psnr = $("psnr-badge");
    if (s?.lastPsnr != null) {
      const value = s.lastPsnr === "inf" ? "∞" : Number(s.lastPsnr).toFixed(2);
      psnr.textContent = `PSNR vs input: ${value} dB`;
    } else {
      psnr.textContent = "";
    }
  }

  // Debounced: at most one request in flight; a change during flight queues
  // exactly one follow-up with the latest map.
  private scheduleRestore(): void {
    if ($<HTMLInputElement>("auto-restore").checked) this.requestRestore();
  }

  private async requestRestore(): Promise<void> {
    const s = this.session;
    if (!s) return;
    if (this.inFlight) {
      this.pendingRestore = true;
      return;
    }
    this.inFlight = true;
    $("btn-restore").setAttribute("disabled", "true");
    try {
      const result = await this.client.restore(s.imagePng, {
        attrMapPng: encodePng16(s.map),
        referencePng: s.imagePng,
      });
      s.restored = await createImageBitmap(
        new Blob([result.restoredPng as BlobPart]));
      s.lastPsnr = (result.meta.psnr as number | string | undefined) ?? null;
      $("timing-badge").textContent = `${result.timingMs.toFixed(0)} ms`;
      this.drawCompare();
      this.updateBadges();
    } catch (err) {
      this.toast(err instanceof ServiceError
        ? `restore failed (${err.status}): ${err.message}`
        : `service unreachable: ${err}`);
    } finally {
      this.inFlight = false;
      $("btn-restore").removeAttribute("disabled");
      if (this.pendingRestore) {
        this.pendingRestore = false;
        void this.requestRestore();
      }
    }
  }

  private toast(message: string): void {
    const el = $("toast");
    el.textContent = message;
    el.classList.add("visible");
    setTimeout(() => el.classList.remove("visible"), 4000);
  }
}

new App();
