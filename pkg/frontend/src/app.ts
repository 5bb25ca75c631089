/** DOM wiring for the interactive mask editor. */

import { InpaintClient, ServiceError } from "./client.js";
import { Brush, EditorSession, Point, ResultInfo, MAX_BRUSH_RADIUS, MIN_BRUSH_RADIUS } from "./editor.js";
import { encodePng, RawImage } from "./png.js";

const $ = <T extends HTMLElement>(id: string): T => {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
};

let session: EditorSession | null = null;
let client = new InpaintClient(defaultBaseUrl());
let brush: Brush = { radius: 16, mode: "paint" };
let currentPath: Point[] = [];
let drawing = false;
let inflight: AbortController | null = null;

function defaultBaseUrl(): string {
  return window.location.origin.startsWith("http") ? window.location.origin : "http://localhost:8000";
}

function status(text: string, isError = false): void {
  const el = $("status");
  el.textContent = text;
  el.classList.toggle("error", isError);
}

async function fileToImage(file: File): Promise<{ png: Uint8Array; pixels: RawImage }> {
  const bitmap = await createImageBitmap(file);
  const canvas = document.createElement("canvas");
  canvas.width = bitmap.width;
  canvas.height = bitmap.height;
  const ctx = canvas.getContext("2d")!;
  ctx.drawImage(bitmap, 0, 0);
  const imageData = ctx.getImageData(0, 0, bitmap.width, bitmap.height);
  const rgb = new Uint8Array(bitmap.width * bitmap.height * 3);
  for (let i = 0, j = 0; i < imageData.data.length; i += 4, j += 3) {
    rgb[j] = imageData.data[i];
    rgb[j + 1] = imageData.data[i + 1];
    rgb[j + 2] = imageData.data[i + 2];
  }
  const pixels: RawImage = { width: bitmap.width, height: bitmap.height, channels: 3, data: rgb };
  return { png: encodePng(pixels), pixels };
}

async function pngToPixels(png: Uint8Array): Promise<RawImage> {
  const blob = new Blob([png.slice().buffer as ArrayBuffer], { type: "image/png" });
  const bitmap = await createImageBitmap(blob);
  const canvas = document.createElement("canvas");
  canvas.width = bitmap.width;
  canvas.height = bitmap.height;
  const ctx = canvas.getContext("2d")!;
  ctx.drawImage(bitmap, 0, 0);
  const data = ctx.getImageData(0, 0, bitmap.width, bitmap.height);
  const rgb = new Uint8Array(bitmap.width * bitmap.height * 3);
  for (let i = 0, j = 0; i < data.data.length; i += 4, j += 3) {
    rgb[j] = data.data[i];
    rgb[j + 1] = data.data[i + 1];
    rgb[j + 2] = data.data[i + 2];
  }
  return { width: bitmap.width, height: bitmap.height, channels: 3, data: rgb };
}

function drawSource(): void {
  if (!session) return;
  const canvas = $("editor") as unknown as HTMLCanvasElement;
  canvas.width = session.width;
  canvas.height = session.height;
  const ctx = canvas.getContext("2d")!;
  const img = ctx.createImageData(session.width, session.height);
  const src = session.sourcePixels.data;
  for (let p = 0, j = 0; p < session.width * session.height; p++, j += 3) {
    const hole = session.mask[p] === 255;
    img.data[p * 4] = hole ? Math.round(src[j] * 0.4 + 255 * 0.6) : src[j];
    img.data[p * 4 + 1] = hole ? Math.round(src[j + 1] * 0.4) : src[j + 1];
    img.data[p * 4 + 2] = hole ? Math.round(src[j + 2] * 0.4) : src[j + 2];
    img.data[p * 4 + 3] = 255;
  }
  ctx.putImageData(img, 0, 0);
}

function drawResult(pixels: RawImage | null): void {
  const canvas = $("result") as unknown as HTMLCanvasElement;
  const ctx = canvas.getContext("2d")!;
  if (!pixels) {
    ctx.clearRect(0, 0, canvas.width, canvas.height);
    return;
  }
  canvas.width = pixels.width;
  canvas.height = pixels.height;
  const img = ctx.createImageData(pixels.width, pixels.height);
  for (let p = 0, j = 0; p < pixels.width * pixels.height; p++, j += 3) {
    img.data[p * 4] = pixels.data[j];
    img.data[p * 4 + 1] = pixels.data[j + 1];
    img.data[p * 4 + 2] = pixels.data[j + 2];
    img.data[p * 4 + 3] = 255;
  }
  ctx.putImageData(img, 0, 0);
}

function refreshControls(): void {
  const ready = session !== null;
  ($("submit") as HTMLButtonElement).disabled = !ready || !session!.canSubmit() || inflight !== null;
  ($("undo") as HTMLButtonElement).disabled = !ready;
  ($("redo") as HTMLButtonElement).disabled = !ready;
  ($("clear") as HTMLButtonElement).disabled = !ready;
  ($("continue") as HTMLButtonElement).disabled = !ready || !session!.lastResult;
  ($("cancel") as HTMLButtonElement).disabled = inflight === null;
  if (ready && !session!.canSubmit()) {
    $("submit-hint").textContent = "paint a mask first";
  } else {
    $("submit-hint").textContent = "";
  }
}

function canvasPoint(ev: PointerEvent): Point {
  const canvas = $("editor") as unknown as HTMLCanvasElement;
  const rect = canvas.getBoundingClientRect();
  return {
    x: ((ev.clientX - rect.left) / rect.width) * canvas.width,
    y: ((ev.clientY - rect.top) / rect.height) * canvas.height,
  };
}

async function submit(): Promise<void> {
  if (!session || !session.canSubmit() || inflight) return;
  inflight = new AbortController();
  refreshControls();
  status("inpainting…");
  try {
    const res = await client.inpaint(session.sourcePng, session.maskPng(), {}, inflight.signal);
    const pixels = await pngToPixels(res.resultPng);
    const info: ResultInfo = {
      png: res.resultPng,
      pixels,
      fingerprint: res.modelFingerprint,
      holeRatio: res.holeRatio,
      timingMs: res.timingMs,
    };
    session.applyResult(info);
    drawResult(pixels);
    status(
      `done in ${res.timingMs.toFixed(0)} ms — model ${res.modelFingerprint}, ` +
        `hole ratio ${(res.holeRatio * 100).toFixed(1)}%`,
    );
  } catch (err) {
    if (err instanceof ServiceError) {
      status(`service error ${err.status}: ${err.reason} — session unchanged, retry when ready`, true);
    } else if ((err as Error).name === "AbortError") {
      status("request canceled");
    } else {
      status(`request failed: ${(err as Error).message}`, true);
    }
  } finally {
    inflight = null;
    refreshControls();
  }
}

export function init(): void {
  const fileInput = $("file") as HTMLInputElement;
  fileInput.addEventListener("change", async () => {
    const file = fileInput.files?.[0];
    if (!file) return;
    const { png, pixels } = await fileToImage(file);
    session = new EditorSession(png, pixels);
    drawSource();
    drawResult(null);
    refreshControls();
    status(`loaded ${pixels.width}x${pixels.height}`);
  });

  const radius = $("radius") as HTMLInputElement;
  radius.min = String(MIN_BRUSH_RADIUS);
  radius.max = String(MAX_BRUSH_RADIUS);
  radius.value = String(brush.radius);
  radius.addEventListener("input", () => {
    brush = { ...brush, radius: Number(radius.value) };
    $("radius-label").textContent = `${radius.value}px`;
  });

  ($("paint") as HTMLInputElement).addEventListener("change", () => (brush = { ...brush, mode: "paint" }));
  ($("erase") as HTMLInputElement).addEventListener("change", () => (brush = { ...brush, mode: "erase" }));

  const editor = $("editor") as unknown as HTMLCanvasElement;
  editor.addEventListener("pointerdown", (ev) => {
    if (!session) return;
    drawing = true;
    currentPath = [canvasPoint(ev)];
    editor.setPointerCapture(ev.pointerId);
  });
  editor.addEventListener("pointermove", (ev) => {
    if (!drawing || !session) return;
    currentPath.push(canvasPoint(ev));
    // show a translucent overlay; the mask itself commits on pointerup so
    // undo granularity stays one entry per stroke
    drawSource();
    previewStroke();
  });
  const finish = (ev: PointerEvent) => {
    if (!drawing || !session) return;
    drawing = false;
    currentPath.push(canvasPoint(ev));
    session.paintStroke(currentPath, brush);
    currentPath = [];
    drawSource();
    refreshControls();
  };
  editor.addEventListener("pointerup", finish);
  editor.addEventListener("pointercancel", () => {
    drawing = false;
    currentPath = [];
    drawSource();
  });

  function previewStroke(): void {
    const ctx = editor.getContext("2d")!;
    ctx.save();
    ctx.globalAlpha = 0.5;
    ctx.strokeStyle = brush.mode === "paint" ? "#ffcf40" : "#40cfff";
    ctx.lineWidth = brush.radius * 2;
    ctx.lineCap = "round";
    ctx.lineJoin = "round";
    ctx.beginPath();
    currentPath.forEach((p, i) => (i ? ctx.lineTo(p.x, p.y) : ctx.moveTo(p.x, p.y)));
    ctx.stroke();
    ctx.restore();
  }

  $("undo").addEventListener("click", () => {
    session?.undo();
    drawSource();
    refreshControls();
  });
  $("redo").addEventListener("click", () => {
    session?.redo();
    drawSource();
    refreshControls();
  });
  $("clear").addEventListener("click", () => {
    session?.clearMask();
    drawSource();
    refreshControls();
  });
  document.addEventListener("keydown", (ev) => {
    if (!session) return;
    if ((ev.ctrlKey || ev.metaKey) && ev.key === "z" && !ev.shiftKey) {
      session.undo();
      drawSource();
      refreshControls();
      ev.preventDefault();
    } else if ((ev.ctrlKey || ev.metaKey) && (ev.key === "y" || (ev.key === "z" && ev.shiftKey))) {
      session.redo();
      drawSource();
      refreshControls();
      ev.preventDefault();
    }
  });

  $("submit").addEventListener("click", () => void submit());
  $("cancel").addEventListener("click", () => inflight?.abort());
  $("continue").addEventListener("click", () => {
    if (session?.continueOnResult()) {
      drawSource();
      drawResult(null);
      refreshControls();
      status("continuing on result — paint the next mask");
    }
  });

  const urlInput = $("service-url") as HTMLInputElement;
  urlInput.value = defaultBaseUrl();
  urlInput.addEventListener("change", () => client.setBaseUrl(urlInput.value));

  $("check-model").addEventListener("click", async () => {
    try {
      const info = await client.model();
      status(
        `model ${info.fingerprint}: ${info.blocks} blocks, rates [${info.rates.join(", ")}], ` +
          `width ${info.width}, max side ${info.max_side}`,
      );
    } catch (err) {
      if (err instanceof ServiceError) {
        status(`model check failed (${err.status}): ${err.reason}`, true);
      } else {
        status(`model check failed: ${(err as Error).message}`, true);
      }
    }
  });

  refreshControls();
  status("load an image to start");
}

if (typeof document !== "undefined" && document.getElementById("editor")) {
  init();
}
