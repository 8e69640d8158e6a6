// Three-pane mask editor: input+mask, exemplar+mask, result. Masks render
// as a red-tinted overlay; brushing edits the active layer; translation is
// triggered explicitly and always sends the current masks as overrides.

import { ApiClient } from "./api";
import { Point } from "./brush";
import { RasterRgb } from "./codec";
import { EditorSession, LayerId } from "./session";

const api = new ApiClient("");
let session: EditorSession | null = null;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

async function fileToRaster(file: File): Promise<RasterRgb> {
  const bitmap = await createImageBitmap(file);
  const canvas = document.createElement("canvas");
  canvas.width = bitmap.width;
  canvas.height = bitmap.height;
  const ctx = canvas.getContext("2d")!;
  ctx.drawImage(bitmap, 0, 0);
  const rgba = ctx.getImageData(0, 0, bitmap.width, bitmap.height).data;
  const data = new Uint8Array(bitmap.width * bitmap.height * 3);
  for (let i = 0; i < bitmap.width * bitmap.height; i++) {
    data[i * 3] = rgba[i * 4];
    data[i * 3 + 1] = rgba[i * 4 + 1];
    data[i * 3 + 2] = rgba[i * 4 + 2];
  }
  return { width: bitmap.width, height: bitmap.height, data };
}

function renderPane(canvas: HTMLCanvasElement, image: RasterRgb, maskLayer?: LayerId): void {
  canvas.width = image.width;
  canvas.height = image.height;
  const ctx = canvas.getContext("2d")!;
  const frame = ctx.createImageData(image.width, image.height);
  const mask = maskLayer && session ? session.masks[maskLayer] : null;
  for (let i = 0; i < image.width * image.height; i++) {
    const m = mask ? mask.data[i] : 0;
    // red-tinted alpha overlay over the raw pixels
    frame.data[i * 4] = Math.round(image.data[i * 3] * (1 - 0.5 * m) + 255 * 0.5 * m);
    frame.data[i * 4 + 1] = Math.round(image.data[i * 3 + 1] * (1 - 0.5 * m));
    frame.data[i * 4 + 2] = Math.round(image.data[i * 3 + 2] * (1 - 0.5 * m));
    frame.data[i * 4 + 3] = 255;
  }
  ctx.putImageData(frame, 0, 0);
}

function renderAll(): void {
  if (!session) return;
  renderPane(el<HTMLCanvasElement>("input-canvas"), session.inputImage, "input");
  renderPane(el<HTMLCanvasElement>("exemplar-canvas"), session.exemplarImage, "exemplar");
  const output = session.outputImage();
  const result = el<HTMLCanvasElement>("result-canvas");
  if (output) {
    renderPane(result, output);
  } else {
    result.getContext("2d")!.clearRect(0, 0, result.width, result.height);
  }
  el<HTMLSpanElement>("status").textContent = session.lastError
    ? session.lastError
    : session.degradedMode
      ? "service unavailable at load; editing blank masks"
      : session.lastResponse
        ? `translated in ${session.lastResponse.timing_ms.toFixed(1)} ms`
        : "ready";
}

function canvasPoint(canvas: HTMLCanvasElement, event: PointerEvent): Point {
  const rect = canvas.getBoundingClientRect();
  return {
    x: ((event.clientX - rect.left) / rect.width) * canvas.width,
    y: ((event.clientY - rect.top) / rect.height) * canvas.height,
  };
}

function attachBrush(canvas: HTMLCanvasElement, layer: LayerId): void {
  let stroke: Point[] | null = null;
  canvas.addEventListener("pointerdown", (event) => {
    if (!session) return;
    session.activeLayer = layer;
    stroke = [canvasPoint(canvas, event)];
    canvas.setPointerCapture(event.pointerId);
  });
  canvas.addEventListener("pointermove", (event) => {
    if (!session || !stroke) return;
    stroke.push(canvasPoint(canvas, event));
  });
  canvas.addEventListener("pointerup", () => {
    if (!session || !stroke) return;
    session.applyBrush(stroke);
    stroke = null;
    renderAll();
  });
}

async function loadSession(): Promise<void> {
  const inputFile = el<HTMLInputElement>("input-file").files?.[0];
  const exemplarFile = el<HTMLInputElement>("exemplar-file").files?.[0];
  if (!inputFile || !exemplarFile) return;
  try {
    const [input, exemplar] = await Promise.all([fileToRaster(inputFile), fileToRaster(exemplarFile)]);
    session = await EditorSession.load(api, input, exemplar);
  } catch (e) {
    el<HTMLSpanElement>("status").textContent = `could not load images: ${e}`;
    return;
  }
  renderAll();
}

function wireControls(): void {
  el<HTMLInputElement>("input-file").addEventListener("change", loadSession);
  el<HTMLInputElement>("exemplar-file").addEventListener("change", loadSession);
  attachBrush(el<HTMLCanvasElement>("input-canvas"), "input");
  attachBrush(el<HTMLCanvasElement>("exemplar-canvas"), "exemplar");

  el<HTMLSelectElement>("brush-mode").addEventListener("change", (event) => {
    if (session) session.brush.mode = (event.target as HTMLSelectElement).value as "add" | "erase";
  });
  el<HTMLInputElement>("brush-radius").addEventListener("input", (event) => {
    if (session) session.brush.radius = Number((event.target as HTMLInputElement).value);
  });
  el<HTMLInputElement>("brush-hardness").addEventListener("input", (event) => {
    if (session) session.brush.hardness = Number((event.target as HTMLInputElement).value);
  });

  el<HTMLButtonElement>("undo").addEventListener("click", () => {
    session?.undo();
    renderAll();
  });
  el<HTMLButtonElement>("redo").addEventListener("click", () => {
    session?.redo();
    renderAll();
  });
  el<HTMLButtonElement>("translate").addEventListener("click", async () => {
    if (!session) return;
    el<HTMLSpanElement>("status").textContent = "translating...";
    await session.translate();
    renderAll();
  });
  el<HTMLButtonElement>("adopt-masks").addEventListener("click", () => {
    session?.adoptReturnedMasks();
    renderAll();
  });
}

wireControls();
