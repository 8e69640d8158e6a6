// Editor session state: two images, two editable mask layers with history,
// brush state, and the latest translation result. No DOM access here; the
// UI layer renders from this state.

import { ApiClient, TranslateRequestBody, TranslateResponseBody } from "./api";
import { BrushState, Point, applyStroke } from "./brush";
import { RasterRgb, decodeImagePng, decodeMaskPng, encodeImagePng, encodeMaskPng } from "./codec";
import { History } from "./history";
import { MaskBuffer } from "./maskBuffer";

export type LayerId = "input" | "exemplar";

export class EditorSession {
  readonly inputImage: RasterRgb;
  readonly exemplarImage: RasterRgb;
  readonly masks: Record<LayerId, MaskBuffer>;
  readonly histories: Record<LayerId, History>;
  brush: BrushState = { radius: 6, hardness: 0.5, mode: "erase" };
  activeLayer: LayerId = "input";
  lastResponse: TranslateResponseBody | null = null;
  degradedMode = false; // true when auto-masks could not be fetched
  lastError: string | null = null;

  private requestCounter = 0;

  constructor(
    private api: ApiClient,
    inputImage: RasterRgb,
    exemplarImage: RasterRgb,
    private checkpointId: string = "default",
  ) {
    this.inputImage = inputImage;
    this.exemplarImage = exemplarImage;
    this.masks = {
      input: new MaskBuffer(inputImage.width, inputImage.height),
      exemplar: new MaskBuffer(exemplarImage.width, exemplarImage.height),
    };
    this.histories = { input: new History(), exemplar: new History() };
  }

  // Fetch auto-masks and install them as the editable layers. On failure the
  // session stays usable with blank masks (degraded mode).
  static async load(
    api: ApiClient,
    inputImage: RasterRgb,
    exemplarImage: RasterRgb,
    checkpointId = "default",
  ): Promise<EditorSession> {
    const session = new EditorSession(api, inputImage, exemplarImage, checkpointId);
    try {
      const res = await api.masks({
        input_image: encodeImagePng(inputImage),
        exemplar_image: encodeImagePng(exemplarImage),
        checkpoint_id: checkpointId,
      });
      session.masks.input = MaskBuffer.fromRaster(decodeMaskPng(res.input_mask));
      session.masks.exemplar = MaskBuffer.fromRaster(decodeMaskPng(res.exemplar_mask));
    } catch (e) {
      session.degradedMode = true;
      session.lastError = String(e);
    }
    session.histories.input.push(session.masks.input);
    session.histories.exemplar.push(session.masks.exemplar);
    return session;
  }

  applyBrush(stroke: Point[]): void {
    const layer = this.activeLayer;
    applyStroke(this.masks[layer], stroke, this.brush);
    this.histories[layer].push(this.masks[layer]);
  }

  undo(layer: LayerId = this.activeLayer): boolean {
    const state = this.histories[layer].undo();
    if (state === null) return false;
    this.masks[layer] = state;
    return true;
  }

  redo(layer: LayerId = this.activeLayer): boolean {
    const state = this.histories[layer].redo();
    if (state === null) return false;
    this.masks[layer] = state;
    return true;
  }

  buildTranslateRequest(): TranslateRequestBody {
    return {
      input_image: encodeImagePng(this.inputImage),
      exemplar_image: encodeImagePng(this.exemplarImage),
      input_mask_override: encodeMaskPng(this.masks.input.toRaster()),
      exemplar_mask_override: encodeMaskPng(this.masks.exemplar.toRaster()),
      checkpoint_id: this.checkpointId,
    };
  }

  // Translate with the current mask layers as overrides. Responses that have
  // been superseded by a newer request are discarded (last-write-wins).
  async translate(): Promise<TranslateResponseBody | null> {
    const ticket = ++this.requestCounter;
    this.lastError = null;
    let response: TranslateResponseBody;
    try {
      response = await this.api.translate(this.buildTranslateRequest());
    } catch (e) {
      if (ticket === this.requestCounter) this.lastError = String(e);
      return null;
    }
    if (ticket !== this.requestCounter) return null; // stale
    this.lastResponse = response;
    return response;
  }

  outputImage(): RasterRgb | null {
    return this.lastResponse ? decodeImagePng(this.lastResponse.output_image) : null;
  }

  // Replace the editable layers with the masks the service actually used.
  adoptReturnedMasks(): void {
    if (!this.lastResponse) return;
    this.masks.input = MaskBuffer.fromRaster(decodeMaskPng(this.lastResponse.input_mask));
    this.masks.exemplar = MaskBuffer.fromRaster(decodeMaskPng(this.lastResponse.exemplar_mask));
    this.histories.input.push(this.masks.input);
    this.histories.exemplar.push(this.masks.exemplar);
  }
}
