// Editable soft-mask layer: float values in [0,1] at full image resolution.

import { dequantizeMask, quantizeMask, RasterGray } from "./codec";

export class MaskBuffer {
  readonly width: number;
  readonly height: number;
  data: Float32Array;

  constructor(width: number, height: number, data?: Float32Array) {
    if (width < 1 || height < 1) throw new Error(`invalid mask size ${width}x${height}`);
    if (data !== undefined && data.length !== width * height) {
      throw new Error(`mask data length ${data.length} != ${width}x${height}`);
    }
    this.width = width;
    this.height = height;
    this.data = data ?? new Float32Array(width * height);
  }

  static fromRaster(raster: RasterGray): MaskBuffer {
    return new MaskBuffer(raster.width, raster.height, dequantizeMask(raster.data));
  }

  toRaster(): RasterGray {
    return { width: this.width, height: this.height, data: quantizeMask(this.data) };
  }

  clone(): MaskBuffer {
    return new MaskBuffer(this.width, this.height, this.data.slice());
  }

  fill(value: number): void {
    this.data.fill(Math.min(1, Math.max(0, value)));
  }

  get(x: number, y: number): number {
    return this.data[y * this.width + x];
  }

  set(x: number, y: number, value: number): void {
    this.data[y * this.width + x] = Math.min(1, Math.max(0, value));
  }

  equals(other: MaskBuffer): boolean {
    if (other.width !== this.width || other.height !== this.height) return false;
    for (let i = 0; i < this.data.length; i++) {
      if (this.data[i] !== other.data[i]) return false;
    }
    return true;
  }
}
