import { readFileSync } from 'fs';
import { PNG } from 'pngjs';
import { RawImage } from './types.js';

/** Decode a PNG file to 3-channel RGB (alpha dropped, grayscale expanded). */
export function decodePng(path: string): RawImage {
  let png: PNG;
  try {
    png = PNG.sync.read(readFileSync(path));
  } catch (err) {
    throw new Error(`${path}: cannot decode PNG (${(err as Error).message})`);
  }
  // pngjs always hands back RGBA.
  const { width, height, data } = png;
  const pixels = new Uint8Array(height * width * 3);
  for (let i = 0, j = 0; i < data.length; i += 4, j += 3) {
    pixels[j] = data[i];
    pixels[j + 1] = data[i + 1];
    pixels[j + 2] = data[i + 2];
  }
  return { height, width, channels: 3, pixels };
}
