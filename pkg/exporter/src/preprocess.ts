import * as tf from '@tensorflow/tfjs';
import { RawImage, assertRawImage } from './types.js';

export interface PreprocessSpec {
  resizeSmallerSideTo: number;
  centerCrop: number;
  mean: [number, number, number];
  std: [number, number, number];
}

/** Resize so the smaller side hits the target (bilinear, half-pixel
 * centers), then center-crop. Returns the 8-bit image that goes into the
 * container; normalization happens separately on the model path. */
export function geometricPreprocess(img: RawImage, spec: PreprocessSpec): RawImage {
  assertRawImage(img);
  if (img.channels !== 3) {
    throw new Error('preprocessing expects 3-channel input');
  }
  let { height, width } = img;
  let resized: RawImage;
  if (Math.min(height, width) === spec.resizeSmallerSideTo) {
    resized = img;
  } else {
    const scale = spec.resizeSmallerSideTo / Math.min(height, width);
    const newH = Math.max(spec.resizeSmallerSideTo, Math.round(height * scale));
    const newW = Math.max(spec.resizeSmallerSideTo, Math.round(width * scale));
    const out = tf.tidy(() => {
      const t = tf.tensor3d(Array.from(img.pixels), [height, width, 3], 'float32');
      const r = tf.image.resizeBilinear(t, [newH, newW], false, true);
      return r.round().clipByValue(0, 255);
    });
    const data = out.dataSync();
    out.dispose();
    resized = {
      height: newH,
      width: newW,
      channels: 3,
      pixels: Uint8Array.from(data),
    };
  }

  const crop = spec.centerCrop;
  if (resized.height < crop || resized.width < crop) {
    throw new Error(
      `image ${resized.height}x${resized.width} smaller than crop ${crop}`,
    );
  }
  const top = Math.floor((resized.height - crop) / 2);
  const left = Math.floor((resized.width - crop) / 2);
  const pixels = new Uint8Array(crop * crop * 3);
  for (let y = 0; y < crop; y++) {
    const srcOff = ((top + y) * resized.width + left) * 3;
    pixels.set(resized.pixels.subarray(srcOff, srcOff + crop * 3), y * crop * 3);
  }
  return { height: crop, width: crop, channels: 3, pixels };
}

/** Scale to [0, 1] and apply per-channel mean/std. */
export function normalize(img: RawImage, spec: PreprocessSpec): Float32Array {
  const out = new Float32Array(img.pixels.length);
  for (let i = 0; i < img.pixels.length; i++) {
    const c = i % 3;
    out[i] = (img.pixels[i] / 255 - spec.mean[c]) / spec.std[c];
  }
  return out;
}
