/** Raw 8-bit image: row-major, channel-interleaved. */
export interface RawImage {
  height: number;
  width: number;
  channels: 1 | 3;
  pixels: Uint8Array;
}

export function assertRawImage(img: RawImage): void {
  const expected = img.height * img.width * img.channels;
  if (img.pixels.length !== expected) {
    throw new Error(
      `pixel buffer has ${img.pixels.length} bytes, expected ${expected}`,
    );
  }
  if (img.height < 1 || img.width < 1 || img.height > 0xffff || img.width > 0xffff) {
    throw new Error(`image dimensions out of range: ${img.height}x${img.width}`);
  }
}
