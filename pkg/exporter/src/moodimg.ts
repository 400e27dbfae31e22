import { writeFileSync } from 'fs';
import { RawImage, assertRawImage } from './types.js';

const MAGIC = Buffer.from('MOODIMG1', 'ascii');

/** Serialize images to the MOODIMG1 container: magic, LE u32 count, then
 * per image u16 height, u16 width, u8 channels, raw pixels. */
export function writeImageContainer(path: string, images: RawImage[]): void {
  const parts: Buffer[] = [MAGIC];
  const count = Buffer.alloc(4);
  count.writeUInt32LE(images.length, 0);
  parts.push(count);
  for (const img of images) {
    assertRawImage(img);
    const head = Buffer.alloc(5);
    head.writeUInt16LE(img.height, 0);
    head.writeUInt16LE(img.width, 2);
    head.writeUInt8(img.channels, 4);
    parts.push(head, Buffer.from(img.pixels));
  }
  writeFileSync(path, Buffer.concat(parts));
}
