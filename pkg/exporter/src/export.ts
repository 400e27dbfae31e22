import { readFileSync, readdirSync, writeFileSync } from 'fs';
import { join } from 'path';
import { ExportManifest } from './manifest.js';
import { writeLogitsFile, LogitsRecordRow } from './logits.js';
import { loadMultiExitModel, predictBatch } from './model.js';
import { writeImageContainer } from './moodimg.js';
import { decodePng } from './png.js';
import { geometricPreprocess, normalize } from './preprocess.js';
import { RawImage } from './types.js';

export interface ExportResult {
  k: number;
  numClasses: number;
  sampleCount: number;
}

/** Run the model over every PNG in the image directory and emit the logits
 * file plus the image container (and the cost file when declared).
 *
 * Sample ids are container indexes ("0".."N-1") over the filename-sorted
 * inputs, so the two emitted files join on id exactly. Images are stored
 * after geometric preprocessing (resize + crop) but before normalization;
 * the model sees the normalized tensor. No scores are computed here: the
 * output is raw pre-softmax logits only.
 */
export async function runExport(manifest: ExportManifest): Promise<ExportResult> {
  const net = await loadMultiExitModel(manifest.model.path);
  if (net.inputHeight !== manifest.preprocess.centerCrop ||
      net.inputWidth !== manifest.preprocess.centerCrop) {
    throw new Error(
      `model expects ${net.inputHeight}x${net.inputWidth} inputs but ` +
      `preprocessing crops to ${manifest.preprocess.centerCrop}`,
    );
  }

  const stems = readdirSync(manifest.images)
    .filter((f) => f.toLowerCase().endsWith('.png'))
    .sort();
  if (stems.length === 0) {
    throw new Error(`${manifest.images}: no .png files found`);
  }

  let labelsByStem: Record<string, number> = {};
  if (manifest.labels) {
    labelsByStem = JSON.parse(readFileSync(manifest.labels, 'utf-8'));
  }

  const images: RawImage[] = [];
  const records: LogitsRecordRow[] = [];
  const batchSize = manifest.batchSize ?? 32;
  let batch: Float32Array[] = [];
  let batchIds: number[] = [];

  const flush = () => {
    if (batch.length === 0) return;
    const logits = predictBatch(net, batch);
    logits.forEach((exits, j) => {
      const index = batchIds[j];
      const stem = stems[index].replace(/\.png$/i, '');
      records[index] = {
        id: String(index),
        label: stem in labelsByStem ? labelsByStem[stem] : null,
        logits: exits,
      };
    });
    batch = [];
    batchIds = [];
  };

  for (let index = 0; index < stems.length; index++) {
    const decoded = decodePng(join(manifest.images, stems[index]));
    const prepared = geometricPreprocess(decoded, manifest.preprocess);
    images.push(prepared);
    batch.push(normalize(prepared, manifest.preprocess));
    batchIds.push(index);
    if (batch.length >= batchSize) flush();
  }
  flush();

  writeImageContainer(manifest.outputs.images, images);
  await writeLogitsFile(
    manifest.outputs.logits,
    { k: net.k, numClasses: net.numClasses, modelTag: manifest.modelTag ?? '' },
    records,
  );

  if (manifest.costModel && manifest.outputs.costs) {
    const flops = manifest.costModel.cumulativeFlops;
    if (flops.length !== net.k) {
      throw new Error(
        `costModel lists ${flops.length} exits but the model has ${net.k}`,
      );
    }
    writeFileSync(
      manifest.outputs.costs,
      `{\n  "k": ${net.k},\n  "cumulative_flops": [${flops.join(', ')}]\n}\n`,
    );
  }

  return { k: net.k, numClasses: net.numClasses, sampleCount: stems.length };
}
