import { readFileSync } from 'fs';
import { dirname, join } from 'path';
import * as tf from '@tensorflow/tfjs';

export interface MultiExitModel {
  model: tf.LayersModel;
  /** Number of exits: one per model output, shallow to deep. */
  k: number;
  /** Class count, identical across exits. */
  numClasses: number;
  inputHeight: number;
  inputWidth: number;
}

/** Load a layers model saved as model.json + binary weight shards. Works
 * without any filesystem IO handler by assembling the artifacts manually. */
export async function loadLayersModelFromDir(dir: string): Promise<tf.LayersModel> {
  const modelJsonPath = join(dir, 'model.json');
  const doc = JSON.parse(readFileSync(modelJsonPath, 'utf-8'));
  if (!doc.modelTopology) {
    throw new Error(`${modelJsonPath}: missing modelTopology`);
  }
  const weightSpecs: tf.io.WeightsManifestEntry[] = [];
  const buffers: Buffer[] = [];
  for (const group of doc.weightsManifest ?? []) {
    weightSpecs.push(...group.weights);
    for (const rel of group.paths) {
      buffers.push(readFileSync(join(dirname(modelJsonPath), rel)));
    }
  }
  const weightData = Buffer.concat(buffers);
  return tf.loadLayersModel(
    tf.io.fromMemory({
      modelTopology: doc.modelTopology,
      weightSpecs,
      weightData: weightData.buffer.slice(
        weightData.byteOffset,
        weightData.byteOffset + weightData.byteLength,
      ),
    }),
  );
}

/** Discover k and C from the model's outputs; every exit head must emit a
 * flat [batch, C] tensor of raw logits. */
export async function loadMultiExitModel(dir: string): Promise<MultiExitModel> {
  const model = await loadLayersModelFromDir(dir);
  const outputs = model.outputs;
  if (outputs.length < 1) {
    throw new Error('model has no outputs; need one classification head per exit');
  }
  const classCounts = outputs.map((o) => {
    const shape = o.shape;
    if (shape.length !== 2 || typeof shape[1] !== 'number') {
      throw new Error(
        `exit outputs must be [batch, classes], got shape [${shape.join(', ')}]`,
      );
    }
    return shape[1];
  });
  const numClasses = classCounts[0];
  if (classCounts.some((c) => c !== numClasses)) {
    throw new Error(`exits disagree on class count: [${classCounts.join(', ')}]`);
  }
  if (model.inputs.length !== 1) {
    throw new Error('model must take a single image tensor input');
  }
  const inShape = model.inputs[0].shape;
  if (inShape.length !== 4 || typeof inShape[1] !== 'number' ||
      typeof inShape[2] !== 'number' || inShape[3] !== 3) {
    throw new Error(
      `model input must be [batch, H, W, 3], got [${inShape.join(', ')}]`,
    );
  }
  return {
    model,
    k: outputs.length,
    numClasses,
    inputHeight: inShape[1],
    inputWidth: inShape[2],
  };
}

/** Run one batch; returns per-sample [k][C] logits in input order. */
export function predictBatch(
  net: MultiExitModel,
  batch: Float32Array[],
): number[][][] {
  const n = batch.length;
  const flat = new Float32Array(n * batch[0].length);
  batch.forEach((b, i) => flat.set(b, i * b.length));
  const input = tf.tensor4d(flat, [n, net.inputHeight, net.inputWidth, 3]);
  const raw = net.model.predict(input, { batchSize: n });
  const outputs = Array.isArray(raw) ? raw : [raw];
  const perExit = outputs.map((t) => t.dataSync());
  input.dispose();
  outputs.forEach((t) => t.dispose());
  const result: number[][][] = [];
  for (let i = 0; i < n; i++) {
    const exits: number[][] = [];
    for (let e = 0; e < net.k; e++) {
      const row = new Array<number>(net.numClasses);
      for (let c = 0; c < net.numClasses; c++) {
        row[c] = perExit[e][i * net.numClasses + c];
      }
      exits.push(row);
    }
    result.push(exits);
  }
  return result;
}
