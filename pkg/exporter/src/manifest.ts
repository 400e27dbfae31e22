import { readFileSync } from 'fs';
import { dirname, resolve } from 'path';

/** What to run, how to preprocess, and where to write. k and C are
 * discovered from the model, never declared here. */
export interface ExportManifest {
  model: { kind: 'tfjs-layers'; path: string };
  images: string;
  preprocess: {
    resizeSmallerSideTo: number;
    centerCrop: number;
    /** Per-channel normalization applied after scaling pixels to [0, 1]. */
    mean: [number, number, number];
    std: [number, number, number];
  };
  /** Optional JSON file mapping image filename stems to class indexes. */
  labels?: string;
  modelTag?: string;
  batchSize?: number;
  outputs: {
    logits: string;
    images: string;
    /** Written only when costModel is declared. */
    costs?: string;
  };
  /** Cumulative inference cost per exit, from the model's spec sheet. */
  costModel?: { cumulativeFlops: number[] };
}

function fail(msg: string): never {
  throw new Error(`manifest: ${msg}`);
}

export function loadManifest(path: string): ExportManifest {
  const doc = JSON.parse(readFileSync(path, 'utf-8'));
  const base = dirname(resolve(path));
  const rel = (p: string) => resolve(base, p);

  if (doc.model?.kind !== 'tfjs-layers' || typeof doc.model?.path !== 'string') {
    fail('model must be {kind: "tfjs-layers", path: "..."}');
  }
  if (typeof doc.images !== 'string') fail('images must be a directory path');
  const pp = doc.preprocess;
  if (!pp || typeof pp.resizeSmallerSideTo !== 'number' ||
      typeof pp.centerCrop !== 'number') {
    fail('preprocess needs resizeSmallerSideTo and centerCrop');
  }
  for (const key of ['mean', 'std'] as const) {
    if (!Array.isArray(pp[key]) || pp[key].length !== 3 ||
        pp[key].some((v: unknown) => typeof v !== 'number')) {
      fail(`preprocess.${key} must be three numbers`);
    }
  }
  if (pp.std.some((v: number) => v === 0)) fail('preprocess.std must be nonzero');
  if (pp.centerCrop > pp.resizeSmallerSideTo) {
    fail('centerCrop cannot exceed resizeSmallerSideTo');
  }
  if (!doc.outputs || typeof doc.outputs.logits !== 'string' ||
      typeof doc.outputs.images !== 'string') {
    fail('outputs needs logits and images paths');
  }
  if (doc.costModel) {
    const flops = doc.costModel.cumulativeFlops;
    if (!Array.isArray(flops) || flops.some((v: unknown) => typeof v !== 'number')) {
      fail('costModel.cumulativeFlops must be a number array');
    }
    for (let i = 1; i < flops.length; i++) {
      if (flops[i] <= flops[i - 1]) fail('cumulativeFlops must be strictly increasing');
    }
    if (typeof doc.outputs.costs !== 'string') {
      fail('costModel declared but outputs.costs path missing');
    }
  }

  return {
    model: { kind: 'tfjs-layers', path: rel(doc.model.path) },
    images: rel(doc.images),
    preprocess: {
      resizeSmallerSideTo: pp.resizeSmallerSideTo,
      centerCrop: pp.centerCrop,
      mean: pp.mean as [number, number, number],
      std: pp.std as [number, number, number],
    },
    labels: doc.labels ? rel(doc.labels) : undefined,
    modelTag: doc.modelTag ?? 'tfjs-export',
    batchSize: doc.batchSize ?? 32,
    outputs: {
      logits: rel(doc.outputs.logits),
      images: rel(doc.outputs.images),
      costs: doc.outputs.costs ? rel(doc.outputs.costs) : undefined,
    },
    costModel: doc.costModel,
  };
}
