import { createWriteStream } from 'fs';

export interface LogitsRecordRow {
  id: string;
  label: number | null;
  /** k exit vectors of C raw (pre-softmax) logits. */
  logits: number[][];
}

/** Write the logits file: one JSON header line, one record per line.
 * JSON.stringify emits shortest-round-trip numbers, so files are
 * byte-stable and parse back to the exact values. */
export async function writeLogitsFile(
  path: string,
  header: { k: number; numClasses: number; modelTag: string },
  records: Iterable<LogitsRecordRow>,
): Promise<void> {
  const stream = createWriteStream(path, { encoding: 'utf-8' });
  const write = (line: string) =>
    new Promise<void>((res, rej) =>
      stream.write(line, (err) => (err ? rej(err) : res())),
    );
  await write(
    JSON.stringify({
      k: header.k,
      num_classes: header.numClasses,
      model_tag: header.modelTag,
    }) + '\n',
  );
  for (const rec of records) {
    if (rec.logits.length !== header.k ||
        rec.logits.some((row) => row.length !== header.numClasses)) {
      throw new Error(
        `record ${rec.id}: logits must be ${header.k} x ${header.numClasses}`,
      );
    }
    for (const row of rec.logits) {
      for (const v of row) {
        if (!Number.isFinite(v)) {
          throw new Error(`record ${rec.id}: non-finite logit`);
        }
      }
    }
    await write(
      `{"id":${JSON.stringify(rec.id)},"label":${
        rec.label === null ? 'null' : rec.label
      },"logits":[${rec.logits
        .map((row) => `[${row.join(',')}]`)
        .join(',')}]}\n`,
    );
  }
  await new Promise<void>((res, rej) =>
    stream.end((err?: Error) => (err ? rej(err) : res())),
  );
}
