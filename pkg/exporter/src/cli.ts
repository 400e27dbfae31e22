import { loadManifest } from './manifest.js';
import { runExport } from './export.js';

async function main(): Promise<number> {
  const args = process.argv.slice(2);
  if (args.length !== 1) {
    console.error('usage: mood-export <manifest.json>');
    return 1;
  }
  try {
    const manifest = loadManifest(args[0]);
    const result = await runExport(manifest);
    console.log(
      `exported ${result.sampleCount} samples ` +
      `(k=${result.k}, num_classes=${result.numClasses})`,
    );
    return 0;
  } catch (err) {
    console.error(`error: ${(err as Error).message}`);
    return 1;
  }
}

main().then((code) => {
  process.exitCode = code;
});
