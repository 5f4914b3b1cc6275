import { loadMapping } from './mapping.js';
import { predictionsToEntities } from './merge.js';
import { loadModel } from './model.js';
import { serveLines } from './protocol.js';

function parseArgs(argv: string[]): { model: string; mapping: string } {
  let model: string | undefined;
  let mapping: string | undefined;
  for (let i = 0; i < argv.length; i += 1) {
    if (argv[i] === '--model') model = argv[++i];
    else if (argv[i] === '--mapping') mapping = argv[++i];
    else {
      process.stderr.write(`unknown argument: ${argv[i]}\n`);
      process.exit(2);
    }
  }
  if (!model || !mapping) {
    process.stderr.write('usage: main.js --model <path> --mapping <path>\n');
    process.exit(2);
  }
  return { model, mapping };
}

async function main(): Promise<void> {
  const args = parseArgs(process.argv.slice(2));
  const mapping = loadMapping(args.mapping);
  const model = loadModel(args.model);
  await serveLines(async (_id, text) =>
    predictionsToEntities(await model.predict(text), mapping, text),
  );
}

main().catch((err) => {
  process.stderr.write(`fatal: ${err instanceof Error ? err.message : String(err)}\n`);
  process.exit(1);
});
