import { readFileSync, statSync } from 'node:fs';
import { SubwordPrediction } from './merge.js';

export interface TokenClassifier {
  predict(text: string): Promise<SubwordPrediction[]>;
}

interface StubSpec {
  type: 'stub';
  terms: Record<string, string>;
  score?: number;
  chunk?: number;
}

/** Deterministic lexicon classifier used for tests and protocol checks.
 *
 *  Words are whitespace tokens with boundary punctuation stripped; a word in
 *  the term table is emitted as per-subword predictions (fixed-size chunks)
 *  so the merging path sees realistic input.
 */
export class StubModel implements TokenClassifier {
  private readonly terms: Map<string, string>;
  private readonly score: number;
  private readonly chunk: number;

  constructor(spec: StubSpec) {
    this.terms = new Map(
      Object.entries(spec.terms).map(([term, label]) => [term.toLowerCase(), label]),
    );
    this.score = spec.score ?? 0.85;
    this.chunk = spec.chunk ?? 4;
  }

  async predict(text: string): Promise<SubwordPrediction[]> {
    const predictions: SubwordPrediction[] = [];
    let wordIndex = 0;
    for (const match of text.matchAll(/\S+/g)) {
      let start = match.index ?? 0;
      let end = start + match[0].length;
      while (start < end && !/[\p{L}\p{N}@]/u.test(text[start])) start += 1;
      while (end > start && !/[\p{L}\p{N}]/u.test(text[end - 1])) end -= 1;
      if (start >= end) continue;
      const label = this.terms.get(text.slice(start, end).toLowerCase());
      wordIndex += 1;
      if (label === undefined) continue;
      for (let piece = start; piece < end; piece += this.chunk) {
        predictions.push({
          start: piece,
          end: Math.min(piece + this.chunk, end),
          label,
          score: this.score,
          wordIndex,
        });
      }
    }
    return predictions;
  }
}

/** Transformers.js-backed classifier for a locally stored checkpoint.
 *  Loaded lazily; remote downloads are disabled so inference stays offline. */
class TransformersModel implements TokenClassifier {
  private pipelinePromise: Promise<any> | null = null;

  constructor(private readonly modelDir: string) {}

  private async pipeline(): Promise<any> {
    if (this.pipelinePromise === null) {
      this.pipelinePromise = (async () => {
        let transformers: any = null;
        // optional dependency: resolved at runtime, not install time
        for (const name of ['@huggingface/transformers', '@xenova/transformers']) {
          try {
            transformers = await import(name);
            break;
          } catch {
            continue;
          }
        }
        if (transformers === null) {
          throw new Error(
            'transformers.js is not installed; install @huggingface/transformers ' +
              'or use a stub model spec',
          );
        }
        transformers.env.allowRemoteModels = false;
        return transformers.pipeline('token-classification', this.modelDir, {
          ignore_labels: [],
        });
      })();
    }
    return this.pipelinePromise;
  }

  async predict(text: string): Promise<SubwordPrediction[]> {
    const classify = await this.pipeline();
    const output = await classify(text);
    const predictions: SubwordPrediction[] = [];
    let wordIndex = -1;
    for (const item of output) {
      if (item.start === null || item.end === null) continue;
      // B-/I- prefixes group subwords; a fresh B- (or a gap) starts a word.
      const raw = String(item.entity ?? item.entity_group ?? 'O');
      const continuing =
        raw.startsWith('I-') &&
        predictions.length > 0 &&
        predictions[predictions.length - 1].end >= item.start - 1;
      if (!continuing) wordIndex += 1;
      const label = raw.replace(/^[BI]-/, '');
      if (label === 'O') continue;
      predictions.push({
        start: item.start,
        end: item.end,
        label,
        score: Number(item.score ?? 0),
        wordIndex,
      });
    }
    return predictions;
  }
}

export function loadModel(modelPath: string): TokenClassifier {
  if (statSync(modelPath).isDirectory()) {
    return new TransformersModel(modelPath);
  }
  const spec = JSON.parse(readFileSync(modelPath, 'utf-8'));
  if (spec.type !== 'stub') {
    throw new Error(`unsupported model spec type: ${JSON.stringify(spec.type)}`);
  }
  return new StubModel(spec as StubSpec);
}
