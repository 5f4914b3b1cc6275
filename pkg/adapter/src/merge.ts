import { NONE, SchemeLabel } from './labels.js';
import { LabelMapping, mapLabel } from './mapping.js';
import { scalarLength, scalarOffsetConverter } from './offsets.js';

/** One model prediction for a subword piece, in character offsets of the
 *  request text. wordIndex ties pieces of the same word together. */
export interface SubwordPrediction {
  start: number;
  end: number;
  label: string;
  score: number;
  wordIndex: number;
}

export interface Entity {
  start: number;
  end: number;
  label: SchemeLabel;
  score: number;
}

/** Collapse subword predictions into word-level predictions. A word takes
 *  the label of its first subword; its span covers all its subwords. */
export function mergeSubwords(predictions: SubwordPrediction[]): SubwordPrediction[] {
  const byWord = new Map<number, SubwordPrediction[]>();
  for (const prediction of predictions) {
    const group = byWord.get(prediction.wordIndex);
    if (group) group.push(prediction);
    else byWord.set(prediction.wordIndex, [prediction]);
  }
  const words: SubwordPrediction[] = [];
  for (const [wordIndex, group] of byWord) {
    group.sort((a, b) => a.start - b.start);
    words.push({
      start: group[0].start,
      end: group[group.length - 1].end,
      label: group[0].label,
      score: Math.min(...group.map((p) => p.score)),
      wordIndex,
    });
  }
  words.sort((a, b) => a.start - b.start);
  return words;
}

/** Map labels onto the scheme, drop NONE words, then merge adjacent words
 *  that share a label and are separated by whitespace only. */
export function mapAndMergeWords(
  words: SubwordPrediction[],
  mapping: LabelMapping,
  text: string,
): Entity[] {
  const mapped: Entity[] = [];
  for (const word of words) {
    const label = mapLabel(word.label, mapping);
    if (label === NONE) continue;
    mapped.push({ start: word.start, end: word.end, label, score: word.score });
  }
  mapped.sort((a, b) => a.start - b.start);
  const merged: Entity[] = [];
  for (const entity of mapped) {
    const last = merged[merged.length - 1];
    if (
      last !== undefined &&
      last.label === entity.label &&
      entity.start >= last.end &&
      /^\s*$/.test(text.slice(last.end, entity.start))
    ) {
      last.end = entity.end;
      last.score = Math.min(last.score, entity.score);
    } else {
      merged.push({ ...entity });
    }
  }
  return merged;
}

/** Full pipeline. Input offsets are UTF-16 (native JS); output offsets are
 *  Unicode scalar values as the wire protocol requires. */
export function predictionsToEntities(
  predictions: SubwordPrediction[],
  mapping: LabelMapping,
  text: string,
): Entity[] {
  const entities = mapAndMergeWords(mergeSubwords(predictions), mapping, text);
  const toScalar = scalarOffsetConverter(text);
  const limit = scalarLength(text);
  const converted = entities.map((entity) => ({
    ...entity,
    start: toScalar(entity.start),
    end: toScalar(entity.end),
  }));
  for (const entity of converted) {
    if (!(entity.start >= 0 && entity.start < entity.end && entity.end <= limit)) {
      throw new Error(`entity offsets [${entity.start},${entity.end}) outside text`);
    }
  }
  return converted;
}
