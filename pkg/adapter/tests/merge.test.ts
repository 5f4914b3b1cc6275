import { describe, expect, it } from 'vitest';

import { LabelMapping } from '../src/mapping.js';
import {
  Entity,
  SubwordPrediction,
  mapAndMergeWords,
  mergeSubwords,
  predictionsToEntities,
} from '../src/merge.js';

const MAPPING: LabelMapping = {
  labels: {
    LOC: 'LOCATION',
    PER_FIRST: 'PERSON_FIRSTNAME',
    PER_LAST: 'PERSON_LASTNAME',
  },
  defaultToNone: true,
};

function sub(
  start: number,
  end: number,
  label: string,
  wordIndex: number,
  score = 0.9,
): SubwordPrediction {
  return { start, end, label, score, wordIndex };
}

/** Brute-force reference: merge word entities to a fixpoint by repeatedly
 *  joining any same-label pair separated by whitespace only. */
function bruteForceMerge(words: Entity[], text: string): Entity[] {
  let current = words
    .map((w) => ({ ...w }))
    .sort((a, b) => a.start - b.start);
  for (;;) {
    let changed = false;
    for (let i = 0; i + 1 < current.length; i += 1) {
      const a = current[i];
      const b = current[i + 1];
      if (a.label === b.label && /^\s*$/.test(text.slice(a.end, b.start))) {
        current.splice(i, 2, {
          start: a.start,
          end: b.end,
          label: a.label,
          score: Math.min(a.score, b.score),
        });
        changed = true;
        break;
      }
    }
    if (!changed) return current;
  }
}

describe('mergeSubwords', () => {
  it('collapses pieces of one word into its full span', () => {
    const text = 'Voldemort';
    const pieces = [sub(0, 4, 'LOC', 1), sub(4, 8, 'LOC', 1), sub(8, 9, 'LOC', 1)];
    const words = mergeSubwords(pieces);
    expect(words).toHaveLength(1);
    expect([words[0].start, words[0].end]).toEqual([0, text.length]);
  });

  it('uses the first subword label for the word', () => {
    const pieces = [sub(0, 4, 'PER_FIRST', 1), sub(4, 8, 'LOC', 1)];
    expect(mergeSubwords(pieces)[0].label).toBe('PER_FIRST');
  });

  it('takes the minimum score across pieces', () => {
    const pieces = [sub(0, 4, 'LOC', 1, 0.9), sub(4, 6, 'LOC', 1, 0.4)];
    expect(mergeSubwords(pieces)[0].score).toBe(0.4);
  });
});

describe('mapAndMergeWords', () => {
  it('merges adjacent same-label words across whitespace', () => {
    const text = 'New  York city';
    const words = [sub(0, 3, 'LOC', 1), sub(5, 9, 'LOC', 2)];
    const merged = mapAndMergeWords(words, MAPPING, text);
    expect(merged).toEqual([{ start: 0, end: 9, label: 'LOCATION', score: 0.9 }]);
  });

  it('keeps different labels separate', () => {
    const text = 'Victoria Beckham';
    const words = [sub(0, 8, 'PER_FIRST', 1), sub(9, 16, 'PER_LAST', 2)];
    expect(mapAndMergeWords(words, MAPPING, text)).toHaveLength(2);
  });

  it('does not merge across non-whitespace gaps', () => {
    const text = 'London, London';
    const words = [sub(0, 6, 'LOC', 1), sub(8, 14, 'LOC', 2)];
    expect(mapAndMergeWords(words, MAPPING, text)).toHaveLength(2);
  });

  it('drops unmapped labels before merging', () => {
    const text = 'Voldemort London';
    const words = [sub(0, 9, 'MYSTERY', 1), sub(10, 16, 'LOC', 2)];
    const merged = mapAndMergeWords(words, MAPPING, text);
    expect(merged).toEqual([{ start: 10, end: 16, label: 'LOCATION', score: 0.9 }]);
  });

  it('matches the brute-force interval merge oracle on random inputs', () => {
    // deterministic linear congruential generator
    let state = 42;
    const next = (bound: number) => {
      state = (state * 1103515245 + 12345) % 2147483648;
      return state % bound;
    };
    for (let round = 0; round < 200; round += 1) {
      const text = Array.from({ length: 60 }, () => (next(4) === 0 ? ' ' : 'x')).join('');
      const words: SubwordPrediction[] = [];
      let cursor = 0;
      let wordIndex = 0;
      while (cursor < text.length - 2 && next(10) < 8) {
        const start = Math.min(cursor + next(5), text.length - 2);
        const end = Math.min(start + 1 + next(5), text.length);
        wordIndex += 1;
        words.push(sub(start, end, ['LOC', 'PER_FIRST', 'PER_LAST'][next(3)], wordIndex));
        cursor = end + 1 + next(4);
      }
      const mapped = words.map((w) => ({
        start: w.start,
        end: w.end,
        label: MAPPING.labels[w.label]!,
        score: w.score,
      }));
      expect(mapAndMergeWords(words, MAPPING, text)).toEqual(bruteForceMerge(mapped, text));
    }
  });
});

describe('predictionsToEntities', () => {
  it('runs the full pipeline and validates offsets', () => {
    const text = 'meet Victoria Beckham in New York';
    const pieces = [
      sub(5, 9, 'PER_FIRST', 1),
      sub(9, 13, 'PER_FIRST', 1),
      sub(14, 18, 'PER_LAST', 2),
      sub(18, 21, 'PER_LAST', 2),
      sub(25, 28, 'LOC', 3),
      sub(29, 33, 'LOC', 4),
    ];
    expect(predictionsToEntities(pieces, MAPPING, text)).toEqual([
      { start: 5, end: 13, label: 'PERSON_FIRSTNAME', score: 0.9 },
      { start: 14, end: 21, label: 'PERSON_LASTNAME', score: 0.9 },
      { start: 25, end: 33, label: 'LOCATION', score: 0.9 },
    ]);
  });

  it('rejects offsets outside the text', () => {
    expect(() => predictionsToEntities([sub(0, 99, 'LOC', 1)], MAPPING, 'short')).toThrow(
      /outside text/,
    );
  });

  it('emits scalar-value offsets when the text has astral characters', () => {
    const text = '\u{1F4A5}\u{1F4A5} London';
    // UTF-16: each emoji is 2 units, so "London" spans [5, 11) in JS terms
    const utf16Start = text.indexOf('London');
    expect(utf16Start).toBe(5);
    const entities = predictionsToEntities(
      [sub(utf16Start, utf16Start + 6, 'LOC', 1)],
      MAPPING,
      text,
    );
    // scalar values: two emoji + space = 3, so the span is [3, 9)
    expect([entities[0].start, entities[0].end]).toEqual([3, 9]);
    expect([...text].slice(entities[0].start, entities[0].end).join('')).toBe('London');
  });
});
