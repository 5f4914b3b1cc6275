import { readFileSync } from 'node:fs';
import { NONE, SchemeLabel, isSchemeLabel } from './labels.js';

export interface LabelMapping {
  labels: Record<string, SchemeLabel>;
  defaultToNone: boolean;
}

export class UnmappedLabelError extends Error {
  constructor(label: string) {
    super(`model label ${JSON.stringify(label)} has no mapping and default_to_none is off`);
  }
}

/** Parse a mapping file: {"labels": {"PER": "PERSON_FIRSTNAME", ...},
 *  "default_to_none": true}. Targets must belong to the annotation scheme. */
export function loadMapping(path: string): LabelMapping {
  const raw = JSON.parse(readFileSync(path, 'utf-8'));
  if (typeof raw !== 'object' || raw === null || typeof raw.labels !== 'object') {
    throw new Error(`mapping file ${path} must contain a "labels" object`);
  }
  const labels: Record<string, SchemeLabel> = {};
  for (const [from, to] of Object.entries(raw.labels as Record<string, unknown>)) {
    if (typeof to !== 'string' || !isSchemeLabel(to)) {
      throw new Error(`mapping target for ${JSON.stringify(from)} is not a scheme label: ${to}`);
    }
    labels[from] = to;
  }
  return { labels, defaultToNone: Boolean(raw.default_to_none ?? true) };
}

/** Translate one model label; NONE means "drop this span". */
export function mapLabel(label: string, mapping: LabelMapping): SchemeLabel {
  const mapped = mapping.labels[label];
  if (mapped !== undefined) return mapped;
  if (mapping.defaultToNone) return NONE;
  throw new UnmappedLabelError(label);
}
