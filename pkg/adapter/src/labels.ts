// The annotation scheme a tagger is allowed to emit. NONE marks a span to
// drop; the engine-derived PRONOUN and NUMERIC labels are never emitted by
// a tagger and are rejected in mappings.
export const SCHEME_LABELS = [
  'PERSON_FIRSTNAME',
  'PERSON_LASTNAME',
  'OCCUPATION',
  'LOCATION',
  'TIME',
  'ORGANIZATION',
  'DATE',
  'ADDRESS',
  'PHONE_NUMBER',
  'EMAIL_ADDRESS',
  'OTHER_IDENTIFYING_ATTRIBUTE',
  'NONE',
] as const;

export type SchemeLabel = (typeof SCHEME_LABELS)[number];

export const NONE: SchemeLabel = 'NONE';

export function isSchemeLabel(value: string): value is SchemeLabel {
  return (SCHEME_LABELS as readonly string[]).includes(value);
}
