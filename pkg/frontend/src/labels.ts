/**
 * Frame-wise pause labels on the 50 Hz grid.
 *
 * Codes: 0 = no pause (O), 1 = semantic (S), 2 = breathing (B),
 * 3 = combined (BS). The merge rule mirrors the server exactly:
 * per-frame majority with ties broken toward the higher code
 * (BS > B > S > O), so a client-side preview and the /merge endpoint
 * must always agree.
 */

export const RATE_HZ = 50;

export type LabelCode = 0 | 1 | 2 | 3;

export const LABEL_NAMES: Record<LabelCode, string> = {
  0: 'O',
  1: 'S',
  2: 'B',
  3: 'BS',
};

export const TIE_RULE = 'BS>B>S>O';

export interface LabelDoc {
  rate_hz: number;
  labels: number[];
}

export interface MergedDoc extends LabelDoc {
  merge: 'majority';
  tie_rule: string;
  annotators: string[];
}

export function isLabelCode(v: number): v is LabelCode {
  return Number.isInteger(v) && v >= 0 && v <= 3;
}

/** Canonical bytes for a label document: fixed key order, no whitespace.
 * Serializing the same track twice yields identical strings, which is what
 * makes a save→reload round trip byte-comparable. */
export function serializeDoc(doc: LabelDoc): string {
  return JSON.stringify({ rate_hz: doc.rate_hz, labels: doc.labels });
}

export function parseDoc(body: string): LabelDoc {
  const doc = JSON.parse(body);
  if (typeof doc !== 'object' || doc === null || !Array.isArray(doc.labels)) {
    throw new Error('label document must be an object with a labels array');
  }
  for (const v of doc.labels) {
    if (!isLabelCode(v)) throw new Error(`label out of range: ${v}`);
  }
  return { rate_hz: doc.rate_hz, labels: doc.labels.slice() };
}

/** Per-frame majority vote over >= 2 equal-length tracks. */
export function majorityVote(tracks: number[][]): number[] {
  if (tracks.length < 2) throw new Error('need at least 2 tracks to merge');
  const first = tracks[0]!;
  for (const t of tracks) {
    if (t.length !== first.length) {
      throw new Error(`track length mismatch: ${t.length} vs ${first.length}`);
    }
  }
  const out = new Array<number>(first.length);
  const counts = [0, 0, 0, 0];
  for (let i = 0; i < first.length; i++) {
    counts[0] = counts[1] = counts[2] = counts[3] = 0;
    for (const t of tracks) counts[t[i]!]! += 1;
    let winner = 0;
    let best = -1;
    // scanning upward with >= makes the higher code win ties
    for (let c = 0; c <= 3; c++) {
      if (counts[c]! >= best) {
        best = counts[c]!;
        winner = c;
      }
    }
    out[i] = winner;
  }
  return out;
}

/** Same document shape the server's merge endpoint returns. */
export function mergedLabelDoc(labels: number[], annotators: string[]): MergedDoc {
  return {
    merge: 'majority',
    tie_rule: TIE_RULE,
    annotators: annotators.slice(),
    labels: labels.slice(),
    rate_hz: RATE_HZ,
  };
}
