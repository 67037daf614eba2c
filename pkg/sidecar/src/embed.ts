import { createHash } from "node:crypto";

/**
 * Deterministic character-trigram hash embedding.
 *
 * Each trigram of the input is hashed (keyed by the model id) into a bucket
 * and a sign; the accumulated vector is L2-normalized server-side so provider
 * swaps are safe for downstream consumers that assume unit norms.  The empty
 * string maps to the zero vector.
 */
export function embedText(text: string, dim: number, key: string): number[] {
  const vector = new Array<number>(dim).fill(0);
  for (let i = 0; i + 3 <= text.length; i++) {
    const digest = createHash("sha256")
      .update(`${key}|${text.slice(i, i + 3)}`)
      .digest();
    const bucket = Number(digest.readBigUInt64BE(0) % BigInt(dim));
    const sign = (digest[8] & 1) === 1 ? 1 : -1;
    vector[bucket] += sign;
  }
  return l2Normalize(vector);
}

export function embedBatch(texts: string[], dim: number, key: string): number[][] {
  return texts.map((text) => embedText(text, dim, key));
}

function l2Normalize(vector: number[]): number[] {
  const norm = Math.sqrt(vector.reduce((acc, x) => acc + x * x, 0));
  if (norm === 0) {
    return vector;
  }
  return vector.map((x) => x / norm);
}
