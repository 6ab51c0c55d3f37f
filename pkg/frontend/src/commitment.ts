/**
 * Commit-reveal verification.
 *
 * The server publishes commitment_hash = sha256(salt + canonical) when Bob
 * submits his context, before anything is revealed; canonical is the JSON
 * serialization of the round record with keys sorted and no whitespace.
 * Recomputing the hash from the revealed record and salt proves the server
 * did not alter Alice's committed turn after seeing Bob's choices.
 */

export type JsonValue =
  | string
  | number
  | boolean
  | null
  | JsonValue[]
  | { [key: string]: JsonValue };

/**
 * Serialize exactly like the server's canonical form: object keys sorted
 * by code point, separators "," and ":", no spaces. Record fields are
 * ASCII strings, integers, booleans and nulls, so no float or unicode
 * escaping differences can arise.
 */
export function stableStringify(value: JsonValue): string {
  if (value === null || typeof value !== "object") {
    return JSON.stringify(value);
  }
  if (Array.isArray(value)) {
    return "[" + value.map(stableStringify).join(",") + "]";
  }
  const keys = Object.keys(value).sort();
  const parts = keys.map(
    (key) => JSON.stringify(key) + ":" + stableStringify(value[key] as JsonValue)
  );
  return "{" + parts.join(",") + "}";
}

export async function sha256Hex(text: string): Promise<string> {
  const data = new TextEncoder().encode(text);
  const digest = await crypto.subtle.digest("SHA-256", data);
  return Array.from(new Uint8Array(digest))
    .map((b) => b.toString(16).padStart(2, "0"))
    .join("");
}

export async function verifyCommitment(
  record: JsonValue,
  salt: string,
  expectedHash: string
): Promise<boolean> {
  const recomputed = await sha256Hex(salt + stableStringify(record));
  return recomputed === expectedHash.toLowerCase();
}
