// Anonymous reviewer identity: a random 128-bit token minted on first visit
// and kept in localStorage so re-votes land on the same server-side slot.

export const STORAGE_KEY = 'facescan.voter_token';

export function voterToken(storage: Storage = window.localStorage): string {
  const existing = storage.getItem(STORAGE_KEY);
  if (existing) return existing;
  const bytes = new Uint8Array(16);
  crypto.getRandomValues(bytes);
  const token = Array.from(bytes, (b) => b.toString(16).padStart(2, '0')).join('');
  storage.setItem(STORAGE_KEY, token);
  return token;
}
