/** Reconnect delay schedule: doubling from 250 ms, capped at 5 s. */

export const BASE_DELAY_MS = 250;
export const MAX_DELAY_MS = 5000;

export function reconnectDelayMs(attempt: number): number {
  const n = Math.max(0, Math.floor(attempt));
  return Math.min(MAX_DELAY_MS, BASE_DELAY_MS * 2 ** n);
}
