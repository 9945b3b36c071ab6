// Display formatting for wire values. Money stays in integer minor
// units until the last moment; nothing here goes through floats.

import type { Money } from "./model.js";

const INT_GROUPING = new Intl.NumberFormat("en-IN");

export function formatMoney(value: Money): string {
  const negative = value.amount_minor < 0;
  const abs = Math.abs(value.amount_minor);
  const whole = Math.floor(abs / 100);
  const frac = String(abs % 100).padStart(2, "0");
  const symbol = value.currency === "INR" ? "₹" : `${value.currency} `;
  return `${negative ? "-" : ""}${symbol}${INT_GROUPING.format(whole)}.${frac}`;
}

/** Parse a rupee amount typed by the user into integer minor units.
 *  Accepts digits with an optional two-decimal fraction and optional
 *  thousands commas; anything else (including zero) yields null. */
export function rupeesToMinor(text: string): number | null {
  const cleaned = text.trim().replace(/,/g, "");
  const match = /^(\d+)(?:\.(\d{1,2}))?$/.exec(cleaned);
  if (match === null) return null;
  const whole = Number(match[1]);
  if (!Number.isSafeInteger(whole * 100)) return null;
  const frac = (match[2] ?? "").padEnd(2, "0");
  const minor = whole * 100 + Number(frac === "" ? "0" : frac);
  return minor > 0 ? minor : null;
}

export function formatStamp(iso: string): string {
  return iso.replace("T", " ");
}

export function shortId(claimId: string): string {
  return claimId.slice(0, 8);
}
