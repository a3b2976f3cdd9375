import { parseSMILES } from "openchem";
import type { Molecule } from "openchem";

import { computeQED } from "./qed.js";
import { computeSA } from "./sa.js";

export { computeQED, countAlerts } from "./qed.js";
export { computeSA } from "./sa.js";

export interface ScoreLine {
  qed: number;
  sa: number;
  ds: number; // NaN when no docking backend is configured
}

/**
 * Lexical checks openchem is lenient about: every ring-closure digit must be
 * paired and parentheses/brackets balanced.  Unclosed closures would
 * otherwise be dropped silently, scoring a different molecule than written.
 */
export function hasDanglingSyntax(smiles: string): boolean {
  const closures = new Map<string, number>();
  let paren = 0;
  let inBracket = false;
  for (let i = 0; i < smiles.length; i++) {
    const ch = smiles[i]!;
    if (inBracket) {
      if (ch === "]") inBracket = false;
      continue;
    }
    if (ch === "[") {
      inBracket = true;
    } else if (ch === "(") {
      paren += 1;
    } else if (ch === ")") {
      paren -= 1;
      if (paren < 0) return true;
    } else if (ch >= "0" && ch <= "9") {
      closures.set(ch, (closures.get(ch) ?? 0) + 1);
    } else if (ch === "%") {
      const num = smiles.slice(i + 1, i + 3);
      if (!/^\d\d$/.test(num)) return true;
      closures.set(num, (closures.get(num) ?? 0) + 1);
      i += 2;
    }
  }
  if (inBracket || paren !== 0) return true;
  for (const count of closures.values()) {
    if (count % 2 !== 0) return true;
  }
  return false;
}

export function parseOrNull(smiles: string): Molecule | null {
  const trimmed = smiles.trim();
  if (trimmed.length === 0 || hasDanglingSyntax(trimmed)) {
    return null;
  }
  let result;
  try {
    result = parseSMILES(trimmed);
  } catch {
    return null;
  }
  if (result.errors.length > 0 || result.molecules.length === 0) {
    return null;
  }
  const mol = result.molecules[0]!;
  if (!mol.atoms || mol.atoms.length === 0) {
    return null;
  }
  return mol;
}

export function scoreSmiles(smiles: string, ds: number = NaN): ScoreLine | null {
  const mol = parseOrNull(smiles);
  if (mol === null) {
    return null;
  }
  try {
    return { qed: computeQED(mol), sa: computeSA(mol), ds };
  } catch {
    return null;
  }
}

function formatValue(x: number): string {
  return Number.isNaN(x) ? "nan" : x.toFixed(6);
}

/** One protocol response line: "qed\tsa\tds" or "ERR". */
export function formatLine(score: ScoreLine | null): string {
  if (score === null) {
    return "ERR";
  }
  return [score.qed, score.sa, score.ds].map(formatValue).join("\t");
}
