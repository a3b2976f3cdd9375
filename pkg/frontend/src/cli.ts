#!/usr/bin/env node
/**
 * Line-protocol scorer: reads one SMILES per line on standard input until
 * end-of-input, writes one line per molecule: "qed\tsa\tds" (tab-separated
 * decimals, ds is "nan" without a docking backend) or "ERR".
 *
 * Optional: --docking "<command>" pipes the valid SMILES, one per line, to
 * an external command expected to print one docking score per line.
 */

import { spawnSync } from "node:child_process";
import process from "node:process";

import { formatLine, parseOrNull, scoreSmiles } from "./index.js";

function readStdin(): Promise<string> {
  return new Promise((resolve, reject) => {
    let data = "";
    process.stdin.setEncoding("utf8");
    process.stdin.on("data", (chunk) => (data += chunk));
    process.stdin.on("end", () => resolve(data));
    process.stdin.on("error", reject);
  });
}

function dockingScores(command: string, smiles: string[]): number[] {
  if (smiles.length === 0) {
    return [];
  }
  const proc = spawnSync("sh", ["-c", command], {
    input: smiles.join("\n") + "\n",
    encoding: "utf8",
    timeout: 300_000,
  });
  if (proc.status !== 0) {
    throw new Error(`docking backend failed: ${proc.stderr}`);
  }
  const lines = proc.stdout.split("\n").filter((l) => l.length > 0);
  if (lines.length !== smiles.length) {
    throw new Error(
      `docking backend returned ${lines.length} lines for ${smiles.length} molecules`,
    );
  }
  return lines.map((l) => Number.parseFloat(l));
}

async function main(): Promise<void> {
  const args = process.argv.slice(2);
  let docking: string | null = null;
  for (let i = 0; i < args.length; i++) {
    if (args[i] === "--docking" && i + 1 < args.length) {
      docking = args[i + 1]!;
      i += 1;
    } else {
      process.stderr.write(`unknown argument: ${args[i]}\n`);
      process.exit(2);
    }
  }

  const input = await readStdin();
  const lines = input.split("\n");
  if (lines.length > 0 && lines[lines.length - 1] === "") {
    lines.pop();
  }

  let dsByIndex: Map<number, number> | null = null;
  if (docking !== null) {
    const parseable: number[] = [];
    const smiles: string[] = [];
    lines.forEach((line, i) => {
      if (parseOrNull(line) !== null) {
        parseable.push(i);
        smiles.push(line.trim());
      }
    });
    const scores = dockingScores(docking, smiles);
    dsByIndex = new Map(parseable.map((idx, j) => [idx, scores[j]!]));
  }

  const out: string[] = [];
  for (let i = 0; i < lines.length; i++) {
    const ds = dsByIndex?.get(i) ?? NaN;
    out.push(formatLine(scoreSmiles(lines[i]!, ds)));
  }
  process.stdout.write(out.join("\n") + (out.length > 0 ? "\n" : ""));
}

main().catch((err) => {
  process.stderr.write(String(err) + "\n");
  process.exit(1);
});
