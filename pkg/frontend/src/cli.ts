#!/usr/bin/env node
/** flowchain-plot <kind> --in data.csv [--config run.json] --out figure.svg */

import { readFileSync, writeFileSync } from "node:fs";
import { FigureKind, render } from "./figures.js";

const KINDS: FigureKind[] = ["tv_curve", "autocorr", "pterm_overlay", "counterexample"];

function parseArgs(argv: string[]): { kind: FigureKind; input: string; output: string; config?: string } {
  const [kind, ...rest] = argv;
  if (!KINDS.includes(kind as FigureKind)) {
    throw new Error(`first argument must be one of ${KINDS.join("|")}, got ${kind ?? "nothing"}`);
  }
  const flags: Record<string, string> = {};
  for (let i = 0; i < rest.length; i += 2) {
    const key = rest[i];
    const value = rest[i + 1];
    if (!key?.startsWith("--") || value === undefined) {
      throw new Error(`expected --flag value pairs, got ${rest.slice(i).join(" ")}`);
    }
    flags[key.slice(2)] = value;
  }
  if (!flags.in || !flags.out) {
    throw new Error("--in and --out are required");
  }
  return { kind: kind as FigureKind, input: flags.in, output: flags.out, config: flags.config };
}

export function main(argv: string[]): number {
  try {
    const args = parseArgs(argv);
    const svg = render({
      kind: args.kind,
      csvText: readFileSync(args.input, "utf-8"),
      configText: args.config ? readFileSync(args.config, "utf-8") : undefined,
    });
    writeFileSync(args.output, svg);
    return 0;
  } catch (error) {
    console.error(`error: ${(error as Error).message}`);
    return 1;
  }
}

const invokedDirectly = process.argv[1]?.endsWith("cli.js") || process.argv[1]?.endsWith("flowchain-plot");
if (invokedDirectly) {
  process.exit(main(process.argv.slice(2)));
}
