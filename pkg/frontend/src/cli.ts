#!/usr/bin/env node
/**
 * trajplot: render a trajcrit report bundle into SVG figures.
 *
 * Usage:
 *   trajplot --bundle report/ --out figures/ [--jobs jobs.json]
 *
 * Without --jobs one figure per renderable artifact is produced. Exits
 * nonzero if any job fails; remaining jobs still run.
 */

import { mkdirSync, readFileSync, writeFileSync } from "node:fs";
import { join } from "node:path";

import { Bundle } from "./bundle.js";
import { defaultJobs } from "./jobs.js";
import { renderJob, type PlotJob } from "./plots.js";

interface Args {
  bundle: string;
  out: string;
  jobs?: string;
}

function parseArgs(argv: string[]): Args {
  const args: Partial<Args> = {};
  for (let i = 0; i < argv.length; i++) {
    const flag = argv[i];
    if (flag === "--bundle" || flag === "--out" || flag === "--jobs") {
      const value = argv[++i];
      if (value === undefined) {
        throw new Error(`missing value for ${flag}`);
      }
      args[flag.slice(2) as keyof Args] = value;
    } else {
      throw new Error(`unknown flag ${flag}`);
    }
  }
  if (!args.bundle || !args.out) {
    throw new Error("both --bundle and --out are required");
  }
  return args as Args;
}

export function run(argv: string[]): number {
  let args: Args;
  try {
    args = parseArgs(argv);
  } catch (err) {
    console.error(`usage: trajplot --bundle DIR --out DIR [--jobs FILE]`);
    console.error(String(err));
    return 2;
  }
  const bundle = new Bundle(args.bundle);
  const jobs: PlotJob[] = args.jobs
    ? (JSON.parse(readFileSync(args.jobs, "utf-8")) as PlotJob[])
    : defaultJobs(bundle);
  mkdirSync(args.out, { recursive: true });

  let failures = 0;
  for (const job of jobs) {
    try {
      const result = renderJob(bundle, job);
      writeFileSync(join(args.out, job.out), result.svg);
      console.log(`rendered ${job.artifact} (${job.kind}) -> ${job.out}`);
    } catch (err) {
      failures += 1;
      console.error(`FAILED ${job.artifact} (${job.kind}): ${String(err)}`);
    }
  }
  console.log(`${jobs.length - failures}/${jobs.length} figures rendered`);
  return failures > 0 ? 1 : 0;
}

const invokedDirectly =
  process.argv[1] !== undefined &&
  import.meta.url.endsWith(process.argv[1].split("/").pop() ?? "");
if (invokedDirectly) {
  process.exit(run(process.argv.slice(2)));
}
