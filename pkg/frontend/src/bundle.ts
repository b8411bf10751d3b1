/**
 * Bundle loading: read index.json, fetch artifacts by name, verify digests.
 */

import { createHash } from "node:crypto";
import { readFileSync } from "node:fs";
import { join } from "node:path";

import type { Artifact, BundleIndex } from "./schema.js";

export class Bundle {
  private readonly dir: string;
  readonly index: BundleIndex;

  constructor(dir: string) {
    this.dir = dir;
    const raw = readFileSync(join(dir, "index.json"), "utf-8");
    this.index = JSON.parse(raw) as BundleIndex;
  }

  names(): string[] {
    return this.index.artifacts.map((a) => a.name);
  }

  kindOf(name: string): string | undefined {
    return this.index.artifacts.find((a) => a.name === name)?.kind;
  }

  load<T>(name: string): Artifact<T> {
    const entry = this.index.artifacts.find((a) => a.name === name);
    if (!entry) {
      throw new Error(`artifact ${name} not listed in index.json`);
    }
    const bytes = readFileSync(join(this.dir, entry.file));
    const digest = createHash("sha256").update(bytes).digest("hex");
    if (digest !== entry.sha256) {
      throw new Error(`artifact ${name}: sha256 mismatch (bundle corrupt?)`);
    }
    const artifact = JSON.parse(bytes.toString("utf-8")) as Artifact<T>;
    if (artifact.kind !== entry.kind) {
      throw new Error(
        `artifact ${name}: kind ${artifact.kind} != index kind ${entry.kind}`,
      );
    }
    return artifact;
  }
}
