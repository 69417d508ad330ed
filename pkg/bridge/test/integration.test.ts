/**
 * End-to-end check against the primary pipeline: prepare a small run with
 * the primary CLI, stand up the dry-run bridge, and point the calibrate
 * stage at it over real HTTP.
 */

import { execFile } from "node:child_process";
import { mkdtempSync, readFileSync, rmSync, writeFileSync } from "node:fs";
import type { Server } from "node:http";
import { tmpdir } from "node:os";
import path from "node:path";
import { promisify } from "node:util";

import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { createApp } from "../src/server.js";

const execFileAsync = promisify(execFile);

const CLI = "recall-forge";

const PROBE_CONFIG = {
  seed: 13,
  world: {
    num_attributes: 4,
    values_per_attribute: 4,
    num_items: 260,
    num_queries: 90,
    confusables_per_query: 2,
  },
  stage1: { steps: 60, batch_size: 24 },
  calibration: { oracle: "remote" },
};

// Async so the in-process bridge keeps serving while the CLI runs.
async function run(args: string[], cwd: string): Promise<string> {
  const { stdout } = await execFileAsync(CLI, args, { cwd });
  return stdout;
}

describe("primary calibrate against the dry-run bridge", () => {
  let workDir: string;
  let runDir: string;
  let server: Server;
  let oracleUrl: string;

  beforeAll(async () => {
    workDir = mkdtempSync(path.join(tmpdir(), "bridge-integration-"));
    runDir = path.join(workDir, "run");
    const cfgPath = path.join(workDir, "config.json");
    writeFileSync(cfgPath, JSON.stringify(PROBE_CONFIG));
    await run(["gen-world", "--config", cfgPath, "--out", runDir], workDir);
    await run(["train-base", "--out", runDir], workDir);
    await run(["mine", "--out", runDir], workDir);

    const app = createApp({
      host: "127.0.0.1",
      port: 0,
      upstreamUrl: "",
      upstreamToken: "",
      timeoutMs: 5000,
      maxConcurrentUpstream: 4,
      dryRun: true,
    });
    await new Promise<void>((resolve) => {
      server = app.listen(0, "127.0.0.1", () => resolve());
    });
    const addr = server.address();
    if (typeof addr !== "object" || !addr) throw new Error("no address");
    oracleUrl = `http://127.0.0.1:${addr.port}`;
  });

  afterAll(() => {
    server?.close();
    rmSync(workDir, { recursive: true, force: true });
  });

  it("completes with every generated corrective kept", async () => {
    const health = await fetch(`${oracleUrl}/healthz`);
    expect(((await health.json()) as { mode: string }).mode).toBe("dry-run");

    const out = await run(
      ["calibrate", "--out", runDir, "--oracle-url", oracleUrl],
      workDir,
    );
    const summary = JSON.parse(out);
    expect(summary.generated).toBeGreaterThan(0);
    expect(summary.kept).toBe(summary.generated);
    expect(summary.rejected).toBe(0);

    const keptLines = readFileSync(
      path.join(runDir, "calibration", "kept.jsonl"),
      "utf8",
    )
      .trim()
      .split("\n");
    expect(keptLines.length).toBe(summary.kept);
    for (const line of keptLines) {
      const record = JSON.parse(line);
      expect(record.corrected_instruction.length).toBeGreaterThan(0);
      expect(record.filter.passed).toBe(true);
      for (const answer of record.filter.answers) {
        expect(answer.answer).toBe("yes");
        expect(answer.confidence).toBe(1.0);
      }
    }
  });
});
