/**
 * Bridge configuration: JSON file, then environment, then explicit
 * overrides (CLI flags), later layers winning.
 */

import { readFileSync } from "node:fs";
import { z } from "zod";

const configSchema = z.object({
  host: z.string().default("127.0.0.1"),
  port: z.number().int().min(0).max(65535).default(8791),
  upstreamUrl: z.string().default(""),
  upstreamToken: z.string().default(""),
  timeoutMs: z.number().int().positive().default(20000),
  maxConcurrentUpstream: z.number().int().min(1).default(4),
  dryRun: z.boolean().default(false),
  templatesDir: z.string().optional(),
});

export type BridgeConfig = z.infer<typeof configSchema>;

function fromEnv(env: NodeJS.ProcessEnv): Record<string, unknown> {
  const out: Record<string, unknown> = {};
  if (env.BRIDGE_HOST) out.host = env.BRIDGE_HOST;
  if (env.BRIDGE_PORT) out.port = Number(env.BRIDGE_PORT);
  if (env.BRIDGE_UPSTREAM_URL) out.upstreamUrl = env.BRIDGE_UPSTREAM_URL;
  if (env.BRIDGE_UPSTREAM_TOKEN) out.upstreamToken = env.BRIDGE_UPSTREAM_TOKEN;
  if (env.BRIDGE_TIMEOUT_MS) out.timeoutMs = Number(env.BRIDGE_TIMEOUT_MS);
  if (env.BRIDGE_MAX_CONCURRENT) {
    out.maxConcurrentUpstream = Number(env.BRIDGE_MAX_CONCURRENT);
  }
  if (env.BRIDGE_DRY_RUN) {
    out.dryRun = ["1", "true", "yes"].includes(env.BRIDGE_DRY_RUN.toLowerCase());
  }
  if (env.BRIDGE_TEMPLATES_DIR) out.templatesDir = env.BRIDGE_TEMPLATES_DIR;
  return out;
}

export function loadConfig(
  file?: string,
  env: NodeJS.ProcessEnv = process.env,
  overrides: Record<string, unknown> = {},
): BridgeConfig {
  let raw: Record<string, unknown> = {};
  if (file) {
    raw = JSON.parse(readFileSync(file, "utf8"));
  }
  const cfg = configSchema.parse({ ...raw, ...fromEnv(env), ...overrides });
  if (!cfg.dryRun && !cfg.upstreamUrl) {
    throw new Error("live mode needs upstreamUrl; set it or enable dryRun");
  }
  return cfg;
}
