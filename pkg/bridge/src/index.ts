/**
 * CLI entry: oracle-bridge [--config FILE] [--host H] [--port N] [--dry-run]
 */

import { pathToFileURL } from "node:url";

import { loadConfig } from "./config.js";
import { createApp } from "./server.js";

interface Args {
  config?: string;
  host?: string;
  port?: number;
  dryRun?: boolean;
}

function parseArgs(argv: string[]): Args {
  const args: Args = {};
  for (let i = 0; i < argv.length; i += 1) {
    const flag = argv[i];
    if (flag === "--config") {
      args.config = argv[++i];
    } else if (flag === "--host") {
      args.host = argv[++i];
    } else if (flag === "--port") {
      args.port = Number(argv[++i]);
    } else if (flag === "--dry-run") {
      args.dryRun = true;
    } else {
      throw new Error(`unknown flag ${flag}`);
    }
  }
  return args;
}

export function main(argv: string[] = process.argv.slice(2)): void {
  const args = parseArgs(argv);
  const overrides: Record<string, unknown> = {};
  if (args.host !== undefined) overrides.host = args.host;
  if (args.port !== undefined) overrides.port = args.port;
  if (args.dryRun) overrides.dryRun = true;
  const cfg = loadConfig(args.config, process.env, overrides);

  const app = createApp(cfg);
  const server = app.listen(cfg.port, cfg.host, () => {
    const addr = server.address();
    const port = typeof addr === "object" && addr ? addr.port : cfg.port;
    console.log(
      `oracle-bridge listening on ${cfg.host}:${port} ` +
        `(${cfg.dryRun ? "dry-run" : "live"})`,
    );
  });
  const shutdown = () => server.close(() => process.exit(0));
  process.on("SIGINT", shutdown);
  process.on("SIGTERM", shutdown);
}

const invokedDirectly =
  process.argv[1] !== undefined &&
  import.meta.url === pathToFileURL(process.argv[1]).href;
if (invokedDirectly) {
  main();
}
