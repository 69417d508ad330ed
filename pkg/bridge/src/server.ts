/**
 * HTTP wiring. POST /v1/oracle speaks the shared JSON protocol; GET
 * /healthz reports liveness and mode.
 *
 * Every failure surfaces as error_response JSON: malformed requests 400,
 * upstream protocol violations 422, retryable upstream trouble 503.
 * Clients treat 5xx as retryable transport, so genuine protocol problems
 * must stay in the 4xx range and malformed upstream output must never
 * crash the process.
 */

import express from "express";

import type { BridgeConfig } from "./config.js";
import type { ErrorResponse } from "./protocol.js";
import { oracleRequestSchema } from "./protocol.js";
import { OracleService, ProtocolError } from "./service.js";
import { UpstreamError, httpUpstream, type Upstream } from "./upstream.js";

function errorBody(error: string, detail?: string): ErrorResponse {
  return detail === undefined ? { error } : { error, detail };
}

function clip(text: string | undefined, limit = 200): string {
  if (!text) {
    return "";
  }
  return text.length > limit ? `${text.slice(0, limit)}...` : text;
}

export function createApp(cfg: BridgeConfig, upstream?: Upstream) {
  const service = new OracleService(
    cfg,
    upstream ?? (cfg.dryRun ? undefined : httpUpstream(cfg)),
  );
  const app = express();
  app.use(express.json({ limit: "1mb" }));

  app.get("/healthz", (_req, res) => {
    res.json({ status: "ok", mode: cfg.dryRun ? "dry-run" : "live" });
  });

  app.post("/v1/oracle", async (req, res) => {
    const parsed = oracleRequestSchema.safeParse(req.body);
    if (!parsed.success) {
      const issue = parsed.error.issues[0];
      const where = issue?.path.join(".") || "request";
      res
        .status(400)
        .json(errorBody("bad_request", `${where}: ${issue?.message}`));
      return;
    }
    try {
      res.json(await service.handle(parsed.data));
    } catch (err) {
      if (err instanceof ProtocolError) {
        const detail = err.raw
          ? `${err.message}; raw: ${clip(err.raw)}`
          : err.message;
        res.status(422).json(errorBody("protocol_error", detail));
      } else if (err instanceof UpstreamError) {
        res
          .status(err.retryable ? 503 : 422)
          .json(
            errorBody(
              err.retryable ? "upstream_unavailable" : "upstream_rejected",
              err.message,
            ),
          );
      } else {
        res.status(500).json(errorBody("internal", clip(String(err))));
      }
    }
  });

  app.use((req, res) => {
    res.status(404).json(errorBody("not_found", req.path));
  });

  // Body-parse failures (invalid JSON and the like) land here; answer in
  // protocol shape instead of the framework's HTML error page.
  app.use(
    (
      err: Error,
      _req: express.Request,
      res: express.Response,
      _next: express.NextFunction,
    ) => {
      res.status(400).json(errorBody("bad_request", clip(err.message)));
    },
  );

  return app;
}
