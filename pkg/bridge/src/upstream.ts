/**
 * Upstream inference client.
 *
 * The bridge speaks to one text-in/text-out endpoint: POST upstreamUrl with
 * {"prompt", "kind"} and read {"text", "confidence"?}. When the upstream
 * exposes the answer-token likelihood it travels in "confidence"; callers
 * fall back to 1.0 otherwise.
 */

import { z } from "zod";

import type { BridgeConfig } from "./config.js";

export const upstreamReplySchema = z.object({
  text: z.string(),
  confidence: z.number().optional(),
});

export type UpstreamReply = z.infer<typeof upstreamReplySchema>;
export type Upstream = (prompt: string, kind: string) => Promise<UpstreamReply>;

export class UpstreamError extends Error {
  retryable: boolean;

  constructor(message: string, retryable: boolean) {
    super(message);
    this.name = "UpstreamError";
    this.retryable = retryable;
  }
}

export function httpUpstream(cfg: BridgeConfig): Upstream {
  return async (prompt, kind) => {
    const controller = new AbortController();
    const timer = setTimeout(() => controller.abort(), cfg.timeoutMs);
    let res: Response;
    try {
      res = await fetch(cfg.upstreamUrl, {
        method: "POST",
        headers: {
          "content-type": "application/json",
          ...(cfg.upstreamToken
            ? { authorization: `Bearer ${cfg.upstreamToken}` }
            : {}),
        },
        body: JSON.stringify({ prompt, kind }),
        signal: controller.signal,
      });
    } catch (err) {
      throw new UpstreamError(`upstream unreachable: ${String(err)}`, true);
    } finally {
      clearTimeout(timer);
    }
    if (res.status >= 500) {
      throw new UpstreamError(`upstream HTTP ${res.status}`, true);
    }
    if (!res.ok) {
      throw new UpstreamError(`upstream HTTP ${res.status}`, false);
    }
    let doc: unknown;
    try {
      doc = await res.json();
    } catch {
      throw new UpstreamError("upstream reply is not JSON", false);
    }
    const parsed = upstreamReplySchema.safeParse(doc);
    if (!parsed.success) {
      throw new UpstreamError("upstream reply lacks a text field", false);
    }
    return parsed.data;
  };
}

/** Caps in-flight upstream calls; FIFO wakeups. */
export class Semaphore {
  private active = 0;
  private waiters: Array<() => void> = [];

  constructor(private limit: number) {}

  async run<T>(fn: () => Promise<T>): Promise<T> {
    if (this.active >= this.limit) {
      await new Promise<void>((resolve) => this.waiters.push(resolve));
    }
    this.active += 1;
    try {
      return await fn();
    } finally {
      this.active -= 1;
      this.waiters.shift()?.();
    }
  }
}
