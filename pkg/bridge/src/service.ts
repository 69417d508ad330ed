/**
 * Request handling: fill the prompt for the requested kind, call the
 * upstream, and parse its output back into a protocol response. Dry-run
 * mode synthesizes schema-valid placeholder responses from the request
 * alone so callers can integrate without any upstream.
 */

import type { BridgeConfig } from "./config.js";
import {
  GenerateRequest,
  GenerateResponse,
  OracleRequest,
  VqaRequest,
  VqaResponse,
  generateResponseSchema,
} from "./protocol.js";
import { generatePrompt, vqaPrompt } from "./templates.js";
import { Semaphore, type Upstream } from "./upstream.js";

/** The upstream answered, but not in protocol; raw payload kept for logs. */
export class ProtocolError extends Error {
  raw?: string;

  constructor(message: string, raw?: string) {
    super(message);
    this.name = "ProtocolError";
    this.raw = raw;
  }
}

/** Map free-form model text onto the strict binary token, or null. */
export function normalizeBinary(text: string): "yes" | "no" | null {
  const token = text.trim().toLowerCase().replace(/[.!?]+$/, "");
  return token === "yes" || token === "no" ? token : null;
}

const EDIT_TOKENS = 4; // "set aN to vM"

function dryRunGenerate(req: GenerateRequest): GenerateResponse {
  const tokens = req.instruction.split(/\s+/).filter(Boolean);
  const intents: GenerateResponse["intents"] = [];
  if (tokens.length >= EDIT_TOKENS && tokens.length % EDIT_TOKENS === 0) {
    for (let i = 0; i < tokens.length; i += EDIT_TOKENS) {
      intents.push({
        text: tokens.slice(i, i + EDIT_TOKENS).join(" "),
        verdict: "valid",
      });
    }
  } else {
    intents.push({ text: req.instruction, verdict: "valid" });
  }
  // Echoing the instruction keeps the response well-formed and parseable
  // downstream; it does not claim anything about the candidate.
  return { intents, corrected_instruction: req.instruction };
}

function dryRunVqa(req: VqaRequest): VqaResponse {
  return {
    answers: req.questions.map((question) => ({
      question,
      answer: "yes",
      confidence: 1.0,
    })),
  };
}

export class OracleService {
  private sem: Semaphore;

  constructor(
    private cfg: BridgeConfig,
    private upstream?: Upstream,
  ) {
    if (!cfg.dryRun && !upstream) {
      throw new Error("live mode needs an upstream client");
    }
    this.sem = new Semaphore(cfg.maxConcurrentUpstream);
  }

  async handle(req: OracleRequest): Promise<GenerateResponse | VqaResponse> {
    return req.kind === "generate_corrective"
      ? this.generate(req)
      : this.vqa(req);
  }

  private async generate(req: GenerateRequest): Promise<GenerateResponse> {
    if (this.cfg.dryRun) {
      return dryRunGenerate(req);
    }
    const prompt = generatePrompt(req, this.cfg.templatesDir);
    const reply = await this.sem.run(() => this.upstream!(prompt, req.kind));
    let doc: unknown;
    try {
      doc = JSON.parse(reply.text);
    } catch {
      throw new ProtocolError("model output is not JSON", reply.text);
    }
    const parsed = generateResponseSchema.safeParse(doc);
    if (!parsed.success) {
      const issue = parsed.error.issues[0];
      throw new ProtocolError(
        `model output violates the response schema: ${issue?.message}`,
        reply.text,
      );
    }
    return parsed.data;
  }

  private async vqa(req: VqaRequest): Promise<VqaResponse> {
    if (this.cfg.dryRun) {
      return dryRunVqa(req);
    }
    // One upstream call per question; answers stay in question order.
    const answers = await Promise.all(
      req.questions.map((question) =>
        this.sem.run(async () => {
          const prompt = vqaPrompt(req, question, this.cfg.templatesDir);
          const reply = await this.upstream!(prompt, req.kind);
          const answer = normalizeBinary(reply.text);
          if (answer === null) {
            throw new ProtocolError(
              "answer is not normalizable to yes/no",
              reply.text,
            );
          }
          const confidence = reply.confidence ?? 1.0;
          if (!(confidence >= 0 && confidence <= 1)) {
            throw new ProtocolError(
              `confidence ${reply.confidence} outside [0, 1]`,
              reply.text,
            );
          }
          return { question, answer, confidence };
        }),
      ),
    );
    return { answers };
  }
}
