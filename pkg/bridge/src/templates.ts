/**
 * Prompt template assets.
 *
 * Plain text files with {{slot}} placeholders. Generation prompts come in
 * dataset flavors (fashioniq, cirr) plus a generic default; the VQA prompt
 * enforces the single-token binary answer.
 */

import { readFileSync } from "node:fs";
import path from "node:path";
import { fileURLToPath } from "node:url";

import type { Descriptor, GenerateRequest, VqaRequest } from "./protocol.js";

const DEFAULT_DIR = fileURLToPath(new URL("../templates", import.meta.url));

const GENERATE_FLAVORS = new Set(["fashioniq", "cirr"]);

function load(name: string, dir?: string): string {
  return readFileSync(path.join(dir ?? DEFAULT_DIR, `${name}.txt`), "utf8");
}

export function fill(template: string, slots: Record<string, string>): string {
  return template.replace(/\{\{(\w+)\}\}/g, (_, key: string) => {
    const value = slots[key];
    if (value === undefined) {
      throw new Error(`template slot ${key} has no value`);
    }
    return value;
  });
}

function describe(d: Descriptor): string {
  return `${d.id} [${d.attributes.join(", ")}]`;
}

/** Unknown flavors fall back to the generic template. */
export function generatePrompt(req: GenerateRequest, dir?: string): string {
  const flavor =
    req.flavor && GENERATE_FLAVORS.has(req.flavor) ? req.flavor : "generic";
  return fill(load(`generate_${flavor}`, dir), {
    reference: describe(req.reference),
    candidate: describe(req.candidate),
    instruction: req.instruction,
  });
}

export function vqaPrompt(
  req: VqaRequest,
  question: string,
  dir?: string,
): string {
  return fill(load("vqa_binary", dir), {
    candidate: describe(req.candidate),
    instruction: req.instruction,
    question,
  });
}
