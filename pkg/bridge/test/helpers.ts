/**
 * Test helpers: validators compiled from the shared JSON schema and a
 * seeded generator for mixed protocol requests.
 */

import { readFileSync } from "node:fs";

import Ajv, { type ValidateFunction } from "ajv";

import type { OracleRequest } from "../src/protocol.js";

const schemaDoc = JSON.parse(
  readFileSync(
    new URL("../schemas/oracle_protocol.schema.json", import.meta.url),
    "utf8",
  ),
);

const ajv = new Ajv({ strict: false });
ajv.addSchema(schemaDoc);

function compiled(definition: string): ValidateFunction {
  const fn = ajv.getSchema(
    `recall-forge-oracle-protocol#/definitions/${definition}`,
  );
  if (!fn) {
    throw new Error(`definition ${definition} missing from shared schema`);
  }
  return fn;
}

export const validateGenerateRequest = compiled("generate_request");
export const validateVqaRequest = compiled("vqa_request");
export const validateGenerateResponse = compiled("generate_response");
export const validateVqaResponse = compiled("vqa_response");
export const validateErrorResponse = compiled("error_response");

/** Deterministic uniform-ish generator so failures replay exactly. */
export function lcg(seed: number): () => number {
  let s = seed >>> 0;
  return () => {
    s = (Math.imul(s, 1664525) + 1013904223) >>> 0;
    return s / 2 ** 32;
  };
}

function randInt(rand: () => number, bound: number): number {
  return Math.floor(rand() * bound);
}

function descriptor(rand: () => number, prefix: string) {
  const attrs = Array.from({ length: 4 + randInt(rand, 3) }, () =>
    randInt(rand, 5),
  );
  return { id: `${prefix}-${randInt(rand, 100000)}`, attributes: attrs };
}

function instruction(rand: () => number): string {
  const edits = 1 + randInt(rand, 3);
  const parts = Array.from(
    { length: edits },
    () => `set a${randInt(rand, 6)} to v${randInt(rand, 5)}`,
  );
  return parts.join(" ");
}

const FLAVORS = ["fashioniq", "cirr", "freeform", undefined];

/** Alternates kinds; sprinkles optional flavors and free-text instructions. */
export function randomRequest(rand: () => number, i: number): OracleRequest {
  const flavor = FLAVORS[randInt(rand, FLAVORS.length)];
  const text =
    rand() < 0.2 ? "make it rounder and darker" : instruction(rand);
  if (i % 2 === 0) {
    return {
      kind: "generate_corrective",
      reference: descriptor(rand, "ref"),
      instruction: text,
      candidate: descriptor(rand, "cand"),
      ...(flavor ? { flavor } : {}),
    };
  }
  const questions = Array.from(
    { length: 1 + randInt(rand, 3) },
    () => `is a${randInt(rand, 6)} set to v${randInt(rand, 5)}?`,
  );
  return {
    kind: "vqa_check",
    instruction: text,
    candidate: descriptor(rand, "cand"),
    questions,
    ...(flavor ? { flavor } : {}),
  };
}
