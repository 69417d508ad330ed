import { describe, expect, it } from "vitest";

import {
  generateResponseSchema,
  oracleRequestSchema,
  vqaResponseSchema,
} from "../src/protocol.js";
import {
  lcg,
  randomRequest,
  validateGenerateRequest,
  validateVqaRequest,
} from "./helpers.js";

const GENERATE = {
  kind: "generate_corrective",
  reference: { id: "ref-1", attributes: [0, 1, 2] },
  instruction: "set a1 to v3",
  candidate: { id: "cand-1", attributes: [0, 3, 2] },
};

const VQA = {
  kind: "vqa_check",
  instruction: "set a1 to v3",
  candidate: { id: "cand-1", attributes: [0, 3, 2] },
  questions: ["is a1 set to v3?"],
};

describe("request validation", () => {
  it("accepts both kinds", () => {
    expect(oracleRequestSchema.safeParse(GENERATE).success).toBe(true);
    expect(oracleRequestSchema.safeParse(VQA).success).toBe(true);
  });

  it("rejects unknown kinds and extra keys", () => {
    expect(
      oracleRequestSchema.safeParse({ ...GENERATE, kind: "divine" }).success,
    ).toBe(false);
    expect(
      oracleRequestSchema.safeParse({ ...GENERATE, mood: "hopeful" }).success,
    ).toBe(false);
  });

  it("rejects empty instructions and empty question lists", () => {
    expect(
      oracleRequestSchema.safeParse({ ...GENERATE, instruction: "" }).success,
    ).toBe(false);
    expect(
      oracleRequestSchema.safeParse({ ...VQA, questions: [] }).success,
    ).toBe(false);
  });

  it("rejects negative attribute values", () => {
    const bad = {
      ...GENERATE,
      candidate: { id: "cand-1", attributes: [0, -1] },
    };
    expect(oracleRequestSchema.safeParse(bad).success).toBe(false);
  });
});

describe("response validation", () => {
  it("requires at least one intent and a non-empty correction", () => {
    expect(
      generateResponseSchema.safeParse({
        intents: [],
        corrected_instruction: "set a1 to v3",
      }).success,
    ).toBe(false);
    expect(
      generateResponseSchema.safeParse({
        intents: [{ text: "set a1 to v3", verdict: "valid" }],
        corrected_instruction: "",
      }).success,
    ).toBe(false);
  });

  it("bounds confidence and restricts answers to the binary tokens", () => {
    const answer = (fields: object) => ({
      answers: [
        { question: "is a1 set to v3?", answer: "yes", confidence: 1, ...fields },
      ],
    });
    expect(vqaResponseSchema.safeParse(answer({})).success).toBe(true);
    expect(
      vqaResponseSchema.safeParse(answer({ confidence: 1.2 })).success,
    ).toBe(false);
    expect(
      vqaResponseSchema.safeParse(answer({ answer: "maybe" })).success,
    ).toBe(false);
  });

  it("rejects verdicts outside valid/violated", () => {
    expect(
      generateResponseSchema.safeParse({
        intents: [{ text: "set a1 to v3", verdict: "unsure" }],
        corrected_instruction: "set a1 to v3",
      }).success,
    ).toBe(false);
  });
});

describe("zod definitions against the shared schema", () => {
  it("every zod-accepted request validates under the schema file", () => {
    const rand = lcg(2024);
    for (let i = 0; i < 400; i += 1) {
      const req = randomRequest(rand, i);
      expect(oracleRequestSchema.safeParse(req).success).toBe(true);
      const validator =
        req.kind === "generate_corrective"
          ? validateGenerateRequest
          : validateVqaRequest;
      expect(validator(req)).toBe(true);
    }
  });
});
