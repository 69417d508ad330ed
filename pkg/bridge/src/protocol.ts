/**
 * Wire protocol types.
 *
 * Mirrors schemas/oracle_protocol.schema.json field for field; the test
 * suite cross-checks accepted documents against that schema so the zod
 * definitions and the shared contract cannot drift apart silently.
 */

import { z } from "zod";

export const descriptorSchema = z.strictObject({
  id: z.string(),
  attributes: z.array(z.number().int().min(0)),
});

export const generateRequestSchema = z.strictObject({
  kind: z.literal("generate_corrective"),
  reference: descriptorSchema,
  instruction: z.string().min(1),
  candidate: descriptorSchema,
  flavor: z.string().optional(),
});

export const vqaRequestSchema = z.strictObject({
  kind: z.literal("vqa_check"),
  instruction: z.string(),
  candidate: descriptorSchema,
  questions: z.array(z.string().min(1)).min(1),
  flavor: z.string().optional(),
});

export const oracleRequestSchema = z.discriminatedUnion("kind", [
  generateRequestSchema,
  vqaRequestSchema,
]);

export const intentSchema = z.strictObject({
  text: z.string().min(1),
  verdict: z.enum(["valid", "violated"]),
});

export const generateResponseSchema = z.strictObject({
  intents: z.array(intentSchema).min(1),
  corrected_instruction: z.string().min(1),
});

export const vqaAnswerSchema = z.strictObject({
  question: z.string(),
  answer: z.enum(["yes", "no"]),
  confidence: z.number().min(0).max(1),
});

export const vqaResponseSchema = z.strictObject({
  answers: z.array(vqaAnswerSchema),
});

export type Descriptor = z.infer<typeof descriptorSchema>;
export type GenerateRequest = z.infer<typeof generateRequestSchema>;
export type VqaRequest = z.infer<typeof vqaRequestSchema>;
export type OracleRequest = z.infer<typeof oracleRequestSchema>;
export type GenerateResponse = z.infer<typeof generateResponseSchema>;
export type VqaAnswer = z.infer<typeof vqaAnswerSchema>;
export type VqaResponse = z.infer<typeof vqaResponseSchema>;

export interface ErrorResponse {
  error: string;
  detail?: string;
}
