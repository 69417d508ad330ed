import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["test/**/*.test.ts"],
    // the integration test shells out to the primary CLI for world
    // generation and a short training stage
    testTimeout: 120_000,
    hookTimeout: 120_000,
  },
});
