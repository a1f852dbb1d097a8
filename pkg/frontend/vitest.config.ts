import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["tests/**/*.test.ts"],
    // the play-loop test trains a checkpoint and runs real sessions
    testTimeout: 120_000,
    hookTimeout: 180_000,
  },
});
