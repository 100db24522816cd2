import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["tests/**/*.test.ts"],
    // integration test drives a real server + CLI subprocesses
    testTimeout: 60_000,
    hookTimeout: 60_000,
  },
});
