import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    environment: "node",
    include: ["tests/**/*.test.ts"],
    // the end-to-end suite spawns the Python service and replays whole cases
    testTimeout: 120_000,
    hookTimeout: 60_000,
  },
});
