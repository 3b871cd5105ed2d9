import { defineConfig } from "vitest/config";

// Each end-to-end test spawns the Python core, so allow generous timeouts.
export default defineConfig({
  test: {
    testTimeout: 120_000,
    hookTimeout: 120_000,
  },
});
