import { defineConfig } from "vitest/config";

export default defineConfig({
  resolve: {
    // Source files import with .js suffixes so the emitted modules run
    // unbundled in the browser; strip the suffix so vite finds the .ts.
    alias: [{ find: /^(\.{1,2}\/.*)\.js$/, replacement: "$1" }],
  },
  test: {
    environment: "happy-dom",
    include: ["test/**/*.test.ts"],
    testTimeout: 30_000,
    hookTimeout: 30_000,
  },
});
