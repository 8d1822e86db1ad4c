import { defineConfig } from 'vitest/config'

export default defineConfig({
  test: {
    environment: 'happy-dom',
    testTimeout: 120_000,
    hookTimeout: 120_000,
    // the e2e spawns one service; keep files sequential
    fileParallelism: false,
  },
})
