import { defineConfig } from 'vitest/config';

// train/parity tests saturate the CPU; run files sequentially
export default defineConfig({
  test: {
    include: ['test/**/*.test.ts'],
    fileParallelism: false,
    testTimeout: 1_200_000,
    hookTimeout: 600_000,
  },
});
