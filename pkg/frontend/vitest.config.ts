import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    environment: "node",
    testTimeout: 20000,
    // the integration suite builds a phantom volume and runs the tracking
    // service in a child process; give setup room to breathe
    hookTimeout: 240000,
  },
});
