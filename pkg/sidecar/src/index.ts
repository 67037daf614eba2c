import { parseArgs } from "node:util";

import { DEFAULT_CONFIG, SidecarConfig, SidecarMode } from "./config.js";
import { ModelLoadFailure, serve } from "./server.js";

function configFromArgs(argv: string[]): SidecarConfig {
  const { values } = parseArgs({
    args: argv,
    options: {
      port: { type: "string" },
      mode: { type: "string" },
      "max-batch": { type: "string" },
      dim: { type: "string" },
      "embed-model": { type: "string" },
      "chat-model": { type: "string" },
    },
  });
  return {
    embed_model_id: values["embed-model"] ?? DEFAULT_CONFIG.embed_model_id,
    chat_model_id: values["chat-model"] ?? DEFAULT_CONFIG.chat_model_id,
    mode: (values.mode ?? DEFAULT_CONFIG.mode) as SidecarMode,
    port: values.port !== undefined ? Number(values.port) : DEFAULT_CONFIG.port,
    max_batch:
      values["max-batch"] !== undefined ? Number(values["max-batch"]) : DEFAULT_CONFIG.max_batch,
    dim: values.dim !== undefined ? Number(values.dim) : DEFAULT_CONFIG.dim,
  };
}

async function main(): Promise<void> {
  const config = configFromArgs(process.argv.slice(2));
  try {
    await serve(config);
    console.log(`sidecar listening on :${config.port} (mode=${config.mode})`);
  } catch (error) {
    if (error instanceof ModelLoadFailure) {
      console.error(`model load failure: ${error.message}`);
      process.exit(1);
    }
    throw error;
  }
}

main();
