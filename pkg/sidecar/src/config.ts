export type SidecarMode = "real" | "echo";

export interface SidecarConfig {
  embed_model_id: string;
  chat_model_id: string;
  mode: SidecarMode;
  port: number;
  max_batch: number;
  dim: number;
}

export const DEFAULT_CONFIG: SidecarConfig = {
  embed_model_id: "hash-trigram-v1",
  chat_model_id: "echo-v1",
  mode: "echo",
  port: 8900,
  max_batch: 64,
  dim: 64,
};

export function validateConfig(config: SidecarConfig): SidecarConfig {
  if (!Number.isInteger(config.port) || config.port < 1024 || config.port > 65535) {
    throw new Error(`port must be an integer in [1024, 65535], got ${config.port}`);
  }
  if (!Number.isInteger(config.max_batch) || config.max_batch < 1) {
    throw new Error(`max_batch must be >= 1, got ${config.max_batch}`);
  }
  if (!Number.isInteger(config.dim) || config.dim < 1) {
    throw new Error(`dim must be >= 1, got ${config.dim}`);
  }
  if (config.mode !== "real" && config.mode !== "echo") {
    throw new Error(`mode must be "real" or "echo", got ${JSON.stringify(config.mode)}`);
  }
  return config;
}
