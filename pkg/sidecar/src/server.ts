import { createServer, IncomingMessage, Server, ServerResponse } from "node:http";

import { SidecarConfig, validateConfig } from "./config.js";
import { embedBatch } from "./embed.js";

interface ChatMessage {
  role: string;
  content: string;
}

interface ChatBody {
  system: string;
  messages: ChatMessage[];
  temperature: number;
  seed: number;
  max_tokens: number;
}

class HttpError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

/** Thrown at startup when real-mode models cannot be loaded. */
export class ModelLoadFailure extends Error {}

function roughTokenCount(text: string): number {
  const words = text.split(/\s+/).filter((w) => w.length > 0);
  return words.length;
}

function parseChatBody(body: unknown): ChatBody {
  if (typeof body !== "object" || body === null) {
    throw new HttpError(400, "body must be a JSON object");
  }
  const obj = body as Record<string, unknown>;
  if (typeof obj.system !== "string") {
    throw new HttpError(400, "system must be a string");
  }
  if (!Array.isArray(obj.messages) || obj.messages.length === 0) {
    throw new HttpError(400, "messages must be a nonempty array");
  }
  for (const message of obj.messages) {
    const m = message as Record<string, unknown>;
    if (typeof m?.role !== "string" || typeof m?.content !== "string") {
      throw new HttpError(400, "each message needs string role and content");
    }
  }
  const temperature = obj.temperature ?? 0;
  const seed = obj.seed ?? 0;
  const maxTokens = obj.max_tokens ?? 4096;
  if (typeof temperature !== "number" || typeof seed !== "number" || typeof maxTokens !== "number") {
    throw new HttpError(400, "temperature, seed and max_tokens must be numbers");
  }
  return {
    system: obj.system,
    messages: obj.messages as ChatMessage[],
    temperature,
    seed,
    max_tokens: maxTokens,
  };
}

function parseEmbedBody(body: unknown): string[] {
  if (typeof body !== "object" || body === null) {
    throw new HttpError(400, "body must be a JSON object");
  }
  const texts = (body as Record<string, unknown>).texts;
  if (!Array.isArray(texts) || texts.some((t) => typeof t !== "string")) {
    throw new HttpError(400, "texts must be an array of strings");
  }
  return texts as string[];
}

function echoChat(body: ChatBody): { content: string; usage: { prompt_tokens: number; completion_tokens: number } } {
  const lastUser = [...body.messages].reverse().find((m) => m.role === "user");
  if (lastUser === undefined) {
    throw new HttpError(400, "messages must contain at least one user turn");
  }
  const content = `echo: ${lastUser.content}`;
  const promptTokens =
    roughTokenCount(body.system) +
    body.messages.reduce((acc, m) => acc + roughTokenCount(m.content), 0);
  return {
    content,
    usage: { prompt_tokens: promptTokens, completion_tokens: roughTokenCount(content) },
  };
}

async function readJsonBody(req: IncomingMessage): Promise<unknown> {
  const chunks: Buffer[] = [];
  for await (const chunk of req) {
    chunks.push(chunk as Buffer);
  }
  const raw = Buffer.concat(chunks).toString("utf-8");
  try {
    return JSON.parse(raw);
  } catch {
    throw new HttpError(400, "request body is not valid JSON");
  }
}

function sendJson(res: ServerResponse, status: number, payload: unknown): void {
  const body = JSON.stringify(payload);
  res.writeHead(status, {
    "content-type": "application/json",
    "content-length": Buffer.byteLength(body),
  });
  res.end(body);
}

export function buildServer(config: SidecarConfig): Server {
  validateConfig(config);
  return createServer(async (req, res) => {
    try {
      if (req.method === "GET" && req.url === "/healthz") {
        sendJson(res, 200, {
          embed_model_id: config.embed_model_id,
          chat_model_id: config.chat_model_id,
          mode: config.mode,
          dim: config.dim,
        });
        return;
      }
      if (req.method === "POST" && req.url === "/v1/embed") {
        const texts = parseEmbedBody(await readJsonBody(req));
        if (texts.length > config.max_batch) {
          throw new HttpError(
            413,
            `batch of ${texts.length} exceeds max_batch ${config.max_batch}`,
          );
        }
        const embeddings = embedBatch(texts, config.dim, config.embed_model_id);
        sendJson(res, 200, { embeddings, dim: config.dim });
        return;
      }
      if (req.method === "POST" && req.url === "/v1/chat") {
        const body = parseChatBody(await readJsonBody(req));
        sendJson(res, 200, echoChat(body));
        return;
      }
      throw new HttpError(404, `no route for ${req.method} ${req.url}`);
    } catch (error) {
      if (error instanceof HttpError) {
        sendJson(res, error.status, { error: error.message });
      } else {
        sendJson(res, 500, { error: String(error) });
      }
    }
  });
}

export function serve(config: SidecarConfig): Promise<Server> {
  validateConfig(config);
  if (config.mode === "real") {
    // Real-model serving needs local inference runtimes that this build does
    // not bundle; startup fails fast rather than serving a broken endpoint.
    throw new ModelLoadFailure(
      `cannot load models ${config.embed_model_id} / ${config.chat_model_id}: ` +
        "no local inference runtime available",
    );
  }
  const server = buildServer(config);
  return new Promise((resolve) => {
    server.listen(config.port, () => resolve(server));
  });
}
