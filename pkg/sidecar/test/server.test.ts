import { AddressInfo } from "node:net";
import { Server } from "node:http";

import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { DEFAULT_CONFIG, validateConfig } from "../src/config.js";
import { ModelLoadFailure, buildServer, serve } from "../src/server.js";

const CONFIG = { ...DEFAULT_CONFIG, max_batch: 4, dim: 16 };

let server: Server;
let base: string;

beforeAll(async () => {
  server = buildServer(CONFIG);
  await new Promise<void>((resolve) => server.listen(0, () => resolve()));
  const { port } = server.address() as AddressInfo;
  base = `http://127.0.0.1:${port}`;
});

afterAll(() => {
  server.close();
});

async function post(path: string, body: unknown): Promise<Response> {
  return fetch(`${base}${path}`, {
    method: "POST",
    headers: { "content-type": "application/json" },
    body: JSON.stringify(body),
  });
}

describe("/healthz", () => {
  it("reflects the configured model ids, mode and dim", async () => {
    const resp = await fetch(`${base}/healthz`);
    expect(resp.status).toBe(200);
    expect(await resp.json()).toEqual({
      embed_model_id: CONFIG.embed_model_id,
      chat_model_id: CONFIG.chat_model_id,
      mode: "echo",
      dim: 16,
    });
  });
});

describe("/v1/embed", () => {
  it("returns one vector per text at the advertised dim", async () => {
    const resp = await post("/v1/embed", { texts: ["a", "a", "longer text"] });
    expect(resp.status).toBe(200);
    const body = (await resp.json()) as { embeddings: number[][]; dim: number };
    expect(body.dim).toBe(16);
    expect(body.embeddings).toHaveLength(3);
    expect(body.embeddings[0]).toEqual(body.embeddings[1]);
    for (const vector of body.embeddings) {
      expect(vector).toHaveLength(16);
    }
  });

  it("is deterministic across requests", async () => {
    const first = await (await post("/v1/embed", { texts: ["stable"] })).json();
    const second = await (await post("/v1/embed", { texts: ["stable"] })).json();
    expect(first).toEqual(second);
  });

  it("returns 413 when the batch exceeds max_batch", async () => {
    const resp = await post("/v1/embed", { texts: ["a", "b", "c", "d", "e"] });
    expect(resp.status).toBe(413);
  });

  it("rejects malformed bodies with 400", async () => {
    expect((await post("/v1/embed", { texts: "not-a-list" })).status).toBe(400);
    expect((await post("/v1/embed", { texts: [1, 2] })).status).toBe(400);
  });
});

describe("/v1/chat", () => {
  const request = {
    system: "You are a helpful assistant.",
    messages: [
      { role: "user", content: "earlier turn" },
      { role: "assistant", content: "noted" },
      { role: "user", content: "ping" },
    ],
    temperature: 0,
    seed: 0,
    max_tokens: 64,
  };

  it("echoes the last user message", async () => {
    const resp = await post("/v1/chat", request);
    expect(resp.status).toBe(200);
    const body = (await resp.json()) as {
      content: string;
      usage: { prompt_tokens: number; completion_tokens: number };
    };
    expect(body.content).toBe("echo: ping");
    expect(body.usage.prompt_tokens).toBeGreaterThan(0);
    expect(body.usage.completion_tokens).toBeGreaterThan(0);
  });

  it("rejects requests without a user turn", async () => {
    const resp = await post("/v1/chat", {
      ...request,
      messages: [{ role: "assistant", content: "solo" }],
    });
    expect(resp.status).toBe(400);
  });

  it("rejects missing system or empty messages", async () => {
    expect((await post("/v1/chat", { messages: request.messages })).status).toBe(400);
    expect((await post("/v1/chat", { ...request, messages: [] })).status).toBe(400);
  });
});

describe("routing", () => {
  it("404s unknown routes", async () => {
    expect((await fetch(`${base}/nope`)).status).toBe(404);
  });
});

describe("config validation", () => {
  it("rejects out-of-range ports and batch sizes", () => {
    expect(() => validateConfig({ ...CONFIG, port: 80 })).toThrow();
    expect(() => validateConfig({ ...CONFIG, port: 70000 })).toThrow();
    expect(() => validateConfig({ ...CONFIG, max_batch: 0 })).toThrow();
  });
});

describe("serve", () => {
  it("fails fast in real mode when models cannot load", () => {
    expect(() => serve({ ...CONFIG, mode: "real" })).toThrow(ModelLoadFailure);
  });
});
