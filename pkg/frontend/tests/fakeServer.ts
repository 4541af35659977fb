/** In-memory stand-in for the gateway, serving the recorded TOPO5 snapshot.
 * The snapshot itself is captured from the real service and cross-checked
 * against it by the backend's test suite. */

import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

const here = dirname(fileURLToPath(import.meta.url));
export const snapshot = JSON.parse(
  readFileSync(join(here, "fixtures", "api_snapshot.json"), "utf-8"),
);

interface StoredIntent {
  record: Record<string, unknown> & { id: string; state: string };
  edges: unknown[];
}

export class FakeServer {
  intents = new Map<string, StoredIntent>();
  requests: { method: string; path: string }[] = [];
  failNext = 0; // make the next N requests fail with 503
  expireToken = false;
  private counter = 0;

  seedIntent(): string {
    const id = `intent-${++this.counter}`;
    const record = { ...snapshot.intent, id, state: "ACTIVE" };
    this.intents.set(id, { record, edges: snapshot.path.edges });
    return id;
  }

  fetch = async (input: RequestInfo | URL, init?: RequestInit): Promise<Response> => {
    const url = String(input);
    const path = url.replace(/^https?:\/\/[^/]+/, "");
    const method = init?.method ?? "GET";
    this.requests.push({ method, path });

    if (this.failNext > 0) {
      this.failNext -= 1;
      return json(503, { error: "UNAVAILABLE", message: "fake outage" });
    }
    if (method === "POST" && path === "/api/login") {
      return json(200, { token: "tok", expires_at: 9e12 });
    }
    if (this.expireToken) {
      return json(401, { error: "UNAUTHORIZED", message: "missing or expired token" });
    }
    if (method === "GET" && path === "/api/topology") {
      return json(200, snapshot.topology);
    }
    if (method === "GET" && path === "/api/intents") {
      return json(200, [...this.intents.values()].map((s) => s.record));
    }
    const pathMatch = path.match(/^\/api\/intents\/([^/]+)\/path$/);
    if (method === "GET" && pathMatch) {
      const stored = this.intents.get(pathMatch[1]);
      if (!stored) return json(404, { error: "NOT_FOUND", message: "no such intent" });
      return json(200, { id: stored.record.id, state: stored.record.state, edges: stored.edges });
    }
    if (method === "POST" && path === "/api/intents") {
      const id = this.seedIntent();
      return json(201, this.intents.get(id)!.record);
    }
    const idMatch = path.match(/^\/api\/intents\/([^/]+)$/);
    if (method === "DELETE" && idMatch) {
      const stored = this.intents.get(idMatch[1]);
      if (!stored) return json(404, { error: "NOT_FOUND", message: "no such intent" });
      if (stored.record.state !== "ACTIVE") {
        return json(409, { error: "ALREADY_WITHDRAWN", message: "already withdrawn" });
      }
      stored.record.state = "WITHDRAWN";
      return json(200, { id: stored.record.id, state: "WITHDRAWN", failed_switches: {} });
    }
    return json(404, { error: "NOT_FOUND", message: `no route ${method} ${path}` });
  };
}

function json(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}
