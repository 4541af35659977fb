/** Typed client for the gateway's documented JSON routes. */

export const API_ROUTES = [
  { method: "POST", path: "/api/login" },
  { method: "GET", path: "/api/topology" },
  { method: "GET", path: "/api/intents" },
  { method: "POST", path: "/api/intents" },
  { method: "GET", path: "/api/intents/{id}/path" },
  { method: "DELETE", path: "/api/intents/{id}" },
] as const;

export interface TopologyNode {
  id: string;
  label: string;
  kind: "switch" | "endpoint";
}

export interface TopologyEdge {
  source: string;
  target: string;
  latency_ms: number;
  capacity_mbps: number | null;
  available_mbps: number | null;
  src_port: number;
  dst_port: number | null;
}

export interface TopologyDocument {
  nodes: TopologyNode[];
  edges: TopologyEdge[];
}

export interface PathEdge {
  source: string;
  target: string;
  src_port: number;
  dst_port: number;
}

export interface IntentRecord {
  id: string;
  intent_type: string;
  from_city: string;
  to_city: string;
  demand_mbps: number;
  cookie: number;
  state: "ACTIVE" | "WITHDRAWN";
  created_at: number;
  path: { hops: unknown[]; edges: PathEdge[] };
}

export interface IntentPath {
  id: string;
  state: string;
  edges: PathEdge[];
}

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
  ) {
    super(message);
  }
}

export class ApiClient {
  token: string | null = null;

  constructor(
    private baseUrl: string = "",
    private fetchFn: typeof fetch = (...args) => fetch(...args),
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const headers: Record<string, string> = {};
    if (body !== undefined) headers["Content-Type"] = "application/json";
    if (this.token !== null) headers["Authorization"] = `Bearer ${this.token}`;
    const response = await this.fetchFn(this.baseUrl + path, {
      method,
      headers,
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const text = await response.text();
    const payload = text ? JSON.parse(text) : {};
    if (!response.ok) {
      throw new ApiError(response.status, payload.error ?? "ERROR", payload.message ?? text);
    }
    return payload as T;
  }

  async login(username: string, password: string, secondFactor?: string): Promise<void> {
    const body: Record<string, string> = { username, password };
    if (secondFactor) body.second_factor = secondFactor;
    const result = await this.request<{ token: string }>("POST", "/api/login", body);
    this.token = result.token;
  }

  topology(): Promise<TopologyDocument> {
    return this.request("GET", "/api/topology");
  }

  intents(): Promise<IntentRecord[]> {
    return this.request("GET", "/api/intents");
  }

  intentPath(id: string): Promise<IntentPath> {
    return this.request("GET", `/api/intents/${id}/path`);
  }

  createIntent(intentType: string, fromCity: string, toCity: string, demandMbps = 0): Promise<IntentRecord> {
    return this.request("POST", "/api/intents", {
      intent_type: intentType,
      from_city: fromCity,
      to_city: toCity,
      demand_mbps: demandMbps,
    });
  }

  withdrawIntent(id: string): Promise<{ id: string; state: string }> {
    return this.request("DELETE", `/api/intents/${id}`);
  }
}
