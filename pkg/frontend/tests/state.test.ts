import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import { ApiClient } from "../src/api.js";
import { ViewStore } from "../src/state.js";
import { edgeKey, pathEdgeKeys } from "../src/render.js";
import { FakeServer } from "./fakeServer.js";

function makeStore(server: FakeServer, pollMs = 2000): ViewStore {
  // Delegate per call so tests can swap server.fetch mid-flight.
  return new ViewStore(new ApiClient("", (input, init) => server.fetch(input, init)), pollMs);
}

describe("view store", () => {
  let server: FakeServer;

  beforeEach(() => {
    server = new FakeServer();
  });

  afterEach(() => {
    vi.useRealTimers();
  });

  it("logs in and loads the topology", async () => {
    const store = makeStore(server);
    expect(await store.login("admin", "admin")).toBe(true);
    expect(store.state.auth).toBe(true);
    expect(store.state.topology?.nodes).toHaveLength(8);
    expect(store.state.topology?.edges).toHaveLength(9);
  });

  it("highlight equals exactly the server-reported path edges", async () => {
    const id = server.seedIntent();
    const store = makeStore(server);
    await store.login("admin", "admin");
    await store.selectIntent(id);
    const keys = pathEdgeKeys(store.state.highlight);
    expect(keys).toEqual(
      new Set([edgeKey("s1", 2, "s4", 1), edgeKey("s4", 2, "s3", 2)]),
    );
    expect(store.state.highlight).toHaveLength(2);

    await store.selectIntent(null);
    expect(store.state.highlight).toEqual([]);
  });

  it("withdraw clears the highlight within one poll interval", async () => {
    vi.useFakeTimers();
    const id = server.seedIntent();
    const store = makeStore(server, 2000);
    await store.login("admin", "admin");
    await store.selectIntent(id);
    expect(store.state.highlight).toHaveLength(2);
    store.startPolling();

    // Withdraw out-of-band (as the REPL or another operator would).
    server.intents.get(id)!.record.state = "WITHDRAWN";
    await vi.advanceTimersByTimeAsync(2000);
    expect(store.state.selectedIntent).toBeNull();
    expect(store.state.highlight).toEqual([]);
    store.stopPolling();
  });

  it("creating an intent auto-selects and highlights its path", async () => {
    const store = makeStore(server);
    await store.login("admin", "admin");
    await store.createIntent("high bandwidth", "denver", "new york");
    expect(store.state.selectedIntent).not.toBeNull();
    expect(store.state.highlight).toHaveLength(2);
  });

  it("rejects identical from/to without calling the server", async () => {
    const store = makeStore(server);
    await store.login("admin", "admin");
    const before = server.requests.length;
    await store.createIntent("least latency", "denver", "denver");
    expect(store.state.error).toMatch(/differ/);
    expect(server.requests.length).toBe(before);
  });

  it("shows the API error message verbatim", async () => {
    const store = makeStore(server);
    await store.login("admin", "admin");
    await store.withdrawIntent("missing-id");
    expect(store.state.error).toBe("no such intent");
  });

  it("drops back to the login view on a 401", async () => {
    const store = makeStore(server);
    await store.login("admin", "admin");
    server.expireToken = true;
    await store.refresh();
    expect(store.state.auth).toBe(false);
    expect(store.state.topology).toBeNull();
  });

  it("poll failures surface an error banner and recover", async () => {
    const store = makeStore(server);
    await store.login("admin", "admin");
    server.failNext = 1;
    await store.refresh();
    expect(store.state.error).toBe("fake outage");
    await store.refresh();
    expect(store.state.error).toBeNull();
  });

  it("out-of-order poll responses lose (last write wins)", async () => {
    const id = server.seedIntent();
    const store = makeStore(server);
    await store.login("admin", "admin");

    // Stall the first refresh's topology fetch; let a later one finish first.
    let releaseFirst: (() => void) | null = null;
    const realFetch = server.fetch;
    let stalled = false;
    server.fetch = async (input, init) => {
      const path = String(input);
      if (!stalled && path.endsWith("/api/topology")) {
        stalled = true;
        await new Promise<void>((resolve) => {
          releaseFirst = resolve;
        });
      }
      return realFetch(input, init);
    };

    const first = store.refresh();
    await new Promise((r) => setTimeout(r, 10));
    const second = store.refresh();
    await second;
    await store.selectIntent(id); // state the stale response must not clobber
    releaseFirst!();
    await first;
    expect(store.state.selectedIntent).toBe(id);
    expect(store.state.highlight).toHaveLength(2);
  });
});
