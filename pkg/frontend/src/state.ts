/** View state and polling. The highlight is always exactly the edge list the
 * server reported for the selected intent; there is no client-side routing. */

import { ApiClient, ApiError, IntentRecord, PathEdge, TopologyDocument } from "./api.js";

export interface ViewState {
  auth: boolean;
  topology: TopologyDocument | null;
  intents: IntentRecord[];
  selectedIntent: string | null;
  highlight: PathEdge[];
  error: string | null;
}

export type Listener = (state: ViewState) => void;

const INITIAL: ViewState = {
  auth: false,
  topology: null,
  intents: [],
  selectedIntent: null,
  highlight: [],
  error: null,
};

export class ViewStore {
  state: ViewState = { ...INITIAL };
  pollIntervalMs: number;

  private listeners: Listener[] = [];
  private fetchSeq = 0; // monotonic; stale poll responses lose
  private appliedSeq = 0;
  private timer: ReturnType<typeof setTimeout> | null = null;
  private failures = 0;

  constructor(
    private api: ApiClient,
    pollIntervalMs = 2000,
  ) {
    this.pollIntervalMs = pollIntervalMs;
  }

  subscribe(listener: Listener): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  private emit(): void {
    for (const listener of this.listeners) listener(this.state);
  }

  private patch(partial: Partial<ViewState>): void {
    this.state = { ...this.state, ...partial };
    this.emit();
  }

  async login(username: string, password: string, secondFactor?: string): Promise<boolean> {
    try {
      await this.api.login(username, password, secondFactor);
      this.patch({ auth: true, error: null });
      await this.refresh();
      return true;
    } catch (err) {
      this.patch({ auth: false, error: describe(err) });
      return false;
    }
  }

  /** One poll: topology + intents (+ the selected intent's server path). */
  async refresh(): Promise<void> {
    if (!this.state.auth) return;
    const seq = ++this.fetchSeq;
    try {
      const [topology, intents] = await Promise.all([this.api.topology(), this.api.intents()]);
      let selected = this.state.selectedIntent;
      let highlight = this.state.highlight;
      const record = intents.find((r) => r.id === selected);
      if (selected !== null && (record === undefined || record.state !== "ACTIVE")) {
        selected = null; // withdrawn (or vanished) intents lose their highlight
        highlight = [];
      } else if (selected !== null) {
        highlight = (await this.api.intentPath(selected)).edges;
      }
      if (seq < this.appliedSeq) return; // an out-of-order response lost the race
      this.appliedSeq = seq;
      this.failures = 0;
      this.patch({ topology, intents, selectedIntent: selected, highlight, error: null });
    } catch (err) {
      if (err instanceof ApiError && err.status === 401) {
        this.patch({ ...INITIAL }); // token expired: back to the login view
        return;
      }
      this.failures += 1;
      this.patch({ error: describe(err) });
    }
  }

  /** Poll every pollIntervalMs; failed polls back off up to 4x. */
  startPolling(): void {
    const tick = async () => {
      await this.refresh();
      const factor = Math.min(2 ** this.failures, 4);
      this.timer = setTimeout(tick, this.pollIntervalMs * factor);
    };
    this.timer = setTimeout(tick, this.pollIntervalMs);
  }

  stopPolling(): void {
    if (this.timer !== null) clearTimeout(this.timer);
    this.timer = null;
  }

  async selectIntent(id: string | null): Promise<void> {
    if (id === null) {
      this.patch({ selectedIntent: null, highlight: [] });
      return;
    }
    try {
      const path = await this.api.intentPath(id);
      this.patch({ selectedIntent: id, highlight: path.edges, error: null });
    } catch (err) {
      this.patch({ error: describe(err) });
    }
  }

  async createIntent(intentType: string, fromCity: string, toCity: string, demandMbps = 0): Promise<void> {
    if (fromCity === toCity) {
      this.patch({ error: "source and destination must differ" });
      return;
    }
    try {
      const record = await this.api.createIntent(intentType, fromCity, toCity, demandMbps);
      await this.refresh();
      await this.selectIntent(record.id); // auto-highlight the new path
    } catch (err) {
      this.patch({ error: describe(err) }); // API error message, verbatim
    }
  }

  async withdrawIntent(id: string): Promise<void> {
    try {
      await this.api.withdrawIntent(id);
      if (this.state.selectedIntent === id) {
        this.patch({ selectedIntent: null, highlight: [] });
      }
      await this.refresh();
    } catch (err) {
      this.patch({ error: describe(err) });
    }
  }
}

function describe(err: unknown): string {
  if (err instanceof ApiError) return err.message || err.code;
  if (err instanceof Error) return err.message;
  return String(err);
}
