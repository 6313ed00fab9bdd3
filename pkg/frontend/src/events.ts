// Live change notification: one SSE connection with exponential-backoff
// reconnect, falling back to long-polling /api/snapshot-version when the
// stream repeatedly fails (proxies and odd networks sometimes eat SSE).

import type { ChangeEvent } from "./types";

export interface FeedCallbacks {
  onChange: (event: ChangeEvent) => void;
  onConnected?: (connected: boolean) => void;
}

export interface FeedOptions {
  eventSourceFactory?: (url: string) => EventSource;
  fetchFn?: typeof fetch;
  baseDelayMs?: number;
  maxDelayMs?: number;
  sseFailureLimit?: number; // consecutive failures before long-polling
  longPollSeconds?: number;
  sseRetryAfterMs?: number; // how long to long-poll before trying SSE again
}

export class ChangeFeed {
  private base: string;
  private callbacks: FeedCallbacks;
  private source: EventSource | null = null;
  private stopped = true;
  private failures = 0;
  private timer: ReturnType<typeof setTimeout> | null = null;
  private lastVersion = 0;
  private polling = false;
  private pollAbort: AbortController | null = null;

  private makeSource: (url: string) => EventSource;
  private fetchFn: typeof fetch;
  private baseDelayMs: number;
  private maxDelayMs: number;
  private sseFailureLimit: number;
  private longPollSeconds: number;
  private sseRetryAfterMs: number;

  constructor(base: string, callbacks: FeedCallbacks, options: FeedOptions = {}) {
    this.base = base.replace(/\/$/, "");
    this.callbacks = callbacks;
    this.makeSource = options.eventSourceFactory ?? ((url) => new EventSource(url));
    this.fetchFn = options.fetchFn ?? fetch.bind(globalThis);
    this.baseDelayMs = options.baseDelayMs ?? 500;
    this.maxDelayMs = options.maxDelayMs ?? 15_000;
    this.sseFailureLimit = options.sseFailureLimit ?? 3;
    this.longPollSeconds = options.longPollSeconds ?? 25;
    this.sseRetryAfterMs = options.sseRetryAfterMs ?? 60_000;
  }

  start(): void {
    if (!this.stopped) return;
    this.stopped = false;
    this.connect();
  }

  stop(): void {
    this.stopped = true;
    this.closeSource();
    if (this.timer !== null) clearTimeout(this.timer);
    this.timer = null;
    this.polling = false;
    this.pollAbort?.abort();
  }

  private closeSource(): void {
    if (this.source) {
      this.source.close();
      this.source = null;
    }
  }

  private deliver(event: ChangeEvent): void {
    if (event.version > this.lastVersion) {
      this.lastVersion = event.version;
      this.callbacks.onChange(event);
    }
  }

  private connect(): void {
    if (this.stopped) return;
    const source = this.makeSource(`${this.base}/api/events`);
    this.source = source;
    source.onopen = () => {
      this.failures = 0;
      this.callbacks.onConnected?.(true);
    };
    source.onmessage = (message: MessageEvent) => {
      this.failures = 0;
      this.callbacks.onConnected?.(true);
      try {
        this.deliver(JSON.parse(message.data) as ChangeEvent);
      } catch {
        // heartbeat comments never reach onmessage; anything unparseable is ignored
      }
    };
    source.onerror = () => {
      this.closeSource();
      if (this.stopped) return;
      this.failures += 1;
      this.callbacks.onConnected?.(false);
      if (this.failures >= this.sseFailureLimit) {
        this.startLongPoll();
      } else {
        const delay = Math.min(this.baseDelayMs * 2 ** (this.failures - 1), this.maxDelayMs);
        this.timer = setTimeout(() => this.connect(), delay);
      }
    };
  }

  private startLongPoll(): void {
    if (this.polling) return;
    this.polling = true;
    const startedAt = Date.now();
    const loop = async (): Promise<void> => {
      while (!this.stopped && this.polling) {
        if (Date.now() - startedAt >= this.sseRetryAfterMs) {
          this.polling = false;
          this.failures = 0;
          this.connect();
          return;
        }
        try {
          this.pollAbort = new AbortController();
          const response = await this.fetchFn(
            `${this.base}/api/snapshot-version?after=${this.lastVersion}&timeout_seconds=${this.longPollSeconds}`,
            { signal: this.pollAbort.signal },
          );
          if (!response.ok) throw new Error(`HTTP ${response.status}`);
          const body = (await response.json()) as { version: number };
          this.callbacks.onConnected?.(true);
          this.deliver({ version: body.version, changed_ids: [] });
        } catch {
          if (this.stopped || !this.polling) return;
          this.callbacks.onConnected?.(false);
          await new Promise((resolve) => {
            this.timer = setTimeout(resolve, this.baseDelayMs);
          });
        }
      }
    };
    void loop();
  }
}
