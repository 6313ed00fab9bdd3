// Thin typed client for the portal API. Every mutation carries the bearer
// token; every non-2xx response becomes an ApiError with the server's shaped
// body (code, message, and extras like the filter-syntax byte offset).

import type {
  PinFields,
  QueryResult,
  ResourceDetail,
  ResourceList,
  ResourceSummary,
  TestbedInfo,
} from "./types";

export class ApiError extends Error {
  code: string;
  status: number;
  offset: number | null;
  problems: string[];

  constructor(status: number, body: Record<string, unknown>) {
    super(typeof body.message === "string" ? body.message : `HTTP ${status}`);
    this.status = status;
    this.code = typeof body.code === "string" ? body.code : "unknown";
    this.offset = typeof body.offset === "number" ? body.offset : null;
    this.problems = Array.isArray(body.problems) ? body.problems.map(String) : [];
  }
}

export class PortalApi {
  base: string;
  token: string | null;
  private fetchFn: typeof fetch;

  constructor(base = "", token: string | null = null, fetchFn: typeof fetch = fetch) {
    this.base = base.replace(/\/$/, "");
    this.token = token;
    this.fetchFn = fetchFn;
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const headers: Record<string, string> = {};
    if (this.token) headers["Authorization"] = `Bearer ${this.token}`;
    let payload: BodyInit | undefined;
    if (body instanceof FormData) {
      payload = body;
    } else if (body !== undefined) {
      headers["Content-Type"] = "application/json";
      payload = JSON.stringify(body);
    }
    const response = await this.fetchFn(this.base + path, { method, headers, body: payload });
    if (!response.ok) {
      let shaped: Record<string, unknown> = {};
      try {
        shaped = await response.json();
      } catch {
        // non-JSON error body; fall through with the bare status
      }
      throw new ApiError(response.status, shaped);
    }
    return response.json() as Promise<T>;
  }

  getTestbed(): Promise<TestbedInfo> {
    return this.request("GET", "/api/testbed");
  }

  getResources(): Promise<ResourceList> {
    return this.request("GET", "/api/resources");
  }

  getResource(id: string): Promise<ResourceDetail> {
    return this.request("GET", `/api/resources/${encodeURIComponent(id)}`);
  }

  query(filter: string, projection: string[] = []): Promise<QueryResult> {
    return this.request("POST", "/api/query", { filter, projection });
  }

  refresh(id?: string): Promise<{ version: number }> {
    return this.request("POST", "/api/refresh", id ? { id } : {});
  }

  addResource(fields: PinFields): Promise<{ version: number; resource: ResourceSummary }> {
    return this.request("POST", "/api/resources", fields);
  }

  updateResource(
    id: string,
    fields: PinFields,
  ): Promise<{ version: number; resource: ResourceSummary }> {
    return this.request("PUT", `/api/resources/${encodeURIComponent(id)}`, fields);
  }

  deleteResource(id: string): Promise<{ version: number }> {
    return this.request("DELETE", `/api/resources/${encodeURIComponent(id)}`);
  }

  rename(name: string): Promise<{ name: string }> {
    return this.request("PUT", "/api/testbed", { name });
  }

  uploadAsset(which: "logo" | "map", file: File): Promise<{ path: string }> {
    const form = new FormData();
    form.append("file", file);
    return this.request("PUT", `/api/testbed/${which}`, form);
  }

  /** True when the configured token is accepted by the server.
   *
   * Renaming the testbed to its current name is the one admin call that is a
   * genuine no-op (the canonical save is byte-stable), so it doubles as a
   * credential probe without touching any state.
   */
  async verifyToken(currentName: string): Promise<boolean> {
    try {
      await this.rename(currentName);
      return true;
    } catch (err) {
      if (err instanceof ApiError && (err.status === 401 || err.status === 403)) return false;
      throw err;
    }
  }
}
