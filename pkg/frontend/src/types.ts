// Shapes mirrored from the portal HTTP API (see docs/http-api.md in the repo root).

export type Status = "unknown" | "up" | "down" | "stale";

export interface ResourceSummary {
  id: string;
  name: string;
  address: string;
  port: number;
  x: number;
  y: number;
  country: string | null;
  status: Status;
  last_success: number | null;
  last_attempt: number | null;
  last_error: string | null;
}

export interface EntryDoc {
  dn: string;
  attributes: Record<string, string[]>;
}

export interface ResourceDetail extends ResourceSummary {
  entries: EntryDoc[];
}

export interface ResourceList {
  version: number;
  taken_at: number;
  resources: ResourceSummary[];
}

export interface RefreshSettings {
  period_seconds: number;
  per_resource_timeout_seconds: number;
  staleness_factor: number;
  max_parallel_polls: number;
}

export interface TestbedInfo {
  name: string;
  map_url: string;
  logo_url: string;
  refresh: RefreshSettings;
  snapshot_version: number;
}

export interface QueryRow {
  id: string;
  name: string;
  status: Status;
  matched: boolean;
  projected: Record<string, string[]>;
}

export interface QueryResult {
  version: number;
  rows: QueryRow[];
}

export interface ChangeEvent {
  version: number;
  changed_ids: string[];
}

export interface PinFields {
  id?: string;
  name?: string;
  address?: string;
  port?: number;
  x?: number;
  y?: number;
  country?: string | null;
}
