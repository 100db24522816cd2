/**
 * Typed client for the content service API.
 *
 * The bearer token lives only in this object (memory), never in browser
 * storage. Every non-2xx response is the uniform error envelope and is
 * surfaced as an ApiError carrying the stable machine code.
 */

export interface LoginResult {
  token: string;
  expires_at: string;
  role: string;
}

export interface LockRecord {
  lock_id: string;
  block_id: string;
  holder: string;
  acquired_at: string;
  expires_at: string;
  ttl_seconds: number;
  renew_count: number;
}

export interface BlockRecord {
  block_id: string;
  name: string;
  head_version: string | null;
  created_by: string;
  created_at: string;
  lock: LockRecord | null;
}

export interface MapRecord {
  map_id: string;
  name: string;
  head_version: string | null;
  created_by: string;
  created_at: string;
}

export interface VersionRecord {
  version_id: string;
  seq: number;
  state: "pending" | "approved" | "rejected";
  author: string;
  submitted_at: string;
  decided_by: string | null;
  decided_at: string | null;
  reason: string | null;
  block_id?: string;
  map_id?: string;
}

export interface PendingVersion extends VersionRecord {
  kind: "block" | "map";
  target_id: string;
}

export interface UserRecord {
  user_id: string;
  username: string;
  role: string;
  created_at: string;
}

export interface Violation {
  code: string;
  detail: string;
  locus: string | null;
}

export class ApiError extends Error {
  constructor(
    public readonly code: string,
    message: string,
    public readonly status: number,
    public readonly violations: Violation[] = [],
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export class SigilApi {
  // ES private: invisible to JSON.stringify and property enumeration, so
  // the token cannot leak into logs or storage by accident.
  #token: string | null = null;

  constructor(public readonly baseUrl: string) {}

  get authenticated(): boolean {
    return this.#token !== null;
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const headers: Record<string, string> = {};
    if (this.#token) headers["Authorization"] = `Bearer ${this.#token}`;
    if (body !== undefined) headers["Content-Type"] = "application/json";
    let response: Response;
    try {
      response = await fetch(`${this.baseUrl}${path}`, {
        method,
        headers,
        body: body === undefined ? undefined : JSON.stringify(body),
      });
    } catch (err) {
      throw new ApiError("CONNECT_FAILURE", `cannot reach ${this.baseUrl}: ${err}`, 0);
    }
    if (response.status === 204) return undefined as T;
    if (response.ok) return (await response.json()) as T;
    let code = `HTTP_${response.status}`;
    let message = response.statusText;
    let violations: Violation[] = [];
    try {
      const envelope = (await response.json()) as {
        error: { code: string; message: string; violations?: Violation[] };
      };
      code = envelope.error.code;
      message = envelope.error.message;
      violations = envelope.error.violations ?? [];
    } catch {
      // non-envelope body: keep the HTTP fallback
    }
    throw new ApiError(code, message, response.status, violations);
  }

  async login(username: string, password: string): Promise<LoginResult> {
    const result = await this.request<LoginResult>("POST", "/api/v1/auth/login", {
      username,
      password,
    });
    this.#token = result.token;
    return result;
  }

  async logout(): Promise<void> {
    if (!this.#token) return;
    try {
      await this.request<void>("POST", "/api/v1/auth/logout");
    } finally {
      this.#token = null;
    }
  }

  listBlocks(): Promise<BlockRecord[]> {
    return this.request("GET", "/api/v1/blocks");
  }

  listMaps(): Promise<MapRecord[]> {
    return this.request("GET", "/api/v1/maps");
  }

  listUsers(): Promise<UserRecord[]> {
    return this.request("GET", "/api/v1/users");
  }

  createUser(username: string, password: string, role: string): Promise<UserRecord> {
    return this.request("POST", "/api/v1/users", { username, password, role });
  }

  pendingVersions(): Promise<PendingVersion[]> {
    return this.request("GET", "/api/v1/review/pending");
  }

  blockVersions(blockId: string): Promise<VersionRecord[]> {
    return this.request("GET", `/api/v1/blocks/${blockId}/versions`);
  }

  mapVersions(mapId: string): Promise<VersionRecord[]> {
    return this.request("GET", `/api/v1/maps/${mapId}/versions`);
  }

  approve(versionId: string): Promise<VersionRecord> {
    return this.request("POST", `/api/v1/versions/${versionId}/approve`);
  }

  reject(versionId: string, reason: string): Promise<VersionRecord> {
    return this.request("POST", `/api/v1/versions/${versionId}/reject`, { reason });
  }

  breakLock(blockId: string): Promise<void> {
    return this.request("DELETE", `/api/v1/blocks/${blockId}/lock`);
  }
}
