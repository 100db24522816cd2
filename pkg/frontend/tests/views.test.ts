// @vitest-environment jsdom
import { describe, expect, it, vi } from "vitest";

import type { BlockRecord, PendingVersion, UserRecord } from "../src/api.js";
import {
  canModerate,
  renderContent,
  renderLockMonitor,
  renderPendingQueue,
  renderUsers,
  secondsRemaining,
  tickCountdowns,
} from "../src/views.js";

function pending(overrides: Partial<PendingVersion> = {}): PendingVersion {
  return {
    version_id: "11111111-2222-4333-8444-555555555555",
    kind: "block",
    target_id: "aaaaaaaa-bbbb-4ccc-8ddd-eeeeeeeeeeee",
    seq: 2,
    state: "pending",
    author: "99999999-8888-4777-8666-555555555555",
    submitted_at: "2026-03-01T10:00:00.000000Z",
    decided_by: null,
    decided_at: null,
    reason: null,
    ...overrides,
  };
}

function block(lockExpires: string | null): BlockRecord {
  return {
    block_id: "aaaaaaaa-bbbb-4ccc-8ddd-eeeeeeeeeeee",
    name: "exedra",
    head_version: null,
    created_by: "x",
    created_at: "2026-03-01T09:00:00.000000Z",
    lock:
      lockExpires === null
        ? null
        : {
            lock_id: "llllllll",
            block_id: "aaaaaaaa-bbbb-4ccc-8ddd-eeeeeeeeeeee",
            holder: "99999999-8888-4777-8666-555555555555",
            acquired_at: "2026-03-01T09:30:00.000000Z",
            expires_at: lockExpires,
            ttl_seconds: 1800,
            renew_count: 0,
          },
  };
}

describe("pending queue", () => {
  it("renders one row per pending version with actions for moderators", () => {
    const container = document.createElement("div");
    const approve = vi.fn();
    renderPendingQueue(container, [pending()], { approve, reject: vi.fn() }, true);
    const rows = container.querySelectorAll("tr[data-version-id]");
    expect(rows).toHaveLength(1);
    expect(rows[0].textContent).toContain("block");
    (rows[0].querySelector("button.approve") as HTMLButtonElement).click();
    expect(approve).toHaveBeenCalledWith("11111111-2222-4333-8444-555555555555");
  });

  it("hides actions from non-moderators", () => {
    const container = document.createElement("div");
    renderPendingQueue(container, [pending()], { approve: vi.fn(), reject: vi.fn() }, false);
    expect(container.querySelectorAll("button")).toHaveLength(0);
  });

  it("shows an empty state", () => {
    const container = document.createElement("div");
    renderPendingQueue(container, [], { approve: vi.fn(), reject: vi.fn() }, true);
    expect(container.textContent).toContain("Nothing waiting");
  });
});

describe("lock monitor", () => {
  it("lists only held blocks with holder and countdown", () => {
    const container = document.createElement("div");
    const future = new Date(Date.now() + 90_000).toISOString();
    renderLockMonitor(container, [block(future), block(null)], { breakLock: vi.fn() }, true);
    const rows = container.querySelectorAll("tr[data-block-id]");
    expect(rows).toHaveLength(1);
    const countdown = container.querySelector(".countdown")!;
    expect(countdown.textContent).toMatch(/^(89|90)s$/);
  });

  it("break button invokes the handler", () => {
    const container = document.createElement("div");
    const breakLock = vi.fn();
    const future = new Date(Date.now() + 60_000).toISOString();
    renderLockMonitor(container, [block(future)], { breakLock }, true);
    (container.querySelector("button.danger") as HTMLButtonElement).click();
    expect(breakLock).toHaveBeenCalledWith("aaaaaaaa-bbbb-4ccc-8ddd-eeeeeeeeeeee");
  });

  it("countdown reaches zero at expiry and ticks in place", () => {
    const expires = "2026-03-01T10:00:00.000000Z";
    expect(secondsRemaining(expires, new Date("2026-03-01T09:59:30Z"))).toBe(30);
    expect(secondsRemaining(expires, new Date("2026-03-01T10:00:00Z"))).toBe(0);
    expect(secondsRemaining(expires, new Date("2026-03-01T10:05:00Z"))).toBe(0);

    const container = document.createElement("div");
    renderLockMonitor(container, [block(expires)], { breakLock: vi.fn() }, true);
    tickCountdowns(container, new Date("2026-03-01T09:59:00Z"));
    expect(container.querySelector(".countdown")!.textContent).toBe("60s");
  });
});

describe("content browser", () => {
  it("renders blocks with head badge and lock state", () => {
    const container = document.createElement("div");
    const record = { ...block(null), head_version: "12345678-aaaa-4bbb-8ccc-dddddddddddd" };
    renderContent(container, [record], []);
    expect(container.textContent).toContain("exedra");
    expect(container.querySelector(".badge")!.textContent).toBe("12345678");
    expect(container.textContent).toContain("free");
  });
});

describe("users", () => {
  const users: UserRecord[] = [
    { user_id: "1", username: "root", role: "administrator", created_at: "t" },
    { user_id: "2", username: "maria", role: "editor", created_at: "t" },
  ];

  it("renders role badges and a creation form for moderators", () => {
    const container = document.createElement("div");
    const create = vi.fn();
    renderUsers(container, users, { create }, true);
    expect(container.querySelectorAll("tr[data-username]")).toHaveLength(2);
    expect(container.querySelector(".role-editor")!.textContent).toBe("editor");

    const form = container.querySelector("form")!;
    (form.querySelector('input[name="username"]') as HTMLInputElement).value = "newbie";
    (form.querySelector('input[name="password"]') as HTMLInputElement).value = "password123";
    (form.querySelector("select") as HTMLSelectElement).value = "visitor";
    form.dispatchEvent(new Event("submit", { bubbles: true, cancelable: true }));
    expect(create).toHaveBeenCalledWith("newbie", "password123", "visitor");
  });

  it("suppresses the form for read-only roles", () => {
    const container = document.createElement("div");
    renderUsers(container, users, { create: vi.fn() }, false);
    expect(container.querySelector("form")).toBeNull();
  });
});

describe("role gating", () => {
  it("only administrators moderate", () => {
    expect(canModerate("administrator")).toBe(true);
    expect(canModerate("editor")).toBe(false);
    expect(canModerate("visitor")).toBe(false);
  });
});
