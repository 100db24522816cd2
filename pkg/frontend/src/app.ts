/**
 * Console application: login screen, role-gated tabs, and a poll loop that
 * keeps the active tab within one interval of server truth.
 *
 * Moderation actions update the UI optimistically and roll back on error
 * (for example ALREADY_DECIDED when another administrator raced us). Every
 * action maps 1:1 to a documented API endpoint.
 */

import { ApiError, SigilApi } from "./api.js";
import {
  canModerate,
  el,
  renderContent,
  renderLockMonitor,
  renderPendingQueue,
  renderUsers,
  tickCountdowns,
} from "./views.js";

export const POLL_INTERVAL_MS = 4000; // must stay <= 5000

type TabName = "pending" | "locks" | "content" | "users";

export class ConsoleApp {
  api: SigilApi | null = null;
  role: string | null = null;
  username: string | null = null;
  activeTab: TabName = "pending";
  private pollTimer: ReturnType<typeof setInterval> | null = null;
  private tickTimer: ReturnType<typeof setInterval> | null = null;
  private viewRoot!: HTMLElement;
  private noticeRoot!: HTMLElement;

  constructor(
    private root: HTMLElement,
    private apiFactory: (baseUrl: string) => SigilApi = (baseUrl) => new SigilApi(baseUrl),
    private pollMs: number = POLL_INTERVAL_MS,
  ) {}

  start(defaultServer = ""): void {
    this.renderLogin(defaultServer);
  }

  // -- login ------------------------------------------------------------

  private renderLogin(defaultServer: string): void {
    this.stopPolling();
    this.root.replaceChildren();
    const panel = el("div", "login-panel");
    panel.append(el("h1", undefined, "Sigil3D Console"));
    const form = el("form", "login-form") as HTMLFormElement;
    const server = el("input") as HTMLInputElement;
    server.name = "server";
    server.placeholder = "server URL";
    server.value = defaultServer || inferServerUrl();
    const username = el("input") as HTMLInputElement;
    username.name = "username";
    username.placeholder = "username";
    const password = el("input") as HTMLInputElement;
    password.name = "password";
    password.type = "password";
    password.placeholder = "password";
    const submit = el("button", undefined, "Sign in") as HTMLButtonElement;
    submit.type = "submit";
    form.append(server, username, password, submit);
    const notice = el("p", "notice");
    form.onsubmit = (event) => {
      event.preventDefault();
      void this.login(server.value, username.value, password.value).catch((err) => {
        notice.textContent = describe(err);
      });
    };
    panel.append(form, notice);
    this.root.append(panel);
  }

  async login(serverUrl: string, username: string, password: string): Promise<void> {
    const api = this.apiFactory(serverUrl.replace(/\/+$/, ""));
    const result = await api.login(username, password);
    this.api = api;
    this.role = result.role;
    this.username = username;
    this.renderChrome();
    await this.selectTab(canModerate(result.role) ? "pending" : "content");
    this.startPolling();
  }

  async logout(): Promise<void> {
    this.stopPolling();
    if (this.api) await this.api.logout().catch(() => undefined);
    this.api = null;
    this.role = null;
    this.renderLogin("");
  }

  // -- chrome -------------------------------------------------------------

  private renderChrome(): void {
    this.root.replaceChildren();
    const header = el("header");
    header.append(el("h1", undefined, "Sigil3D Console"));
    const banner = el("span", `role-banner role-${this.role}`, `${this.username} · ${this.role}`);
    const logoutButton = el("button", "linkish", "Sign out") as HTMLButtonElement;
    logoutButton.onclick = () => void this.logout();
    header.append(banner, logoutButton);

    const tabs = el("nav", "tabs");
    const names: TabName[] = canModerate(this.role ?? "")
      ? ["pending", "locks", "content", "users"]
      : ["content"]; // read-only browse mode for non-administrators
    for (const name of names) {
      const button = el("button", "tab", tabTitle(name)) as HTMLButtonElement;
      button.dataset.tab = name;
      button.onclick = () => void this.selectTab(name);
      tabs.append(button);
    }
    this.noticeRoot = el("div", "notice-root");
    this.viewRoot = el("main", "view");
    this.root.append(header, tabs, this.noticeRoot, this.viewRoot);
  }

  notice(text: string): void {
    this.noticeRoot.replaceChildren(el("p", "notice", text));
  }

  clearNotice(): void {
    this.noticeRoot.replaceChildren();
  }

  // -- tabs and polling ----------------------------------------------------

  async selectTab(name: TabName): Promise<void> {
    this.activeTab = name;
    for (const button of this.root.querySelectorAll<HTMLElement>(".tab")) {
      button.classList.toggle("active", button.dataset.tab === name);
    }
    await this.refresh();
  }

  startPolling(): void {
    this.stopPolling();
    this.pollTimer = setInterval(() => void this.refresh().catch(() => undefined), this.pollMs);
    this.tickTimer = setInterval(() => tickCountdowns(this.viewRoot), 1000);
  }

  stopPolling(): void {
    if (this.pollTimer) clearInterval(this.pollTimer);
    if (this.tickTimer) clearInterval(this.tickTimer);
    this.pollTimer = null;
    this.tickTimer = null;
  }

  async refresh(): Promise<void> {
    if (!this.api) return;
    const moderator = canModerate(this.role ?? "");
    if (this.activeTab === "pending") {
      const rows = await this.api.pendingVersions();
      renderPendingQueue(this.viewRoot, rows, {
        approve: (id) => void this.approve(id),
        reject: (id) => void this.reject(id),
      }, moderator);
    } else if (this.activeTab === "locks") {
      const blocks = await this.api.listBlocks();
      renderLockMonitor(this.viewRoot, blocks, {
        breakLock: (id) => void this.breakLock(id),
      }, moderator);
    } else if (this.activeTab === "content") {
      const [blocks, maps] = await Promise.all([this.api.listBlocks(), this.api.listMaps()]);
      renderContent(this.viewRoot, blocks, maps);
    } else {
      const users = await this.api.listUsers();
      renderUsers(this.viewRoot, users, {
        create: (username, password, role) => void this.createUser(username, password, role),
      }, moderator);
    }
  }

  // -- actions (optimistic, rolled back by refresh on error) ----------------

  private removeRow(selector: string): HTMLElement | null {
    const row = this.viewRoot.querySelector<HTMLElement>(selector);
    row?.remove();
    return row;
  }

  async approve(versionId: string): Promise<void> {
    if (!this.api) return;
    this.clearNotice();
    this.removeRow(`[data-version-id="${versionId}"]`); // optimistic
    try {
      await this.api.approve(versionId);
    } catch (err) {
      this.notice(describe(err));
    }
    await this.refresh(); // converge either way; restores the row on error
  }

  async reject(versionId: string, reason = "rejected from console"): Promise<void> {
    if (!this.api) return;
    this.clearNotice();
    this.removeRow(`[data-version-id="${versionId}"]`);
    try {
      await this.api.reject(versionId, reason);
    } catch (err) {
      this.notice(describe(err));
    }
    await this.refresh();
  }

  async breakLock(blockId: string): Promise<void> {
    if (!this.api) return;
    this.clearNotice();
    this.removeRow(`[data-block-id="${blockId}"]`);
    try {
      await this.api.breakLock(blockId);
    } catch (err) {
      this.notice(describe(err));
    }
    await this.refresh();
  }

  async createUser(username: string, password: string, role: string): Promise<void> {
    if (!this.api) return;
    this.clearNotice();
    try {
      await this.api.createUser(username, password, role);
    } catch (err) {
      this.notice(describe(err));
    }
    await this.refresh();
  }
}

function tabTitle(name: TabName): string {
  return { pending: "Pending review", locks: "Locks", content: "Content", users: "Users" }[name];
}

function describe(err: unknown): string {
  if (err instanceof ApiError) {
    const extra = err.violations.map((v) => `${v.code}: ${v.detail}`).join("; ");
    return extra ? `${err.code}: ${err.message} (${extra})` : `${err.code}: ${err.message}`;
  }
  return String(err);
}

function inferServerUrl(): string {
  // Served from the API server under /console/: same origin is the default.
  if (typeof window !== "undefined" && window.location.protocol.startsWith("http")) {
    return window.location.origin;
  }
  return "http://127.0.0.1:8640";
}
