/** DOM rendering for the console's tabs. Pure render-from-data functions:
 * the app owns state, polling, and optimistic updates. */

import type { BlockRecord, MapRecord, PendingVersion, UserRecord } from "./api.js";

export function el(tag: string, className?: string, text?: string): HTMLElement {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function shortId(id: string | null): string {
  return id ? id.slice(0, 8) : "-";
}

/** Whole seconds until an RFC 3339 instant, floored at zero. */
export function secondsRemaining(expiresAt: string, now: Date = new Date()): number {
  const remaining = (new Date(expiresAt).getTime() - now.getTime()) / 1000;
  return Math.max(0, Math.floor(remaining));
}

export function canModerate(role: string): boolean {
  return role === "administrator";
}

export interface PendingHandlers {
  approve(versionId: string): void;
  reject(versionId: string): void;
}

export function renderPendingQueue(
  container: HTMLElement,
  rows: PendingVersion[],
  handlers: PendingHandlers,
  moderator: boolean,
): void {
  container.replaceChildren();
  if (rows.length === 0) {
    container.append(el("p", "empty", "Nothing waiting for review."));
    return;
  }
  const table = el("table", "grid");
  const head = el("tr");
  for (const title of ["Version", "Kind", "Target", "Seq", "Author", "Submitted", ""]) {
    head.append(el("th", undefined, title));
  }
  table.append(head);
  for (const row of rows) {
    const tr = el("tr");
    tr.dataset.versionId = row.version_id;
    tr.append(el("td", "mono", shortId(row.version_id)));
    tr.append(el("td", undefined, row.kind));
    tr.append(el("td", "mono", shortId(row.target_id)));
    tr.append(el("td", undefined, String(row.seq)));
    tr.append(el("td", "mono", shortId(row.author)));
    tr.append(el("td", undefined, row.submitted_at));
    const actions = el("td", "actions");
    if (moderator) {
      const approve = el("button", "approve", "Approve") as HTMLButtonElement;
      approve.onclick = () => handlers.approve(row.version_id);
      const reject = el("button", "reject", "Reject") as HTMLButtonElement;
      reject.onclick = () => handlers.reject(row.version_id);
      actions.append(approve, reject);
    }
    tr.append(actions);
    table.append(tr);
  }
  container.append(table);
}

export interface LockHandlers {
  breakLock(blockId: string): void;
}

export function renderLockMonitor(
  container: HTMLElement,
  blocks: BlockRecord[],
  handlers: LockHandlers,
  moderator: boolean,
): void {
  container.replaceChildren();
  const held = blocks.filter((b) => b.lock !== null);
  if (held.length === 0) {
    container.append(el("p", "empty", "No blocks are locked right now."));
    return;
  }
  const table = el("table", "grid");
  const head = el("tr");
  for (const title of ["Block", "Holder", "Expires", "Remaining", ""]) {
    head.append(el("th", undefined, title));
  }
  table.append(head);
  for (const block of held) {
    const lock = block.lock!;
    const tr = el("tr");
    tr.dataset.blockId = block.block_id;
    tr.append(el("td", undefined, block.name));
    tr.append(el("td", "mono", shortId(lock.holder)));
    tr.append(el("td", undefined, lock.expires_at));
    const countdown = el("td", "countdown", `${secondsRemaining(lock.expires_at)}s`);
    countdown.dataset.expiresAt = lock.expires_at;
    tr.append(countdown);
    const actions = el("td", "actions");
    if (moderator) {
      const breakButton = el("button", "danger", "Break lock") as HTMLButtonElement;
      breakButton.onclick = () => handlers.breakLock(block.block_id);
      actions.append(breakButton);
    }
    tr.append(actions);
    table.append(tr);
  }
  container.append(table);
}

/** Refresh countdown cells in place between polls. */
export function tickCountdowns(container: HTMLElement, now: Date = new Date()): void {
  for (const cell of container.querySelectorAll<HTMLElement>("[data-expires-at]")) {
    cell.textContent = `${secondsRemaining(cell.dataset.expiresAt!, now)}s`;
  }
}

export function renderContent(
  container: HTMLElement,
  blocks: BlockRecord[],
  maps: MapRecord[],
): void {
  container.replaceChildren();
  const blocksSection = el("section");
  blocksSection.append(el("h2", undefined, `Blocks (${blocks.length})`));
  const blockTable = el("table", "grid");
  const head = el("tr");
  for (const title of ["Name", "Block", "Head", "Lock"]) head.append(el("th", undefined, title));
  blockTable.append(head);
  for (const block of blocks) {
    const tr = el("tr");
    tr.dataset.blockId = block.block_id;
    tr.append(el("td", undefined, block.name));
    tr.append(el("td", "mono", shortId(block.block_id)));
    tr.append(el("td", "mono badge", shortId(block.head_version)));
    tr.append(el("td", undefined, block.lock ? `held (${shortId(block.lock.holder)})` : "free"));
    blockTable.append(tr);
  }
  blocksSection.append(blockTable);

  const mapsSection = el("section");
  mapsSection.append(el("h2", undefined, `Maps (${maps.length})`));
  const mapTable = el("table", "grid");
  const mapHead = el("tr");
  for (const title of ["Name", "Map", "Head"]) mapHead.append(el("th", undefined, title));
  mapTable.append(mapHead);
  for (const map of maps) {
    const tr = el("tr");
    tr.append(el("td", undefined, map.name));
    tr.append(el("td", "mono", shortId(map.map_id)));
    tr.append(el("td", "mono badge", shortId(map.head_version)));
    mapTable.append(tr);
  }
  mapsSection.append(mapTable);
  container.append(blocksSection, mapsSection);
}

export interface UserHandlers {
  create(username: string, password: string, role: string): void;
}

export function renderUsers(
  container: HTMLElement,
  users: UserRecord[],
  handlers: UserHandlers,
  moderator: boolean,
): void {
  container.replaceChildren();
  if (moderator) {
    const form = el("form", "create-user") as HTMLFormElement;
    const username = el("input") as HTMLInputElement;
    username.name = "username";
    username.placeholder = "username";
    const password = el("input") as HTMLInputElement;
    password.name = "password";
    password.type = "password";
    password.placeholder = "password";
    const role = el("select") as HTMLSelectElement;
    role.name = "role";
    for (const value of ["visitor", "editor", "administrator"]) {
      const option = el("option", undefined, value) as HTMLOptionElement;
      option.value = value;
      role.append(option);
    }
    const submit = el("button", undefined, "Create user") as HTMLButtonElement;
    submit.type = "submit";
    form.append(username, password, role, submit);
    form.onsubmit = (event) => {
      event.preventDefault();
      handlers.create(username.value, password.value, role.value);
    };
    container.append(form);
  }
  const table = el("table", "grid");
  const head = el("tr");
  for (const title of ["Username", "Role", "Created"]) head.append(el("th", undefined, title));
  table.append(head);
  for (const user of users) {
    const tr = el("tr");
    tr.dataset.username = user.username;
    tr.append(el("td", undefined, user.username));
    tr.append(el("td", `role role-${user.role}`, user.role));
    tr.append(el("td", undefined, user.created_at));
    table.append(tr);
  }
  container.append(table);
}
