// The portal page: a map of testbed resources with live status colours, a
// read-only View mode and a token-gated Edit mode for rearranging pins.
// All server talk goes through PortalApi; all live updates through ChangeFeed.

import { ApiError, PortalApi } from "./api";
import { ChangeFeed, type FeedCallbacks } from "./events";
import type { ResourceDetail, ResourceSummary, TestbedInfo } from "./types";
import { STATUS_COLORS, caretColumn, groupEntries, formatTimestamp, toNormalized } from "./view";

export type Mode = "view" | "edit";

export interface AppState {
  testbed: TestbedInfo | null;
  resources: ResourceSummary[];
  selectedId: string | null;
  detail: ResourceDetail | null;
  mode: Mode;
  connected: boolean;
  matched: Set<string> | null; // null means no query is active
  queryError: { text: string; message: string; offset: number | null } | null;
  toast: string | null;
}

export interface Feed {
  start(): void;
  stop(): void;
}

export interface AppOptions {
  api: PortalApi;
  makeFeed?: (callbacks: FeedCallbacks) => Feed;
  confirmFn?: (message: string) => boolean;
}

export interface AppHandle {
  ready: Promise<void>;
  state: AppState;
  stop(): void;
}

const TOKEN_KEY = "meshscape-token";
const DRAG_THRESHOLD_PX = 3;

const SKELETON = `
  <header class="topbar">
    <img id="logo" class="logo" alt="portal logo">
    <h1 id="testbed-name"></h1>
    <span id="conn" class="conn"></span>
    <form id="query-form" class="query-form">
      <input id="query-input" placeholder="filter, e.g. (status=up)" spellcheck="false" autocomplete="off">
      <button type="submit">Run</button>
      <button type="button" id="query-clear">Clear</button>
      <span id="query-summary" class="query-summary"></span>
    </form>
    <span id="header-controls" class="header-controls"></span>
  </header>
  <pre id="query-error" class="query-error" hidden></pre>
  <main class="content">
    <div id="map" class="map"></div>
    <aside id="detail" class="detail" hidden></aside>
  </main>
  <div id="toast" class="toast" hidden></div>
`;

export function createApp(root: HTMLElement, options: AppOptions): AppHandle {
  const api = options.api;
  const confirmFn = options.confirmFn ?? ((message: string) => window.confirm(message));

  const state: AppState = {
    testbed: null,
    resources: [],
    selectedId: null,
    detail: null,
    mode: "view",
    connected: false,
    matched: null,
    queryError: null,
    toast: null,
  };

  root.innerHTML = SKELETON;
  const $ = <T extends HTMLElement>(id: string) => root.querySelector<T>(`#${id}`)!;
  const logoEl = $<HTMLImageElement>("logo");
  const nameEl = $("testbed-name");
  const connEl = $("conn");
  const controlsEl = $("header-controls");
  const queryForm = $<HTMLFormElement>("query-form");
  const queryInput = $<HTMLInputElement>("query-input");
  const querySummaryEl = $("query-summary");
  const queryErrorEl = $("query-error");
  const mapEl = $("map");
  const detailEl = $("detail");
  const toastEl = $("toast");

  let assetNonce = 0; // bumped after uploads so <img>/background URLs bypass the cache
  let drag: { id: string; startX: number; startY: number; el: HTMLElement; moved: boolean } | null = null;
  let suppressMapClick = false;
  let toastTimer: ReturnType<typeof setTimeout> | null = null;
  let overlay: HTMLElement | null = null;

  // -- helpers ---------------------------------------------------------------

  function toast(message: string): void {
    state.toast = message;
    if (toastTimer !== null) clearTimeout(toastTimer);
    toastTimer = setTimeout(() => {
      state.toast = null;
      render();
    }, 4000);
    render();
  }

  function describe(err: unknown): string {
    if (err instanceof ApiError) return `${err.code}: ${err.message}`;
    return err instanceof Error ? err.message : String(err);
  }

  /** Wrap an async handler so rejections surface as a toast, not a silent drop. */
  function guarded(fn: () => Promise<void>): () => void {
    return () => {
      void fn().catch((err) => toast(describe(err)));
    };
  }

  function assetUrl(path: string): string {
    return `${path}?v=${assetNonce}`;
  }

  // -- data loading ----------------------------------------------------------

  async function loadTestbed(): Promise<void> {
    state.testbed = await api.getTestbed();
  }

  async function loadResources(): Promise<void> {
    const list = await api.getResources();
    state.resources = list.resources;
    if (state.selectedId && !list.resources.some((r) => r.id === state.selectedId)) {
      state.selectedId = null;
      state.detail = null;
    }
    if (state.selectedId) {
      state.detail = await api.getResource(state.selectedId);
    }
    if (state.matched !== null) await runQuery(queryInput.value, { quiet: true });
  }

  async function refreshAll(): Promise<void> {
    await loadTestbed();
    await loadResources();
    render();
  }

  async function select(id: string | null): Promise<void> {
    state.selectedId = id;
    state.detail = null;
    render();
    if (id !== null) {
      state.detail = await api.getResource(id);
      render();
    }
  }

  async function runQuery(text: string, opts: { quiet?: boolean } = {}): Promise<void> {
    if (text.trim() === "") {
      state.matched = null;
      state.queryError = null;
      return;
    }
    try {
      const result = await api.query(text);
      state.matched = new Set(result.rows.filter((row) => row.matched).map((row) => row.id));
      state.queryError = null;
    } catch (err) {
      if (err instanceof ApiError && err.code === "bad_filter") {
        state.matched = null;
        state.queryError = { text, message: err.message, offset: err.offset };
      } else if (!opts.quiet) {
        throw err;
      }
    }
  }

  // -- edit-mode entry -------------------------------------------------------

  async function enterEditMode(): Promise<void> {
    if (!api.token) {
      openTokenDialog();
      return;
    }
    if (await api.verifyToken(state.testbed?.name ?? "")) {
      state.mode = "edit";
      render();
    } else {
      openTokenDialog("That token was rejected — enter another one.");
    }
  }

  function leaveEditMode(): void {
    state.mode = "view";
    closeOverlay();
    render();
  }

  // -- overlays (built imperatively so re-renders never wipe typing) ---------

  function closeOverlay(): void {
    overlay?.remove();
    overlay = null;
  }

  function openOverlay(dialog: HTMLElement): void {
    closeOverlay();
    overlay = document.createElement("div");
    overlay.className = "overlay";
    overlay.addEventListener("click", (event) => {
      if (event.target === overlay) closeOverlay();
    });
    dialog.classList.add("dialog");
    overlay.appendChild(dialog);
    root.appendChild(overlay);
  }

  function openTokenDialog(problem = ""): void {
    const dialog = document.createElement("div");
    dialog.innerHTML = `
      <h2>Admin token</h2>
      <p>Editing needs the portal's admin token. It is kept for this browser session only.</p>
      <p class="dialog-error" id="token-error">${problem}</p>
      <form id="token-form">
        <input id="token-input" type="password" placeholder="token" autocomplete="off">
        <button type="submit">Unlock</button>
        <button type="button" id="token-cancel">Cancel</button>
      </form>
    `;
    openOverlay(dialog);
    const form = dialog.querySelector<HTMLFormElement>("#token-form")!;
    const input = dialog.querySelector<HTMLInputElement>("#token-input")!;
    const errorEl = dialog.querySelector<HTMLElement>("#token-error")!;
    dialog.querySelector<HTMLElement>("#token-cancel")!.addEventListener("click", closeOverlay);
    form.addEventListener("submit", (event) => {
      event.preventDefault();
      const candidate = input.value;
      void (async () => {
        api.token = candidate;
        if (await api.verifyToken(state.testbed?.name ?? "")) {
          sessionStorage.setItem(TOKEN_KEY, candidate);
          state.mode = "edit";
          closeOverlay();
          render();
        } else {
          api.token = null;
          sessionStorage.removeItem(TOKEN_KEY);
          errorEl.textContent = "The server rejected that token.";
        }
      })().catch((err) => {
        errorEl.textContent = describe(err);
      });
    });
    input.focus();
  }

  function openOptionsDialog(): void {
    const dialog = document.createElement("div");
    dialog.innerHTML = `
      <h2>Portal options</h2>
      <form id="rename-form">
        <label>Testbed name <input id="rename-input" autocomplete="off"></label>
        <button type="submit">Rename</button>
      </form>
      <div class="upload-row">
        <label>Replace logo <input id="logo-file" type="file" accept="image/*"></label>
        <label>Replace map <input id="map-file" type="file" accept="image/*"></label>
      </div>
      <button type="button" id="options-close">Close</button>
    `;
    openOverlay(dialog);
    const renameInput = dialog.querySelector<HTMLInputElement>("#rename-input")!;
    renameInput.value = state.testbed?.name ?? "";
    dialog.querySelector<HTMLElement>("#options-close")!.addEventListener("click", closeOverlay);
    dialog.querySelector<HTMLFormElement>("#rename-form")!.addEventListener("submit", (event) => {
      event.preventDefault();
      guarded(async () => {
        const result = await api.rename(renameInput.value);
        if (state.testbed) state.testbed = { ...state.testbed, name: result.name };
        render();
        toast("Testbed renamed.");
      })();
    });
    for (const which of ["logo", "map"] as const) {
      const input = dialog.querySelector<HTMLInputElement>(`#${which}-file`)!;
      input.addEventListener("change", () => {
        const file = input.files?.[0];
        if (!file) return;
        if (!file.type.startsWith("image/")) {
          toast(`Not an image file: ${file.type || "unknown type"}`);
          input.value = "";
          return;
        }
        guarded(async () => {
          await api.uploadAsset(which, file);
          assetNonce += 1;
          render();
          toast(`New ${which} uploaded.`);
        })();
      });
    }
  }

  // -- map interaction -------------------------------------------------------

  mapEl.addEventListener("click", (event) => {
    if (suppressMapClick) {
      suppressMapClick = false;
      return;
    }
    if (event.target !== mapEl) return; // marker clicks select, handled below
    if (state.mode !== "edit") return;
    const point = toNormalized(event.clientX, event.clientY, mapEl.getBoundingClientRect());
    guarded(async () => {
      const created = await api.addResource({ x: point.x, y: point.y });
      await loadResources();
      await select(created.resource.id);
    })();
  });

  function beginDrag(id: string, el: HTMLElement, event: MouseEvent): void {
    if (state.mode !== "edit") return;
    event.preventDefault();
    drag = { id, startX: event.clientX, startY: event.clientY, el, moved: false };
    document.addEventListener("mousemove", onDragMove);
    document.addEventListener("mouseup", onDragEnd);
  }

  function onDragMove(event: MouseEvent): void {
    if (!drag) return;
    if (
      Math.abs(event.clientX - drag.startX) > DRAG_THRESHOLD_PX ||
      Math.abs(event.clientY - drag.startY) > DRAG_THRESHOLD_PX
    ) {
      drag.moved = true;
    }
    if (!drag.moved) return;
    const point = toNormalized(event.clientX, event.clientY, mapEl.getBoundingClientRect());
    drag.el.style.left = `${point.x * 100}%`;
    drag.el.style.top = `${point.y * 100}%`;
  }

  function onDragEnd(event: MouseEvent): void {
    document.removeEventListener("mousemove", onDragMove);
    document.removeEventListener("mouseup", onDragEnd);
    const finished = drag;
    drag = null;
    if (!finished || !finished.moved) return;
    suppressMapClick = true;
    const point = toNormalized(event.clientX, event.clientY, mapEl.getBoundingClientRect());
    void (async () => {
      try {
        const result = await api.updateResource(finished.id, { x: point.x, y: point.y });
        const index = state.resources.findIndex((r) => r.id === finished.id);
        if (index >= 0) state.resources[index] = result.resource;
      } catch (err) {
        toast(`Move rejected — ${describe(err)}`);
      }
      render(); // on failure this snaps the marker back to its server-side spot
    })();
  }

  // -- static widget wiring --------------------------------------------------

  queryForm.addEventListener("submit", (event) => {
    event.preventDefault();
    guarded(async () => {
      await runQuery(queryInput.value);
      render();
    })();
  });

  $("query-clear").addEventListener("click", () => {
    queryInput.value = "";
    state.matched = null;
    state.queryError = null;
    render();
  });

  // -- rendering -------------------------------------------------------------

  function renderHeader(): void {
    if (state.testbed) {
      nameEl.textContent = state.testbed.name;
      logoEl.src = assetUrl(state.testbed.logo_url);
      document.title = state.testbed.name;
    }
    connEl.textContent = state.connected ? "live" : "offline — retrying";
    connEl.className = state.connected ? "conn conn-up" : "conn conn-down";

    controlsEl.textContent = "";
    const modeBtn = document.createElement("button");
    modeBtn.id = "mode-toggle";
    modeBtn.textContent = state.mode === "edit" ? "Leave edit mode" : "Edit mode";
    modeBtn.addEventListener("click", () => {
      if (state.mode === "edit") leaveEditMode();
      else guarded(enterEditMode)();
    });
    controlsEl.appendChild(modeBtn);
    if (state.mode === "edit") {
      const optionsBtn = document.createElement("button");
      optionsBtn.id = "options-btn";
      optionsBtn.textContent = "Options";
      optionsBtn.addEventListener("click", openOptionsDialog);
      controlsEl.appendChild(optionsBtn);
    }
  }

  function renderQueryError(): void {
    if (!state.queryError) {
      queryErrorEl.hidden = true;
      queryErrorEl.textContent = "";
      querySummaryEl.textContent =
        state.matched === null ? "" : `${state.matched.size} of ${state.resources.length} match`;
      return;
    }
    querySummaryEl.textContent = "";
    const { text, message, offset } = state.queryError;
    if (offset === null) {
      queryErrorEl.textContent = message;
    } else {
      const column = caretColumn(text, offset);
      queryErrorEl.textContent = `${text}\n${" ".repeat(column)}^\n${message}`;
    }
    queryErrorEl.hidden = false;
  }

  function renderMarkers(): void {
    if (drag) return; // never rebuild the node mid-drag
    if (state.testbed) {
      mapEl.style.backgroundImage = `url("${assetUrl(state.testbed.map_url)}")`;
    }
    mapEl.textContent = "";
    for (const resource of state.resources) {
      const marker = document.createElement("div");
      marker.className = "marker";
      marker.dataset.id = resource.id;
      marker.title = `${resource.name} (${resource.status})`;
      marker.style.left = `${resource.x * 100}%`;
      marker.style.top = `${resource.y * 100}%`;
      marker.style.backgroundColor = STATUS_COLORS[resource.status];
      if (resource.id === state.selectedId) marker.classList.add("selected");
      if (state.matched !== null) {
        marker.classList.add(state.matched.has(resource.id) ? "matched" : "dimmed");
      }
      marker.addEventListener("click", (event) => {
        event.stopPropagation();
        guarded(() => select(resource.id))();
      });
      marker.addEventListener("mousedown", (event) => beginDrag(resource.id, marker, event));
      mapEl.appendChild(marker);
    }
  }

  function renderDetail(): void {
    const active = document.activeElement;
    if (active instanceof HTMLElement && detailEl.contains(active) && active.matches("input")) {
      return; // someone is typing in the pin form; do not yank the field away
    }
    const resource = state.resources.find((r) => r.id === state.selectedId);
    if (!resource) {
      detailEl.hidden = true;
      detailEl.textContent = "";
      return;
    }
    detailEl.hidden = false;
    detailEl.textContent = "";

    const heading = document.createElement("h2");
    heading.textContent = resource.name;
    detailEl.appendChild(heading);

    const endpoint = document.createElement("p");
    endpoint.className = "endpoint";
    endpoint.textContent =
      `${resource.address}:${resource.port}` + (resource.country ? ` · ${resource.country}` : "");
    detailEl.appendChild(endpoint);

    const statusLine = document.createElement("p");
    statusLine.className = "status-line";
    const dot = document.createElement("span");
    dot.className = "dot";
    dot.style.backgroundColor = STATUS_COLORS[resource.status];
    statusLine.append(dot, ` ${resource.status}`);
    detailEl.appendChild(statusLine);

    const times = document.createElement("p");
    times.className = "times";
    times.textContent =
      `last success ${formatTimestamp(resource.last_success)} · ` +
      `last attempt ${formatTimestamp(resource.last_attempt)}`;
    detailEl.appendChild(times);

    if (resource.last_error) {
      const errorLine = document.createElement("p");
      errorLine.className = "last-error";
      errorLine.textContent = resource.last_error;
      detailEl.appendChild(errorLine);
    }

    const refreshBtn = document.createElement("button");
    refreshBtn.id = "refresh-btn";
    refreshBtn.textContent = "Refresh";
    refreshBtn.addEventListener(
      "click",
      guarded(async () => {
        await api.refresh(resource.id);
        await loadResources();
        render();
      }),
    );
    detailEl.appendChild(refreshBtn);

    const entriesBox = document.createElement("div");
    entriesBox.className = "entries";
    if (state.detail && state.detail.id === resource.id) {
      for (const [category, entries] of groupEntries(state.detail.entries)) {
        const title = document.createElement("h3");
        title.textContent = category;
        entriesBox.appendChild(title);
        for (const entry of entries) {
          const table = document.createElement("table");
          table.className = "entry";
          for (const [attr, values] of Object.entries(entry.attributes)) {
            const row = table.insertRow();
            row.insertCell().textContent = attr;
            row.insertCell().textContent = values.join(", ");
          }
          entriesBox.appendChild(table);
        }
      }
      if (state.detail.entries.length === 0) {
        const empty = document.createElement("p");
        empty.className = "no-entries";
        empty.textContent = "No directory entries yet.";
        entriesBox.appendChild(empty);
      }
    }
    detailEl.appendChild(entriesBox);

    if (state.mode === "edit") {
      detailEl.appendChild(buildPinForm(resource));
      const deleteBtn = document.createElement("button");
      deleteBtn.id = "delete-btn";
      deleteBtn.className = "danger";
      deleteBtn.textContent = "Delete";
      deleteBtn.addEventListener("click", () => {
        if (!confirmFn(`Delete "${resource.name}" from the testbed?`)) return;
        guarded(async () => {
          await api.deleteResource(resource.id);
          state.selectedId = null;
          state.detail = null;
          await loadResources();
          render();
        })();
      });
      detailEl.appendChild(deleteBtn);
    }
  }

  function buildPinForm(resource: ResourceSummary): HTMLFormElement {
    const form = document.createElement("form");
    form.id = "pin-form";
    form.innerHTML = `
      <label>Name <input name="name" autocomplete="off"></label>
      <label>Address <input name="address" autocomplete="off"></label>
      <label>Port <input name="port" type="number" min="1" max="65535"></label>
      <label>Country <input name="country" autocomplete="off"></label>
      <button type="submit">Update</button>
    `;
    (form.elements.namedItem("name") as HTMLInputElement).value = resource.name;
    (form.elements.namedItem("address") as HTMLInputElement).value = resource.address;
    (form.elements.namedItem("port") as HTMLInputElement).value = String(resource.port);
    (form.elements.namedItem("country") as HTMLInputElement).value = resource.country ?? "";
    form.addEventListener("submit", (event) => {
      event.preventDefault();
      const country = (form.elements.namedItem("country") as HTMLInputElement).value.trim();
      guarded(async () => {
        await api.updateResource(resource.id, {
          name: (form.elements.namedItem("name") as HTMLInputElement).value,
          address: (form.elements.namedItem("address") as HTMLInputElement).value,
          port: Number((form.elements.namedItem("port") as HTMLInputElement).value),
          country: country === "" ? null : country,
        });
        await loadResources();
        render();
        toast("Resource updated.");
      })();
    });
    return form;
  }

  function renderToast(): void {
    toastEl.hidden = state.toast === null;
    toastEl.textContent = state.toast ?? "";
  }

  function render(): void {
    renderHeader();
    renderQueryError();
    renderMarkers();
    renderDetail();
    renderToast();
  }

  // -- boot ------------------------------------------------------------------

  const storedToken = sessionStorage.getItem(TOKEN_KEY);
  if (storedToken) api.token = storedToken;

  const feedCallbacks: FeedCallbacks = {
    onChange: () => {
      void refreshAll().catch((err) => toast(describe(err)));
    },
    onConnected: (connected) => {
      state.connected = connected;
      render();
    },
  };
  const feed: Feed = options.makeFeed
    ? options.makeFeed(feedCallbacks)
    : new ChangeFeed("", feedCallbacks);

  const ready = (async () => {
    try {
      await loadTestbed();
      await loadResources();
    } catch (err) {
      toast(describe(err));
    }
    render();
    feed.start();
  })();

  return {
    ready,
    state,
    stop() {
      feed.stop();
      closeOverlay();
    },
  };
}
