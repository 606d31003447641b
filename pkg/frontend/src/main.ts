// DOM wiring: tabs, live session stream, review actions, dashboards.

import { ApiError, ConsoleApi } from "./api.js";
import {
  coerceSlotInput,
  renderHome,
  renderLog,
  renderMemoryGraph,
  renderPreferences,
  renderSession,
} from "./render.js";
import type { SchemaIndex, SessionSnapshot } from "./types.js";

const api = new ConsoleApi("");
let schemas: SchemaIndex = {};
let activeSession: string | null = null;
let eventSource: EventSource | null = null;

const $ = (selector: string) => document.querySelector(selector) as HTMLElement;

function banner(message: string, kind: "error" | "info" = "error") {
  const el = $("#banner");
  el.textContent = message;
  el.className = kind;
  el.hidden = !message;
  if (message) setTimeout(() => (el.hidden = true), 6000);
}

async function refreshSessionList() {
  const sessions = await api.listSessions();
  const items = sessions
    .map(
      (s) =>
        `<li><button data-action="open-session" data-session="${s.session_id}">${s.instruction}</button> <em>${s.status}</em></li>`,
    )
    .join("");
  $("#session-list").innerHTML = items || "<li class='empty'>no sessions yet</li>";
}

async function showSession(sessionId: string) {
  activeSession = sessionId;
  const snapshot = await api.getSession(sessionId);
  $("#session-view").innerHTML = renderSession(snapshot, schemas);
  if (snapshot.status === "running") subscribe(sessionId);
}

function subscribe(sessionId: string) {
  // Live stage progress via SSE; on any hiccup fall back to polling.
  eventSource?.close();
  try {
    eventSource = new EventSource(`/sessions/${sessionId}/events`);
    eventSource.onmessage = async (message) => {
      const event = JSON.parse(message.data);
      if (event.status === "done") {
        eventSource?.close();
      }
      if (activeSession === sessionId) {
        const snapshot = await api.getSession(sessionId);
        $("#session-view").innerHTML = renderSession(snapshot, schemas);
        void refreshSessionList();
      }
    };
    eventSource.onerror = () => {
      eventSource?.close();
      void pollSession(sessionId);
    };
  } catch {
    void pollSession(sessionId);
  }
}

async function pollSession(sessionId: string) {
  const snapshot = await api.waitForReview(sessionId);
  if (activeSession === sessionId) {
    $("#session-view").innerHTML = renderSession(snapshot, schemas);
    void refreshSessionList();
  }
}

async function applyFeedback(action: Parameters<ConsoleApi["sendFeedback"]>[1]) {
  if (!activeSession) return;
  try {
    const snapshot = await api.sendFeedback(activeSession, action);
    $("#session-view").innerHTML = renderSession(snapshot, schemas);
    void refreshSessionList();
  } catch (error) {
    banner(error instanceof ApiError ? error.detail : String(error));
  }
}

function wireSessionView() {
  const view = $("#session-view");
  view.addEventListener("click", (event) => {
    const target = event.target as HTMLElement;
    const action = target.dataset.action;
    if (action === "approve") void applyFeedback({ action: "approve" });
    if (action === "reject") void applyFeedback({ action: "reject" });
    if (action === "remove-subtask") {
      void applyFeedback({
        action: "remove_subtask",
        index: Number(target.dataset.subtask),
      });
    }
  });
  view.addEventListener("change", (event) => {
    const target = event.target as HTMLInputElement;
    if (target.dataset.action !== "set-parameter") return;
    const coerced = coerceSlotInput(target.dataset.kind ?? "string", target.value);
    if (!coerced.ok) {
      banner(`"${target.value}" is not a valid ${target.dataset.kind}`);
      return;
    }
    if (target.type === "number") {
      const value = Number(target.value);
      const min = target.min === "" ? null : Number(target.min);
      const max = target.max === "" ? null : Number(target.max);
      if ((min !== null && value < min) || (max !== null && value > max)) {
        banner(`value must be within [${target.min || "-∞"}, ${target.max || "∞"}]`);
        return;
      }
    }
    void applyFeedback({
      action: "set_parameter",
      subtask_index: Number(target.dataset.subtask),
      slot: target.dataset.slot ?? "",
      value: coerced.value,
    });
  });
  view.addEventListener("submit", (event) => {
    const form = event.target as HTMLFormElement;
    if (form.dataset.action !== "add-subtask") return;
    event.preventDefault();
    const text = (form.elements.namedItem("text") as HTMLInputElement).value.trim();
    if (text) void applyFeedback({ action: "add_subtask", text });
    form.reset();
  });
}

async function refreshMemory() {
  $("#memory-view").innerHTML = renderMemoryGraph(await api.getMemory());
}

async function refreshPreferences() {
  $("#prefs-view").innerHTML = renderPreferences(await api.getPreferences());
}

async function refreshHome() {
  $("#home-view").innerHTML = renderHome(await api.getHome());
  $("#log-view").innerHTML = renderLog(await api.getLog());
}

function wireHomeView() {
  $("#home-view").addEventListener("click", async (event) => {
    const target = event.target as HTMLElement;
    if (target.dataset.action !== "toggle-availability") return;
    try {
      await api.setAvailability(
        target.dataset.device ?? "",
        target.dataset.available !== "true",
      );
      await refreshHome();
    } catch (error) {
      banner(error instanceof ApiError ? error.detail : String(error));
    }
  });
  $("#home-view").addEventListener("submit", async (event) => {
    const form = event.target as HTMLFormElement;
    if (form.dataset.action !== "emit-event") return;
    event.preventDefault();
    const field = (name: string) => (form.elements.namedItem(name) as HTMLInputElement).value;
    const raw = field("value");
    const value = /^-?\d+(\.\d+)?$/.test(raw) ? Number(raw) : raw;
    try {
      const fired = await api.emitEvent(field("device"), field("attribute"), value);
      banner(fired.length ? `${fired.length} rule action(s) fired` : "event applied", "info");
      await refreshHome();
    } catch (error) {
      banner(error instanceof ApiError ? error.detail : String(error));
    }
  });
}

function wireTabs() {
  document.querySelectorAll<HTMLElement>("nav [data-tab]").forEach((button) => {
    button.addEventListener("click", () => {
      document.querySelectorAll<HTMLElement>("main > section").forEach((section) => {
        section.hidden = section.id !== `tab-${button.dataset.tab}`;
      });
      document
        .querySelectorAll("nav [data-tab]")
        .forEach((b) => b.classList.toggle("active", b === button));
      if (button.dataset.tab === "memory") void refreshMemory();
      if (button.dataset.tab === "preferences") void refreshPreferences();
      if (button.dataset.tab === "home") void refreshHome();
    });
  });
}

async function boot() {
  wireTabs();
  wireSessionView();
  wireHomeView();
  schemas = await api.getSchemas();
  await refreshSessionList();

  $("#instruction-form").addEventListener("submit", async (event) => {
    event.preventDefault();
    const input = $("#instruction-input") as HTMLInputElement;
    const text = input.value.trim();
    if (!text) return;
    try {
      const { session_id } = await api.submitInstruction(text);
      input.value = "";
      await refreshSessionList();
      await showSession(session_id);
    } catch (error) {
      banner(error instanceof ApiError ? error.detail : String(error));
    }
  });

  $("#session-list").addEventListener("click", (event) => {
    const target = event.target as HTMLElement;
    if (target.dataset.action === "open-session") {
      void showSession(target.dataset.session ?? "");
    }
  });
}

document.addEventListener("DOMContentLoaded", () => void boot());
