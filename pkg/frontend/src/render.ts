// Pure HTML/SVG renderers: data in, markup out. All interactivity is wired
// through data-* attributes picked up by main.ts, so these stay testable
// without a DOM.

import type {
  ArgSchema,
  HomeView,
  LogRecord,
  MemoryGraph,
  PreferenceView,
  ProposalView,
  SchemaIndex,
  SessionSnapshot,
  SubtaskView,
  WireCommand,
} from "./types.js";

export function escapeHtml(text: unknown): string {
  return String(text)
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;")
    .replaceAll("'", "&#39;");
}

export function slotValue(command: WireCommand): unknown {
  const values = Object.values(command.device.capability.value);
  return values.length ? values[0] : null;
}

/** Schema constraints for the argument a slot points at, if known. */
export function argSchemaFor(
  subtask: SubtaskView,
  slot: string,
  schemas: SchemaIndex,
): ArgSchema | null {
  const ref = subtask.slots.find((s) => s.name === slot);
  if (!ref) return null;
  const command = subtask.commands[ref.command];
  if (!command) return null;
  const cap = schemas[command.device.capability.name];
  const spec = cap?.commands.find((c) => c.name === command.device.capability.command);
  return spec?.args[ref.arg] ?? null;
}

function provenanceBadge(provenance: string): string {
  const labels: Record<string, string> = {
    freshly_decomposed: "fresh",
    reused_from_memory: "from memory",
    added_by_preference: "preference",
    added_by_user: "added by you",
  };
  return `<span class="badge badge-${provenance}">${escapeHtml(labels[provenance] ?? provenance)}</span>`;
}

function slotEditor(
  subtask: SubtaskView,
  subtaskIndex: number,
  slot: string,
  current: unknown,
  schemas: SchemaIndex,
): string {
  const schema = argSchemaFor(subtask, slot, schemas);
  const flagged = subtask.flagged.includes(slot)
    ? '<span class="badge badge-flagged" title="default value; please review">review</span>'
    : "";
  const common = `data-action="set-parameter" data-subtask="${subtaskIndex}" data-slot="${escapeHtml(slot)}"`;
  let input: string;
  if (schema?.enum) {
    const options = schema.enum
      .map(
        (option) =>
          `<option value="${escapeHtml(option)}"${option === current ? " selected" : ""}>${escapeHtml(option)}</option>`,
      )
      .join("");
    input = `<select ${common} data-kind="${schema.kind}">${options}</select>`;
  } else if (schema && (schema.kind === "integer" || schema.kind === "decimal")) {
    const bounds = `${schema.min !== null ? ` min="${schema.min}"` : ""}${schema.max !== null ? ` max="${schema.max}"` : ""}`;
    const step = schema.kind === "integer" ? ' step="1"' : ' step="any"';
    input = `<input type="number" ${common} data-kind="${schema.kind}"${bounds}${step} value="${escapeHtml(current)}">`;
  } else {
    input = `<input type="text" ${common} data-kind="${schema?.kind ?? "string"}" value="${escapeHtml(current)}">`;
  }
  return `<label class="slot">${escapeHtml(slot)} ${input} ${flagged}</label>`;
}

function renderCommand(command: WireCommand): string {
  const cap = command.device.capability;
  const args = Object.entries(cap.value)
    .map(([kind, value]) => `${escapeHtml(value)}:${escapeHtml(kind)}`)
    .join(", ");
  return `<li><code>${escapeHtml(command.device.name)}.${escapeHtml(cap.name)}.${escapeHtml(cap.command)}(${args})</code> <span class="desc">${escapeHtml(command.desc)}</span></li>`;
}

export function renderSubtaskCard(
  subtask: SubtaskView,
  index: number,
  schemas: SchemaIndex,
  editable: boolean,
): string {
  const targets = subtask.targets
    .map(([prop, level, direction]) => `<span class="target">${escapeHtml(prop)}=${escapeHtml(level)} (${escapeHtml(direction)})</span>`)
    .join(" ");
  const triggers = subtask.triggers
    .map(
      (t) =>
        `<li><code>${escapeHtml(t.device)}.${escapeHtml(t.attribute)} ${escapeHtml(t.comparator)} ${escapeHtml(Object.values(t.value)[0])}</code></li>`,
    )
    .join("");
  const editors = editable
    ? subtask.slots
        .map((ref) => {
          const command = subtask.commands[ref.command];
          return command ? slotEditor(subtask, index, ref.name, slotValue(command), schemas) : "";
        })
        .join("")
    : "";
  const removeButton = editable
    ? `<button data-action="remove-subtask" data-subtask="${index}">remove</button>`
    : "";
  return `
  <div class="card subtask" data-role="${subtask.role}">
    <header>
      <strong>${escapeHtml(subtask.subtask)}</strong>
      <span class="device">${escapeHtml(subtask.device)}</span>
      ${provenanceBadge(subtask.provenance)}
      ${removeButton}
    </header>
    ${targets ? `<div class="targets">${targets}</div>` : ""}
    <ul class="commands">${subtask.commands.map(renderCommand).join("")}${triggers}</ul>
    ${editors ? `<div class="editors">${editors}</div>` : ""}
  </div>`;
}

export function renderSession(snapshot: SessionSnapshot, schemas: SchemaIndex): string {
  const stages = snapshot.events
    .map(
      (event) =>
        `<li class="stage stage-${escapeHtml(event.status)}"><span>${escapeHtml(event.stage)}</span> <em>${escapeHtml(event.status)}</em> ${escapeHtml(event.detail)}</li>`,
    )
    .join("");
  const proposal = snapshot.proposal;
  const editable = snapshot.status === "awaiting_review";
  let body = "";
  if (proposal) {
    const notices = proposal.notices.length
      ? `<div class="notices">${proposal.notices.map((n) => `<p>${escapeHtml(n)}</p>`).join("")}</div>`
      : "";
    const answers = snapshot.answers.length
      ? `<div class="answers">${snapshot.answers
          .map(([device, attribute, value]) => `<p>${escapeHtml(device)}.${escapeHtml(attribute)} = <strong>${escapeHtml(value)}</strong></p>`)
          .join("")}</div>`
      : "";
    const reviewControls = editable
      ? `<div class="review-controls">
           <form data-action="add-subtask"><input name="text" placeholder="add a subtask, e.g. play music"><button type="submit">add</button></form>
           <button class="approve" data-action="approve">approve</button>
           <button class="reject" data-action="reject">reject</button>
         </div>`
      : "";
    body = `
    <div class="proposal" data-status="${escapeHtml(snapshot.status)}">
      <p class="meta">${escapeHtml(proposal.type)} · context <strong>${escapeHtml(proposal.context || "–")}</strong> · ${escapeHtml(proposal.status)}${proposal.correction_rounds ? ` · ${proposal.correction_rounds} correction round(s)` : ""}</p>
      ${notices}
      ${proposal.subtasks.map((s, i) => renderSubtaskCard(s, i, schemas, editable)).join("")}
      ${answers}
      ${reviewControls}
    </div>`;
  }
  return `
  <section class="session" data-session="${escapeHtml(snapshot.session_id)}">
    <h2>${escapeHtml(snapshot.instruction)}</h2>
    <ol class="stages">${stages}</ol>
    ${body}
  </section>`;
}

export function renderMemoryGraph(graph: MemoryGraph): string {
  const counts = graph.counts;
  if (!counts.tasks && !counts.subtasks && !counts.contexts) {
    return '<p class="empty">Task memory is empty. Approve an instruction to populate it.</p>';
  }
  const rowGap = 46;
  const columns: [number, { id: number; label: string }[]][] = [
    [120, graph.tasks.map((t) => ({ id: t.id, label: t.instruction }))],
    [430, graph.subtasks.map((s) => ({ id: s.id, label: `${s.description} (${s.device})` }))],
    [740, graph.contexts.map((c) => ({ id: c.id, label: `${c.keyword}: ${Object.keys(c.bindings).length} binding(s)` }))],
  ];
  const positions = new Map<number, { x: number; y: number }>();
  let nodes = "";
  for (const [x, column] of columns) {
    column.forEach((node, row) => {
      const y = 40 + row * rowGap;
      positions.set(node.id, { x, y });
      nodes += `<g class="node" transform="translate(${x},${y})"><circle r="7"></circle><text x="12" y="4">${escapeHtml(node.label).slice(0, 60)}</text></g>`;
    });
  }
  let edges = "";
  for (const task of graph.tasks) {
    for (const subtaskId of task.subtasks) {
      const a = positions.get(task.id);
      const b = positions.get(subtaskId);
      if (a && b) edges += `<line x1="${a.x}" y1="${a.y}" x2="${b.x}" y2="${b.y}"></line>`;
    }
  }
  for (const subtask of graph.subtasks) {
    for (const contextId of subtask.contexts) {
      const a = positions.get(subtask.id);
      const b = positions.get(contextId);
      if (a && b) edges += `<line x1="${a.x}" y1="${a.y}" x2="${b.x}" y2="${b.y}"></line>`;
    }
  }
  const height = Math.max(graph.tasks.length, graph.subtasks.length, graph.contexts.length) * rowGap + 70;
  return `
  <p class="meta">tasks ${counts.tasks} · subtasks ${counts.subtasks} · contexts ${counts.contexts}</p>
  <svg viewBox="0 0 1050 ${height}" class="memory-graph" role="img">
    <text x="120" y="16" class="column-title">tasks</text>
    <text x="430" y="16" class="column-title">subtasks</text>
    <text x="740" y="16" class="column-title">contexts</text>
    ${edges}${nodes}
  </svg>`;
}

export function renderPreferences(view: PreferenceView): string {
  if (!view.tables.length) return '<p class="empty">No preference tables yet.</p>';
  const properties = ["air_quality", "brightness", "humidity", "noise", "temperature", "security"];
  const header = properties.map((p) => `<th>${escapeHtml(p)}</th>`).join("");
  const rows = view.tables
    .map((table) => {
      const cells = properties
        .map((prop) => {
          const level = table.levels[prop];
          if (!level) return "<td>–</td>";
          return `<td class="level-${level}">${escapeHtml(level)}<span class="support">×${table.support[prop] ?? 0}</span></td>`;
        })
        .join("");
      return `<tr><th>${escapeHtml(table.context)}</th>${cells}</tr>`;
    })
    .join("");
  return `<table class="pref-table"><thead><tr><th>context</th>${header}</tr></thead><tbody>${rows}</tbody></table>`;
}

export function renderHome(home: HomeView): string {
  const devices = home.devices
    .map(
      (device) => `
      <div class="card device${device.available ? "" : " unavailable"}">
        <header><strong>${escapeHtml(device.name)}</strong><span>${escapeHtml(device.room)}</span></header>
        <dl>${Object.entries(device.attributes)
          .map(([k, v]) => `<dt>${escapeHtml(k)}</dt><dd>${escapeHtml(v)}</dd>`)
          .join("")}</dl>
        <button data-action="toggle-availability" data-device="${escapeHtml(device.name)}" data-available="${device.available}">
          ${device.available ? "mark unavailable" : "mark available"}
        </button>
      </div>`,
    )
    .join("");
  const rules = home.rules.length
    ? home.rules
        .map(
          (rule) =>
            `<li><code>${escapeHtml(rule.rule_id)}</code>: ${rule.triggers
              .map((t) => `${escapeHtml(t.device)}.${escapeHtml(t.attribute)} ${escapeHtml(t.comparator)} ${escapeHtml(Object.values(t.value)[0])}`)
              .join(" ∧ ")} → ${rule.actions.map((a) => escapeHtml(a.desc)).join("; ")}</li>`,
        )
        .join("")
    : "<li class='empty'>no rules installed</li>";
  return `
  <div class="device-grid">${devices}</div>
  <h3>Installed rules</h3><ul class="rules">${rules}</ul>
  <h3>Inject an event</h3>
  <form data-action="emit-event" class="event-form">
    <input name="device" placeholder="device (e.g. fridge)" required>
    <input name="attribute" placeholder="attribute (e.g. contact)" required>
    <input name="value" placeholder="value (e.g. open)" required>
    <button type="submit">emit</button>
  </form>`;
}

export function renderLog(records: LogRecord[]): string {
  if (!records.length) return '<p class="empty">No executions yet.</p>';
  const rows = records
    .slice()
    .reverse()
    .map((record) => {
      const what = record.command
        ? `${escapeHtml(record.command.device.name)}: ${escapeHtml(record.command.desc)}`
        : "cascade cap";
      const outcome = record.ok
        ? `<span class="ok">ok</span>`
        : `<span class="err">${escapeHtml(record.violations.join("; "))}</span>`;
      const cause = record.cause === "rule" ? ` <span class="badge">rule ${escapeHtml(record.rule_id ?? "")}</span>` : "";
      return `<tr><td>${record.tick}</td><td>${what}${cause}</td><td>${outcome}</td></tr>`;
    })
    .join("");
  return `<table class="log"><thead><tr><th>tick</th><th>execution</th><th>outcome</th></tr></thead><tbody>${rows}</tbody></table>`;
}

/** Client-side pre-check mirroring the input constraints; the service still
 * re-validates (422) if anything slips through. */
export function coerceSlotInput(kind: string, raw: string): { ok: boolean; value?: unknown } {
  if (kind === "integer") {
    const value = Number(raw);
    if (!Number.isInteger(value)) return { ok: false };
    return { ok: true, value };
  }
  if (kind === "decimal") {
    const value = Number(raw);
    if (!Number.isFinite(value)) return { ok: false };
    return { ok: true, value };
  }
  if (kind === "boolean") {
    if (raw !== "true" && raw !== "false") return { ok: false };
    return { ok: true, value: raw === "true" };
  }
  return { ok: true, value: raw };
}
