// Payload shapes of the agent service API. The console renders these
// verbatim; all business logic stays server-side.

export interface WireCommand {
  desc: string;
  device: {
    name: string;
    capability: { name: string; command: string; value: Record<string, unknown> };
  };
  arg_names?: string[];
}

export interface WireTrigger {
  device: string;
  attribute: string;
  comparator: string;
  value: Record<string, unknown>;
}

export interface SlotRef {
  name: string;
  command: number;
  arg: number;
}

export interface SubtaskView {
  subtask: string;
  device: string;
  role: "action" | "trigger" | "query";
  provenance: string;
  attribute: string;
  commands: WireCommand[];
  triggers: WireTrigger[];
  slots: SlotRef[];
  flagged: string[];
  targets: [string, string, string][];
}

export interface ProposalView {
  proposal_id: string;
  instruction: string;
  type: string;
  context: string;
  status: string;
  correction_rounds: number;
  call_trace: [string, number][];
  notices: string[];
  subtasks: SubtaskView[];
}

export interface ProgressEvent {
  seq: number;
  stage: string;
  status: string;
  detail: string;
}

export interface SessionSnapshot {
  session_id: string;
  instruction: string;
  status: string;
  events: ProgressEvent[];
  proposal: ProposalView | null;
  answers: [string, string, unknown][];
  escalation: unknown[];
}

export interface SessionListing {
  session_id: string;
  instruction: string;
  status: string;
}

export interface MemoryGraph {
  counts: { tasks: number; subtasks: number; contexts: number };
  tasks: { id: number; instruction: string; subtasks: number[] }[];
  subtasks: {
    id: number;
    description: string;
    device: string;
    role: string;
    contexts: number[];
    tasks: number[];
    template: WireCommand[];
  }[];
  contexts: { id: number; keyword: string; bindings: Record<string, unknown> }[];
}

export interface PreferenceView {
  tables: {
    context: string;
    levels: Record<string, string>;
    support: Record<string, number>;
  }[];
  effects: unknown[];
}

export interface DeviceView {
  name: string;
  room: string;
  available: boolean;
  capabilities: string[];
  attributes: Record<string, unknown>;
}

export interface RuleView {
  rule_id: string;
  triggers: WireTrigger[];
  actions: WireCommand[];
}

export interface HomeView {
  devices: DeviceView[];
  rules: RuleView[];
  clock: number;
  log_length: number;
}

export interface LogRecord {
  tick: number;
  command: WireCommand | null;
  ok: boolean;
  new_values: Record<string, unknown>;
  violations: string[];
  cause: string;
  rule_id: string | null;
}

export interface ArgSchema {
  name: string;
  kind: string;
  enum: string[] | null;
  min: number | null;
  max: number | null;
}

export interface CapabilitySchemaView {
  commands: { name: string; args: ArgSchema[] }[];
  attributes: ArgSchema[];
}

export type SchemaIndex = Record<string, CapabilitySchemaView>;

export type FeedbackAction =
  | { action: "approve" }
  | { action: "reject" }
  | { action: "add_subtask"; text: string }
  | { action: "remove_subtask"; index: number }
  | { action: "set_parameter"; subtask_index: number; slot: string; value: unknown };
