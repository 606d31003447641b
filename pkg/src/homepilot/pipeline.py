"""Decompose -> Derive -> Refine orchestration.

Before each stage the agent consults task memory: a task-level hit skips
Decompose, a subtask-level hit skips Derive for that subtask, and a context
hit fills its parameter slots with zero Refine involvement. Proposals are
validated by executing them in a cloned virtual home and self-correcting from
the execution log, then parked for human review.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace

from .domain import (
    CommandArg,
    DeviceCommand,
    InstructionType,
    ParamValue,
    ProposalStatus,
    Provenance,
    SlotRef,
    Subtask,
    TaskProposal,
    TriggerActionRule,
    TriggerPredicate,
    parse_decompose_output,
    parse_derive_output,
    parse_trigger_output,
    proposal_id_for,
    serialize_derive_output,
)
from .gateway import (
    ChatRequest,
    LlmGateway,
    PlaybookMiss,
    ProviderUnreachable,
    SessionGateway,
    StageTag,
    call_trace,
)
from .memory import TaskMemory, instantiate
from .preferences import LogStore, PreferenceEngine
from .prompts import render_prompt
from .registry import (
    EmptyEnvironment,
    SchemaCorpus,
    retrieve_relevant,
    resolve_argument_names,
    validate_command,
)
from .simulator import ExecutionRecord, HomeState

log = logging.getLogger(__name__)


class ProviderFailure(RuntimeError):
    pass


class UnparseableClassification(ValueError):
    pass


class SchemaParseFailure(ValueError):
    pass


class HallucinatedDevice(ValueError):
    pass


class UnresolvedAfterRefine(ValueError):
    pass


class InvalidIndex(IndexError):
    pass


class SchemaViolationError(ValueError):
    def __init__(self, violations):
        super().__init__("; ".join(str(v) for v in violations))
        self.violations = list(violations)


@dataclass(frozen=True)
class PipelineConfig:
    retry_limit: int = 3
    tau_task: float = 0.85
    tau_subtask: float = 0.80
    parallel_derive: bool = False
    retrieval_k: int = 5
    memory_enabled: bool = True
    decompose_enabled: bool = True

    def __post_init__(self):
        if not 1 <= self.retry_limit <= 5:
            raise ValueError("retry_limit must be in [1, 5]")
        for name in ("tau_task", "tau_subtask"):
            value = getattr(self, name)
            if not 0 < value <= 1:
                raise ValueError(f"{name} must be in (0, 1]")


@dataclass(frozen=True)
class StageOutcome:
    stage: str
    skipped_via_memory: bool
    provider_calls: int
    output: str = ""

    def __post_init__(self):
        if self.skipped_via_memory and self.provider_calls:
            raise ValueError("a memory-skipped stage cannot make provider calls")


# Feedback actions --------------------------------------------------------------


@dataclass(frozen=True)
class AddSubtask:
    text: str


@dataclass(frozen=True)
class RemoveSubtask:
    index: int


@dataclass(frozen=True)
class SetParameter:
    subtask_index: int
    slot: str
    value: object


@dataclass(frozen=True)
class Approve:
    pass


@dataclass(frozen=True)
class Reject:
    pass


@dataclass
class RunResult:
    proposal: TaskProposal
    session: SessionGateway
    outcomes: list[StageOutcome]
    escalated: bool = False
    escalation_records: list[ExecutionRecord] = field(default_factory=list)
    query_answers: list[tuple[str, str, object]] = field(default_factory=list)


def _coerce_assignment(kind: str, value: object) -> ParamValue | None:
    try:
        if kind == "decimal" and isinstance(value, (int, float)) and not isinstance(value, bool):
            return ParamValue.concrete("decimal", value)
        if kind == "integer":
            if isinstance(value, bool):
                return None
            if isinstance(value, int):
                return ParamValue.concrete("integer", value)
            if isinstance(value, float) and value.is_integer():
                return ParamValue.concrete("integer", int(value))
        if kind == "string" and isinstance(value, str):
            return ParamValue.concrete("string", value)
        if kind == "boolean" and isinstance(value, bool):
            return ParamValue.concrete("boolean", value)
    except ValueError:
        return None
    return None


def _schemas_text(schemas) -> str:
    lines = []
    for schema in schemas:
        parts = []
        for cmd in schema.commands:
            args = ", ".join(f"{a.name}: {a.kind}" for a in cmd.args)
            parts.append(f"{cmd.name}({args})")
        lines.append(f"- {schema.capability_name}: {'; '.join(parts) or 'read-only'}")
    return "\n".join(lines)


def _devices_text(home: HomeState) -> str:
    lines = []
    for dev in home.available_descriptors():
        caps = ", ".join(dev.capabilities)
        lines.append(f"- {dev.device_name} ({dev.room}): {caps}")
    return "\n".join(lines)


class Agent:
    """One user's pipeline, memory, preferences, and home bound together."""

    def __init__(
        self,
        corpus: SchemaCorpus,
        home: HomeState,
        gateway: LlmGateway,
        memory: TaskMemory,
        prefs: PreferenceEngine,
        log_store: LogStore,
        config: PipelineConfig | None = None,
        memory_path=None,
        extraction_mode: str = "baseline",
    ):
        self.corpus = corpus
        self.home = home
        self.gateway = gateway
        self.memory = memory
        self.prefs = prefs
        self.log_store = log_store
        self.config = config or PipelineConfig()
        self.memory_path = memory_path
        self.extraction_mode = extraction_mode

    # -- individual stages ----------------------------------------------------

    def _chat(self, session: SessionGateway, stage: StageTag, prompt: str) -> str:
        try:
            return session.chat(ChatRequest(stage, (("user", prompt),))).text
        except (PlaybookMiss, ProviderUnreachable) as exc:
            raise ProviderFailure(f"{stage.value}: {exc}") from exc

    def classify(self, session: SessionGateway, instruction: str) -> InstructionType:
        if not instruction.strip():
            raise ValueError("instruction must be non-empty")
        text = self._chat(
            session, StageTag.CLASSIFY, render_prompt("classify", instruction=instruction)
        ).strip()
        try:
            return InstructionType.from_wire(text)
        except ValueError as exc:
            raise UnparseableClassification(str(exc)) from exc

    def context_keyword(self, session: SessionGateway, instruction: str) -> str:
        text = self._chat(
            session,
            StageTag.CONTEXT_KEYWORD,
            render_prompt("context_keyword", instruction=instruction),
        )
        return text.strip().lower().split()[0] if text.strip() else "normal"

    def decompose(
        self, session: SessionGateway, instruction: str, itype: InstructionType
    ) -> list[Subtask]:
        known = {d.device_name for d in self.home.available_descriptors()}
        prompt = render_prompt(
            "decompose",
            devices=_devices_text(self.home),
            instruction_type=itype.value,
            instruction=instruction,
        )
        subtasks = self._decompose_once(session, prompt)
        ghosts = [s.device_name for s in subtasks if s.device_name not in known]
        if ghosts:
            # One automatic re-prompt grounded on the failure, then give up.
            log.info("decompose named unknown devices %s; re-prompting", ghosts)
            retry_prompt = prompt.replace(
                f"input: {instruction}", f"input: {instruction} [retry]"
            )
            subtasks = self._decompose_once(session, retry_prompt)
            ghosts = [s.device_name for s in subtasks if s.device_name not in known]
            if ghosts:
                raise HallucinatedDevice(
                    f"decomposition references unknown devices: {sorted(set(ghosts))}"
                )
        return subtasks

    def _decompose_once(self, session: SessionGateway, prompt: str) -> list[Subtask]:
        text = self._chat(session, StageTag.DECOMPOSE, prompt)
        try:
            _, subtasks = parse_decompose_output(text)
        except (ValueError, KeyError, TypeError) as exc:
            raise SchemaParseFailure(f"decompose output: {exc}") from exc
        return subtasks

    def derive_subtask(
        self, session: SessionGateway, subtask: Subtask, instruction: str
    ) -> Subtask:
        schemas = retrieve_relevant(
            subtask.description,
            self.corpus,
            self.home.available_descriptors(),
            self.gateway.embed,
            k=self.config.retrieval_k,
        )
        if not schemas:
            raise EmptyEnvironment("schema retrieval returned nothing")
        template = "derive_trigger" if subtask.role == "trigger" else "derive"
        prompt = render_prompt(
            template,
            schemas=_schemas_text(schemas),
            instruction=instruction,
            subtask=subtask.description,
        )
        text = self._chat(session, StageTag.DERIVE, prompt)
        try:
            if subtask.role == "trigger":
                parsed = parse_trigger_output(text)
                derived = replace(subtask, predicates=parsed.predicates)
                for pred in parsed.predicates:
                    problems = self.home.validate_predicate(pred)
                    if problems:
                        raise SchemaParseFailure(
                            f"trigger {subtask.description!r}: "
                            + "; ".join(str(p) for p in problems)
                        )
                return derived
            parsed = parse_derive_output(text)
        except SchemaParseFailure:
            raise
        except (ValueError, KeyError, TypeError) as exc:
            raise SchemaParseFailure(f"derive output for {subtask.description!r}: {exc}") from exc
        commands = tuple(resolve_argument_names(c, self.corpus) for c in parsed.commands)
        env = self.home.descriptors()
        for cmd in commands:
            verdict = validate_command(cmd, env, self.corpus, allow_placeholders=True)
            if not verdict.ok:
                raise SchemaParseFailure(
                    f"derive output for {subtask.description!r}: "
                    + "; ".join(str(v) for v in verdict.violations)
                )
        derived = replace(
            subtask,
            device_name=commands[0].device_name if subtask.device_name == "" else subtask.device_name,
            commands=commands,
        )
        return derived.capture_slot_refs()

    def _derive_direct(self, session: SessionGateway, instruction: str) -> list[Subtask]:
        """Decomposition ablated: infer all commands from the instruction in
        one Derive call; trigger-action responses carry predicates too."""
        schemas = retrieve_relevant(
            instruction,
            self.corpus,
            self.home.available_descriptors(),
            self.gateway.embed,
            k=self.config.retrieval_k,
        )
        prompt = render_prompt(
            "derive",
            schemas=_schemas_text(schemas),
            instruction=instruction,
            subtask=instruction,
        )
        text = self._chat(session, StageTag.DERIVE, prompt)
        try:
            doc = json.loads(text)
            commands = tuple(
                resolve_argument_names(DeviceCommand.from_wire(c), self.corpus)
                for c in doc.get("commands", [])
            )
            predicates = tuple(
                TriggerPredicate.from_wire(p) for p in doc.get("triggers", [])
            )
        except (ValueError, KeyError, TypeError) as exc:
            raise SchemaParseFailure(f"direct derive output: {exc}") from exc
        env = self.home.descriptors()
        for cmd in commands:
            verdict = validate_command(cmd, env, self.corpus, allow_placeholders=True)
            if not verdict.ok:
                raise SchemaParseFailure(
                    "direct derive output: " + "; ".join(str(v) for v in verdict.violations)
                )
        subtasks = []
        if commands:
            subtasks.append(
                Subtask(
                    description=instruction,
                    device_name=commands[0].device_name,
                    commands=commands,
                ).capture_slot_refs()
            )
        if predicates:
            subtasks.append(
                Subtask(
                    description=f"{instruction} (trigger)",
                    device_name=predicates[0].device_name,
                    role="trigger",
                    predicates=predicates,
                )
            )
        return subtasks

    # -- memory recall ----------------------------------------------------------

    def _subtask_from_node(self, node) -> Subtask:
        stub = Subtask(
            description=node.description_text,
            device_name=node.device_name,
            commands=node.command_template,
            provenance=Provenance.REUSED_FROM_MEMORY,
            role=node.role,
            predicates=node.predicates,
        )
        return stub.capture_slot_refs()

    def handle_unavailable(
        self, session: SessionGateway, subtasks: list[Subtask]
    ) -> tuple[list[Subtask], list[str]]:
        """Drop recalled subtasks whose devices are gone; ask for substitutes."""
        kept: list[Subtask] = []
        notices: list[str] = []
        for subtask in subtasks:
            if self.home.is_available(subtask.device_name):
                kept.append(subtask)
                continue
            notices.append(
                f"excluded subtask {subtask.description!r}: device "
                f"{subtask.device_name!r} is unavailable"
            )
            prompt = render_prompt(
                "alternative_suggest",
                devices=_devices_text(self.home),
                subtask=subtask.description,
            )
            text = self._chat(session, StageTag.ALTERNATIVE_SUGGEST, prompt)
            try:
                alternatives = json.loads(text).get("alternatives", [])
            except ValueError as exc:
                raise SchemaParseFailure(f"alternative suggestions: {exc}") from exc
            for alt in alternatives:
                kept.append(
                    Subtask(
                        description=alt["subtask"],
                        device_name=alt["device"],
                        provenance=Provenance.ADDED_BY_PREFERENCE,
                        role=subtask.role,
                    )
                )
                notices.append(f"suggested alternative: {alt['subtask']!r}")
        return kept, notices

    # -- refine -------------------------------------------------------------------

    def _fill_defaults(self, subtask: Subtask) -> Subtask:
        """Resolve leftover slots with schema defaults; flag them for review."""
        commands = list(subtask.commands)
        flagged = list(subtask.flagged_slots)
        for ref in subtask.slot_refs:
            cmd = commands[ref.command_index]
            arg = cmd.arguments[ref.arg_index]
            if not arg.value.is_placeholder:
                continue
            schema = self.corpus.get(cmd.capability_name)
            spec = schema.command(cmd.command_name) if schema else None
            default = None
            if spec and ref.arg_index < len(spec.args):
                default = spec.args[ref.arg_index].default
            if default is None:
                raise UnresolvedAfterRefine(
                    f"slot [{ref.slot}] in {subtask.description!r} has no value and no default"
                )
            args = list(cmd.arguments)
            args[ref.arg_index] = CommandArg(
                arg.name, ParamValue.concrete(arg.value.kind, default)
            )
            commands[ref.command_index] = replace(cmd, arguments=tuple(args))
            flagged.append(ref.slot)
        return replace(subtask, commands=tuple(commands), flagged_slots=tuple(flagged))

    def _apply_assignments(self, subtask: Subtask, assignments: dict) -> Subtask:
        commands = list(subtask.commands)
        for ref in subtask.slot_refs:
            if ref.slot not in assignments:
                continue
            cmd = commands[ref.command_index]
            arg = cmd.arguments[ref.arg_index]
            if not arg.value.is_placeholder:
                continue
            coerced = _coerce_assignment(arg.value.kind, assignments[ref.slot])
            if coerced is None:
                continue  # wrong kind; leave for defaults
            args = list(cmd.arguments)
            args[ref.arg_index] = CommandArg(arg.name, coerced)
            commands[ref.command_index] = replace(cmd, arguments=tuple(args))
        return replace(subtask, commands=tuple(commands))

    def _instantiate_from_context(self, subtask: Subtask, node, keyword: str) -> tuple[Subtask, bool]:
        """Try a context-node hit; True means every slot got bound."""
        context = self.memory.match_context(node, keyword)
        if context is None:
            return subtask, False
        commands = instantiate(subtask.commands, context.bindings)
        bound = replace(subtask, commands=commands)
        return bound, not any(c.placeholder_slots() for c in commands)

    def refine(
        self,
        session: SessionGateway,
        proposal: TaskProposal,
        covered: set[int],
    ) -> TaskProposal:
        """Fill slots from preferences; possibly append preference subtasks.

        covered holds indexes of subtasks fully bound via context recall;
        those see zero Refine involvement.
        """
        self.prefs.refresh(self.log_store, mode=self.extraction_mode)
        table = self.prefs.select_table(proposal.context_keyword)
        subtasks = [
            replace(s, refine_targets=tuple(self.prefs.property_targets(s, table)))
            for s in proposal.subtasks
        ]
        uncovered = [i for i in range(len(subtasks)) if i not in covered]
        added: list[Subtask] = []
        if uncovered:
            targets_text = "\n".join(
                f"- {subtasks[i].description}: {list(subtasks[i].refine_targets) or 'none'}"
                for i in uncovered
            )
            body = "\n".join(
                serialize_derive_output(subtasks[i])
                if subtasks[i].commands
                else f'{{"subtask": "{subtasks[i].description}"}}'
                for i in uncovered
            )
            prompt = render_prompt(
                "refine",
                targets=targets_text,
                subtasks=body,
                instruction=proposal.instruction_text,
            )
            text = self._chat(session, StageTag.REFINE, prompt)
            try:
                doc = json.loads(text)
                assignments = doc.get("assignments", {})
                added_entries = doc.get("added subtasks", [])
            except ValueError as exc:
                raise SchemaParseFailure(f"refine output: {exc}") from exc
            for i in uncovered:
                subtasks[i] = self._apply_assignments(subtasks[i], assignments)
            for entry in added_entries:
                stub = Subtask(
                    description=entry["subtask"],
                    device_name=entry["device"],
                    provenance=Provenance.ADDED_BY_PREFERENCE,
                )
                node = (
                    self.memory.match_subtask(
                        stub.description, stub.device_name, self.config.tau_subtask
                    )
                    if self.config.memory_enabled
                    else None
                )
                if node is not None:
                    stub = self._subtask_from_node(node)
                    stub = replace(stub, provenance=Provenance.ADDED_BY_PREFERENCE)
                else:
                    stub = self.derive_subtask(session, stub, proposal.instruction_text)
                stub = self._apply_assignments(stub, assignments)
                stub = replace(
                    stub, refine_targets=tuple(self.prefs.property_targets(stub, table))
                )
                added.append(stub)
        final = []
        for subtask in subtasks + added:
            if subtask.role == "action" and any(
                c.placeholder_slots() for c in subtask.commands
            ):
                subtask = self._fill_defaults(subtask)
            final.append(subtask)
        return replace(proposal, subtasks=tuple(final))

    # -- self-correction -----------------------------------------------------------

    def _trial_run(self, proposal: TaskProposal) -> list[tuple[int, ExecutionRecord]]:
        clone = self.home.clone()
        failures: list[tuple[int, ExecutionRecord]] = []
        for idx, subtask in enumerate(proposal.subtasks):
            if subtask.role == "trigger":
                for pred in subtask.predicates:
                    problems = self.home.validate_predicate(pred)
                    if problems:
                        failures.append(
                            (
                                idx,
                                ExecutionRecord(
                                    tick=clone.clock,
                                    command=None,
                                    ok=False,
                                    violations=tuple(problems),
                                ),
                            )
                        )
                continue
            for cmd in subtask.commands:
                record = clone.execute(cmd)
                if not record.ok:
                    failures.append((idx, record))
        return failures

    def self_correct(
        self, session: SessionGateway, proposal: TaskProposal
    ) -> tuple[TaskProposal, bool, list[ExecutionRecord]]:
        """Execute on a clone, feed errors back, loop to the retry limit."""
        failures = self._trial_run(proposal)
        rounds = 0
        while failures and rounds < self.config.retry_limit:
            rounds += 1
            idx, record = failures[0]
            error_key = str(record.violations[0]) if record.violations else "unknown failure"
            errors_text = "\n".join(
                f"- {proposal.subtasks[i].description}: "
                + "; ".join(str(v) for v in rec.violations)
                for i, rec in failures
            )
            prompt = render_prompt("self_correct", errors=errors_text, error_key=error_key)
            text = self._chat(session, StageTag.SELF_CORRECT, prompt)
            try:
                fixed = parse_derive_output(text)
            except (ValueError, KeyError, TypeError) as exc:
                raise SchemaParseFailure(f"self-correct output: {exc}") from exc
            commands = tuple(resolve_argument_names(c, self.corpus) for c in fixed.commands)
            target = None
            for i, subtask in enumerate(proposal.subtasks):
                if subtask.description == fixed.description:
                    target = i
                    break
            if target is None:
                target = idx
            subtasks = list(proposal.subtasks)
            subtasks[target] = replace(
                subtasks[target], commands=commands
            ).capture_slot_refs()
            proposal = replace(
                proposal,
                subtasks=tuple(subtasks),
                correction_rounds_used=rounds,
            )
            failures = self._trial_run(proposal)
        escalated = bool(failures)
        return proposal, escalated, [rec for _, rec in failures]

    # -- the full run -----------------------------------------------------------------

    def run_instruction(self, instruction: str, progress=None) -> RunResult:
        session = SessionGateway(self.gateway)
        outcomes: list[StageOutcome] = []

        def report(stage: str, skipped: bool, calls: int, output: str = ""):
            outcome = StageOutcome(stage, skipped, calls, output)
            outcomes.append(outcome)
            if progress:
                progress(stage, "skipped" if skipped else "completed", output)

        proposal = TaskProposal(
            proposal_id=proposal_id_for(instruction),
            instruction_text=instruction,
            instruction_type=InstructionType.DIRECT_CONTROL,
        )
        try:
            itype = self.classify(session, instruction)
            report("classify", False, 1, itype.value)
            proposal = replace(proposal, instruction_type=itype)

            if itype is InstructionType.DEVICE_QUERY:
                subtasks = self.decompose(session, instruction, itype)
                report("decompose", False, session.calls(StageTag.DECOMPOSE))
                proposal = replace(proposal, subtasks=tuple(subtasks))
                proposal = proposal.with_status(ProposalStatus.AWAITING_REVIEW)
                proposal = replace(proposal, call_trace=tuple(call_trace(session)))
                return RunResult(proposal, session, outcomes)

            keyword = self.context_keyword(session, instruction)
            report("context_keyword", False, 1, keyword)
            proposal = replace(proposal, context_keyword=keyword)

            notices: list[str] = []
            covered: set[int] = set()
            subtasks: list[Subtask] = []
            task_hit = None
            if self.config.memory_enabled:
                task_hit = self.memory.match_task(instruction, self.config.tau_task)
            if task_hit is not None:
                recalled = [
                    self._subtask_from_node(self.memory.subtasks[sid])
                    for sid in task_hit.subtask_ids
                ]
                subtasks, unavailable_notices = self.handle_unavailable(session, recalled)
                notices.extend(unavailable_notices)
                report("decompose", True, 0, f"reused task node {task_hit.node_id}")
            elif self.config.decompose_enabled:
                subtasks = self.decompose(session, instruction, itype)
                report("decompose", False, session.calls(StageTag.DECOMPOSE))
            else:
                subtasks = self._derive_direct(session, instruction)
                report("decompose", False, 0, "decomposition disabled")

            derived: list[Subtask | None] = [None] * len(subtasks)
            needs_derive: list[int] = []
            for i, subtask in enumerate(subtasks):
                if subtask.commands or subtask.predicates:
                    derived[i] = subtask  # recalled with template
                    continue
                node = None
                if self.config.memory_enabled and self.config.decompose_enabled:
                    node = self.memory.match_subtask(
                        subtask.description, subtask.device_name, self.config.tau_subtask
                    )
                if node is not None:
                    reused = self._subtask_from_node(node)
                    derived[i] = replace(reused, role=subtask.role)
                else:
                    needs_derive.append(i)
            if self.config.parallel_derive and len(needs_derive) > 1:
                from concurrent.futures import ThreadPoolExecutor

                with ThreadPoolExecutor(max_workers=4) as pool:
                    results = pool.map(
                        lambda i: self.derive_subtask(session, subtasks[i], instruction),
                        needs_derive,
                    )
                for i, result in zip(needs_derive, results):  # index order kept
                    derived[i] = result
            else:
                for i in needs_derive:
                    derived[i] = self.derive_subtask(session, subtasks[i], instruction)
            subtasks = list(derived)
            report("derive", False, session.calls(StageTag.DERIVE))

            # Context-level recall: bind slots without touching Refine.
            for i, subtask in enumerate(subtasks):
                if subtask.provenance is not Provenance.REUSED_FROM_MEMORY:
                    continue
                node = self.memory.match_subtask(
                    subtask.description, subtask.device_name, self.config.tau_subtask
                )
                if node is None:
                    continue
                bound, complete = self._instantiate_from_context(subtask, node, keyword)
                subtasks[i] = bound
                if complete and subtask.role != "query":
                    covered.add(i)

            proposal = replace(
                proposal, subtasks=tuple(subtasks), notices=tuple(notices)
            )
            refine_calls_before = session.calls(StageTag.REFINE)
            proposal = self.refine(session, proposal, covered)
            refine_calls = session.calls(StageTag.REFINE) - refine_calls_before
            report("refine", refine_calls == 0, refine_calls)

            proposal, escalated, records = self.self_correct(session, proposal)
            report(
                "self_correct",
                False,
                session.calls(StageTag.SELF_CORRECT),
                f"rounds={proposal.correction_rounds_used}",
            )
            if escalated:
                proposal = replace(
                    proposal,
                    notices=proposal.notices
                    + (
                        f"self-correction exhausted after "
                        f"{proposal.correction_rounds_used} round(s); review required",
                    ),
                )
                if progress:
                    progress("self_correct", "escalate_to_user", "")
            proposal = proposal.with_status(ProposalStatus.AWAITING_REVIEW)
            proposal = replace(proposal, call_trace=tuple(call_trace(session)))
            return RunResult(
                proposal, session, outcomes, escalated=escalated, escalation_records=records
            )
        except Exception as exc:
            if isinstance(proposal.status, ProposalStatus) and proposal.status is ProposalStatus.DRAFTING:
                failed = replace(
                    proposal,
                    status=ProposalStatus.FAILED,
                    notices=proposal.notices + (f"{type(exc).__name__}: {exc}",),
                    call_trace=tuple(call_trace(session)),
                )
                if progress:
                    progress("pipeline", "failed", str(exc))
                return RunResult(failed, session, outcomes)
            raise

    # -- human feedback -----------------------------------------------------------------

    def apply_feedback(self, proposal: TaskProposal, feedback) -> TaskProposal:
        from .domain import WrongStatus

        if proposal.status is not ProposalStatus.AWAITING_REVIEW:
            raise WrongStatus(f"proposal is {proposal.status.value}, not awaiting review")
        if isinstance(feedback, AddSubtask):
            session = SessionGateway(self.gateway)
            stub = Subtask(
                description=feedback.text,
                device_name="",
                provenance=Provenance.ADDED_BY_USER,
            )
            derived = self.derive_subtask(session, stub, proposal.instruction_text)
            derived = replace(derived, provenance=Provenance.ADDED_BY_USER)
            if any(c.placeholder_slots() for c in derived.commands):
                table = self.prefs.select_table(proposal.context_keyword)
                derived = replace(
                    derived,
                    refine_targets=tuple(self.prefs.property_targets(derived, table)),
                )
                derived = self._fill_defaults(derived)
            return replace(proposal, subtasks=proposal.subtasks + (derived,))
        if isinstance(feedback, RemoveSubtask):
            if not 0 <= feedback.index < len(proposal.subtasks):
                raise InvalidIndex(f"no subtask at index {feedback.index}")
            subtasks = list(proposal.subtasks)
            del subtasks[feedback.index]
            return replace(proposal, subtasks=tuple(subtasks))
        if isinstance(feedback, SetParameter):
            if not 0 <= feedback.subtask_index < len(proposal.subtasks):
                raise InvalidIndex(f"no subtask at index {feedback.subtask_index}")
            subtask = proposal.subtasks[feedback.subtask_index]
            inventory = subtask.slot_inventory()
            if feedback.slot not in inventory:
                raise InvalidIndex(
                    f"subtask has no slot {feedback.slot!r}; known: {sorted(inventory)}"
                )
            ref = inventory[feedback.slot]
            cmd = subtask.commands[ref.command_index]
            arg = cmd.arguments[ref.arg_index]
            coerced = _coerce_assignment(arg.value.kind, feedback.value)
            if coerced is None:
                raise SchemaViolationError(
                    [f"value {feedback.value!r} does not fit kind {arg.value.kind}"]
                )
            args = list(cmd.arguments)
            args[ref.arg_index] = CommandArg(arg.name, coerced)
            new_cmd = replace(cmd, arguments=tuple(args))
            verdict = validate_command(new_cmd, self.home.descriptors(), self.corpus)
            if not verdict.ok:
                raise SchemaViolationError(verdict.violations)
            commands = list(subtask.commands)
            commands[ref.command_index] = new_cmd
            subtasks = list(proposal.subtasks)
            subtasks[feedback.subtask_index] = replace(subtask, commands=tuple(commands))
            return replace(proposal, subtasks=tuple(subtasks))
        if isinstance(feedback, Approve):
            approved, _ = self.approve(proposal)
            return approved
        if isinstance(feedback, Reject):
            return proposal.with_status(ProposalStatus.REJECTED)
        raise TypeError(f"unknown feedback action: {feedback!r}")

    def approve(self, proposal: TaskProposal, replay_token: str = "") -> tuple:
        """Finalize: commit memory, append preference logs, execute live.

        Step order (memory -> logs -> execution) with each step idempotent
        when a replay_token is supplied, so a crash mid-approval can be
        replayed safely.
        """
        approved = proposal.with_status(ProposalStatus.APPROVED)
        if self.config.memory_enabled and approved.instruction_type is not InstructionType.DEVICE_QUERY:
            self.memory.commit_proposal(
                approved, self.config.tau_task, self.config.tau_subtask
            )
            if self.memory_path:
                self.memory.persist(self.memory_path)
        if approved.instruction_type is not InstructionType.DEVICE_QUERY:
            self.prefs.append_feedback_logs(approved, self.log_store, source_id=replay_token)
        answers: list[tuple[str, str, object]] = []
        if approved.instruction_type is InstructionType.DEVICE_QUERY:
            for subtask in approved.subtasks:
                value = self.home.query(subtask.device_name, subtask.attribute_name)
                answers.append((subtask.device_name, subtask.attribute_name, value.payload))
        elif approved.instruction_type is InstructionType.TRIGGER_ACTION:
            triggers = tuple(
                p for s in approved.trigger_subtasks() for p in s.predicates
            )
            actions = tuple(c for s in approved.action_subtasks() for c in s.commands)
            rule = TriggerActionRule(
                rule_id=f"r-{approved.proposal_id[2:]}",
                triggers=triggers,
                actions=actions,
            )
            self.home.install_rule(rule)
        else:
            for cmd in (c for s in approved.action_subtasks() for c in s.commands):
                self.home.execute(cmd)
        return approved, answers
