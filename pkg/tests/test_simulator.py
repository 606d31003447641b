import pytest
from hypothesis import given, settings, strategies as st

from homepilot.domain import (
    CommandArg,
    DeviceCommand,
    ParamValue,
    TriggerActionRule,
    TriggerPredicate,
)
from homepilot.registry import validate_command
from homepilot.simulator import (
    EnvironmentError_,
    HomeState,
    InvalidRuleActions,
    UnknownAttribute,
    UnknownDevice,
    load_environment,
)

from .conftest import FIXTURES


def cmd(device, cap, command, *args):
    return DeviceCommand(f"{command} {device}", device, cap, command, tuple(args))


def arg(name, kind, value):
    return CommandArg(name, ParamValue.concrete(kind, value))


def fridge_light_rule(rule_id="r-fridge"):
    return TriggerActionRule(
        rule_id=rule_id,
        triggers=(
            TriggerPredicate("fridge", "contact", "eq", ParamValue.concrete("string", "open")),
        ),
        actions=(cmd("dining room light", "switch", "on"),),
    )


class TestLoadEnvironment:
    def test_base_matches_study_setup(self, base_home):
        names = set(base_home.devices)
        assert len(names) == 9
        assert {"air conditioner", "thermostat", "door lock"} <= names

    def test_new_matches_study_setup(self, new_home):
        names = set(new_home.devices)
        assert len(names) == 9
        assert {"fan", "smart window", "home camera"} <= names

    def test_unknown_capability_rejected(self, tmp_path, corpus):
        (tmp_path / "env.yaml").write_text(
            "devices:\n  - name: widget\n    room: lab\n"
            "    capabilities: [teleport]\n    attributes: {}\n"
        )
        with pytest.raises(EnvironmentError_):
            load_environment(tmp_path / "env.yaml", corpus)

    def test_missing_initial_attribute_rejected(self, tmp_path, corpus):
        (tmp_path / "env.yaml").write_text(
            "devices:\n  - name: lamp\n    room: lab\n"
            "    capabilities: [switch]\n    attributes: {}\n"
        )
        with pytest.raises(EnvironmentError_):
            load_environment(tmp_path / "env.yaml", corpus)

    def test_fresh_state_has_no_rules_or_log(self, full_home):
        assert full_home.rules == {}
        assert full_home.event_log == []


class TestExecute:
    def test_switch_on_sets_attribute(self, full_home):
        record = full_home.execute(cmd("sleep light", "switch", "on"))
        assert record.ok and record.cause == "direct"
        assert full_home.query("sleep light", "switch").payload == "on"

    def test_unavailable_device(self, full_home):
        full_home.set_availability("air conditioner", False)
        record = full_home.execute(
            cmd(
                "air conditioner",
                "thermostatCoolingSetpoint",
                "setCoolingSetpoint",
                arg("coolingSetpoint", "decimal", 20),
            )
        )
        assert not record.ok
        assert record.violations[0].code == "device_unavailable"

    def test_reenabled_device_works_again(self, full_home):
        full_home.set_availability("air conditioner", False)
        full_home.set_availability("air conditioner", True)
        assert full_home.execute(cmd("air conditioner", "switch", "on")).ok

    def test_enum_violation_leaves_state_bit_identical(self, full_home):
        before = full_home.state_hash()
        record = full_home.execute(
            cmd(
                "air conditioner",
                "airConditionerMode",
                "setAirConditionerMode",
                arg("mode", "string", "cooling"),
            )
        )
        assert not record.ok
        assert record.violations[0].code == "enum_violation"
        # only the log and clock moved
        after = full_home.clone()
        after.event_log = after.event_log[:-1]
        after.clock -= 1
        assert after.state_hash() == before

    def test_agrees_with_validator(self, corpus, full_home):
        samples = [
            cmd("air conditioner", "switch", "on"),
            cmd("air conditioner", "airConditionerMode", "setAirConditionerMode",
                arg("mode", "string", "cool")),
            cmd("air conditioner", "airConditionerMode", "setAirConditionerMode",
                arg("mode", "string", "cooling")),
            cmd("tv", "audioVolume", "setVolume", arg("volume", "integer", 250)),
            cmd("toaster", "switch", "on"),
            cmd("fridge", "switch", "on"),
        ]
        for command in samples:
            verdict = validate_command(command, full_home.descriptors(), corpus)
            record = full_home.execute(command)
            assert record.ok == verdict.ok, command


class TestRules:
    def test_install_does_not_fire_even_if_true(self, full_home):
        full_home.emit_event("fridge", "contact", "open")
        full_home.install_rule(fridge_light_rule())
        assert full_home.query("dining room light", "switch").payload == "off"
        assert not any(r.cause == "rule" for r in full_home.event_log)

    def test_fires_once_per_rising_edge(self, full_home):
        full_home.install_rule(fridge_light_rule())
        fired = full_home.emit_event("fridge", "contact", "open")
        assert [r.rule_id for r in fired] == ["r-fridge"]
        assert full_home.query("dining room light", "switch").payload == "on"
        assert full_home.emit_event("fridge", "contact", "open") == []  # no edge
        full_home.emit_event("fridge", "contact", "closed")
        assert [r.rule_id for r in full_home.emit_event("fridge", "contact", "open")] == [
            "r-fridge"
        ]

    def test_two_rules_same_trigger_fire_in_rule_id_order(self, full_home):
        second = TriggerActionRule(
            rule_id="r-also",
            triggers=fridge_light_rule().triggers,
            actions=(cmd("sleep light", "switch", "on"),),
        )
        full_home.install_rule(fridge_light_rule("r-zz"))
        full_home.install_rule(second)
        fired = full_home.emit_event("fridge", "contact", "open")
        assert [r.rule_id for r in fired] == ["r-also", "r-zz"]

    def test_invalid_actions_rejected(self, full_home):
        rule = TriggerActionRule(
            rule_id="r-bad",
            triggers=fridge_light_rule().triggers,
            actions=(
                cmd("air conditioner", "airConditionerMode", "setAirConditionerMode",
                    arg("mode", "string", "cooling")),
            ),
        )
        with pytest.raises(InvalidRuleActions):
            full_home.install_rule(rule)

    def test_duplicate_rule_id_replaces(self, full_home):
        full_home.install_rule(fridge_light_rule())
        replacement = TriggerActionRule(
            rule_id="r-fridge",
            triggers=fridge_light_rule().triggers,
            actions=(cmd("sleep light", "switch", "on"),),
        )
        full_home.install_rule(replacement)
        assert len(full_home.rules) == 1
        fired = full_home.emit_event("fridge", "contact", "open")
        assert fired[0].command.device_name == "sleep light"

    def test_conjunction_requires_all_predicates(self, full_home):
        rule = TriggerActionRule(
            rule_id="r-and",
            triggers=(
                TriggerPredicate("fridge", "contact", "eq", ParamValue.concrete("string", "open")),
                TriggerPredicate(
                    "presence sensor", "motion", "eq", ParamValue.concrete("string", "active")
                ),
            ),
            actions=(cmd("dining room light", "switch", "on"),),
        )
        full_home.install_rule(rule)
        assert full_home.emit_event("fridge", "contact", "open") == []
        fired = full_home.emit_event("presence sensor", "motion", "active")
        assert [r.rule_id for r in fired] == ["r-and"]

    def test_numeric_comparator(self, full_home):
        rule = TriggerActionRule(
            rule_id="r-hot",
            triggers=(
                TriggerPredicate(
                    "climate sensor", "temperature", "gt", ParamValue.concrete("decimal", 27)
                ),
            ),
            actions=(cmd("fan", "switch", "on"),),
        )
        full_home.install_rule(rule)
        assert full_home.emit_event("climate sensor", "temperature", 26.5) == []
        assert len(full_home.emit_event("climate sensor", "temperature", 28.0)) == 1


class TestCascades:
    def chain_home(self, corpus, length):
        home = HomeState(corpus)
        from homepilot.domain import DeviceDescriptor

        for i in range(length):
            home.add_device(
                DeviceDescriptor(f"light{i}", "lab", ("switch",)),
                {"switch": ParamValue.concrete("string", "off")},
            )
        for i in range(length - 1):
            home.install_rule(
                TriggerActionRule(
                    rule_id=f"r-{i:02d}",
                    triggers=(
                        TriggerPredicate(
                            f"light{i}", "switch", "eq", ParamValue.concrete("string", "on")
                        ),
                    ),
                    actions=(cmd(f"light{i+1}", "switch", "on"),),
                )
            )
        return home

    def test_chain_within_cap_completes(self, corpus):
        home = self.chain_home(corpus, 8)
        home.emit_event("light0", "switch", "on")
        assert home.query("light7", "switch").payload == "on"
        assert not any(v.code == "cycle_cap" for r in home.event_log for v in r.violations)

    def test_chain_beyond_cap_aborts_with_marker(self, corpus):
        home = self.chain_home(corpus, 12)
        home.emit_event("light0", "switch", "on")
        markers = [
            r for r in home.event_log if any(v.code == "cycle_cap" for v in r.violations)
        ]
        assert len(markers) == 1
        assert home.query("light9", "switch").payload == "off"  # depth 9 never ran

    def test_oscillator_hits_the_cap(self, corpus):
        from homepilot.domain import DeviceDescriptor

        home = HomeState(corpus)
        home.add_device(
            DeviceDescriptor("ping", "lab", ("switch",)),
            {"switch": ParamValue.concrete("string", "off")},
        )
        home.install_rule(
            TriggerActionRule(
                "r-off",
                (TriggerPredicate("ping", "switch", "eq", ParamValue.concrete("string", "on")),),
                (cmd("ping", "switch", "off"),),
            )
        )
        home.install_rule(
            TriggerActionRule(
                "r-on",
                (TriggerPredicate("ping", "switch", "eq", ParamValue.concrete("string", "off")),),
                (cmd("ping", "switch", "on"),),
            )
        )
        home.emit_event("ping", "switch", "on")
        assert any(v.code == "cycle_cap" for r in home.event_log for v in r.violations)


class TestQueriesAndEvents:
    def test_read_your_write(self, full_home):
        full_home.execute(
            cmd("air conditioner", "thermostatCoolingSetpoint", "setCoolingSetpoint",
                arg("coolingSetpoint", "decimal", 20))
        )
        assert full_home.query("air conditioner", "coolingSetpoint").payload == 20

    def test_unknown_attribute(self, full_home):
        with pytest.raises(UnknownAttribute):
            full_home.query("air conditioner", "altitude")

    def test_unknown_device_everywhere(self, full_home):
        with pytest.raises(UnknownDevice):
            full_home.query("toaster", "switch")
        with pytest.raises(UnknownDevice):
            full_home.emit_event("toaster", "switch", "on")
        with pytest.raises(UnknownDevice):
            full_home.set_availability("toaster", True)

    def test_unavailable_device_still_answers_queries(self, full_home):
        full_home.set_availability("climate sensor", False)
        assert full_home.query("climate sensor", "temperature").payload == 22.5

    def test_query_leaves_no_log_record(self, full_home):
        before = len(full_home.event_log)
        full_home.query("tv", "volume")
        assert len(full_home.event_log) == before

    def test_event_value_must_satisfy_schema(self, full_home):
        with pytest.raises(ValueError):
            full_home.emit_event("fridge", "contact", "ajar")


class TestDeterminism:
    def script(self, home):
        home.install_rule(fridge_light_rule())
        home.execute(cmd("sleep light", "switch", "on"))
        home.emit_event("fridge", "contact", "open")
        home.execute(
            cmd("air conditioner", "airConditionerMode", "setAirConditionerMode",
                arg("mode", "string", "chilly"))
        )
        home.emit_event("fridge", "contact", "closed")
        return [r.to_json() for r in home.event_log], home.state_hash()

    def test_identical_scripts_identical_logs(self, corpus):
        a = self.script(load_environment(FIXTURES / "environments" / "full.yaml", corpus))
        b = self.script(load_environment(FIXTURES / "environments" / "full.yaml", corpus))
        assert a == b

    def test_log_exports_as_json_lines(self, corpus, full_home):
        import json

        full_home.execute(cmd("sleep light", "switch", "on"))
        full_home.execute(cmd("tv", "switch", "on"))
        lines = full_home.export_log_jsonl().splitlines()
        assert len(lines) == 2
        assert all(json.loads(line)["ok"] for line in lines)


# Fuzz: any stream of valid/invalid commands keeps every attribute schema-valid.
_devices = st.sampled_from(
    ["air conditioner", "tv", "sleep light", "fan", "door lock", "toaster"]
)
_modes = st.sampled_from(["cool", "heat", "cooling", "freezing"])
_volumes = st.integers(min_value=-50, max_value=150)
_setpoints = st.one_of(st.integers(min_value=10, max_value=40), st.just(99))


@st.composite
def fuzz_commands(draw):
    which = draw(st.integers(min_value=0, max_value=4))
    device = draw(_devices)
    if which == 0:
        return cmd(device, "switch", draw(st.sampled_from(["on", "off"])))
    if which == 1:
        return cmd(device, "airConditionerMode", "setAirConditionerMode",
                   arg("mode", "string", draw(_modes)))
    if which == 2:
        return cmd(device, "audioVolume", "setVolume", arg("volume", "integer", draw(_volumes)))
    if which == 3:
        return cmd(device, "thermostatCoolingSetpoint", "setCoolingSetpoint",
                   arg("coolingSetpoint", "decimal", draw(_setpoints)))
    return cmd(device, "lock", draw(st.sampled_from(["lock", "unlock"])))


class TestStateConformance:
    @settings(max_examples=60, deadline=None)
    @given(st.lists(fuzz_commands(), max_size=25))
    def test_attributes_always_schema_valid(self, corpus, command_stream):
        home = load_environment(FIXTURES / "environments" / "full.yaml", corpus)
        for command in command_stream:
            home.execute(command)
        from homepilot.simulator import _attribute_violation

        for dev in home.devices.values():
            specs = home._declared_attributes(dev.descriptor)
            for name, value in dev.attributes.items():
                assert _attribute_violation(specs[name], value) is None
