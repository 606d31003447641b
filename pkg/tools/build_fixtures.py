#!/usr/bin/env python3
"""Regenerate the scripted-provider fixtures: playbook.yaml, dataset.jsonl,
and logs100.jsonl. Deterministic; run from the repo root:

    python tools/build_fixtures.py
"""

from __future__ import annotations

import json
import random
from pathlib import Path

import yaml

OUT = Path(__file__).resolve().parent.parent / "src" / "homepilot" / "fixtures"

DC = "Direct Control Command"
TA = "Trigger-Action Rule"
DQ = "Device Query"

# (capability, command) -> (argument name, kind) for parameterized commands
ARGS = {
    ("airConditionerMode", "setAirConditionerMode"): ("mode", "string"),
    ("thermostatCoolingSetpoint", "setCoolingSetpoint"): ("coolingSetpoint", "decimal"),
    ("switchLevel", "setLevel"): ("level", "integer"),
    ("fanSpeed", "setFanSpeed"): ("speed", "integer"),
    ("humiditySetpoint", "setHumiditySetpoint"): ("humiditySetpoint", "integer"),
    ("audioVolume", "setVolume"): ("volume", "integer"),
}


def cmd(desc, device, cap, command, value=None):
    return {
        "desc": desc,
        "device": {
            "name": device,
            "capability": {"name": cap, "command": command, "value": value or {}},
        },
    }


def slot_cmd(desc, device, cap, command, slot):
    _, kind = ARGS[(cap, command)]
    return cmd(desc, device, cap, command, {kind: f"[{slot}]"})


def pred(device, attribute, comparator, kind, value):
    return {
        "device": device,
        "attribute": attribute,
        "comparator": comparator,
        "value": {kind: value},
    }


# --------------------------------------------------------------------------
# Reusable subtasks: description -> (device, [commands])

ACTION_SUBTASKS = {
    "Adjust air conditioner temperature": (
        "air conditioner",
        [
            cmd("Turn on air conditioner", "air conditioner", "switch", "on"),
            slot_cmd(
                "Set mode to [mode_value]",
                "air conditioner",
                "airConditionerMode",
                "setAirConditionerMode",
                "mode_value",
            ),
            slot_cmd(
                "Set temperature to [temperature_value]",
                "air conditioner",
                "thermostatCoolingSetpoint",
                "setCoolingSetpoint",
                "temperature_value",
            ),
        ],
    ),
    "Set humidifier level": (
        "humidifier",
        [
            cmd("Turn on humidifier", "humidifier", "switch", "on"),
            slot_cmd(
                "Set humidity to [humidity_value]",
                "humidifier",
                "humiditySetpoint",
                "setHumiditySetpoint",
                "humidity_value",
            ),
        ],
    ),
    "Dim the sleep light": (
        "sleep light",
        [
            cmd("Turn on sleep light", "sleep light", "switch", "on"),
            slot_cmd(
                "Dim to [brightness_value]",
                "sleep light",
                "switchLevel",
                "setLevel",
                "brightness_value",
            ),
        ],
    ),
    "Turn on the living room light": (
        "living room light",
        [cmd("Turn on living room light", "living room light", "switch", "on")],
    ),
    "Dim the living room light": (
        "living room light",
        [
            cmd("Turn on living room light", "living room light", "switch", "on"),
            slot_cmd(
                "Dim to [brightness_value]",
                "living room light",
                "switchLevel",
                "setLevel",
                "brightness_value",
            ),
        ],
    ),
    "Brighten the living room light": (
        "living room light",
        [
            cmd("Turn on living room light", "living room light", "switch", "on"),
            slot_cmd(
                "Raise brightness to [brightness_value]",
                "living room light",
                "switchLevel",
                "setLevel",
                "brightness_value",
            ),
        ],
    ),
    "Set the TV volume": (
        "tv",
        [
            cmd("Turn on tv", "tv", "switch", "on"),
            slot_cmd("Set volume to [volume_value]", "tv", "audioVolume", "setVolume", "volume_value"),
        ],
    ),
    "Quiet the TV": (
        "tv",
        [slot_cmd("Lower volume to [volume_value]", "tv", "audioVolume", "setVolume", "volume_value")],
    ),
    "Lock the front door": ("door lock", [cmd("Lock the door", "door lock", "lock", "lock")]),
    "Arm the home camera": ("home camera", [cmd("Turn on home camera", "home camera", "switch", "on")]),
    "Open the blind": ("blind", [cmd("Open the blind", "blind", "windowShade", "open")]),
    "Close the blind": ("blind", [cmd("Close the blind", "blind", "windowShade", "close")]),
    "Open the smart window": (
        "smart window",
        [cmd("Open the smart window", "smart window", "windowShade", "open")],
    ),
    "Adjust fan speed": (
        "fan",
        [
            cmd("Turn on fan", "fan", "switch", "on"),
            slot_cmd("Set fan speed to [fan_speed_value]", "fan", "fanSpeed", "setFanSpeed", "fan_speed_value"),
        ],
    ),
    "Set thermostat temperature": (
        "thermostat",
        [
            slot_cmd(
                "Set thermostat to [temperature_value]",
                "thermostat",
                "thermostatCoolingSetpoint",
                "setCoolingSetpoint",
                "temperature_value",
            )
        ],
    ),
    "Switch off the TV": ("tv", [cmd("Turn off tv", "tv", "switch", "off")]),
    "Switch off the living room light": (
        "living room light",
        [cmd("Turn off living room light", "living room light", "switch", "off")],
    ),
    "Switch off the vacuum cleaner": (
        "vacuum cleaner",
        [cmd("Turn off vacuum cleaner", "vacuum cleaner", "switch", "off")],
    ),
    "Turn on the vacuum cleaner": (
        "vacuum cleaner",
        [cmd("Turn on vacuum cleaner", "vacuum cleaner", "switch", "on")],
    ),
    "Turn on the fan": ("fan", [cmd("Turn on fan", "fan", "switch", "on")]),
    "Turn on the dining room light": (
        "dining room light",
        [cmd("Turn on dining room light", "dining room light", "switch", "on")],
    ),
    "Lock the windows": (
        "smart window",
        [cmd("Close the smart window", "smart window", "windowShade", "close")],
    ),
    "play music": (
        "tv",
        [
            cmd("Turn on tv", "tv", "switch", "on"),
            slot_cmd("Play at [music_volume_value]", "tv", "audioVolume", "setVolume", "music_volume_value"),
        ],
    ),
}

TRIGGER_SUBTASKS = {
    "Detect fridge door opening": [pred("fridge", "contact", "eq", "string", "open")],
    "Detect presence in the living room": [pred("presence sensor", "motion", "eq", "string", "active")],
    "Detect everyone leaving": [pred("presence sensor", "motion", "eq", "string", "inactive")],
    "Detect TV turning on": [pred("tv", "switch", "eq", "string", "on")],
    "Detect high room temperature": [pred("climate sensor", "temperature", "gt", "decimal", 27)],
    "Detect window opening": [pred("smart window", "contact", "eq", "string", "open")],
}

# --------------------------------------------------------------------------
# The 20-task evaluation dataset (11 direct control / 6 trigger-action / 3 query)

TASKS = [
    {
        "id": "T01",
        "instruction": "Make the bedroom ready for sleep",
        "rephrased": "Prepare the bedroom for sleeping",
        "type": DC,
        "keyword": "sleeping",
        "actions": ["Adjust air conditioner temperature", "Set humidifier level", "Dim the sleep light"],
        "values": {"mode_value": "cool", "temperature_value": 20, "humidity_value": 45,
                   "brightness_value": 20, "fan_speed_value": 3},
    },
    {
        "id": "T02",
        "instruction": "Turn on the living room light",
        "rephrased": None,
        "type": DC,
        "keyword": "normal",
        "actions": ["Turn on the living room light"],
        "values": {},
    },
    {
        "id": "T03",
        "instruction": "Keep the kitchen cool",
        "rephrased": "Keep the kitchen chilled",
        "type": DC,
        "keyword": "cooking",
        "actions": ["Adjust air conditioner temperature"],
        "values": {"mode_value": "cool", "temperature_value": 22},
    },
    {
        "id": "T04",
        "instruction": "Set up movie night in the living room",
        "rephrased": "Get the living room ready for a movie",
        "type": DC,
        "keyword": "movie",
        "actions": ["Dim the living room light", "Set the TV volume"],
        "values": {"brightness_value": 25, "volume_value": 45},
    },
    {
        "id": "T05",
        "instruction": "Lock up the house",
        "rephrased": "Secure the house",
        "type": DC,
        "keyword": "security",
        "actions": ["Lock the front door", "Arm the home camera"],
        "values": {},
    },
    {
        "id": "T06",
        "instruction": "Make the living room bright",
        "rephrased": "Brighten up the living room",
        "type": DC,
        "keyword": "normal",
        "actions": ["Brighten the living room light", "Open the blind"],
        "values": {"brightness_value": 90},
    },
    {
        "id": "T07",
        "instruction": "Quiet the house down",
        "rephrased": "Make the house quieter",
        "type": DC,
        "keyword": "quiet",
        "actions": ["Quiet the TV", "Switch off the vacuum cleaner"],
        "values": {"volume_value": 10},
    },
    {
        "id": "T08",
        "instruction": "Freshen the air inside",
        "rephrased": "Let some fresh air in",
        "type": DC,
        "keyword": "airing",
        "actions": ["Open the smart window", "Adjust fan speed"],
        "values": {"fan_speed_value": 2},
    },
    {
        "id": "T09",
        "instruction": "Get the house warm and cozy",
        "rephrased": "Warm the house up and make it cozy",
        "type": DC,
        "keyword": "cozy",
        "actions": ["Set thermostat temperature", "Dim the living room light"],
        "values": {"temperature_value": 26, "brightness_value": 30},
    },
    {
        "id": "T10",
        "instruction": "Clean the floors",
        "rephrased": None,
        "type": DC,
        "keyword": "cleaning",
        "actions": ["Turn on the vacuum cleaner"],
        "values": {},
    },
    {
        "id": "T11",
        "instruction": "Turn everything off for the night",
        "rephrased": "Shut everything down for tonight",
        "type": DC,
        "keyword": "night",
        "actions": ["Switch off the TV", "Switch off the living room light",
                    "Switch off the vacuum cleaner", "Lock the front door"],
        "values": {},
    },
    {
        "id": "T12",
        "instruction": "Turn on the light in the dining room when I open the fridge",
        "rephrased": "When the fridge opens, switch on the dining room light",
        "type": TA,
        "keyword": "kitchen",
        "triggers": ["Detect fridge door opening"],
        "actions": ["Turn on the dining room light"],
        "values": {},
    },
    {
        "id": "T13",
        "instruction": "Turn on the living room light when someone is in the living room",
        "rephrased": None,
        "type": TA,
        "keyword": "presence",
        "triggers": ["Detect presence in the living room"],
        "actions": ["Turn on the living room light"],
        "values": {},
    },
    {
        "id": "T14",
        "instruction": "Lock the door when I leave",
        "rephrased": "When I'm gone, lock the door",
        "type": TA,
        "keyword": "security",
        "triggers": ["Detect everyone leaving"],
        "actions": ["Lock the front door"],
        "values": {},
    },
    {
        "id": "T15",
        "instruction": "Close the blinds when the TV turns on",
        "rephrased": "When the TV comes on, shut the blinds",
        "type": TA,
        "keyword": "movie",
        "triggers": ["Detect TV turning on"],
        "actions": ["Close the blind"],
        "values": {},
    },
    {
        "id": "T16",
        "instruction": "Turn on the fan when it gets hot",
        "rephrased": "If it gets hot, run the fan",
        "type": TA,
        "keyword": "cooling",
        "triggers": ["Detect high room temperature"],
        "actions": ["Turn on the fan"],
        "values": {},
    },
    {
        "id": "T17",
        "instruction": "Start the camera when the window opens",
        "rephrased": None,
        "type": TA,
        "keyword": "security",
        "triggers": ["Detect window opening"],
        "actions": ["Arm the home camera"],
        "values": {},
    },
    {
        "id": "T18",
        "instruction": "What is the room temperature?",
        "rephrased": "How warm is it in the room?",
        "type": DQ,
        "queries": [("temperature", "climate sensor")],
    },
    {
        "id": "T19",
        "instruction": "Is the door locked?",
        "rephrased": "Check whether the door is locked",
        "type": DQ,
        "queries": [("lock", "door lock")],
    },
    {
        "id": "T20",
        "instruction": "What is the humidity setting?",
        "rephrased": None,
        "type": DQ,
        "queries": [("humiditySetpoint", "humidifier")],
    },
]


def decompose_response(task, instruction):
    if task["type"] == DQ:
        return {
            "CommandType": DQ,
            "Query": {
                "name": instruction,
                "target attribute list": [
                    {"attribute": attr, "device": dev} for attr, dev in task["queries"]
                ],
            },
        }
    action_list = [
        {"subtask": name, "device": ACTION_SUBTASKS[name][0]} for name in task["actions"]
    ]
    if task["type"] == TA:
        trigger_list = [
            {"subtask": name, "device": TRIGGER_SUBTASKS[name][0]["device"]}
            for name in task["triggers"]
        ]
        return {
            "CommandType": TA,
            "Trigger": {"name": instruction, "possible subtask list": trigger_list},
            "Action": {"name": instruction, "possible subtask list": action_list},
        }
    return {
        "CommandType": DC,
        "Action": {"name": instruction, "possible subtask list": action_list},
    }


def merged_assignments(task):
    """Derive-slot values plus their template-slot (arg-name) mirrors."""
    out = dict(task.get("values", {}))
    for name in task.get("actions", []):
        _, commands = ACTION_SUBTASKS[name]
        for c in commands:
            cap = c["device"]["capability"]
            for kind, payload in cap["value"].items():
                if isinstance(payload, str) and payload.startswith("["):
                    slot = payload[1:-1]
                    if slot in out:
                        arg, _ = ARGS[(cap["name"], cap["command"])]
                        out[f"{arg}_value"] = out[slot]
    return out


def build_playbook():
    entries = []

    def add(stage, match, response, tokens=None):
        entry = {"stage": stage, "match": match, "response": response}
        if tokens:
            entry["tokens"] = tokens
        entries.append(entry)

    def add_json(stage, match, doc):
        add(stage, match, json.dumps(doc))

    seen = set()

    def add_once(stage, match, response):
        if (stage, match) in seen:
            return
        seen.add((stage, match))
        entries.append({"stage": stage, "match": match, "response": response})

    for task in TASKS:
        variants = [task["instruction"]]
        if task["rephrased"]:
            variants.append(task["rephrased"])
        for instruction in variants:
            add_once("classify", instruction, task["type"])
            add_once("decompose", instruction, json.dumps(decompose_response(task, instruction)))
            if task["type"] != DQ:
                add_once("context_keyword", instruction, task["keyword"])
                add_once(
                    "refine",
                    instruction,
                    json.dumps(
                        {"assignments": merged_assignments(task), "added subtasks": []}
                    ),
                )
                # Decomposition-ablated path: all commands in one derive call.
                direct = {
                    "subtask": instruction,
                    "commands": [
                        c for name in task["actions"] for c in ACTION_SUBTASKS[name][1]
                    ],
                }
                if task["type"] == TA:
                    direct["triggers"] = [
                        p for name in task["triggers"] for p in TRIGGER_SUBTASKS[name]
                    ]
                add_once("derive", instruction, json.dumps(direct))

    for name, (device, commands) in ACTION_SUBTASKS.items():
        add_once("derive", name, json.dumps({"subtask": name, "commands": commands}))
    for name, predicates in TRIGGER_SUBTASKS.items():
        add_once("derive", name, json.dumps({"subtask": name, "triggers": predicates}))

    # -- scenario entries beyond the dataset ---------------------------------

    # Classification-only examples
    add_once("classify", "Turn on the living room lights at 6 p.m.", TA)
    add_once("classify", "turn on the light", DC)
    add_once(
        "decompose",
        "turn on the light",
        json.dumps(
            {
                "CommandType": DC,
                "Action": {
                    "name": "turn on the light",
                    "possible subtask list": [
                        {"subtask": "Turn on the living room light", "device": "living room light"}
                    ],
                },
            }
        ),
    )

    # Explicit-value derive: no placeholders in the output
    add_once(
        "derive",
        "Set the temperature to 20",
        json.dumps(
            {
                "subtask": "Set the temperature to 20",
                "commands": [
                    cmd(
                        "Set temperature to 20",
                        "air conditioner",
                        "thermostatCoolingSetpoint",
                        "setCoolingSetpoint",
                        {"decimal": 20},
                    )
                ],
            }
        ),
    )

    # Converging self-correction: refine assigns an invalid mode, one fix lands.
    sc = {
        "id": "SC1", "type": DC, "keyword": "cooling",
        "actions": ["Adjust air conditioner temperature"],
        "values": {"mode_value": "cooling", "temperature_value": 20},
    }
    add_once("classify", "Cool the bedroom down", DC)
    add_once("context_keyword", "Cool the bedroom down", "cooling")
    add_once("decompose", "Cool the bedroom down", json.dumps(decompose_response(sc, "Cool the bedroom down")))
    add_once(
        "refine",
        "Cool the bedroom down",
        json.dumps({"assignments": merged_assignments(sc), "added subtasks": []}),
    )
    add_once(
        "self_correct",
        "enum_violation: mode value 'cooling' not in {auto, cool, dry, fan, heat}",
        json.dumps(
            {
                "subtask": "Adjust air conditioner temperature",
                "commands": [
                    cmd("Turn on air conditioner", "air conditioner", "switch", "on"),
                    cmd("Set mode to cool", "air conditioner", "airConditionerMode",
                        "setAirConditionerMode", {"string": "cool"}),
                    cmd("Set temperature to 20", "air conditioner", "thermostatCoolingSetpoint",
                        "setCoolingSetpoint", {"decimal": 20}),
                ],
            }
        ),
    )

    # Non-converging self-correction: the fix repeats the broken mode.
    nc = {
        "id": "SC2", "type": DC, "keyword": "cooling",
        "actions": ["Adjust air conditioner temperature"],
        "values": {"mode_value": "freezing", "temperature_value": 19},
    }
    add_once("classify", "Chill the bedroom", DC)
    add_once("context_keyword", "Chill the bedroom", "cooling")
    add_once("decompose", "Chill the bedroom", json.dumps(decompose_response(nc, "Chill the bedroom")))
    add_once(
        "refine",
        "Chill the bedroom",
        json.dumps({"assignments": merged_assignments(nc), "added subtasks": []}),
    )
    add_once(
        "self_correct",
        "enum_violation: mode value 'freezing' not in {auto, cool, dry, fan, heat}",
        json.dumps(
            {
                "subtask": "Adjust air conditioner temperature",
                "commands": [
                    cmd("Turn on air conditioner", "air conditioner", "switch", "on"),
                    cmd("Set mode to freezing", "air conditioner", "airConditionerMode",
                        "setAirConditionerMode", {"string": "freezing"}),
                    cmd("Set temperature to 19", "air conditioner", "thermostatCoolingSetpoint",
                        "setCoolingSetpoint", {"decimal": 19}),
                ],
            }
        ),
    )

    # Hallucinated device: first answer names a ghost, the re-prompt recovers.
    ghost = {
        "CommandType": DC,
        "Action": {
            "name": "Shade the windows please",
            "possible subtask list": [{"subtask": "Adjust window blinds", "device": "window blinds"}],
        },
    }
    fixed = {
        "CommandType": DC,
        "Action": {
            "name": "Shade the windows please",
            "possible subtask list": [{"subtask": "Close the blind", "device": "blind"}],
        },
    }
    add_once("classify", "Shade the windows please", DC)
    add_once("context_keyword", "Shade the windows please", "shading")
    add_once("decompose", "Shade the windows please", json.dumps(ghost))
    add_once("decompose", "Shade the windows please [retry]", json.dumps(fixed))
    add_once("refine", "Shade the windows please",
             json.dumps({"assignments": {}, "added subtasks": []}))
    add_once("classify", "Shade the windows forever", DC)
    add_once("context_keyword", "Shade the windows forever", "shading")
    bad = json.dumps(
        {
            "CommandType": DC,
            "Action": {
                "name": "Shade the windows forever",
                "possible subtask list": [{"subtask": "Adjust window blinds", "device": "window blinds"}],
            },
        }
    )
    add_once("decompose", "Shade the windows forever", bad)
    add_once("decompose", "Shade the windows forever [retry]", bad)

    # Security preference adds a subtask during Refine.
    add_once("classify", "Guard the house tonight", DC)
    add_once("context_keyword", "Guard the house tonight", "security")
    add_once(
        "decompose",
        "Guard the house tonight",
        json.dumps(
            {
                "CommandType": DC,
                "Action": {
                    "name": "Guard the house tonight",
                    "possible subtask list": [{"subtask": "Lock the front door", "device": "door lock"}],
                },
            }
        ),
    )
    add_once(
        "refine",
        "Guard the house tonight",
        json.dumps(
            {
                "assignments": {},
                "added subtasks": [{"subtask": "Lock the windows", "device": "smart window"}],
            }
        ),
    )

    # Device-unavailable alternatives
    add_once(
        "alternative_suggest",
        "Adjust air conditioner temperature",
        json.dumps({"alternatives": [{"subtask": "Adjust fan speed", "device": "fan"}]}),
    )
    add_once("alternative_suggest", "Set humidifier level", json.dumps({"alternatives": []}))

    return {"default": "error", "entries": entries}


def build_dataset():
    lines = []
    for task in TASKS:
        gt = []
        for name in task.get("actions", []):
            _, commands = ACTION_SUBTASKS[name]
            for c in commands:
                cap = c["device"]["capability"]
                triple = [c["device"]["name"], cap["name"], cap["command"]]
                if triple not in gt:
                    gt.append(triple)
        lines.append(
            json.dumps(
                {
                    "task_id": task["id"],
                    "instruction": task["instruction"],
                    "rephrased": task["rephrased"],
                    "type": task["type"],
                    "ground_truth": gt,
                }
            )
        )
    return "\n".join(lines) + "\n"


def build_logs():
    """100 interaction log entries across four contexts, fixed seed."""
    rng = random.Random(20240501)
    entries = []

    def log(context, device, cap, command, argname=None, kind=None, value=None):
        wire = cmd(f"{command} on {device}", device, cap, command,
                   {kind: value} if argname else None)
        if argname:
            wire["arg_names"] = [argname]
        entries.append({"tick": len(entries) + 1, "context": context, "command": wire})

    for _ in range(8):
        log("sleeping", "air conditioner", "thermostatCoolingSetpoint", "setCoolingSetpoint",
            "coolingSetpoint", "decimal", rng.choice([18, 19, 19, 20, 20]))
    for _ in range(7):
        log("sleeping", "sleep light", "switchLevel", "setLevel",
            "level", "integer", rng.randint(10, 25))
    for _ in range(6):
        log("sleeping", "humidifier", "humiditySetpoint", "setHumiditySetpoint",
            "humiditySetpoint", "integer", rng.randint(42, 50))
    for _ in range(5):
        log("sleeping", "tv", "audioVolume", "setVolume", "volume", "integer", rng.randint(5, 15))
    for _ in range(4):
        log("sleeping", "door lock", "lock", "lock")

    for _ in range(9):
        log("movie", "living room light", "switchLevel", "setLevel",
            "level", "integer", rng.randint(18, 30))
    for _ in range(8):
        log("movie", "tv", "audioVolume", "setVolume", "volume", "integer", rng.randint(40, 60))
    for _ in range(3):
        log("movie", "blind", "windowShade", "close")

    for _ in range(7):
        log("exercising", "air conditioner", "thermostatCoolingSetpoint", "setCoolingSetpoint",
            "coolingSetpoint", "decimal", rng.choice([17, 18, 18, 19]))
    for _ in range(7):
        log("exercising", "living room light", "switchLevel", "setLevel",
            "level", "integer", rng.randint(72, 92))
    for _ in range(4):
        log("exercising", "fan", "fanSpeed", "setFanSpeed", "speed", "integer", rng.choice([3, 4]))
    for _ in range(2):
        log("exercising", "tv", "audioVolume", "setVolume", "volume", "integer", rng.randint(55, 70))

    for _ in range(10):
        log("normal", "air conditioner", "thermostatCoolingSetpoint", "setCoolingSetpoint",
            "coolingSetpoint", "decimal", rng.choice([22, 23, 23, 24]))
    for _ in range(8):
        log("normal", "living room light", "switchLevel", "setLevel",
            "level", "integer", rng.randint(42, 62))
    for _ in range(6):
        log("normal", "tv", "audioVolume", "setVolume", "volume", "integer", rng.randint(25, 38))
    for _ in range(3):
        log("normal", "door lock", "lock", "lock")
    for _ in range(3):
        log("normal", "blind", "windowShade", "open")

    assert len(entries) == 100, len(entries)
    return "\n".join(json.dumps(e) for e in entries) + "\n"


def main():
    playbook = build_playbook()
    (OUT / "playbook.yaml").write_text(
        yaml.safe_dump(playbook, sort_keys=False, width=10_000)
    )
    (OUT / "dataset.jsonl").write_text(build_dataset())
    (OUT / "logs100.jsonl").write_text(build_logs())
    print(f"wrote {len(playbook['entries'])} playbook entries, 20 tasks, 100 log entries")


if __name__ == "__main__":
    main()
