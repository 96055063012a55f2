"""Shared test fixtures: the recorded-data example and record factories."""

EXAMPLE_BUILDER = {
    "gameId": 19,
    "stepId": 1,
    "avatarInfo": {
        "pos": [-0.5333829883845848, 65.07999999999996, -3.6806624583844014],
        "look": [-1.0720000000000007, -15.771999999999965],
    },
    "worldEndingState": {
        "blocks": [
            [-2, 63, 1, 50],
            [-1, 63, -2, 57],
            [-1, 63, 1, 50],
            [0, 63, -3, 57],
            [1, 63, 0, 57],
        ]
    },
    "tape": [
        "0 set_look (-0.004, 0)",
        "1 set_look (-0.044, -0.042)",
        "2 action step_backward",
        "3 pos_change (-0.10159854456559483, 63, 0.014814775657966633)",
        "4 action select_and_place_block 50 1 63 0",
        "5 block_change  (1, 63, 0, 0, 50)",
    ],
    "clarification_question": "null",
}

EXAMPLE_TAPE_LINES = list(EXAMPLE_BUILDER["tape"])


def architect_entry(**overrides):
    entry = {
        "gameId": 1,
        "stepId": 0,
        "avatarInfo": {"perspective": "north"},
        "command": "place three blue blocks in a row heading east",
    }
    entry.update(overrides)
    return entry
