from fractions import Fraction
from pathlib import Path

import pytest

from src.data.loader import load_scenario, parse_scenario
from src.protocol.errors import ScenarioError

BASE = """
[scenario]
seed = 4
horizon_days = 20

[thresholds]
default = 3.0
ml = 3.5

[journal:j]
f_j = 1/4
a_j = yes
n_j = 2
keywords = ml, stats

[agents:board]
role = reviewer
count = 2
journal = j
keywords = ml
capacity = 4

[agents:authors]
role = author
count = 5
wallet = 100
paper_rate = 0.2
"""


def test_parses_every_section():
    scenario = parse_scenario(BASE, source="base.scn")
    assert scenario.seed == 4
    assert scenario.default_threshold == 3.0
    assert scenario.thresholds == {"ml": 3.5}

    (journal,) = scenario.journals
    assert journal.params["f_j"] == Fraction(1, 4)
    assert journal.params["a_j"] is True
    assert journal.keywords == ("ml", "stats")

    board, authors = scenario.groups
    assert board.policy.capacity == 4
    assert board.journal == "j"
    assert authors.policy.paper_rate == 0.2
    assert scenario.agent_count == 7


def test_unknown_section():
    with pytest.raises(ScenarioError) as info:
        parse_scenario(BASE + "\n[weather]\nrain = 1\n", source="base.scn")
    assert info.value.context["section"] == "weather"
    assert info.value.context["file"] == "base.scn"


def test_unknown_field_reports_line():
    text = BASE.replace("paper_rate = 0.2", "paper_rate = 0.2\nspeed = 3")
    with pytest.raises(ScenarioError) as info:
        parse_scenario(text)
    assert info.value.context["field"] == "speed"
    assert text.splitlines()[info.value.context["line"] - 1].startswith("speed")


def test_invalid_value():
    with pytest.raises(ScenarioError) as info:
        parse_scenario(BASE.replace("count = 5", "count = many"))
    assert info.value.context["value"] == "many"


def test_board_smaller_than_n_j():
    with pytest.raises(ScenarioError):
        parse_scenario(BASE.replace("n_j = 2", "n_j = 3"))


def test_unknown_shock_group():
    with pytest.raises(ScenarioError):
        parse_scenario(BASE + "\n[shock:s]\nday = 3\ngroup = nobody\nfraction = 0.5\n")


def test_threshold_out_of_range():
    with pytest.raises(ScenarioError):
        parse_scenario(BASE.replace("ml = 3.5", "ml = 7"))


def test_bad_role():
    with pytest.raises(ScenarioError):
        parse_scenario(BASE.replace("role = author", "role = editor"))


def test_missing_file(tmp_path):
    with pytest.raises(ScenarioError):
        load_scenario(tmp_path / "absent.scn")


def test_demo_scenario_loads():
    demo = load_scenario(Path(__file__).resolve().parent.parent / "scenarios" / "demo.scn")
    assert {j.name for j in demo.journals} == {"graphs", "ml"}
    assert demo.shocks[0].group == "pool"
