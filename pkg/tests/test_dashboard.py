# tests/test_dashboard.py

import pytest
from streamlit.testing.v1 import AppTest

from conftest import ROOT

TIMEOUT = 120


def _page(name):
    return str(ROOT / "pages" / name)


def test_home_page():
    at = AppTest.from_file(str(ROOT / "app.py"), default_timeout=TIMEOUT).run()
    assert not at.exception
    assert [m.value for m in at.metric][:3] == ["17", "2", "5"]


def test_example1_explorer():
    at = AppTest.from_file(_page("Example_1_Explorer.py"), default_timeout=TIMEOUT).run()
    assert not at.exception
    assert [m.value for m in at.metric] == ["2", "4", "6"]


@pytest.mark.parametrize("sample", ["coverage_matroids.json", "cut_pair.json", "two_agent_additive.json"])
def test_round_robin_runner(sample):
    at = AppTest.from_file(_page("Round_Robin_Runner.py"), default_timeout=TIMEOUT).run()
    at.selectbox[0].set_value(sample).run()
    assert not at.exception
    assert not at.error
    assert at.metric[1].value == "0"


def test_competition_page_waits_for_the_button():
    at = AppTest.from_file(_page("Competition_Experiments.py"), default_timeout=TIMEOUT).run()
    assert not at.exception
    assert len(at.dataframe) == 0


def test_competition_page_runs_a_small_experiment():
    at = AppTest.from_file(_page("Competition_Experiments.py"), default_timeout=TIMEOUT).run()
    at.number_input[0].set_value(60)
    at.number_input[2].set_value(1)
    at.multiselect[0].set_value([2])
    at.button[0].click().run()
    assert not at.exception
    assert len(at.dataframe) == 2
