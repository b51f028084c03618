import json
import os
import pathlib

import pytest

import netpd

PRESETS = pathlib.Path(os.environ.get("NETPD_PRESET_DIR", pathlib.Path(__file__).parents[2] / "presets"))


def test_circulant_and_round():
    g = netpd.circulant(8, 2)
    assert g["n"] == 8
    assert g["k"] == 2
    assert [0, 1] in g["edges"] and [0, 7] in g["edges"]
    rec = netpd.resolve_round("CCCDDDDC", g, bc_ratio=2)
    assert rec["paid"][0] == 20
    assert rec["gained"][0] == 40
    assert rec["net"][7] == 0
    assert sum(rec["net"]) == sum(2 * (20 - 10) for a in "CCCDDDDC" if a == "C")


def test_sample_regular_is_seeded():
    a = netpd.sample_regular(10, 4, 3)
    b = netpd.sample_regular(10, 4, 3)
    assert a == b
    assert len(a["edges"]) == 20


def test_currency_and_parsing():
    assert netpd.points_to_currency(100) == "0.33"
    assert netpd.points_to_currency(200) == "0.67"
    assert netpd.points_to_currency(299, floor=True) == "0.00"
    assert netpd.parse_action(" C. ") == "C"
    assert netpd.parse_action("I cooperate") is None


def test_assortment_and_welch():
    assert netpd.assortment("CDCDCDCD", netpd.circulant(8, 2)) == -1.0
    assert netpd.assortment("CCCC", netpd.circulant(4, 2)) is None
    r = netpd.welch_t_test([1, 2, 3, 4, 5], [2, 3, 4, 5, 6])
    assert r["t"] == pytest.approx(-1.0)
    assert r["df"] == pytest.approx(8.0)
    assert abs(r["p"] - 0.34659350708733425) <= 1e-6


def test_opening_text():
    opening = netpd.render_opening(bc_ratio=2)
    assert len(opening) == 5
    assert "you pay 10 points for each player" in opening[2]


def test_run_mock_dialogue_preset():
    config = json.loads((PRESETS / "mock-dialogue.json").read_text())
    out = netpd.run_experiment(config)
    rep = out["repetitions"][0]
    assert rep["status"]["completed"]
    assert rep["records"][0]["gained"][0] == 40
    assert out["cooperation"]["mean"][0] == pytest.approx(0.5)


def test_bad_config_raises():
    with pytest.raises(netpd.ConfigError):
        netpd.run_experiment({"topology": {"n": 4, "k": 3}})


def test_stimulus():
    series = netpd.run_stimulus({"kind": "scripted", "strategy": "tit_for_tat_majority"},
                                post_change_cooperators=1)
    assert series[:6] == [1.0] * 6
    assert series[6:] == [0.0] * 19
