import json

import pytest

import gbsp


def test_terms_and_bound():
    psi = gbsp.ApproxFunction("power", tau=3.0)
    f = gbsp.DimensionFunction("power", s=2.0)
    assert gbsp.gbsp_term([2, -1, 2], psi, f, 3) == pytest.approx(0.125)
    assert gbsp.shell_size(4, 3) == 9**3 - 7**3
    assert gbsp.dim_bound(3, 4.0) == pytest.approx(1.8)
    with pytest.raises(ValueError):
        gbsp.gbsp_term([0, 0, 0], psi, f, 3)


def test_series_verdicts():
    psi = gbsp.ApproxFunction("power", tau=3.0)
    conv = gbsp.series_scan(psi, gbsp.DimensionFunction("power", s=2.5), 3, 64)
    div = gbsp.series_scan(psi, gbsp.DimensionFunction("power", s=1.5), 3, 64)
    assert conv["verdict"] == "CONVERGES"
    assert div["verdict"] == "DIVERGES"
    assert conv["csv"].startswith("Q,shell_sum,cumulative")


def test_hessian_fractions():
    assert "gordan-noether" in gbsp.builtin_names()
    assert gbsp.singular_fraction("paraboloid") == 0.0
    assert gbsp.singular_fraction("degenerate-quadratic", [1, 2, 1, 0, 0, 0]) == 1.0


def test_config_and_run():
    doc = {
        "n": 3,
        "surface": {"builtin": "paraboloid"},
        "psi": {"kind": "quasi-norm-power", "tau": 3, "weights": [1.0, 1.0, 1.5]},
        "f": {"kind": "power", "s": 1.5},
    }
    with pytest.raises(gbsp.ConfigError, match="psi.weights"):
        gbsp.validate_config(json.dumps(doc))
    doc["psi"]["weights"] = [0.5, 1.0, 1.5]
    gbsp.validate_config(json.dumps(doc))

    code, files, _ = gbsp.run("cover", json.dumps(doc), p=0, q=[0, 0, 5])
    assert code == 0
    cover = json.loads(files["cover.json"])
    assert cover["regime"] == "Case1"
    assert max(abs(c) for c in cover["v"]) < 1e-9
