import math
import xml.etree.ElementTree as ET

import pytest

import binagree as ba


def small_config(seed=3):
    c = ba.SimConfig.model1()
    c.n_subjects = 30
    c.n_raters = 6
    c.n_times = 4
    c.seed = seed
    return c


def test_formulas():
    k = ba.cohen_kappa(40, 10, 10, 40)
    assert abs(k.kappa - 0.6) < 1e-12
    assert k.p_o == pytest.approx(0.8)
    r = ba.icc(ba.VarianceComponents(0.8, 0.2, 0.4))
    assert r.icc_m1 == pytest.approx(0.9, abs=1e-12)
    assert r.icc_m2 == pytest.approx(9 / 11, abs=1e-12)
    m = ba.ar1_matrix([1.0, 2.0, 3.0], 0.5)
    assert m[0, 2] == pytest.approx(0.25)
    with pytest.raises(ValueError):
        ba.cohen_kappa(10, 0, 0, 0)


def test_csv_round_trip():
    rows = [ba.PairedRecord("a", 1.0, 1, 0, "R1", "R2"), ba.PairedRecord("a", 2.0, 0, 0, "R2", "R1")]
    text = ba.write_wide_csv(rows)
    assert text.splitlines()[0] == "id,time,y1,y2,rater1,rater2"
    assert ba.parse_wide_csv(text) == rows
    data = ba.widen_to_long(rows)
    assert len(data) == 4
    with pytest.raises(ValueError, match="Postive"):
        ba.parse_wide_csv("id,time,y1,y2,rater1,rater2\n1,1,Postive,Negative,A,B\n")
    with pytest.raises(OSError):
        ba.load_csv("/nonexistent/file.csv")


def test_fit_and_agreement():
    data = ba.generate(small_config())
    assert data.n_subjects == 30
    fit = ba.fit(data)
    assert fit.converged
    assert fit.fixed.cov.shape == (3, 3)
    assert len(fit.eblup_gamma) == 30
    report = ba.agreement_report(fit, data)
    assert 0.0 <= report["wald"].p_value <= 1.0
    band = report["bland_altman"]
    assert band.loa_low <= band.mean_diff <= band.loa_high
    assert len(band.points) == 30
    assert -1.0 <= report["naive_kappa"].kappa <= 1.0

    same = ba.fit(data)
    assert same.fixed.beta_1 == fit.fixed.beta_1

    text = ba.write_fit_state(data, fit)
    data2, fit2 = ba.read_fit_state(text)
    assert fit2.fixed.beta_2 == fit.fixed.beta_2
    assert ba.write_fit_state(data2, fit2) == text


def test_svg_is_well_formed():
    data = ba.generate(small_config(5))
    fit = ba.fit(data)
    band = ba.ba_summary(ba.eblup_summary(fit, data), ba.BAScale.probability)
    root = ET.fromstring(ba.render_ba_svg(band))
    ns = "{http://www.w3.org/2000/svg}"
    assert root.tag == ns + "svg"
    points = [e for e in root.iter(ns + "circle") if e.get("class") == "point"]
    assert len(points) == 30
    lines = [e.get("class") for e in root.iter(ns + "line") if e.get("class") in ("mean", "loa")]
    assert sorted(lines) == ["loa", "loa", "mean"]


def test_campaigns_and_cli(tmp_path):
    c = small_config(9)
    opts = ba.CampaignOptions()
    opts.jobs = 2
    rec = ba.run_recovery(c, 3, ba.ModelSpec(), opts)
    assert rec.n_replicates == 3
    assert math.isfinite(rec.beta_1.mean)
    table = ba.run_size_power(c, [1.6, 2.2], 2)
    assert len(table.rows) == 4
    root = ET.fromstring(ba.render_power_svg(table))
    assert root.tag.endswith("svg")
    assert len(ba.make_grid(1.6, 2.8, 0.1)) == 13

    code, out, err = ba.run_cli(["simulate", "--dataset", "--seed", "4", "-o", str(tmp_path)])
    assert code == 0
    assert (tmp_path / "data.csv").exists()
    code, out, err = ba.run_cli(["validate", "-i", str(tmp_path / "missing.csv")])
    assert code == 2
    assert "input not found" in err
