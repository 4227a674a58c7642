import numpy as np
import pytest

import mcdfn


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("data")
    csv, holidays = root / "sales.csv", root / "holidays.txt"
    rows = mcdfn.generate_synthetic(str(csv), str(holidays), seed=2013)
    assert rows == 1826
    return str(csv), str(holidays)


def test_model_catalogue():
    names = mcdfn.model_names()
    assert "MCDFN" in names and len(names) == 8
    assert mcdfn.build("MCDFN").param_count == 1123358
    assert mcdfn.build("FCN").param_count == 6145


def test_prepare_shapes(dataset):
    d = mcdfn.prepare(*dataset)
    assert d["splits"] == (1278, 365, 183)
    assert d["train"]["inputs"].shape == (1219, 30, 10)
    assert d["val"]["targets"].shape == (306, 30, 1)
    assert d["test"]["inputs"].shape == (124, 30, 10)
    assert d["mean"] == pytest.approx(19.187793427230048)


def test_predict_is_deterministic(dataset):
    d = mcdfn.prepare(*dataset)
    a = mcdfn.build("GRU", seed=7).predict(d["test"]["inputs"][:4])
    b = mcdfn.build("GRU", seed=7).predict(d["test"]["inputs"][:4])
    assert a.shape == (4, 30)
    np.testing.assert_array_equal(a, b)
    single = mcdfn.build("GRU", seed=7).predict(d["test"]["inputs"][0])
    np.testing.assert_array_equal(single, a[0])


def test_metrics_and_ttests():
    y = np.array([10.0, 12.0, 11.0, 13.0])
    m = mcdfn.metrics(y, y + 1.0)
    assert m["mse"] == pytest.approx(1.0) and m["mae"] == pytest.approx(1.0)
    naive = np.concatenate([[y[0]], y[:-1]])
    assert mcdfn.theils_u(y, naive) == pytest.approx(1.0)
    assert mcdfn.student_t_two_sided_p(2.262, 9) == pytest.approx(0.05, abs=5e-4)
    r = mcdfn.paired_ttest(np.array([1.0, 2.0, 4.0]), np.array([0.5, 1.0, 2.5]))
    assert r["df"] == 2
    with pytest.raises(mcdfn.Error):
        mcdfn.paired_ttest(y, y - 1.0)


def test_train_save_load_explain(dataset, tmp_path):
    out = mcdfn.train("FCN", *dataset, epochs=1, seed=42)
    net = out["network"]
    assert len(out["history"]) == 1
    assert np.isfinite(out["test"]["mse"])

    path = str(tmp_path / "fcn.mcdfn")
    net.save(path, 19.187793427230048, 6.8697318456995875)
    loaded, mean, std = mcdfn.load_weights(path)
    d = mcdfn.prepare(*dataset)
    x = d["test"]["inputs"][:3]
    np.testing.assert_array_equal(net.predict(x), loaded.predict(x))
    assert mean == 19.187793427230048 and std == 6.8697318456995875

    window = d["test"]["inputs"][0]
    baseline = np.zeros(10)
    shap = mcdfn.shaptime(net, window, baseline, n_super=6)
    assert len(shap["phi"]) == 6
    assert abs(shap["residual"]) < 1e-9
    assert shap["heatmap"].shape == (30, 6)

    base_mse, rows = mcdfn.pfi(net, d["test"]["inputs"], d["test"]["targets"], repetitions=2, seed=1)
    assert base_mse > 0 and len(rows) == 10
    assert {r["feature"] for r in rows} == {
        "sales_z", "is_holiday", "day_sin", "day_cos", "week_sin",
        "week_cos", "month_sin", "month_cos", "year_sin", "year_cos"}
