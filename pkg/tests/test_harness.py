import numpy as np
import pytest

from relaxrk.errors import NumericalError, UnsupportedError
from relaxrk.harness import (
    ErrorTable,
    ExperimentSpec,
    ap_compare,
    check_nested,
    convergence_study,
    error_norm,
    format_csv,
    manifest_path,
    manifold_deviation,
    read_config,
    read_csv,
    restrict,
    run_experiment,
    spec_from_mapping,
)


def test_error_norm_examples():
    b = np.ones(4)
    assert error_norm(b, b) == 0.0
    assert error_norm(b + 0.01, b) == pytest.approx(0.01)
    d = 1e-3 * np.array([1, -1, 1, -1])
    assert error_norm(b + d, b) == pytest.approx(1e-3)
    assert error_norm(b + d, b, norm="linf") == pytest.approx(1e-3)
    two = np.stack([b, 2 * b], axis=-1)
    assert error_norm(two * 1.1, two, component=1) == pytest.approx(0.1)
    with pytest.raises(ZeroDivisionError):
        error_norm(b, 0 * b)
    with pytest.raises(ValueError):
        error_norm(b, np.ones(3))
    with pytest.raises(ValueError):
        error_norm(b, b, norm="l2")


def test_nested_lists():
    assert check_nested((50, 100, 200)) == [50, 100, 200]
    with pytest.raises(ValueError):
        check_nested((50, 100, 300))
    with pytest.raises(ValueError):
        ExperimentSpec(n_list=(10, 30)).validate()


def test_restriction():
    n = 64
    x = (np.arange(n) + 0.5) / n
    xc = (np.arange(n // 4) + 0.5) / (n // 4)
    f = np.sin(2 * np.pi * x)
    point = restrict(f, 4, "fd")
    assert np.max(np.abs(point - np.sin(2 * np.pi * xc))) < 1e-14
    avg = restrict(np.arange(8.0), 2, "fv")
    np.testing.assert_array_equal(avg, [0.5, 2.5, 4.5, 6.5])
    np.testing.assert_array_equal(restrict(f, 1), f)
    with pytest.raises(ValueError):
        restrict(f, 3)


def test_zero_time_study_has_zero_errors():
    spec = ExperimentSpec(ic="broadwell-smooth", n_list=(20, 40), t_end=0.0, cfl=0.6, epsilon=1.0)
    table = convergence_study(spec)
    assert all(r[1] < 1e-14 for r in table.rows)
    assert table.rows[0][2] is None


def test_convergence_table_shape_and_threads(monkeypatch):
    monkeypatch.setenv("RELAXRK_THREADS", "3")
    spec = ExperimentSpec(ic="broadwell-smooth", scheme="ssp2-222", n_list=(25, 50, 100), t_end=1.0, cfl=0.6, epsilon=1.0)
    table = convergence_study(spec)
    assert [r[0] for r in table.rows] == [25, 50, 100]
    assert table.finest_order > 1.6
    monkeypatch.setenv("RELAXRK_THREADS", "1")
    again = convergence_study(spec)
    assert again.rows == table.rows
    text = table.format()
    assert "order" in text and "100" in text
    assert table.to_csv().startswith("n,error,order\n25,")


def test_run_experiment_writes_csv_and_manifest(tmp_path):
    out = tmp_path / "rim1.csv"
    spec = ExperimentSpec(ic="broadwell-rim1", epsilon=1e-8, n=200, cfl=0.5, t_end=0.5, out=str(out))
    res = run_experiment(spec)
    text = out.read_text()
    lines = text.split("\n")
    assert lines[0] == "x,comp_0,comp_1,comp_2"
    assert len(lines) == 202 and lines[-1] == ""
    assert "\r" not in text
    x, U = read_csv(out)
    assert U.shape == (200, 3)
    np.testing.assert_array_equal(U, res.state)
    np.testing.assert_array_equal(x, res.x)
    manifest = (tmp_path / "rim1.csv.manifest").read_text()
    assert "step_count = 100" in manifest and "epsilon = 1e-08" in manifest
    assert manifest_path(str(out)).endswith(".manifest")


def test_csv_is_byte_deterministic(tmp_path):
    spec = ExperimentSpec(ic="shallow-sine", n=64, t_end=0.1, epsilon=1e-8)
    a = run_experiment(spec)
    b = run_experiment(spec)
    assert format_csv(a.x, a.state) == format_csv(b.x, b.state)


def test_failed_run_leaves_no_output(tmp_path):
    out = tmp_path / "bad.csv"
    spec = ExperimentSpec(ic="broadwell-rim1", n=50, cfl=1.5, t_end=0.1, out=str(out))
    with pytest.raises(NumericalError):
        run_experiment(spec)
    assert not out.exists()
    assert not (tmp_path / "bad.csv.manifest").exists()


def test_spec_validation():
    with pytest.raises(KeyError, match="ssp3-433"):
        ExperimentSpec(scheme="nope").validate()
    with pytest.raises(KeyError):
        ExperimentSpec(ic="nope").validate()
    with pytest.raises(ValueError, match="belongs"):
        ExperimentSpec(ic="shallow-sine", model="broadwell").validate()
    with pytest.raises(ValueError):
        ExperimentSpec(ic="shallow-sine", a_z=0.2).validate()


def test_ap_compare_reports():
    stiff = ap_compare(ExperimentSpec(ic="broadwell-smooth", epsilon=1e-12, t_end=1.0, cfl=0.6, n=100))
    assert stiff.stiff and stiff.conserved_distance < 1e-6
    mild = ap_compare(ExperimentSpec(ic="broadwell-smooth", epsilon=1.0, t_end=1.0, cfl=0.6, n=100))
    assert not mild.stiff and "not in stiff regime" in mild.format()
    with pytest.raises(UnsupportedError):
        ap_compare(ExperimentSpec(ic="granular-inflow", n=20, t_end=0.01))


def test_manifold_deviation_zero_on_manifold():
    from relaxrk.models import make_broadwell

    m = make_broadwell()
    U = m.equilibrium(np.array([[1.0, 0.3], [2.0, -0.1]]))
    assert manifold_deviation(m, U) == 0.0


def test_config_file(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# comment\nic = traffic-riemann\nscheme = ssp2-222\nn = 80\neps = 0.2\ntend = 0.5\nparam.c_v = 2.0\n")
    values = read_config(cfg)
    spec = spec_from_mapping(values)
    assert spec.ic == "traffic-riemann" and spec.n == 80 and spec.epsilon == 0.2
    assert spec.t_end == 0.5 and spec.params == {"c_v": 2.0}
    cfg.write_text("no equals sign\n")
    with pytest.raises(ValueError, match="key = value"):
        read_config(cfg)
    with pytest.raises(ValueError, match="unknown"):
        spec_from_mapping({"colour": "red"})


def test_error_table_orders():
    table = ErrorTable([(50, 4e-4, None), (100, 1e-4, 2.0)])
    assert table.orders == [None, 2.0]
