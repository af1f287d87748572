import numpy as np
import pytest

from lognls.experiments import (CSV_COLUMNS, REGISTRY, ConfigError, build_config, fit_rate,
                                log_lemma_violations, make_rng, parse_config, run_scenario,
                                write_plot)

SCENARIOS = {"conservation", "lipschitz", "lemma-ch-fuzz", "splitting-order", "phase-imprint-rate",
             "translation-rate", "gradsq-rate", "conj-derivative-rate", "trotter-n-rate",
             "trotter-tau-rate", "eikonal-rates", "wkb-representation", "gaussian-match",
             "gaussian-invariance", "coherent-distance", "composition-bound", "steering-demo"}


def test_registry_complete():
    assert set(REGISTRY) == SCENARIOS


def test_fit_rate_examples():
    xs = np.array([0.1, 0.2, 0.4, 0.8])
    assert fit_rate(xs, xs**2)[0] == pytest.approx(2.0, abs=1e-12)
    assert fit_rate(xs, np.full(4, 3.0))[0] == pytest.approx(0.0, abs=1e-12)
    rng = np.random.default_rng(11)
    xs = np.geomspace(0.01, 1, 8)
    noisy = xs**1.5 * (1 + 0.01 * rng.normal(size=8))
    assert fit_rate(xs, noisy)[0] == pytest.approx(1.5, abs=0.1)


@pytest.mark.parametrize("ys", [[1.0, 0.0, 2.0], [1.0, -1.0, 2.0]])
def test_fit_rate_rejects_nonpositive(ys):
    with pytest.raises(ValueError):
        fit_rate([1.0, 2.0, 3.0], ys)


def test_fit_rate_needs_three_points():
    with pytest.raises(ValueError):
        fit_rate([1.0, 2.0], [1.0, 2.0])


def test_lemma_inequality_on_chosen_pairs():
    z1 = np.array([1.0 + 0j, 0.0, 2.0])
    z2 = np.array([1.5j, 0.3, 2.0])
    bad, worst = log_lemma_violations(z1, z2)
    assert bad == 0 and worst <= 1.0
    # nearly coincident pairs are where roundoff could fake a violation
    rng = np.random.default_rng(0)
    z = np.exp(rng.normal(0, 2, 1000)) * np.exp(2j * np.pi * rng.uniform(size=1000))
    w = z * np.exp(1j * rng.uniform(0, 0.1, 1000)) * (1 + rng.uniform(0, 0.1, 1000))
    assert log_lemma_violations(z, w)[0] == 0


def test_rng_streams_are_independent_and_reproducible():
    a = make_rng(42, 3).uniform(size=4)
    b = make_rng(42, 3).uniform(size=4)
    c = make_rng(42, 4).uniform(size=4)
    np.testing.assert_array_equal(a, b)
    assert not np.allclose(a, c)


def test_config_with_and_without_header():
    body = "scenario = eikonal-rates\nsweep_values = 0.2, 0.1, 0.05\namp = 0.4  # comment\n"
    for text in (body, "[run]\n" + body):
        cfg = parse_config(text)
        assert cfg.name == "eikonal-rates"
        assert cfg.sweep_values == [0.2, 0.1, 0.05]
        assert cfg["amp"] == 0.4


def test_config_errors():
    with pytest.raises(ConfigError):
        parse_config("scenario = nope\n")
    with pytest.raises(ConfigError):
        parse_config("scenario = conservation\nbogus = 1\n")
    with pytest.raises(ConfigError):
        parse_config("scenario = conservation\nthreads = 0\n")
    with pytest.raises(ConfigError):
        parse_config("this is not = [a config\n[[")


def test_overrides_take_precedence():
    cfg = parse_config("scenario = conservation\nseed = 3\n", {"seed": 9, "threads": None})
    assert cfg.seed == 9 and cfg.threads == 1


def test_csv_columns_and_determinism(tmp_path):
    text = "scenario = lipschitz\npairs = 2\nN = 64\nT = 0.1\nsweep_values = -1.0, 0.5\n"
    a = parse_config(text, {"out": str(tmp_path / "a.csv")})
    b = parse_config(text, {"out": str(tmp_path / "b.csv"), "threads": 2})
    ra, rb = run_scenario(a), run_scenario(b)
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    header = ra.csv_text.splitlines()[0].split(",")
    assert header[:5] == CSV_COLUMNS
    assert ra.report.passed and rb.report.passed
    assert ra.csv_text.splitlines()[1].split(",")[4] == ""  # wall_ms blank without timing


def test_seed_changes_output():
    base = "scenario = lipschitz\npairs = 2\nN = 64\nT = 0.1\nsweep_values = -1.0, 0.5\n"
    a = run_scenario(parse_config(base), write=False).csv_text
    b = run_scenario(parse_config(base + "seed = 1\n"), write=False).csv_text
    assert a != b


def test_timing_column_filled():
    cfg = build_config("eikonal-rates", {"timing": True})
    rows = run_scenario(cfg, write=False).rows
    assert all(r["wall_ms"] >= 0 for r in rows)


def test_guard_violation_reported_with_parameter():
    cfg = build_config("conj-derivative-rate", {"N": 256})
    report = run_scenario(cfg, write=False).report
    assert not report.passed
    assert "UnderResolvedError at tau=" in report.summary


def test_plot_pair(tmp_path):
    result = run_scenario(build_config("eikonal-rates"), write=False)
    data, script = write_plot(result, str(tmp_path / "eik"))
    assert open(data).read().count("\n") == 5
    assert "logscale" in open(script).read()


@pytest.mark.parametrize("name", sorted(SCENARIOS))
def test_describe_defaults_have_sweep(name):
    d = REGISTRY[name].defaults
    assert "sweep_param" in d and len(d["sweep_values"]) >= 1
