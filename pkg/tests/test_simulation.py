import csv
import io
import json
import math

import numpy as np
import pytest

from sdtest import simulation as sim
from sdtest.estimation import fit_mdpde as real_fit
from sdtest.models import NormalKnownVarModel
from sdtest.simulation import (
    Alternative,
    MixtureDistribution,
    SimulationConfig,
    SimulationError,
    empirical_power,
    empirical_size,
    replication_rng,
    run_simulation,
    sample_mixture,
    table_generator,
)
from reference_values import TABLE1, TABLE3


def test_mixture_validation():
    with pytest.raises(ValueError):
        MixtureDistribution(((0.5, 0.0, 1.0), (0.4, 1.0, 1.0)))
    with pytest.raises(ValueError):
        MixtureDistribution(((1.0, 0.0, 0.0),))
    assert MixtureDistribution.contaminated(0.0, 1.0, 0.1, 10.0).mean == pytest.approx(1.0)


def test_single_component_mean():
    n = 10**5
    x = sample_mixture(MixtureDistribution(((1.0, 0.0, 1.0),)), n, replication_rng(1, 0))
    assert abs(x.mean()) < 4 / math.sqrt(n)


def test_two_component_mean():
    n = 10**5
    dist = MixtureDistribution.contaminated(0.0, 1.0, 0.1, 10.0)
    x = sample_mixture(dist, n, replication_rng(2, 0))
    sd = math.sqrt(1 + 0.09 * 100)
    assert abs(x.mean() - 1.0) < 4 * sd / math.sqrt(n)


def test_streams_are_reproducible_and_distinct():
    dist = MixtureDistribution.contaminated(0.0, 1.0, 0.2, 3.0)
    a = sample_mixture(dist, 50, replication_rng(9, 4))
    b = sample_mixture(dist, 50, replication_rng(9, 4))
    c = sample_mixture(dist, 50, replication_rng(9, 5))
    assert np.array_equal(a, b) and not np.array_equal(a, c)


def test_results_do_not_depend_on_workers():
    cfg = SimulationConfig(n=30, reps=120, seed=3, betas=(0.0, 0.5), lams=(-1.0, 0.0, 1.0), epsilon=0.1)
    one = run_simulation(cfg).rows()
    two = run_simulation(SimulationConfig(**{**cfg.__dict__, "workers": 2})).rows()
    assert one == two


def test_generic_path_agrees_with_vectorised_path():
    cfg = SimulationConfig(n=40, reps=30, seed=5, betas=(0.0, 0.5), lams=(0.0, 1.0), epsilon=0.1)
    assert run_simulation(cfg, model=NormalKnownVarModel(1.0)).rows() == run_simulation(cfg).rows()


@pytest.mark.slow
def test_size_without_contamination():
    r = empirical_size(SimulationConfig(n=50, reps=1000, seed=11, betas=(0.0,), lams=(0.0,)))
    assert r.rate(0.0, 0.0) == pytest.approx(0.054, abs=0.015)
    assert r.cells[0].se == pytest.approx(math.sqrt(r.cells[0].rate * (1 - r.cells[0].rate) / 1000))


@pytest.mark.slow
def test_size_under_contamination_with_strong_downweighting():
    r = empirical_size(SimulationConfig(n=50, reps=1000, seed=12, betas=(1.0,), lams=(0.0,), epsilon=0.1))
    assert r.rate(1.0, 0.0) == pytest.approx(0.094, abs=0.02)


def test_size_near_one_at_huge_level():
    r = empirical_size(SimulationConfig(n=50, reps=200, seed=1, alpha=0.999, betas=(0.5,)))
    assert r.rate(0.5, 0.0) > 0.99


@pytest.mark.slow
def test_size_matches_level_at_n300():
    cfg = SimulationConfig(n=300, reps=1000, seed=21, betas=(0.0, 0.3, 0.5, 1.0), lams=(-1.0, -0.5, 0.0, 0.5))
    for c in empirical_size(cfg).cells:
        assert abs(c.rate - 0.05) <= 3 * math.sqrt(0.05 * 0.95 / cfg.reps)


@pytest.mark.slow
def test_contiguous_power_simulation():
    cfg = SimulationConfig(n=300, reps=1000, seed=31, betas=(0.5,), alternative=Alternative("contiguous", math.sqrt(10)))
    assert empirical_power(cfg).rate(0.5, 0.0) == pytest.approx(0.83, abs=0.03)


@pytest.mark.slow
@pytest.mark.parametrize("location", [-2.0, -3.0, -4.0])
def test_fixed_alternative_under_heavy_contamination(location):
    cfg = SimulationConfig(n=50, reps=1000, seed=41, betas=(0.0, 0.3, 0.5, 1.0), lams=(-0.5, 0.0),
                           alternative=Alternative("fixed", 1.0), epsilon=0.2, contamination_mean=location)
    r = empirical_power(cfg)
    for b in (0.3, 0.5, 1.0):
        assert r.rate(b, 0.0) >= 0.95
    assert r.rate(0.0, 0.0) < 0.9


@pytest.mark.slow
def test_likelihood_ratio_power_falls_as_contamination_moves_away():
    rates = []
    for loc in (-2.0, -3.0, -4.0):
        cfg = SimulationConfig(n=50, reps=1000, seed=42, betas=(0.0,), alternative=Alternative("fixed", 1.0),
                               epsilon=0.2, contamination_mean=loc)
        rates.append(empirical_power(cfg).rate(0.0, 0.0))
    assert rates[0] > rates[1] > rates[2]


def test_single_replication_smoke():
    cfg = SimulationConfig(n=20, reps=1, seed=0, betas=(0.5,), alternative=Alternative("fixed", 2.0))
    assert empirical_power(cfg).rate(0.5, 0.0) in (0.0, 1.0)


def test_alternative_kind_checked():
    with pytest.raises(ValueError):
        empirical_size(SimulationConfig(n=10, reps=5, alternative=Alternative("fixed", 1.0)))
    with pytest.raises(ValueError):
        empirical_power(SimulationConfig(n=10, reps=5))
    with pytest.raises(ValueError):
        Alternative("sideways")
    with pytest.raises(ValueError):
        SimulationConfig(n=10, reps=0)


def _flaky_fit(fail_every):
    calls = {"n": 0}

    def fit(x, model, beta, init=None, tol=1e-8):
        out = real_fit(x, model, beta, init=init, tol=tol)
        calls["n"] += 1
        if calls["n"] % fail_every == 0:
            return type(out)(out.theta_hat, out.beta, out.J, out.V, out.Sigma, False, out.objective_value, "forced")
        return out

    return fit


def test_rare_failures_are_excluded(monkeypatch):
    # every 500th fit fails, and its retry succeeds, so nothing is lost
    monkeypatch.setattr(sim, "fit_mdpde", _flaky_fit(500))
    cfg = SimulationConfig(n=20, reps=300, seed=1, betas=(0.5,))
    cell = run_simulation(cfg, model=NormalKnownVarModel(1.0)).cells[0]
    assert cell.failures == 0 and cell.valid == 300


def test_persistent_rare_failures_are_dropped_from_the_rate(monkeypatch):
    cfg = SimulationConfig(n=20, reps=300, seed=1, betas=(0.5,))
    sums = sim._draw(cfg, range(cfg.reps)).sum(axis=1)
    cutoff = np.sort(sums)[-2]

    def fit(x, model, beta, init=None, tol=1e-8):
        out = real_fit(x, model, beta, init=init, tol=tol)
        if x.sum() >= cutoff:
            return type(out)(out.theta_hat, out.beta, out.J, out.V, out.Sigma, False, out.objective_value, "forced")
        return out

    monkeypatch.setattr(sim, "fit_mdpde", fit)
    cell = run_simulation(cfg, model=NormalKnownVarModel(1.0)).cells[0]
    assert cell.failures == 2 and cell.valid == 298


def test_frequent_failures_are_fatal(monkeypatch):
    monkeypatch.setattr(sim, "fit_mdpde", _flaky_fit(1))
    with pytest.raises(SimulationError):
        run_simulation(SimulationConfig(n=20, reps=50, seed=1, betas=(0.5,)), model=NormalKnownVarModel(1.0))


def test_contiguous_power_table():
    t = table_generator("contiguous_power")
    assert [round(r[2], 2) for r in t.rows] == [TABLE1[b] for b in sorted(TABLE1)]
    assert t.to_csv() == table_generator("contiguous_power").to_csv()


def test_inflation_table_cells():
    t = table_generator("inflation_ratios")
    assert len(t.rows) == 126
    cell = {(r[0], r[1], r[2]): r[4] for r in t.rows}
    assert cell[(0.5, 0.05, 0.0)] == pytest.approx(3.99, abs=1e-3)
    assert cell[(0.5, 0.05, 0.0)] == pytest.approx(TABLE3[0.5][5][0], abs=1e-3)
    first = [v for (s, e, b), v in cell.items() if e == 0.0005]
    assert all(1.0005 <= v <= 1.04 for v in first)
    assert t.to_json() == table_generator("inflation_ratios").to_json()


def test_table_serialisation(tmp_path):
    t = table_generator("contiguous_power")
    text = t.to_csv()
    assert text.endswith("\r\n")
    rows = list(csv.reader(io.StringIO(text)))
    assert rows[0] == ["beta", "gamma", "power"]
    assert float(rows[1][2]) == t.rows[0][2]  # 17 significant digits round-trip
    doc = json.loads(t.to_json())
    assert doc["rows"][0]["power"] == t.rows[0][2]
    csv_path, json_path = t.write(tmp_path)
    assert open(csv_path, newline="").read() == text


def test_small_empirical_size_table():
    t = table_generator("empirical_size", reps=20, seed=0, betas=(0.5,), lams=(0.0, 1.0))
    assert len(t.rows) == 6 and all(0 <= r[4] <= 1 for r in t.rows)
    with pytest.raises(ValueError):
        table_generator("nope")
