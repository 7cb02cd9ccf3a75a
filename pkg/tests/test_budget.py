import warnings
import numpy as np
import pytest

from scipy.stats import truncnorm

from noisecascade.budget import (Attenuator, Coupler, Prior, apply_package_loss, build_budget,
                                 dc_power,
                                 group_by_stage, infer_excess_noise,
                                 infer_follower_noise, infer_follower_noise_chain,
                                 infer_packaging_efficiency, input_efficiency,
                                 mc_uncertainty, predict_chain_noise,
                                 pump_dissipation, pump_input_power,
                                 split_packaging_loss, truncated_draw)
from noisecascade.chainmodel import (band_average,
                                     chain_added_noise, chain_added_noise_off,
                                     default_grid, hemt_chain, paramp_chain)
from noisecascade.errors import (ConfigError, InferenceError, InvalidQuantityError,
                                 NoiseBudgetWarning)
from noisecascade.quanta import dbm_to_watts, occupancy_to_temperature

F = 4.5e9


def test_packaging_efficiency():
    assert infer_packaging_efficiency(2.0, 2.0).eta_p == 1.0
    res = infer_packaging_efficiency(0.93, 1.0)
    assert res.eta_p == pytest.approx(0.93)
    assert res.loss_db == pytest.approx(0.315, abs=1e-3)
    assert not res.flagged


def test_packaging_efficiency_above_one_is_flagged():
    with pytest.warns(NoiseBudgetWarning):
        res = infer_packaging_efficiency(1.1, 1.0)
    assert res.flagged
    assert res.eta_p == 1.0
    assert res.ratio == pytest.approx(1.1)


def test_packaging_efficiency_needs_positive_gains():
    with pytest.raises(InvalidQuantityError):
        infer_packaging_efficiency(0.0, 1.0)


def test_split_and_input_efficiency():
    eta_1h, eta_2 = split_packaging_loss(0.81)
    assert eta_1h == pytest.approx(0.9) and eta_2 == pytest.approx(0.9)
    assert input_efficiency(0.86, 0.93) == pytest.approx(0.7998)


def test_follower_noise_lossless_chain():
    n_off = np.array([50.0, 60.0])
    f = np.array([4e9, 5e9])
    t_h = infer_follower_noise(n_off, (1.0, 1.0, 1.0), 4.0, f)
    assert np.allclose(t_h, occupancy_to_temperature(n_off, f), rtol=1e-14)


def test_follower_noise_inverts_off_state(table1_chain):
    n_off = chain_added_noise_off(table1_chain)
    t_h = infer_follower_noise(n_off, (0.8, 0.8, 0.61), 4.0, table1_chain.freqs,
                               cold_bath_k=0.03)
    assert np.allclose(t_h, 13.4, rtol=1e-9)
    assert band_average(table1_chain.freqs, t_h) == pytest.approx(13.4, rel=1e-9)


def test_follower_noise_negative_is_an_error():
    with pytest.raises(InferenceError) as info:
        infer_follower_noise([1.0], (0.8, 0.8, 0.61), 4.0, [F])
    assert info.value.frequencies == [F]


def test_follower_noise_chain_variant(table1_chain):
    n_off = chain_added_noise_off(table1_chain)
    t_h = infer_follower_noise_chain(n_off, table1_chain)
    assert np.allclose(t_h, 13.4, rtol=1e-9)


def test_excess_noise_inverts_cascade(table1_chain):
    t_sigma = chain_added_noise(table1_chain).t_sigma
    assert np.allclose(infer_excess_noise(t_sigma, table1_chain), 1.9, rtol=1e-9)


def test_excess_noise_zero_excess():
    cfg = paramp_chain(0.8, 0.8, 0.61, 18.0, t_h=13.4, t_ex=0.0)
    t_ex = infer_excess_noise(chain_added_noise(cfg).t_sigma, cfg)
    assert np.all(np.abs(t_ex) < 1e-9)


def test_excess_noise_from_measured_band(table1_chain):
    t_ex = infer_excess_noise(6.3, table1_chain)
    assert band_average(table1_chain.freqs, t_ex) == pytest.approx(1.9, abs=0.1)
    # brought back to the chain input through eta_1h * eta_1c
    assert band_average(table1_chain.freqs, t_ex) / 0.64 == pytest.approx(2.97, abs=0.2)


def test_excess_noise_negative_is_an_error(table1_chain):
    with pytest.raises(InferenceError):
        infer_excess_noise(3.0, table1_chain)


def test_inference_identities_on_random_chains(random_chains):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NoiseBudgetWarning)
        for cfg in random_chains:
            t_h = float(cfg.stage("hemt").added_noise_k.values)
            t_ex = float(cfg.stage("paramp").excess_k.values)
            got_h = infer_follower_noise_chain(chain_added_noise_off(cfg), cfg)
            assert np.allclose(got_h, t_h, rtol=1e-9)
            etas = tuple(float(cfg.stage(label).eta.values)
                         for label in ("eta_1c", "eta_1h", "eta_2"))
            got_h2 = infer_follower_noise(chain_added_noise_off(cfg), etas, 4.0, cfg.freqs)
            assert np.allclose(got_h2, t_h, rtol=1e-9)
            got_ex = infer_excess_noise(chain_added_noise(cfg).t_sigma, cfg)
            assert np.allclose(got_ex, t_ex, rtol=1e-9, atol=1e-9)


def test_predict_chain_noise_is_a_wrapper(table1_chain):
    assert np.array_equal(predict_chain_noise(table1_chain),
                          chain_added_noise(table1_chain).t_sigma)
    hemt = hemt_chain([("eta_p", 0.93, 0.03), ("cable", 0.99, 4.0)], t_h=2.5)
    expected = occupancy_to_temperature(chain_added_noise_off(hemt), hemt.freqs)
    assert np.array_equal(predict_chain_noise(hemt), expected)
    t = band_average(hemt.freqs, predict_chain_noise(hemt))
    assert 2.5 < t < 3.5


def test_predict_identity_chain():
    cfg = hemt_chain([], t_h=0.0)
    assert np.all(predict_chain_noise(cfg) == 0.0)


def test_build_budget_round_trip(table1_chain):
    n_off = chain_added_noise_off(table1_chain)
    t_sigma = chain_added_noise(table1_chain).t_sigma
    report = build_budget(table1_chain, n_off, t_sigma, eta_p=0.93)
    averages = report.band_averages()
    assert averages["t_h_k"] == pytest.approx(13.4, rel=1e-9)
    assert averages["t_ex_k"] == pytest.approx(1.9, rel=1e-9)
    assert averages["t_sigma_k"] == pytest.approx(6.3, abs=0.3)
    doc = report.to_json()
    assert doc["eta_p"] == 0.93
    assert doc["table"]["labels"] == table1_chain.labels
    rows = report.table_rows()
    assert rows[0] == ["quantity"] + table1_chain.labels
    assert [r[0] for r in rows[1:]] == ["transmission_efficiency", "insertion_loss_db",
                                        "intrinsic_k", "input_referred_k", "t_sigma_k"]
    assert all(len(r) == len(rows[0]) for r in rows)


def test_build_budget_cable_and_package(table1_chain):
    truth = paramp_chain(0.9 * 0.93, 0.8 * 0.9, 0.61 * 0.9, 18.0, t_h=13.4, t_ex=1.9,
                         cold_bath_k=0.03, freqs=table1_chain.freqs)
    report = build_budget(table1_chain, chain_added_noise_off(truth),
                          chain_added_noise(truth).t_sigma, eta_p=0.93,
                          eta_alpha_c=0.9, paramp_package=0.81)
    assert np.allclose(report.eta_1c, 0.837, rtol=1e-12)
    assert report.package_share == pytest.approx(0.9, rel=1e-12)
    averages = report.band_averages()
    assert averages["t_h_k"] == pytest.approx(13.4, rel=1e-9)
    assert averages["t_ex_k"] == pytest.approx(1.9, rel=1e-9)
    assert report.table["efficiency"][:2] == pytest.approx([0.837, 0.72], rel=1e-9)


def test_package_loss_needs_a_paramp():
    hemt = hemt_chain([("eta_p", 0.93, 0.03), ("cable", 0.99, 4.0)], t_h=2.5)
    with pytest.raises(ConfigError):
        apply_package_loss(hemt, 0.81)


def test_mc_zero_width_priors(table1_chain):
    cfg = table1_chain.at(default_grid(step=500e6))
    priors = {"paramp.gain_db": Prior(0.0), "calibration.output_db": Prior(0.0)}
    res = mc_uncertainty(cfg, priors, n_samples=100, seed=1)
    assert np.allclose(res.t_sigma_std, 0.0, atol=1e-12)
    assert np.allclose(res.t_sigma_mean, predict_chain_noise(cfg), rtol=1e-12)


def test_mc_output_calibration_prior(table1_chain):
    cfg = table1_chain.at(default_grid(step=500e6))
    res = mc_uncertainty(cfg, {"calibration.output_db": Prior(0.3)}, n_samples=2000, seed=0)
    assert 0.4 <= res.band_std <= 0.5
    assert res.band_mean == pytest.approx(6.24, abs=0.1)


def test_mc_is_deterministic(table1_chain):
    cfg = table1_chain.at(default_grid(step=500e6))
    priors = {"eta_1h.eta": Prior(0.05), "hemt.added_noise_k": Prior(0.5),
              "calibration.sntj_resistance_ohm": Prior(3.5, mean=48.2)}
    a = mc_uncertainty(cfg, priors, n_samples=100, seed=42)
    b = mc_uncertainty(cfg, priors, n_samples=100, seed=42)
    c = mc_uncertainty(cfg, priors, n_samples=100, seed=43)
    assert np.array_equal(a.t_sigma_mean, b.t_sigma_mean)
    assert np.array_equal(a.t_sigma_std, b.t_sigma_std)
    assert not np.array_equal(a.t_sigma_mean, c.t_sigma_mean)
    assert np.all(a.t_sigma_std > 0)


def test_mc_truncates_efficiencies(table1_chain):
    cfg = table1_chain.at(default_grid(step=500e6))
    res = mc_uncertainty(cfg, {"eta_2.eta": Prior(0.5)}, n_samples=200, seed=3)
    assert np.all(np.isfinite(res.t_sigma_mean))
    assert res.n_rejected < 200


def test_mc_infers_follower_and_excess_noise(table1_chain):
    cfg = table1_chain.at(default_grid(step=500e6))
    priors = {"paramp.gain_db": Prior(0.0), "calibration.output_db": Prior(0.0)}
    res = mc_uncertainty(cfg, priors, n_samples=100, seed=1)
    assert res.n_rejected == 0
    assert np.allclose(res.t_h_mean, 13.4, rtol=1e-9)
    assert np.allclose(res.t_h_std, 0.0, atol=1e-9)
    assert np.allclose(res.t_ex_mean, 1.9, rtol=1e-9)
    assert np.allclose(res.t_ex_std, 0.0, atol=1e-9)
    assert res.band_stats["t_h"]["p2_5"] == pytest.approx(13.4, rel=1e-9)
    assert res.band_stats["t_ex"]["p97_5"] == pytest.approx(1.9, rel=1e-9)


def test_mc_calibration_prior_spreads_inferred_noise(table1_chain):
    cfg = table1_chain.at(default_grid(step=500e6))
    res = mc_uncertainty(cfg, {"calibration.output_db": Prior(0.3)}, n_samples=500, seed=0)
    assert np.all(res.t_h_std > 0)
    assert np.all(res.t_ex_std > 0)
    for name in ("t_sigma", "t_h", "t_ex"):
        stats = res.band_stats[name]
        assert stats["p2_5"] < stats["mean"] < stats["p97_5"]
        lo, hi = res.intervals[name]
        assert np.all(lo <= hi)
    doc = res.to_json()
    for key in ("t_h_mean_k", "t_h_std_k", "t_ex_mean_k", "t_ex_std_k", "t_h_p2_5_k",
                "t_ex_p97_5_k", "band_stats_k", "n_rejected"):
        assert key in doc


def test_truncated_draw_keeps_mass_off_the_bound():
    z = np.random.default_rng(0).standard_normal(20000)
    x = truncated_draw(0.98, 0.05, z, 0.0, 1.0)
    assert np.all((x > 0) & (x < 1))
    a, b = (0.0 - 0.98) / 0.05, (1.0 - 0.98) / 0.05
    assert x.mean() == pytest.approx(truncnorm.mean(a, b, loc=0.98, scale=0.05), abs=1.5e-3)
    assert x.std() == pytest.approx(truncnorm.std(a, b, loc=0.98, scale=0.05), rel=0.05)
    assert np.array_equal(truncated_draw(0.98, 0.0, z[:3], 0.0, 1.0), [0.98, 0.98, 0.98])


def test_truncated_draw_is_monotone_in_z():
    z = np.linspace(-4, 4, 41)
    x = truncated_draw(18.0, 0.5, z)
    assert np.all(np.diff(x) > 0)
    assert x[20] == pytest.approx(18.0, rel=1e-9)


def test_mc_rejects_bad_inputs(table1_chain):
    with pytest.raises(InvalidQuantityError):
        mc_uncertainty(table1_chain, {}, n_samples=10)
    with pytest.raises(ConfigError):
        mc_uncertainty(table1_chain, {"nope.eta": Prior(0.1)}, n_samples=100)
    with pytest.raises(ConfigError):
        mc_uncertainty(table1_chain, {"calibration.sntj_resistance_ohm": Prior(3.5)},
                       n_samples=100)
    with pytest.raises(ConfigError):
        mc_uncertainty(table1_chain, {"hemt.label": Prior(0.1)}, n_samples=100)


def test_dc_power():
    p, r = dc_power(100e-6, 1e-3)
    assert p == pytest.approx(100e-9) and r == pytest.approx(0.1)
    assert dc_power(0.0, 1e-3) == (0.0, 0.0)
    p, r = dc_power(1.5, 1.5e-3)
    assert p == pytest.approx(2.25e-3) and r == pytest.approx(1000.0)
    with pytest.raises(InvalidQuantityError):
        dc_power(1e-6, 0.0)


def test_pump_path_dissipates_99_microwatts():
    path = [Attenuator("att_4k", 10.0, 4.0), Coupler("dc_mc", 10.0, 0.03, 4.0)]
    entries = pump_dissipation(-30.0, path)
    assert [e.label for e in entries] == ["att_4k", "dc_mc"]
    assert entries[0].dissipated == pytest.approx(90e-6, rel=1e-12)
    assert entries[1].dissipated == pytest.approx(9e-6, rel=1e-12)
    assert entries[1].stage_temp == 4.0
    totals = group_by_stage(entries)
    assert list(totals) == [4.0]
    assert totals[4.0] == pytest.approx(99e-6, rel=1e-12)


def test_pump_path_empty_and_single():
    assert pump_dissipation(-30.0, []) == []
    assert pump_input_power(-30.0, []) == pytest.approx(1e-6)
    (entry,) = pump_dissipation(-30.0, [Attenuator("a", 3.0, 4.0)])
    assert entry.dissipated == pytest.approx(0.995e-6, rel=1e-3)


def test_pump_path_conserves_energy():
    rng = np.random.default_rng(9)
    for _ in range(50):
        path = []
        for i in range(rng.integers(1, 6)):
            if rng.random() < 0.5:
                path.append(Attenuator("a%d" % i, rng.uniform(0, 20), rng.choice([0.03, 0.8, 4.0])))
            else:
                path.append(Coupler("c%d" % i, rng.uniform(0, 20), 0.03, rng.choice([0.8, 4.0])))
        delivered = rng.uniform(-60, -20)
        total = sum(e.dissipated for e in pump_dissipation(delivered, path))
        p_in = pump_input_power(delivered, path)
        assert dbm_to_watts(delivered) + total == pytest.approx(p_in, rel=1e-12)


def test_pump_path_rejects_gain():
    with pytest.raises(InvalidQuantityError):
        pump_dissipation(-30.0, [Attenuator("a", -3.0, 4.0)])
