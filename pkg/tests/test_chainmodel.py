import numpy as np
import pytest

from noisecascade.chainmodel import (ChainConfig, Follower, LossStage, ParamAmp,
                                     Profile, band_average, chain_added_noise,
                                     chain_added_noise_off, default_grid,
                                     gain_sweep, gain_sweep_asymptote, hemt_chain,
                                     loss_stage, noise_from_rise, noise_rise,
                                     noise_table, paramp_chain, paramp_output,
                                     propagate_exact)
from noisecascade.errors import ConfigError, InvalidQuantityError, NoiseBudgetWarning
from noisecascade.quanta import (occupancy_to_temperature, temperature_to_occupancy,
                                 thermal_occupancy)

F = 4.5e9


def test_paramp_output():
    assert paramp_output(0.5, 0.5, 100.0) == pytest.approx(99.5)
    assert paramp_output(1.0, 7.0, 1.0) == 1.0
    with pytest.raises(InvalidQuantityError):
        paramp_output(0.5, 0.5, 0.5)


def test_loss_stage():
    assert loss_stage(0.5, 1.0, 18.0) == 0.5
    assert loss_stage(0.5, 0.5, 18.0) == pytest.approx(9.25)
    with pytest.raises(InvalidQuantityError):
        loss_stage(0.5, 0.0, 18.0)
    with pytest.raises(InvalidQuantityError):
        loss_stage(0.5, 1.2, 18.0)


def test_table1_band_averages(table1_chain):
    table = noise_table(chain_added_noise(table1_chain))
    assert table["labels"] == ["eta_1c", "eta_1h", "paramp", "eta_2", "hemt"]
    expected_intrinsic = [0.16, 2.1, 1.9, 2.7, 13.4]
    expected_referred = [0.16, 2.6, 2.9, 0.07, 0.6]
    for got, want in zip(table["intrinsic_k"], expected_intrinsic):
        assert got == pytest.approx(want, abs=0.15)
    for got, want in zip(table["referred_k"], expected_referred):
        assert got == pytest.approx(want, abs=0.15)
    assert table["t_sigma_k"] == pytest.approx(6.3, abs=0.3)


def test_table1_efficiencies(table1_chain):
    table = noise_table(chain_added_noise(table1_chain))
    assert table["efficiency"][:2] == pytest.approx([0.80, 0.80])
    assert table["efficiency"][3] == pytest.approx(0.61)
    assert table["efficiency"][2] is None and table["efficiency"][4] is None
    assert table["insertion_loss_db"][0] == pytest.approx(0.969, abs=1e-3)


def test_referred_terms_sum_to_total(table1_chain):
    report = chain_added_noise(table1_chain)
    total = np.sum([st.referred for st in report.stages], axis=0)
    assert np.allclose(total, report.n_sigma, rtol=1e-14)


def test_intrinsic_is_referred_times_preceding_gain(table1_chain):
    report = chain_added_noise(table1_chain)
    paramp = report.stage("paramp")
    assert np.allclose(paramp.intrinsic, paramp.referred * 0.64, rtol=1e-12)
    assert np.allclose(paramp.intrinsic_k, 1.9, rtol=1e-12)
    hemt = report.stage("hemt")
    assert np.allclose(hemt.intrinsic_k, 13.4, rtol=1e-12)


@pytest.mark.parametrize("eta_2", [0.3, 0.6, 1.0])
@pytest.mark.parametrize("t_h", [0.0, 7.0, 15.0])
def test_quantum_limit(eta_2, t_h):
    cfg = paramp_chain(1.0, 1.0, eta_2, 60.0, t_h=t_h)
    report = chain_added_noise(cfg)
    assert np.allclose(report.n_sigma, 0.5, atol=1e-3)


def test_identity_chain_is_vacuum_limited():
    cfg = ChainConfig((ParamAmp("paramp", 60.0), Follower("hemt", 40.0, 0.0)),
                      default_grid())
    report = chain_added_noise(cfg)
    assert np.allclose(report.n_sigma, 0.5, rtol=1e-12)
    i = np.argmin(np.abs(cfg.freqs - F))
    assert report.t_sigma[i] == pytest.approx(0.108, abs=1e-3)


def test_off_state_closed_form(table1_chain):
    n_off = chain_added_noise_off(table1_chain.at([F]))[0]
    n_c, n_h = thermal_occupancy(0.03, F), thermal_occupancy(4.0, F)
    n_hemt = temperature_to_occupancy(13.4, F)
    expected = (0.2 / 0.8 * n_c + 0.2 / 0.8 * n_h / 0.8 + 0.39 / 0.61 * n_h / 0.64
                + n_hemt / (0.64 * 0.61))
    assert n_off == pytest.approx(expected, rel=1e-12)
    assert n_off == pytest.approx(183.3, rel=1e-3)


def test_exact_off_state_matches_cascade(table1_chain):
    exact = propagate_exact(table1_chain, pump_on=False)
    assert np.allclose(exact.added, chain_added_noise_off(table1_chain), rtol=1e-10)


def test_exact_versus_simplified(table1_chain):
    gaps = []
    for gain_db in (13.0, 18.0, 23.0, 30.0):
        cfg = table1_chain.replace_stage("paramp", gain_db=gain_db)
        exact = propagate_exact(cfg).added
        simplified = chain_added_noise(cfg).n_sigma
        gaps.append(np.max(np.abs(exact - simplified) / simplified))
    assert gaps[1] < 0.02
    assert all(a > b for a, b in zip(gaps, gaps[1:]))


def test_exact_intermediate_states(table1_chain):
    exact = propagate_exact(table1_chain.at([F]))
    assert [name for name, _ in exact.signal] == table1_chain.labels
    assert [name for name, _ in exact.idler] == ["eta_1c", "eta_1h"]
    n_c = thermal_occupancy(0.03, F)
    assert exact.state("eta_1c")[0] == pytest.approx(0.8 * 0.5 + 0.2 * n_c)
    with pytest.raises(KeyError):
        exact.state("nope")


def test_low_gain_is_flagged(table1_chain):
    cfg = table1_chain.replace_stage("paramp", gain_db=5.0)
    with pytest.warns(NoiseBudgetWarning):
        report = chain_added_noise(cfg)
    assert not np.any(report.valid)


def test_gain_below_unity_rejected(table1_chain):
    cfg = table1_chain.replace_stage("paramp", gain_db=-1.0)
    with pytest.raises(InvalidQuantityError):
        chain_added_noise(cfg)


def test_noise_rise_on_table1(table1_chain):
    cfg = table1_chain.at([F])
    n_sigma = chain_added_noise(cfg).n_sigma[0]
    n_off = chain_added_noise_off(cfg)[0]
    g = 10 ** 1.8
    r = noise_rise(n_sigma, n_off, g)
    assert r == pytest.approx(g * (n_sigma + 0.5) / (n_off + 0.5))
    assert noise_from_rise(r, g, n_off) == pytest.approx(n_sigma, rel=1e-12)


def test_noise_rise_round_trip():
    rng = np.random.default_rng(11)
    n = rng.uniform(0.5, 50, size=200)
    n_off = rng.uniform(1, 500, size=200)
    g = rng.uniform(1, 1e4, size=200)
    r = noise_rise(noise_from_rise(noise_rise(n, n_off, g), g, n_off), n_off, g)
    assert np.allclose(r, noise_rise(n, n_off, g), rtol=1e-12)


def test_noise_from_rise_rejects_nonpositive():
    with pytest.raises(InvalidQuantityError):
        noise_from_rise(0.0, 10.0, 100.0)


def test_gain_sweep_is_monotone(table1_chain):
    gains = 10 ** (np.arange(0, 26) / 10.0)
    sweep = gain_sweep(table1_chain, gains)
    band = [band_average(table1_chain.freqs, t) for _, t, _ in sweep]
    assert all(a >= b for a, b in zip(band, band[1:]))
    floor = band_average(table1_chain.freqs, gain_sweep_asymptote(table1_chain))
    assert floor < band[-1]


def test_gain_sweep_matches_chain_at_same_gain(table1_chain):
    (g, t, valid), = gain_sweep(table1_chain, [10 ** 1.8])
    assert valid
    assert np.allclose(t, chain_added_noise(table1_chain).t_sigma, rtol=1e-12)


def test_gain_sweep_flags_low_gains(table1_chain):
    with pytest.warns(NoiseBudgetWarning):
        sweep = gain_sweep(table1_chain, [1.0, 5.0, 9.99, 10.0, 100.0])
    assert [ok for _, _, ok in sweep] == [False, False, False, True, True]


def test_hemt_chain_has_no_pumped_report():
    cfg = hemt_chain([("eta_p", 0.93, 0.03), ("cable", 0.98, 4.0)], t_h=2.5)
    with pytest.raises(ConfigError):
        chain_added_noise(cfg)
    t = occupancy_to_temperature(chain_added_noise_off(cfg), cfg.freqs)
    assert np.all((t > 2.5) & (t < 4.0))


def test_idler_explicit_mode_changes_only_idler_terms():
    base = paramp_chain(0.8, 0.8, 0.61, 18.0, t_h=13.4, t_ex=1.9, idler_eta=0.7,
                        idler_mode="explicit")
    same = paramp_chain(0.8, 0.8, 0.61, 18.0, t_h=13.4, t_ex=1.9)
    a, b = chain_added_noise(base), chain_added_noise(same)
    assert np.all(a.n_sigma > b.n_sigma)
    for label in ("paramp", "eta_2", "hemt"):
        assert np.allclose(a.stage(label).referred, b.stage(label).referred)


def test_idler_frequency_mode_uses_idler_occupancy():
    freqs = [4.5e9]
    cfg = ChainConfig((LossStage("loss", 0.8, bath_k=4.0),
                       ParamAmp("paramp", 60.0),
                       Follower("hemt", 40.0, 0.0)),
                      freqs, idler_mode="idler_frequency", pump_freq=10e9)
    n = chain_added_noise(cfg).n_sigma[0]
    n_s, n_i = thermal_occupancy(4.0, 4.5e9), thermal_occupancy(4.0, 5.5e9)
    expected = 0.25 * n_s + (0.2 * n_i + 0.5 * 0.8) / 0.8
    assert n == pytest.approx(expected, rel=1e-5)


def test_profile_interpolation_is_clamped():
    p = Profile([[4e9, 0.8], [5e9, 0.9]])
    assert p(4.5e9) == pytest.approx(0.85)
    assert p(3e9) == pytest.approx(0.8)
    assert p(6e9) == pytest.approx(0.9)
    assert Profile(0.7)(np.array([1e9, 2e9])).tolist() == [0.7, 0.7]
    with pytest.raises(InvalidQuantityError):
        Profile([[5e9, 0.8], [4e9, 0.9]])


def test_chain_validation():
    loss = LossStage("loss", 0.9)
    amp = ParamAmp("paramp", 20.0)
    hemt = Follower("hemt", 40.0, 2.0)
    grid = default_grid()
    with pytest.raises(ConfigError):
        ChainConfig((), grid)
    with pytest.raises(ConfigError):
        ChainConfig((loss, LossStage("loss", 0.8), hemt), grid)
    with pytest.raises(ConfigError):
        ChainConfig((amp, ParamAmp("amp2", 20.0)), grid)
    with pytest.raises(ConfigError):
        ChainConfig((hemt, amp), grid)
    with pytest.raises(ConfigError):
        ChainConfig((loss, amp, hemt), grid[::-1])
    with pytest.raises(ConfigError):
        ChainConfig((loss, amp, hemt), grid, idler_mode="idler_frequency")
    with pytest.raises(ConfigError):
        ChainConfig((loss, amp, hemt), grid, idler_mode="idler_frequency", pump_freq=5e9)
    with pytest.raises(ConfigError):
        ChainConfig((loss, amp, hemt), grid, idler_mode="mirror")
    with pytest.raises(ConfigError):
        ChainConfig((loss, amp, hemt), grid, band=(5e9, 4e9))


def test_replace_stage_and_at(table1_chain):
    cfg = table1_chain.replace_stage("hemt", added_noise_k=5.0)
    assert float(cfg.stage("hemt").added_noise_k.values) == 5.0
    assert float(table1_chain.stage("hemt").added_noise_k.values) == 13.4
    with pytest.raises(ConfigError):
        table1_chain.replace_stage("nope", eta=0.5)
    assert table1_chain.at([4e9, 5e9]).freqs.tolist() == [4e9, 5e9]


def test_band_average_needs_points():
    with pytest.raises(InvalidQuantityError):
        band_average([1e9, 2e9], [1.0, 2.0], band=(3.5e9, 5.5e9))
    assert band_average([3e9, 4e9, 5e9, 6e9], [9.0, 1.0, 3.0, 9.0]) == 2.0


@pytest.mark.parametrize("label", ["eta_1c", "eta_1h", "eta_2"])
def test_chain_noise_falls_with_efficiency(random_chains, label):
    for cfg in random_chains:
        n0 = chain_added_noise(cfg).n_sigma
        better = cfg.replace_stage(label, eta=cfg.stage(label).eta.map(lambda v: v + 0.5 * (1 - v)))
        assert np.all(chain_added_noise(better).n_sigma <= n0 * (1 + 1e-12))


@pytest.mark.parametrize("label", ["eta_1c", "eta_1h", "eta_2"])
def test_chain_noise_rises_with_bath_temperature(random_chains, label):
    for cfg in random_chains:
        n0 = chain_added_noise(cfg).n_sigma
        hotter = cfg.replace_stage(label, bath_k=cfg.stage(label).bath_k + 1.0)
        assert np.all(chain_added_noise(hotter).n_sigma >= n0 * (1 - 1e-12))


def test_chain_noise_rises_with_excess_noise(random_chains):
    for cfg in random_chains:
        n0 = chain_added_noise(cfg).n_sigma
        noisier = cfg.replace_stage("paramp", excess_k=cfg.stage("paramp").excess_k.map(
            lambda v: v + 0.5))
        assert np.all(chain_added_noise(noisier).n_sigma > n0)
