"""Inverse inference and reporting on top of the cascade engine.

Follower (HEMT) noise is inferred from the calibration-path noise N_Sigma'
(paramp off), paramp excess noise from the pumped chain noise T_Sigma, and
the results are collected in a Table-I-shaped ``BudgetReport``. Monte-Carlo
propagation of calibration uncertainties and dc/rf power budgets live here
too.
"""
import warnings
import numpy as np

from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Optional, Tuple

from scipy.stats import norm, truncnorm
from tqdm import tqdm

from .chainmodel import (DEFAULT_BAND, MIN_VALID_GAIN, Profile, _referred_terms, _resolve,
                         band_average, chain_added_noise, chain_added_noise_off,
                         noise_table)
from .errors import ConfigError, InferenceError, InvalidQuantityError, NoiseBudgetWarning
from .quanta import (check_efficiency, check_finite,
                     check_frequency, check_occupancy, db_to_linear,
                     dbm_to_watts, linear_to_db, occupancy_to_temperature,
                     temperature_to_occupancy, thermal_occupancy)

# inferred noises this close below zero are rounding, not inconsistency
NEGATIVE_TOLERANCE = 1e-9
MIN_MC_SAMPLES = 100
MIN_SAMPLED_ETA = 1e-9
CALIBRATION_PRIORS = ("calibration.output_db", "calibration.sntj_resistance_ohm")


@dataclass
class PackagingEfficiency:
    """Packaging efficiency eta_p from the SNTJ-to-VTS gain ratio.

    Attributes:
        eta_p (float or ndarray): the efficiency, min(ratio, 1)
        ratio (float or ndarray): the raw gain ratio
        flagged (bool): True if the ratio exceeds 1 anywhere (unphysical)
    """
    eta_p: object
    ratio: object
    flagged: bool

    @property
    def loss_db(self):
        return -linear_to_db(self.eta_p)


def infer_packaging_efficiency(gain_sntj, gain_vts):
    """Ratio between the chain gains seen from the SNTJ and from the VTS.

    A ratio above 1 is reported as eta_p = 1 with ``flagged`` set.
    """
    gain_sntj = check_finite(gain_sntj, "SNTJ chain gain")
    gain_vts = check_finite(gain_vts, "VTS chain gain")
    if np.any(gain_sntj <= 0) or np.any(gain_vts <= 0):
        raise InvalidQuantityError("chain gains must be > 0, got %r and %r" % (gain_sntj, gain_vts))
    ratio = gain_sntj / gain_vts
    flagged = bool(np.any(ratio > 1))
    if flagged:
        warnings.warn("SNTJ/VTS gain ratio exceeds 1 (max %.4g); eta_p reported as 1" %
                      np.max(ratio), NoiseBudgetWarning)
    eta_p = np.minimum(ratio, 1.0)
    if eta_p.ndim == 0:
        return PackagingEfficiency(float(eta_p), float(ratio), flagged)
    return PackagingEfficiency(eta_p, ratio, flagged)


def split_packaging_loss(eta_package):
    """Divide a package transmission equally (in dB) between eta_1h and eta_2."""
    eta_package = check_efficiency(eta_package, "package transmission")
    half = np.sqrt(eta_package)
    half = float(half) if half.ndim == 0 else half
    return half, half


def input_efficiency(eta_alpha_c, eta_p):
    """eta_1c = eta_alpha_c * eta_p: cable transmission times packaging efficiency."""
    out = check_efficiency(eta_alpha_c, "eta_alpha_c") * check_efficiency(eta_p, "eta_p")
    return float(out) if out.ndim == 0 else out


def _nonnegative(n, target, what, freqs):
    """Clip rounding-level negatives, raise on real ones."""
    tol = NEGATIVE_TOLERANCE * np.maximum(np.abs(target), 1.0)
    bad = n < -tol
    if np.any(bad):
        raise InferenceError("inferred %s is negative at %d frequencies (min %.4g quanta); "
                             "the calibration inputs are inconsistent" %
                             (what, np.sum(bad), np.min(n)),
                             frequencies=np.asarray(freqs)[bad].tolist())
    return np.maximum(n, 0.0)


def infer_follower_noise(n_sigma_off, etas, bath, f, cold_bath_k=0.0):
    """Follower noise T_H from the paramp-off chain noise N_Sigma'.

    N_H = eta_2*eta_1h*eta_1c*N_Sigma' - eta_2*eta_1h*(1 - eta_1c)*N_c
          - eta_2*(1 - eta_1h)*N_h - (1 - eta_2)*N_h

    Args:
        n_sigma_off (float or array): N_Sigma' per frequency (quanta)
        etas (tuple): (eta_1c, eta_1h, eta_2), scalars or per-frequency arrays
        bath (float): the hot bath temperature (K)
        f (float or array): the frequencies (Hz)
        cold_bath_k (float, optional): the bath behind eta_1c (K)

    Returns:
        ndarray: T_H per frequency (K)
    """
    f = np.atleast_1d(check_frequency(f))
    n_sigma_off = check_occupancy(n_sigma_off, "N_sigma'")
    eta_1c, eta_1h, eta_2 = (check_efficiency(e, name)
                             for e, name in zip(etas, ("eta_1c", "eta_1h", "eta_2")))
    n_c = thermal_occupancy(cold_bath_k, f)
    n_h = thermal_occupancy(bath, f)
    n_h_out = (eta_2 * eta_1h * eta_1c * n_sigma_off
               - eta_2 * eta_1h * (1 - eta_1c) * n_c
               - eta_2 * (1 - eta_1h) * n_h
               - (1 - eta_2) * n_h)
    n_h_out = _nonnegative(np.atleast_1d(n_h_out), n_sigma_off, "follower noise", f)
    return occupancy_to_temperature(n_h_out, f)


def _infer_intrinsic(cfg, n_target, label, zeroed, pump_on, what):
    idx = cfg.labels.index(label)
    bare = cfg.replace_stage(label, **{name: 0.0 for name in zeroed})
    resolved = _resolve(bare)
    referred, preceding, _ = _referred_terms(resolved, len(cfg.freqs), pump_on=pump_on)
    remaining = n_target - np.sum(referred, axis=0)
    remaining = _nonnegative(remaining, n_target, what, cfg.freqs)
    return occupancy_to_temperature(remaining * preceding[idx], cfg.freqs)


def _follower_label(cfg, label):
    if label is not None:
        if cfg.stage(label).kind != "follower":
            raise ConfigError("stage %r is not a follower" % label, key="stages")
        return label
    followers = [st.label for st in cfg.stages if st.kind == "follower"]
    if not followers:
        raise ConfigError("the chain has no follower stage", key="stages")
    return followers[0]


def infer_follower_noise_chain(n_sigma_off, cfg, label=None):
    """Follower noise of an arbitrary chain from its paramp-off noise N_Sigma'.

    Args:
        n_sigma_off (array): N_Sigma' on ``cfg.freqs`` (quanta)
        cfg (ChainConfig): the chain; the follower's own noise is ignored
        label (str, optional): the follower to infer (default: the first)

    Returns:
        ndarray: the follower's intrinsic noise temperature per frequency (K)
    """
    label = _follower_label(cfg, label)
    n_sigma_off = check_occupancy(n_sigma_off, "N_sigma'") * np.ones_like(cfg.freqs)
    return _infer_intrinsic(cfg, n_sigma_off, label, ("added_noise_k",), False,
                            "follower noise")


def infer_excess_noise(t_sigma, cfg):
    """Paramp excess noise T_ex from the pumped chain noise T_Sigma.

    Every non-excess term of the high-gain cascade is subtracted from N_Sigma
    and the remainder is brought to the paramp's input plane. The signal and
    idler excess of ``cfg`` are both ignored; the result is their sum.

    Args:
        t_sigma (float or array): T_Sigma on ``cfg.freqs`` (K)
        cfg (ChainConfig): a paramp chain with known efficiencies, gain and T_H

    Returns:
        ndarray: T_ex per frequency (K)
    """
    if not cfg.has_paramp:
        raise ConfigError("excess-noise inference needs a paramp stage", key="stages")
    paramp = cfg.stages[cfg.paramp_index]
    gain = db_to_linear(paramp.gain_db(cfg.freqs))
    if np.any(gain < MIN_VALID_GAIN):
        warnings.warn("paramp gain below %g at %d frequencies; the high-gain form is "
                      "approximate there" % (MIN_VALID_GAIN, np.sum(gain < MIN_VALID_GAIN)), NoiseBudgetWarning)
    n_sigma = temperature_to_occupancy(t_sigma, cfg.freqs) * np.ones_like(cfg.freqs)
    return _infer_intrinsic(cfg, n_sigma, paramp.label, ("excess_k", "excess_idler_k"),
                            True, "paramp excess noise")


def predict_chain_noise(cfg):
    """T_Sigma per frequency: pumped chain noise for paramp chains, N_Sigma' otherwise."""
    if cfg.has_paramp:
        return chain_added_noise(cfg).t_sigma
    return occupancy_to_temperature(chain_added_noise_off(cfg), cfg.freqs)


@dataclass
class BudgetReport:
    """Inferred chain budget in the layout of a per-stage noise table.

    Attributes:
        eta_p (float): the packaging efficiency
        freqs (ndarray): the frequency grid (Hz)
        t_h (ndarray): the follower noise T_H per frequency (K)
        t_ex (ndarray): the paramp excess noise T_ex per frequency (K)
        t_sigma (ndarray): the chain noise T_Sigma per frequency (K)
        table (dict): the band-averaged per-stage table (see ``noise_table``)
        band (tuple of float): the averaging window (Hz)
        flagged (bool): whether eta_p came from a gain ratio above 1
        eta_1c (ndarray, optional): eta_alpha_c * eta_p per frequency, when the
            input efficiency was built from the cable transmission
        package_share (float, optional): the paramp package transmission
            applied to each of the losses around the paramp
    """
    eta_p: float
    freqs: np.ndarray
    t_h: np.ndarray
    t_ex: np.ndarray
    t_sigma: np.ndarray
    table: dict
    band: Tuple[float, float] = DEFAULT_BAND
    flagged: bool = False
    eta_1c: Optional[np.ndarray] = None
    package_share: Optional[float] = None

    def band_averages(self):
        return {"t_h_k": band_average(self.freqs, self.t_h, self.band),
                "t_ex_k": band_average(self.freqs, self.t_ex, self.band),
                "t_sigma_k": band_average(self.freqs, self.t_sigma, self.band)}

    def to_json(self):
        return {"eta_p": self.eta_p,
                "eta_p_flagged": self.flagged,
                "eta_1c": None if self.eta_1c is None else float(np.mean(self.eta_1c)),
                "package_share": self.package_share,
                "band_hz": list(self.band),
                "band_average": self.band_averages(),
                "table": self.table,
                "frequency_hz": self.freqs.tolist(),
                "t_h_k": self.t_h.tolist(),
                "t_ex_k": self.t_ex.tolist(),
                "t_sigma_k": self.t_sigma.tolist()}

    def table_rows(self):
        """Rows of the stage table: a header, then one row per quantity."""
        rows = [["quantity"] + list(self.table["labels"])]
        for key, name in (("efficiency", "transmission_efficiency"),
                          ("insertion_loss_db", "insertion_loss_db"),
                          ("intrinsic_k", "intrinsic_k"),
                          ("referred_k", "input_referred_k")):
            rows.append([name] + ["" if v is None else repr(float(v)) for v in self.table[key]])
        rows.append(["t_sigma_k", repr(float(self.table["t_sigma_k"]))]
                    + [""] * (len(self.table["labels"]) - 1))
        return rows


def _loss_label(cfg, index, what):
    if not 0 <= index < len(cfg.stages) or cfg.stages[index].kind != "loss":
        raise ConfigError("%s needs a loss stage at position %d" % (what, index), key="stages")
    return cfg.stages[index].label


def apply_input_efficiency(cfg, eta_alpha_c, eta_p):
    """Set the first loss of the chain to eta_1c = eta_alpha_c * eta_p.

    Args:
        cfg (ChainConfig): the chain; its first stage must be a loss
        eta_alpha_c (float or array): the input cable transmission
        eta_p (float or array): the packaging efficiency

    Returns:
        ChainConfig: the chain with the new input efficiency
        ndarray: eta_1c per frequency
    """
    label = _loss_label(cfg, 0, "the input efficiency")
    eta_1c = input_efficiency(eta_alpha_c, eta_p) * np.ones_like(cfg.freqs)
    return cfg.replace_stage(label, eta=Profile.from_arrays(cfg.freqs, eta_1c)), eta_1c


def apply_package_loss(cfg, eta_package):
    """Fold a paramp package transmission into the losses on both sides of the paramp.

    Each neighbour is multiplied by the square root of the package
    transmission (half the loss in dB).

    Returns:
        ChainConfig: the chain with both losses reduced
        float: the share applied to each side
    """
    if not cfg.has_paramp:
        raise ConfigError("a package loss needs a paramp stage", key="stages")
    share, _ = split_packaging_loss(float(eta_package))
    for index in (cfg.paramp_index - 1, cfg.paramp_index + 1):
        label = _loss_label(cfg, index, "the paramp package")
        cfg = cfg.replace_stage(label, eta=cfg.stage(label).eta.map(lambda v: v * share))
    return cfg, share


def build_budget(cfg, n_sigma_off, t_sigma, eta_p=1.0, follower=None, flagged=False,
                 eta_alpha_c=None, paramp_package=None):
    """Infer T_H and T_ex of a paramp chain and tabulate its noise budget.

    Args:
        cfg (ChainConfig): the chain with known efficiencies and gains
        n_sigma_off (array): N_Sigma' on ``cfg.freqs`` (quanta)
        t_sigma (array): the measured T_Sigma on ``cfg.freqs`` (K)
        eta_p (float or array, optional): the packaging efficiency
        follower (str, optional): the follower label (default: the first)
        flagged (boolean, optional): whether eta_p came from a flagged ratio
        eta_alpha_c (float or array, optional): the input cable transmission;
            when given, the first loss becomes eta_alpha_c * eta_p
        paramp_package (float, optional): the paramp package transmission,
            split equally between the losses before and after the paramp

    Returns:
        BudgetReport: the report
    """
    eta_1c, share = None, None
    if paramp_package is not None:
        cfg, share = apply_package_loss(cfg, paramp_package)
    if eta_alpha_c is not None:
        cfg, eta_1c = apply_input_efficiency(cfg, eta_alpha_c, eta_p)
    follower = _follower_label(cfg, follower)
    t_h = infer_follower_noise_chain(n_sigma_off, cfg, follower)
    with_h = cfg.replace_stage(follower, added_noise_k=Profile.from_arrays(cfg.freqs, t_h))
    t_ex = infer_excess_noise(t_sigma, with_h)
    paramp = cfg.stages[cfg.paramp_index].label
    full = with_h.replace_stage(paramp, excess_k=Profile.from_arrays(cfg.freqs, t_ex),
                                excess_idler_k=0.0)
    report = chain_added_noise(full)
    return BudgetReport(float(np.mean(eta_p)), cfg.freqs, t_h, t_ex, report.t_sigma,
                        noise_table(report), cfg.band, flagged, eta_1c, share)


@dataclass
class Prior:
    """An independent Gaussian prior on one chain parameter.

    Attributes:
        sigma (float): the standard deviation (parameter units, dB for gains)
        mean (float, optional): the mean; None perturbs the chain's own value
    """
    sigma: float
    mean: Optional[float] = None

    def __post_init__(self):
        if not (np.isfinite(self.sigma) and self.sigma >= 0):
            raise InvalidQuantityError("prior sigma must be finite and >= 0, got %r" % self.sigma)


@dataclass
class McResult:
    """Monte-Carlo statistics per frequency.

    T_H and T_ex are inferred in every draw from the nominal chain's noise,
    as a measurement would report it, using the drawn chain; draws whose
    inference is inconsistent are counted in ``n_rejected``.

    Attributes:
        freqs (ndarray): the frequency grid (Hz)
        t_sigma_mean, t_sigma_std (ndarray): T_Sigma statistics (K)
        t_sigma_off_mean, t_sigma_off_std (ndarray): T_Sigma' statistics (K)
        band_mean, band_std (float): statistics of the band-averaged T_Sigma
        t_h_mean, t_h_std (ndarray, optional): inferred follower noise (K)
        t_ex_mean, t_ex_std (ndarray, optional): inferred paramp excess noise (K)
        intervals (dict): name -> (2.5th, 97.5th percentile) arrays per frequency
        band_stats (dict): name -> mean, std and percentiles of the band average
        n_rejected (int): draws left out of the T_H / T_ex statistics
    """
    freqs: np.ndarray
    t_sigma_mean: np.ndarray
    t_sigma_std: np.ndarray
    t_sigma_off_mean: np.ndarray
    t_sigma_off_std: np.ndarray
    band_mean: float
    band_std: float
    n_samples: int
    seed: int
    t_h_mean: Optional[np.ndarray] = None
    t_h_std: Optional[np.ndarray] = None
    t_ex_mean: Optional[np.ndarray] = None
    t_ex_std: Optional[np.ndarray] = None
    intervals: dict = field(default_factory=OrderedDict)
    band_stats: dict = field(default_factory=OrderedDict)
    n_rejected: int = 0

    def to_json(self):
        doc = {"n_samples": self.n_samples, "seed": self.seed,
               "n_rejected": self.n_rejected,
               "band_mean_k": self.band_mean, "band_std_k": self.band_std,
               "band_stats_k": self.band_stats,
               "frequency_hz": self.freqs.tolist(),
               "t_sigma_mean_k": self.t_sigma_mean.tolist(),
               "t_sigma_std_k": self.t_sigma_std.tolist(),
               "t_sigma_off_mean_k": self.t_sigma_off_mean.tolist(),
               "t_sigma_off_std_k": self.t_sigma_off_std.tolist()}
        for name in ("t_h", "t_ex"):
            mean = getattr(self, name + "_mean")
            if mean is not None:
                doc[name + "_mean_k"] = mean.tolist()
                doc[name + "_std_k"] = getattr(self, name + "_std").tolist()
        for name, (lo, hi) in self.intervals.items():
            doc[name + "_p2_5_k"] = lo.tolist()
            doc[name + "_p97_5_k"] = hi.tolist()
        return doc


_SAMPLED_FIELDS = ("eta", "idler_eta", "bath_k", "gain_db", "excess_k",
                   "excess_idler_k", "added_noise_k")
# support of each sampled field; efficiencies live in (0, 1], the rest in [0, inf)
_FIELD_BOUNDS = {"eta": (0.0, 1.0), "idler_eta": (0.0, 1.0)}


def truncated_draw(base, sigma, z, lower=0.0, upper=np.inf):
    """Map a standard-normal draw onto a normal truncated to [lower, upper].

    The draw keeps its quantile: u = Phi(z) is pushed through the inverse CDF
    of N(base, sigma) restricted to the bounds, so no probability mass piles
    up on a bound.

    Args:
        base (float or array): the mean of the untruncated normal
        sigma (float): its standard deviation (>= 0)
        z (float or array): standard-normal draw(s)
        lower (float, optional): the lower bound
        upper (float, optional): the upper bound

    Returns:
        ndarray: the truncated draw(s)
    """
    base = np.asarray(base, dtype=float)
    if sigma == 0:
        return base + 0.0 * np.asarray(z, dtype=float)
    a, b = (lower - base) / sigma, (upper - base) / sigma
    return truncnorm.ppf(norm.cdf(z), a, b, loc=base, scale=sigma)


def _draw_field(name, base, sigma, z):
    lower, upper = _FIELD_BOUNDS.get(name, (0.0, np.inf))
    out = truncated_draw(base, sigma, z, lower, upper)
    if name in _FIELD_BOUNDS:
        # u = Phi(z) underflows to 0 only for z below -38
        out = np.maximum(out, MIN_SAMPLED_ETA)
    return out


def _perturb(cfg, name, prior, z):
    label, _, fld = name.partition(".")
    if fld not in _SAMPLED_FIELDS:
        raise ConfigError("cannot sample %r (fields: %s)" % (fld, ", ".join(_SAMPLED_FIELDS)),
                          key="priors." + name)
    stage = cfg.stage(label)
    if not hasattr(stage, fld):
        raise ConfigError("stage %r has no field %r" % (label, fld), key="priors." + name)
    value = getattr(stage, fld)
    if value is None:
        value = stage.eta
    if isinstance(value, Profile):
        if prior.mean is not None:
            new = Profile(float(_draw_field(fld, prior.mean, prior.sigma, z)))
        else:
            new = value.map(lambda v: _draw_field(fld, v, prior.sigma, z))
    else:
        base = value if prior.mean is None else prior.mean
        new = float(_draw_field(fld, base, prior.sigma, z))
    return cfg.replace_stage(label, **{fld: new})


def _calibration_scale(priors, draws):
    scale = 1.0
    if "calibration.output_db" in priors:
        p = priors["calibration.output_db"]
        scale *= db_to_linear((p.mean or 0.0) + p.sigma * draws["calibration.output_db"])
    if "calibration.sntj_resistance_ohm" in priors:
        p = priors["calibration.sntj_resistance_ohm"]
        if p.mean is None or p.mean <= 0:
            raise ConfigError("needs a positive mean resistance",
                              key="priors.calibration.sntj_resistance_ohm")
        # the noise scale follows the junction resistance (V = R * I_b)
        r = truncated_draw(p.mean, p.sigma, draws["calibration.sntj_resistance_ohm"])
        scale *= float(r) / p.mean
    return scale


def _infer_draw(sample, n_off_meas, t_sigma_meas, follower):
    """T_H (and T_ex for paramp chains) inferred on one drawn chain."""
    t_h = infer_follower_noise_chain(n_off_meas, sample, follower)
    if not sample.has_paramp:
        return t_h, None
    with_h = sample.replace_stage(follower, added_noise_k=Profile.from_arrays(sample.freqs, t_h))
    return t_h, infer_excess_noise(t_sigma_meas, with_h)


def _stats(values):
    values = np.asarray(values, dtype=float)
    return OrderedDict([("mean", float(np.mean(values))),
                        ("std", float(np.std(values))),
                        ("p2_5", float(np.percentile(values, 2.5))),
                        ("p97_5", float(np.percentile(values, 97.5)))])


def mc_uncertainty(cfg, priors, n_samples=1000, seed=0, progress=False):
    """Propagate independent Gaussian priors to T_Sigma, T_H and T_ex by Monte Carlo.

    Chain parameters are named ``<stage label>.<field>`` (e.g.
    ``paramp.gain_db``, ``eta_1h.eta``, ``hemt.added_noise_k``) and drawn from
    normals truncated to the field's support ((0, 1] for efficiencies,
    [0, inf) otherwise). ``calibration.output_db`` and
    ``calibration.sntj_resistance_ohm`` rescale the reported noise. Sample i
    draws from its own generator seeded with (seed, i).

    For chains with a follower, every draw also repeats the inference: the
    nominal chain's N_Sigma' and T_Sigma, rescaled by the drawn calibration,
    are inverted with the drawn chain into T_H and (with a paramp) T_ex.

    Args:
        cfg (ChainConfig): the nominal chain
        priors (dict of str -> Prior): the priors
        n_samples (int, optional): number of samples (>= 100)
        seed (int, optional): the base seed
        progress (boolean, optional): show a tqdm progress bar

    Returns:
        McResult: per-frequency mean, std and percentiles
    """
    if n_samples < MIN_MC_SAMPLES:
        raise InvalidQuantityError("mc_uncertainty needs >= %d samples, got %d" %
                                   (MIN_MC_SAMPLES, n_samples))
    names = sorted(priors)
    for name in names:
        if not name.startswith("calibration.") and name.partition(".")[0] not in cfg.labels:
            raise ConfigError("no stage labelled %r" % name.partition(".")[0],
                              key="priors." + name)
        if name.startswith("calibration.") and name not in CALIBRATION_PRIORS:
            raise ConfigError("unknown calibration prior", key="priors." + name)

    follower = next((st.label for st in cfg.stages if st.kind == "follower"), None)
    n_off_nominal = chain_added_noise_off(cfg)
    t_sigma_nominal = predict_chain_noise(cfg)

    t_on, t_off, t_h, t_ex = [], [], [], []
    n_rejected = 0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NoiseBudgetWarning)
        for i in tqdm(range(n_samples), disable=not progress, total=n_samples):
            rng = np.random.default_rng([seed, i])
            draws = OrderedDict((name, rng.standard_normal()) for name in names)
            sample = cfg
            for name in names:
                if not name.startswith("calibration."):
                    sample = _perturb(sample, name, priors[name], draws[name])
            scale = _calibration_scale(priors, draws)
            t_on.append(scale * predict_chain_noise(sample))
            off = occupancy_to_temperature(chain_added_noise_off(sample), cfg.freqs)
            t_off.append(scale * off)
            if follower is None:
                continue
            try:
                h, ex = _infer_draw(sample, scale * n_off_nominal, scale * t_sigma_nominal,
                                    follower)
            except InferenceError:
                n_rejected += 1
                continue
            t_h.append(h)
            if ex is not None:
                t_ex.append(ex)

    if follower is not None and n_rejected == n_samples:
        raise InferenceError("the inference failed in all %d draws; the priors are "
                             "inconsistent with the nominal chain" % n_samples)
    if n_rejected:
        warnings.warn("%d of %d draws gave an inconsistent inference and were left out "
                      "of the T_H and T_ex statistics" % (n_rejected, n_samples), NoiseBudgetWarning)

    t_on, t_off = np.array(t_on), np.array(t_off)
    band_values = np.array([band_average(cfg.freqs, row, cfg.band) for row in t_on])
    result = McResult(cfg.freqs, t_on.mean(axis=0), t_on.std(axis=0),
                      t_off.mean(axis=0), t_off.std(axis=0),
                      float(band_values.mean()), float(band_values.std()),
                      n_samples, seed, n_rejected=n_rejected)
    series = OrderedDict([("t_sigma", t_on)])
    if t_h:
        series["t_h"] = np.array(t_h)
        result.t_h_mean, result.t_h_std = series["t_h"].mean(axis=0), series["t_h"].std(axis=0)
    if t_ex:
        series["t_ex"] = np.array(t_ex)
        result.t_ex_mean, result.t_ex_std = (series["t_ex"].mean(axis=0),
                                             series["t_ex"].std(axis=0))
    for name, rows in series.items():
        result.intervals[name] = (np.percentile(rows, 2.5, axis=0),
                                  np.percentile(rows, 97.5, axis=0))
        result.band_stats[name] = _stats([band_average(cfg.freqs, row, cfg.band)
                                          for row in rows])
    return result


def dc_power(v_d, i_d):
    """Dissipated dc power and resistance of a biased device.

    Returns:
        float: P_d = V_d * I_d (W)
        float: R_d = V_d / I_d (ohm)
    """
    v_d = float(check_finite(v_d, "V_d"))
    i_d = float(check_finite(i_d, "I_d"))
    if i_d == 0:
        raise InvalidQuantityError("the resistance is undefined at I_d = 0")
    return v_d * i_d, v_d / i_d


@dataclass
class PowerEntry:
    label: str
    stage_temp: float
    dissipated: float


@dataclass
class Attenuator:
    label: str
    atten_db: float
    stage_temp_k: float


@dataclass
class Coupler:
    """A directional coupler; the through port is terminated at ``termination_temp_k``."""
    label: str
    coupling_db: float
    stage_temp_k: float
    termination_temp_k: float


def _back_propagate(delivered_dbm, path):
    p = dbm_to_watts(delivered_dbm)
    entries = []
    for element in reversed(path):
        if isinstance(element, Attenuator):
            if not element.atten_db >= 0:
                raise InvalidQuantityError("%s: attenuation must be >= 0 dB" % element.label)
            p_in = p * 10.0 ** (element.atten_db / 10.0)
            entries.append(PowerEntry(element.label, element.stage_temp_k, p_in - p))
        elif isinstance(element, Coupler):
            if not element.coupling_db >= 0:
                raise InvalidQuantityError("%s: coupling must be >= 0 dB" % element.label)
            p_in = p * 10.0 ** (element.coupling_db / 10.0)
            entries.append(PowerEntry(element.label, element.termination_temp_k, p_in - p))
        else:
            raise ConfigError("unknown path element %r" % (element,), key="path")
        p = p_in
    entries.reverse()
    return entries, p


def pump_dissipation(delivered_dbm, path):
    """Power dissipated along a pump line for a given power at the device.

    Args:
        delivered_dbm (float): the pump power reaching the device (dBm)
        path (list of Attenuator or Coupler): the line, from the source end

    Returns:
        list of PowerEntry: one entry per element, in path order
    """
    return _back_propagate(delivered_dbm, path)[0]


def pump_input_power(delivered_dbm, path):
    """Power (W) to inject at the source end of the line."""
    return _back_propagate(delivered_dbm, path)[1]


def group_by_stage(entries):
    """Total dissipated power per stage temperature, coldest first."""
    totals = {}
    for entry in entries:
        totals[entry.stage_temp] = totals.get(entry.stage_temp, 0.0) + entry.dissipated
    return OrderedDict(sorted(totals.items()))
