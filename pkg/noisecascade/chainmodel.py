"""Cascade engine for cryogenic amplification chains in photon-number units.

A chain is an ordered list of stages: loss stages (beamsplitters mixing the
signal with a bath), at most one parametric amplifier (a 4-port gain element
that also amplifies its idler input) and follower amplifiers (gain plus added
noise). Every loss stage placed before the parametric amplifier sits on both
the signal and the idler path.
"""
import warnings
import numpy as np

from dataclasses import dataclass, field, replace
from typing import List, Optional, Tuple, Union

from .errors import ConfigError, InvalidQuantityError, NoiseBudgetWarning
from .quanta import (VACUUM_OCCUPANCY, check_efficiency, check_finite,
                     check_frequency, check_gain, check_occupancy,
                     check_temperature, db_to_linear, linear_to_db,
                     occupancy_to_temperature, temperature_to_occupancy,
                     thermal_occupancy)

DEFAULT_BAND = (3.5e9, 5.5e9)
DEFAULT_HOT_BATH_K = 4.0
# the simplified (G >> 1) form is flagged below this linear gain
MIN_VALID_GAIN = 10.0
IDLER_MODES = ("same", "explicit", "idler_frequency")


class Profile(object):
    """A stage parameter that is either constant or tabulated in frequency.

    Tabulated values are interpolated piecewise-linearly and clamped to the
    end points outside the tabulated range.

    Attributes:
        freqs (ndarray or None): the tabulated frequencies (Hz)
        values (ndarray): the tabulated values, or a 0-d array for a constant
    """

    def __init__(self, value):
        if isinstance(value, Profile):
            self.freqs, self.values = value.freqs, value.values
            return
        arr = np.asarray(value, dtype=float)
        if arr.ndim == 0:
            self.freqs = None
            self.values = check_finite(arr, "profile value")
        elif arr.ndim == 2 and arr.shape[1] == 2 and arr.shape[0] > 0:
            freqs = check_frequency(arr[:, 0], "profile frequency")
            if np.any(np.diff(freqs) <= 0):
                raise InvalidQuantityError("tabulated frequencies must be strictly increasing")
            self.freqs = freqs
            self.values = check_finite(arr[:, 1], "profile value")
        else:
            raise InvalidQuantityError(
                "a profile is a scalar or a list of [freq_hz, value] pairs, got %r" % (value,))

    @classmethod
    def from_arrays(cls, freqs, values):
        return cls(np.column_stack([np.asarray(freqs, dtype=float),
                                    np.asarray(values, dtype=float)]))

    @property
    def is_constant(self):
        return self.freqs is None

    def __call__(self, f):
        f = np.asarray(f, dtype=float)
        if self.freqs is None:
            return np.full(f.shape, float(self.values))
        return np.interp(f, self.freqs, self.values)

    def map(self, func):
        """Return a new profile with ``func`` applied to every value."""
        if self.freqs is None:
            return Profile(func(float(self.values)))
        return Profile.from_arrays(self.freqs, func(self.values))

    def to_json(self):
        if self.freqs is None:
            return float(self.values)
        return [[float(f), float(v)] for f, v in zip(self.freqs, self.values)]

    def __repr__(self):
        return "Profile(%r)" % (self.to_json(),)


def _profile(value):
    return value if isinstance(value, Profile) else Profile(value)


@dataclass(frozen=True)
class LossStage:
    """A transmission efficiency eta mixing the signal with a bath."""
    label: str
    eta: Profile
    bath_k: float = DEFAULT_HOT_BATH_K
    idler_eta: Optional[Profile] = None
    kind: str = field(default="loss", init=False)

    def __post_init__(self):
        object.__setattr__(self, "eta", _profile(self.eta))
        if self.idler_eta is not None:
            object.__setattr__(self, "idler_eta", _profile(self.idler_eta))
        check_efficiency(self.eta.values, self.label + ".eta")
        if self.idler_eta is not None:
            check_efficiency(self.idler_eta.values, self.label + ".idler_eta")
        check_temperature(self.bath_k, self.label + ".bath_k")

    @property
    def stage_temp_k(self):
        return self.bath_k


@dataclass(frozen=True)
class ParamAmp:
    """A phase-insensitive parametric amplifier with signal and idler excess noise.

    Excess noises are given as noise temperatures (linear convention).
    """
    label: str
    gain_db: Profile
    excess_k: Profile = 0.0
    excess_idler_k: Profile = 0.0
    stage_temp_k: float = DEFAULT_HOT_BATH_K
    kind: str = field(default="paramp", init=False)

    def __post_init__(self):
        for name in ("gain_db", "excess_k", "excess_idler_k"):
            object.__setattr__(self, name, _profile(getattr(self, name)))
        for name in ("excess_k", "excess_idler_k"):
            check_temperature(getattr(self, name).values, self.label + "." + name)


@dataclass(frozen=True)
class Follower:
    """A follower amplifier (e.g. a HEMT) with gain and added noise temperature."""
    label: str
    gain_db: Profile
    added_noise_k: Profile
    stage_temp_k: float = DEFAULT_HOT_BATH_K
    kind: str = field(default="follower", init=False)

    def __post_init__(self):
        for name in ("gain_db", "added_noise_k"):
            object.__setattr__(self, name, _profile(getattr(self, name)))
        check_temperature(self.added_noise_k.values, self.label + ".added_noise_k")


StageSpec = Union[LossStage, ParamAmp, Follower]


@dataclass(frozen=True, eq=False)
class ChainConfig:
    """An ordered amplification chain evaluated on a frequency grid.

    Attributes:
        stages (tuple of StageSpec): the stages, from the chain input onwards
        freqs (ndarray): the strictly increasing frequency grid (Hz)
        idler_mode (str): how the idler path is evaluated
            ("same", "explicit" or "idler_frequency")
        pump_freq (float, optional): the pump frequency, f_i = f_p - f_s
        band (tuple of float): the band-averaging window (Hz)
        name (str): a free-form name
    """
    stages: Tuple[StageSpec, ...]
    freqs: np.ndarray
    idler_mode: str = "same"
    pump_freq: Optional[float] = None
    band: Tuple[float, float] = DEFAULT_BAND
    name: str = ""

    def __post_init__(self):
        stages = tuple(self.stages)
        object.__setattr__(self, "stages", stages)
        freqs = np.atleast_1d(check_frequency(self.freqs, "frequency grid"))
        object.__setattr__(self, "freqs", freqs)

        if len(stages) == 0:
            raise ConfigError("a chain needs at least one stage", key="stages")
        if freqs.ndim != 1 or np.any(np.diff(freqs) <= 0):
            raise ConfigError("the frequency grid must be strictly increasing",
                              key="frequency_grid")
        labels = [st.label for st in stages]
        if len(set(labels)) != len(labels):
            raise ConfigError("stage labels must be unique, got %s" % labels, key="stages")
        paramps = [i for i, st in enumerate(stages) if st.kind == "paramp"]
        if len(paramps) > 1:
            raise ConfigError("at most one paramp stage is allowed", key="stages")
        if paramps and any(st.kind != "loss" for st in stages[:paramps[0]]):
            raise ConfigError("only loss stages may precede the paramp", key="stages")
        if self.idler_mode not in IDLER_MODES:
            raise ConfigError("unknown idler mode %r (expected one of %s)" %
                              (self.idler_mode, IDLER_MODES), key="idler_mode")
        if self.idler_mode == "idler_frequency":
            if self.pump_freq is None:
                raise ConfigError("idler_frequency mode needs a pump frequency",
                                  key="pump_freq_hz")
            if np.any(self.pump_freq - freqs <= 0):
                raise ConfigError("the pump frequency must exceed every grid frequency",
                                  key="pump_freq_hz")
        lo, hi = self.band
        if not lo < hi:
            raise ConfigError("band must satisfy lo < hi, got %r" % (self.band,), key="band_avg")

    @property
    def paramp_index(self):
        for i, st in enumerate(self.stages):
            if st.kind == "paramp":
                return i
        return None

    @property
    def has_paramp(self):
        return self.paramp_index is not None

    @property
    def labels(self):
        return [st.label for st in self.stages]

    def stage(self, label):
        for st in self.stages:
            if st.label == label:
                return st
        raise ConfigError("no stage labelled %r" % label, key="stages")

    def replace_stage(self, label, **changes):
        """Return a copy of the chain with one stage's fields replaced."""
        self.stage(label)
        stages = tuple(replace(st, **changes) if st.label == label else st
                       for st in self.stages)
        return replace(self, stages=stages)

    def at(self, freqs):
        """Return the same chain evaluated on another frequency grid."""
        return replace(self, freqs=np.atleast_1d(np.asarray(freqs, dtype=float)))


@dataclass
class _Resolved:
    """One stage with every parameter evaluated on the grid (occupancy units)."""
    label: str
    kind: str
    eta: Optional[np.ndarray] = None
    n_bath: Optional[np.ndarray] = None
    eta_idler: Optional[np.ndarray] = None
    n_bath_idler: Optional[np.ndarray] = None
    gain: Optional[np.ndarray] = None
    n_excess_signal: Optional[np.ndarray] = None
    n_excess_idler: Optional[np.ndarray] = None
    n_added: Optional[np.ndarray] = None


def _resolve(cfg):
    f = cfg.freqs
    resolved = []
    for st in cfg.stages:
        if st.kind == "loss":
            eta = check_efficiency(st.eta(f), st.label + ".eta")
            n_bath = thermal_occupancy(st.bath_k, f)
            idler_profile = st.idler_eta if st.idler_eta is not None else st.eta
            if cfg.idler_mode == "same":
                eta_i, n_bath_i = eta, n_bath
            elif cfg.idler_mode == "explicit":
                eta_i, n_bath_i = idler_profile(f), n_bath
            else:
                f_idler = cfg.pump_freq - f
                eta_i = idler_profile(f_idler)
                n_bath_i = thermal_occupancy(st.bath_k, f_idler)
            eta_i = check_efficiency(eta_i, st.label + ".idler_eta")
            resolved.append(_Resolved(st.label, st.kind, eta=eta, n_bath=n_bath,
                                      eta_idler=eta_i, n_bath_idler=n_bath_i))
        elif st.kind == "paramp":
            gain = check_gain(db_to_linear(st.gain_db(f)), st.label + ".gain")
            resolved.append(_Resolved(
                st.label, st.kind, gain=np.atleast_1d(gain),
                n_excess_signal=temperature_to_occupancy(st.excess_k(f), f),
                n_excess_idler=temperature_to_occupancy(st.excess_idler_k(f), f)))
        else:
            gain = check_gain(db_to_linear(st.gain_db(f)), st.label + ".gain")
            resolved.append(_Resolved(
                st.label, st.kind, gain=np.atleast_1d(gain),
                n_added=temperature_to_occupancy(st.added_noise_k(f), f)))
    return resolved


def paramp_output(n_sig, n_idl, g):
    """Mean signal output of a phase-insensitive amplifier, G*N_s + (G-1)*N_i."""
    n_sig = check_occupancy(n_sig, "signal occupancy")
    n_idl = check_occupancy(n_idl, "idler occupancy")
    g = check_gain(g, "paramp gain")
    out = g * n_sig + (g - 1) * n_idl
    return float(out) if out.ndim == 0 else out


def loss_stage(n_in, eta, n_bath):
    """Beamsplitter loss: eta*N_in + (1 - eta)*N_bath."""
    n_in = check_occupancy(n_in, "input occupancy")
    eta = check_efficiency(eta)
    n_bath = check_occupancy(n_bath, "bath occupancy")
    out = eta * n_in + (1 - eta) * n_bath
    return float(out) if out.ndim == 0 else out


@dataclass(eq=False)
class ExactPropagation:
    """Occupancies along the chain from the exact cascade.

    Attributes:
        freqs (ndarray): the frequency grid
        n_in (float): the chain's input signal occupancy
        n_out (ndarray): the chain's output signal occupancy
        total_gain (ndarray): the product of all efficiencies and gains
        signal (list of (str, ndarray)): the signal after each stage
        idler (list of (str, ndarray)): the idler after each pre-paramp stage
    """
    freqs: np.ndarray
    n_in: float
    n_out: np.ndarray
    total_gain: np.ndarray
    signal: List[Tuple[str, np.ndarray]]
    idler: List[Tuple[str, np.ndarray]]

    @property
    def added(self):
        """Input-referred added noise N_out/total_gain - N_in (quanta)."""
        return self.n_out / self.total_gain - self.n_in

    def state(self, label):
        for name, value in self.signal:
            if name == label:
                return value
        raise KeyError(label)


def propagate_exact(cfg, n_in_signal=VACUUM_OCCUPANCY, pump_on=True):
    """Propagate signal and idler occupancies through every stage, without the G >> 1 approximation.

    With ``pump_on=False`` the paramp is a passive element of gain 1 and the
    idler path is not tracked (calibration-path state).

    Args:
        cfg (ChainConfig): the chain
        n_in_signal (float): the occupancy at the chain's signal input
        pump_on (boolean, optional): whether the paramp is pumped

    Returns:
        ExactPropagation: the output and every intermediate state
    """
    if cfg.idler_mode != "same" and not cfg.has_paramp:
        raise ConfigError("idler mode %r requires a paramp stage" % cfg.idler_mode,
                          key="idler_mode")
    n_in = float(check_occupancy(n_in_signal, "input signal occupancy"))
    resolved = _resolve(cfg)
    ones = np.ones_like(cfg.freqs)
    track_idler = cfg.has_paramp and pump_on

    signal = n_in * ones
    idler = VACUUM_OCCUPANCY * ones
    total_gain = ones.copy()
    signal_states, idler_states = [], []
    before_paramp = cfg.has_paramp
    for st in resolved:
        if st.kind == "loss":
            signal = loss_stage(signal, st.eta, st.n_bath)
            total_gain = total_gain * st.eta
            if before_paramp and track_idler:
                idler = loss_stage(idler, st.eta_idler, st.n_bath_idler)
                idler_states.append((st.label, idler))
        elif st.kind == "paramp":
            before_paramp = False
            if pump_on:
                signal = paramp_output(signal + st.n_excess_signal,
                                       idler + st.n_excess_idler, st.gain)
                total_gain = total_gain * st.gain
        else:
            signal = st.gain * (signal + st.n_added)
            total_gain = total_gain * st.gain
        signal_states.append((st.label, signal))
    return ExactPropagation(cfg.freqs, n_in, signal, total_gain,
                            signal_states, idler_states)


def _referred_terms(resolved, n_freq, pump_on=True, gain=None):
    """Input-referred noise of each stage in the G >> 1 form.

    Returns:
        list of ndarray: the input-referred noise of each stage (quanta)
        list of ndarray: the gain preceding each stage
        ndarray: the total gain
    """
    referred = [np.zeros(n_freq) for _ in resolved]
    preceding = []
    cum = np.ones(n_freq)
    for i, st in enumerate(resolved):
        preceding.append(cum)
        if st.kind == "loss":
            referred[i] = referred[i] + (1 - st.eta) / st.eta * st.n_bath / cum
            cum = cum * st.eta
        elif st.kind == "paramp":
            if not pump_on:
                continue
            # idler path: vacuum through the same pre-paramp losses
            trail = np.ones(n_freq)
            for j in range(i - 1, -1, -1):
                pre = resolved[j]
                referred[j] = referred[j] + (1 - pre.eta_idler) * pre.n_bath_idler * trail / cum
                trail = trail * pre.eta_idler
            referred[0] = referred[0] + VACUUM_OCCUPANCY * trail / cum
            referred[i] = referred[i] + (st.n_excess_signal + st.n_excess_idler) / cum
            cum = cum * (st.gain if gain is None else gain)
        else:
            referred[i] = referred[i] + st.n_added / cum
            cum = cum * st.gain
    return referred, preceding, cum


@dataclass(eq=False)
class StageNoise:
    """Noise generated by one stage, at its own plane and at the chain's input."""
    label: str
    kind: str
    freqs: np.ndarray
    intrinsic: np.ndarray
    referred: np.ndarray
    efficiency: Optional[np.ndarray] = None

    @property
    def intrinsic_k(self):
        return occupancy_to_temperature(self.intrinsic, self.freqs)

    @property
    def referred_k(self):
        return occupancy_to_temperature(self.referred, self.freqs)


@dataclass(eq=False)
class ChainNoiseReport:
    """Per-frequency chain-added noise and its per-stage attribution.

    Attributes:
        freqs (ndarray): the frequency grid (Hz)
        n_sigma (ndarray): the chain-added noise (quanta)
        stages (list of StageNoise): per-stage noise; ``referred`` sums to n_sigma
        total_gain (ndarray): the product of all efficiencies and gains
        valid (ndarray of bool): False where the paramp gain is below MIN_VALID_GAIN
        band (tuple of float): the band-averaging window (Hz)
    """
    freqs: np.ndarray
    n_sigma: np.ndarray
    stages: List[StageNoise]
    total_gain: np.ndarray
    valid: np.ndarray
    band: Tuple[float, float] = DEFAULT_BAND

    @property
    def t_sigma(self):
        return occupancy_to_temperature(self.n_sigma, self.freqs)

    def stage(self, label):
        for st in self.stages:
            if st.label == label:
                return st
        raise KeyError(label)


def _report(cfg, resolved, pump_on):
    n = len(cfg.freqs)
    referred, preceding, total = _referred_terms(resolved, n, pump_on=pump_on)
    stages = [StageNoise(st.label, st.kind, cfg.freqs, ref * pre, ref,
                         efficiency=st.eta)
              for st, ref, pre in zip(resolved, referred, preceding)]
    n_sigma = np.sum(referred, axis=0)
    if cfg.has_paramp and pump_on:
        valid = resolved[cfg.paramp_index].gain >= MIN_VALID_GAIN
    else:
        valid = np.ones(n, dtype=bool)
    return ChainNoiseReport(cfg.freqs, n_sigma, stages, total, valid, cfg.band)


def chain_added_noise(cfg):
    """Chain-added noise of a pumped paramp chain, with per-stage attribution.

    Uses the high-gain form: the idler is amplified by G rather than G - 1.
    Frequencies where G < MIN_VALID_GAIN are flagged in ``report.valid``.

    Args:
        cfg (ChainConfig): a chain with exactly one paramp

    Returns:
        ChainNoiseReport: the report
    """
    if not cfg.has_paramp:
        raise ConfigError("chain_added_noise needs exactly one paramp stage", key="stages")
    report = _report(cfg, _resolve(cfg), pump_on=True)
    if not np.all(report.valid):
        warnings.warn("paramp gain below %g at %d frequencies; the high-gain form is "
                      "approximate there" % (MIN_VALID_GAIN, np.sum(~report.valid)),
                      NoiseBudgetWarning)
    return report


def chain_noise_report_off(cfg):
    """Per-stage report of the chain with the paramp unpumped (gain 1, no idler)."""
    return _report(cfg, _resolve(cfg), pump_on=False)


def chain_added_noise_off(cfg):
    """Chain-added noise N_Sigma' with the paramp off (quanta per frequency)."""
    return chain_noise_report_off(cfg).n_sigma


def noise_rise(n_sigma, n_sigma_off, g):
    """Ratio r of output noises, paramp on over paramp off."""
    n_sigma = check_finite(n_sigma, "N_sigma")
    n_sigma_off = check_finite(n_sigma_off, "N_sigma'")
    g = check_gain(g, "paramp gain")
    if np.any(n_sigma_off + VACUUM_OCCUPANCY <= 0):
        raise InvalidQuantityError("N_sigma' + 1/2 must be > 0")
    r = g * (n_sigma + VACUUM_OCCUPANCY) / (n_sigma_off + VACUUM_OCCUPANCY)
    return float(r) if r.ndim == 0 else r


def noise_from_rise(r, g, n_sigma_off):
    """Chain-added noise N_Sigma deduced from a measured noise rise r."""
    r = check_finite(r, "noise rise")
    if np.any(r <= 0):
        raise InvalidQuantityError("noise rise must be > 0, got %r" % (r,))
    g = check_gain(g, "paramp gain")
    n_sigma_off = check_finite(n_sigma_off, "N_sigma'")
    n = r * (n_sigma_off + VACUUM_OCCUPANCY) / g - VACUUM_OCCUPANCY
    return float(n) if n.ndim == 0 else n


def gain_sweep(cfg, gains):
    """Chain-added noise temperature as a function of the paramp gain.

    Args:
        cfg (ChainConfig): a paramp chain (its own gain is ignored)
        gains (list of float): increasing linear gains, each >= 1

    Returns:
        list of (float, ndarray, bool): the gain, T_Sigma per frequency and
            whether the gain is high enough (>= MIN_VALID_GAIN) for the
            high-gain form to hold
    """
    if not cfg.has_paramp:
        raise ConfigError("gain_sweep needs a paramp stage", key="stages")
    gains = check_gain(np.atleast_1d(gains), "swept gain")
    if np.any(np.diff(gains) <= 0):
        raise InvalidQuantityError("swept gains must be strictly increasing")
    resolved = _resolve(cfg)
    n = len(cfg.freqs)
    out = []
    for g in gains:
        referred, _, _ = _referred_terms(resolved, n, gain=np.full(n, g))
        out.append((float(g), occupancy_to_temperature(np.sum(referred, axis=0), cfg.freqs),
                    bool(g >= MIN_VALID_GAIN)))
    low = np.sum(gains < MIN_VALID_GAIN)
    if low:
        warnings.warn("%d swept gains are below %g; the high-gain form is approximate there" %
                      (low, MIN_VALID_GAIN), NoiseBudgetWarning)
    return out


def gain_sweep_asymptote(cfg):
    """T_Sigma in the infinite-gain limit (the gain-independent terms only)."""
    resolved = _resolve(cfg)
    n = len(cfg.freqs)
    referred, _, _ = _referred_terms(resolved, n, gain=np.full(n, np.inf))
    return occupancy_to_temperature(np.sum(referred, axis=0), cfg.freqs)


def band_average(freqs, values, band=DEFAULT_BAND):
    """Arithmetic mean of ``values`` over the grid points inside ``band``."""
    freqs = np.asarray(freqs, dtype=float)
    values = np.asarray(values, dtype=float)
    lo, hi = band
    mask = (freqs >= lo) & (freqs <= hi)
    if not np.any(mask):
        raise InvalidQuantityError("no grid frequency inside the band [%g, %g] Hz" % (lo, hi))
    return float(np.mean(values[mask]))


def noise_table(report, band=None):
    """Band-averaged per-stage table: efficiency, insertion loss, intrinsic and referred noise.

    Args:
        report (ChainNoiseReport): the report to summarize
        band (tuple of float, optional): the averaging band (default: the report's)

    Returns:
        dict: ``labels``, ``efficiency``, ``insertion_loss_db``, ``intrinsic_k``,
            ``referred_k`` (lists, None where not applicable) and ``t_sigma_k``
    """
    band = report.band if band is None else band
    table = {"labels": [], "efficiency": [], "insertion_loss_db": [],
             "intrinsic_k": [], "referred_k": []}
    for st in report.stages:
        table["labels"].append(st.label)
        if st.efficiency is not None:
            eta = band_average(report.freqs, st.efficiency, band)
            table["efficiency"].append(eta)
            table["insertion_loss_db"].append(-linear_to_db(eta))
        else:
            table["efficiency"].append(None)
            table["insertion_loss_db"].append(None)
        table["intrinsic_k"].append(band_average(report.freqs, st.intrinsic_k, band))
        table["referred_k"].append(band_average(report.freqs, st.referred_k, band))
    table["t_sigma_k"] = band_average(report.freqs, report.t_sigma, band)
    return table


def default_grid(band=DEFAULT_BAND, step=10e6):
    """Frequency grid covering ``band`` with spacing ``step`` (Hz)."""
    lo, hi = band
    return np.linspace(lo, hi, int(round((hi - lo) / step)) + 1)


def paramp_chain(eta_1c, eta_1h, eta_2, gain_db, t_h, t_ex=0.0,
                 t_ex_idler=0.0,
                 hemt_gain_db=40.0,
                 hot_bath_k=DEFAULT_HOT_BATH_K,
                 cold_bath_k=0.0,
                 freqs=None,
                 idler_eta=None,
                 idler_mode="same",
                 pump_freq=None,
                 band=DEFAULT_BAND):
    """Build the canonical paramp chain: cold loss, hot loss, paramp, loss, HEMT.

    Args:
        eta_1c, eta_1h, eta_2: efficiencies (scalar, pairs or Profile)
        gain_db: the paramp gain in dB
        t_h: the follower (HEMT) added noise temperature in K
        t_ex (optional): the paramp signal-path excess noise temperature in K
        t_ex_idler (optional): the paramp idler-path excess noise temperature in K
        hemt_gain_db (float, optional): the follower gain
        hot_bath_k (float, optional): the bath temperature of eta_1h and eta_2
        cold_bath_k (float, optional): the bath temperature of eta_1c
        freqs (array, optional): the grid (default: 10 MHz steps over the band)
        idler_eta (optional): the idler efficiency of eta_1h ("explicit" mode)
        idler_mode (str, optional): the idler mode
        pump_freq (float, optional): the pump frequency
        band (tuple of float, optional): the averaging band

    Returns:
        ChainConfig: the chain
    """
    freqs = default_grid(band) if freqs is None else freqs
    stages = (LossStage("eta_1c", eta_1c, bath_k=cold_bath_k),
              LossStage("eta_1h", eta_1h, bath_k=hot_bath_k, idler_eta=idler_eta),
              ParamAmp("paramp", gain_db, excess_k=t_ex, excess_idler_k=t_ex_idler,
                       stage_temp_k=hot_bath_k),
              LossStage("eta_2", eta_2, bath_k=hot_bath_k),
              Follower("hemt", hemt_gain_db, t_h))
    return ChainConfig(stages, freqs, idler_mode=idler_mode, pump_freq=pump_freq,
                       band=band, name="paramp chain")


def hemt_chain(losses, t_h, hemt_gain_db=40.0, freqs=None, band=DEFAULT_BAND):
    """Build a chain whose first amplifier is a follower (no paramp).

    Args:
        losses (list of (str, efficiency, float)): label, eta and bath (K) of
            each loss stage before the follower
        t_h: the follower added noise temperature in K
        hemt_gain_db (float, optional): the follower gain
        freqs (array, optional): the grid
        band (tuple of float, optional): the averaging band

    Returns:
        ChainConfig: the chain
    """
    freqs = default_grid(band) if freqs is None else freqs
    stages = [LossStage(label, eta, bath_k=bath) for label, eta, bath in losses]
    stages.append(Follower("hemt", hemt_gain_db, t_h))
    return ChainConfig(tuple(stages), freqs, band=band, name="hemt chain")
