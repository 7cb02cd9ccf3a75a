"""Calibrated noise sources and a synthetic measurement generator.

The shot-noise tunnel junction (SNTJ) emits, at bias voltage V and
temperature T,

    N(V) = [g(eV + hf) + g(eV - hf)] / (4 hf),   g(a) = a * coth(a / 2 k_B T),

which is even in V, equals the Johnson form 0.5*coth(hf/2k_BT) at V = 0 and
tends to |eV|/(2hf) far from zero bias. g(a) -> |a| as T -> 0.
"""
import csv
import numpy as np

from dataclasses import dataclass
from typing import Optional

from .errors import CurveFormatError, InvalidQuantityError
from .quanta import (BOLTZMANN, ELEMENTARY_CHARGE, PLANCK, check_finite,
                     check_frequency, check_temperature, thermal_occupancy,
                     xcoth)

CSV_COLUMNS = ["frequency_hz", "x_value", "x_kind", "y_quanta"]
X_KINDS = ("volts", "amps", "kelvin")


def _sinh_ratio_sq(u):
    """(u / sinh u)^2, stable for large |u| and equal to 1 at u = 0."""
    u = np.abs(np.asarray(u, dtype=float))
    small = u < 1e-2
    safe = np.where(small, 1.0, u)
    big = 4.0 * safe * safe * np.exp(-2.0 * safe) / np.expm1(-2.0 * safe) ** 2
    u2 = u * u
    return np.where(small, 1.0 - u2 / 3.0 + 2.0 * u2 * u2 / 15.0, big)


def _dxcoth(u):
    """d/du [u coth u] = coth u - u / sinh^2 u, an odd function (2u/3 near 0)."""
    u = np.asarray(u, dtype=float)
    small = np.abs(u) < 1e-2
    safe = np.where(small, 1.0, u)
    big = 1.0 / np.tanh(safe) - _sinh_ratio_sq(safe) / safe
    u3 = u * u * u
    return np.where(small, 2.0 * u / 3.0 - 4.0 * u3 / 45.0 + 12.0 * u3 * u * u / 945.0, big)


def _branches(v, t, f):
    """The two photon-assisted energies eV +/- hf (J) and kT (J)."""
    v = check_finite(v, "bias voltage")
    t = float(check_temperature(t, "SNTJ temperature"))
    f = check_frequency(f)
    hf = PLANCK * f
    return ELEMENTARY_CHARGE * v + hf, ELEMENTARY_CHARGE * v - hf, BOLTZMANN * t, hf


def sntj_occupancy(v, t, f):
    """Occupancy delivered by a biased SNTJ.

    Args:
        v (float or array): bias voltage across the junction (V)
        t (float): the junction temperature (K); 0 uses the analytic limit
        f (float): the frequency (Hz)

    Returns:
        float or ndarray: the occupancy in quanta
    """
    a_plus, a_minus, kt, hf = _branches(v, t, f)
    if kt == 0:
        n = (np.abs(a_plus) + np.abs(a_minus)) / (4 * hf)
    else:
        two_kt = 2 * kt
        n = two_kt * (xcoth(a_plus / two_kt) + xcoth(a_minus / two_kt)) / (4 * hf)
    return float(n) if np.ndim(n) == 0 else n


def sntj_derivatives(v, t, f):
    """Analytic partial derivatives of ``sntj_occupancy``.

    Args:
        v (float or array): bias voltage (V)
        t (float): temperature (K), must be > 0
        f (float): frequency (Hz)

    Returns:
        ndarray: dN/dV (quanta per volt)
        ndarray: dN/dT (quanta per kelvin)
    """
    a_plus, a_minus, kt, hf = _branches(v, t, f)
    if kt == 0:
        raise InvalidQuantityError("SNTJ derivatives need T > 0")
    two_kt = 2 * kt
    u_plus, u_minus = a_plus / two_kt, a_minus / two_kt
    dn_dv = ELEMENTARY_CHARGE * (_dxcoth(u_plus) + _dxcoth(u_minus)) / (4 * hf)
    dn_dt = 2 * BOLTZMANN * (_sinh_ratio_sq(u_plus) + _sinh_ratio_sq(u_minus)) / (4 * hf)
    return np.asarray(dn_dv, dtype=float), np.asarray(dn_dt, dtype=float)


def johnson_occupancy(t, f):
    """Occupancy delivered by the unbiased junction held at temperature t."""
    return thermal_occupancy(t, f)


def bias_voltage(i_b, r_sntj):
    """Junction voltage from the bias current, V = R_SNTJ * I_b."""
    r_sntj = float(check_finite(r_sntj, "SNTJ resistance"))
    if r_sntj <= 0:
        raise InvalidQuantityError("SNTJ resistance must be > 0, got %r" % r_sntj)
    return r_sntj * check_finite(i_b, "bias current")


@dataclass(eq=False)
class SntjParams:
    """A biased shot-noise tunnel junction.

    Attributes:
        temperature (float): junction temperature T (K)
        resistance (float): junction resistance R_SNTJ (ohm)
        v_offset (float): bias voltage offset V_off (V)
        bias (ndarray): the applied bias voltages (V)
    """
    temperature: float
    resistance: float
    v_offset: float
    bias: np.ndarray

    def __post_init__(self):
        check_temperature(self.temperature, "SNTJ temperature")
        if not self.resistance > 0:
            raise InvalidQuantityError("SNTJ resistance must be > 0, got %r" % self.resistance)
        self.v_offset = float(check_finite(self.v_offset, "voltage offset"))
        self.bias = np.atleast_1d(check_finite(self.bias, "bias grid"))

    def occupancy(self, f):
        return sntj_occupancy(self.bias - self.v_offset, self.temperature, f)


@dataclass(eq=False)
class VtsParams:
    """A variable-temperature stage heating the unbiased junction.

    Attributes:
        temperatures (ndarray): the stage temperatures T_VTS (K), increasing
    """
    temperatures: np.ndarray

    def __post_init__(self):
        self.temperatures = np.atleast_1d(check_temperature(self.temperatures, "T_VTS"))
        if np.any(np.diff(self.temperatures) <= 0):
            raise InvalidQuantityError("VTS temperatures must be strictly increasing")

    @property
    def bias(self):
        return self.temperatures

    def occupancy(self, f):
        return johnson_occupancy(self.temperatures, f)


@dataclass(eq=False)
class NoiseCurve:
    """Output noise sampled against bias voltage or stage temperature at one frequency.

    Attributes:
        frequency (float): the frequency (Hz)
        x (ndarray): the bias voltages (V), bias currents (A) or stage temperatures (K)
        y (ndarray): the output noise (quanta, or arbitrary power units)
        x_kind (str): "volts", "amps" or "kelvin"
        rel_noise (float, optional): relative sigma of the generator
        seed (int, optional): seed of the generator
    """
    frequency: float
    x: np.ndarray
    y: np.ndarray
    x_kind: str = "volts"
    rel_noise: Optional[float] = None
    seed: Optional[int] = None

    def __post_init__(self):
        self.frequency = float(check_frequency(self.frequency))
        self.x = np.atleast_1d(check_finite(self.x, "curve x"))
        self.y = np.atleast_1d(check_finite(self.y, "curve y"))
        if self.x_kind not in X_KINDS:
            raise CurveFormatError("x_kind must be one of %s, got %r" % (X_KINDS, self.x_kind))
        if self.x.shape != self.y.shape:
            raise CurveFormatError("curve x and y lengths differ")
        steps = np.diff(self.x)
        if not (np.all(steps > 0) or np.all(steps < 0)):
            raise CurveFormatError("curve x must be strictly monotone")
        if np.any(self.y <= 0):
            raise CurveFormatError("curve y must be positive")

    def scaled(self, c):
        return NoiseCurve(self.frequency, self.x, self.y * c, self.x_kind,
                          self.rel_noise, self.seed)

    def shifted(self, delta):
        return NoiseCurve(self.frequency, self.x + delta, self.y, self.x_kind,
                          self.rel_noise, self.seed)

    def to_voltage(self, r_sntj):
        """The same sweep against junction voltage, V = R_SNTJ * I_b (current-biased curves only)."""
        if self.x_kind == "volts":
            return self
        if self.x_kind != "amps":
            raise InvalidQuantityError("a %s sweep has no bias voltage" % self.x_kind)
        return NoiseCurve(self.frequency, bias_voltage(self.x, r_sntj), self.y, "volts",
                          self.rel_noise, self.seed)


def synthesize_curve(source, chain_gain, n_sigma_off, f, rel_noise=0.0, seed=0):
    """Forward model of a calibration sweep with multiplicative Gaussian noise.

    y = chain_gain * (N_in(x) + N_Sigma') * (1 + eps), eps ~ N(0, rel_noise).

    Args:
        source (SntjParams or VtsParams): the noise source and its sweep
        chain_gain (float): the lumped chain gain G_c
        n_sigma_off (float): the chain-added noise N_Sigma' (quanta)
        f (float): the frequency (Hz)
        rel_noise (float, optional): relative sigma (>= 0)
        seed (int, optional): the generator seed

    Returns:
        NoiseCurve: the synthetic curve
    """
    if not rel_noise >= 0:
        raise InvalidQuantityError("rel_noise must be >= 0, got %r" % rel_noise)
    chain_gain = float(check_finite(chain_gain, "chain gain"))
    y = chain_gain * (source.occupancy(f) + n_sigma_off)
    if rel_noise > 0:
        rng = np.random.default_rng(seed)
        y = y * (1.0 + rel_noise * rng.standard_normal(y.shape))
    x_kind = "kelvin" if isinstance(source, VtsParams) else "volts"
    return NoiseCurve(f, np.array(source.bias, dtype=float), y, x_kind, rel_noise, seed)


def write_curves_csv(curves, fout):
    """Write curves to an open text file in the NoiseCurve CSV schema."""
    writer = csv.writer(fout, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for curve in curves:
        for x, y in zip(curve.x, curve.y):
            writer.writerow([repr(curve.frequency), repr(float(x)), curve.x_kind,
                             repr(float(y))])


def read_curves_csv(path):
    """Read every curve of a NoiseCurve CSV file.

    The file has a mandatory header ``frequency_hz,x_value,x_kind,y_quanta``;
    rows are grouped into one curve per frequency, in order of appearance.

    Args:
        path (str): the path to the CSV file

    Returns:
        list of NoiseCurve: the curves
    """
    groups = {}
    with open(path, newline="", encoding="utf-8") as fin:
        reader = csv.DictReader(fin)
        if reader.fieldnames is None:
            raise CurveFormatError("%s is empty" % path)
        missing = [c for c in CSV_COLUMNS if c not in reader.fieldnames]
        if missing:
            raise CurveFormatError("%s lacks columns %s" % (path, missing))
        for lineno, row in enumerate(reader, start=2):
            try:
                freq = float(row["frequency_hz"])
                x, y = float(row["x_value"]), float(row["y_quanta"])
            except (TypeError, ValueError):
                raise CurveFormatError("%s:%d: not a number" % (path, lineno))
            kind = row["x_kind"]
            entry = groups.setdefault(freq, {"kind": kind, "x": [], "y": []})
            if kind != entry["kind"]:
                raise CurveFormatError("%s:%d: mixed x_kind at %g Hz" % (path, lineno, freq))
            entry["x"].append(x)
            entry["y"].append(y)
    if not groups:
        raise CurveFormatError("%s has no data rows" % path)
    try:
        return [NoiseCurve(freq, g["x"], g["y"], g["kind"]) for freq, g in groups.items()]
    except InvalidQuantityError as e:
        raise CurveFormatError("%s: %s" % (path, e))
