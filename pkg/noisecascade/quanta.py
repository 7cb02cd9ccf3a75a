"""Physical constants and unit conversions in photon-number units.

Two temperature <-> occupancy conversions coexist and must not be mixed up:

* ``thermal_occupancy`` is the physical one (a bath at temperature T emits
  0.5*coth(hf/2kT) quanta);
* ``occupancy_to_temperature`` / ``temperature_to_occupancy`` are the linear
  reporting convention T = N*hf/k_B used for noise temperatures.
"""
import re
import numpy as np

from scipy import constants

from .errors import InvalidQuantityError

# CODATA 2018 (exact SI values)
PLANCK = constants.h
BOLTZMANN = constants.k
ELEMENTARY_CHARGE = constants.e

# vacuum occupancy N_c
VACUUM_OCCUPANCY = 0.5

# type aliases, used for documentation of the units
Frequency = float
TemperatureK = float
Occupancy = float
PowerDbm = float
PowerWatts = float
GainDb = float
GainLinear = float
Efficiency = float


def _scalar_or_array(x):
    """Return a python float for 0-d results, the array otherwise."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        return float(x)
    return x


def check_finite(x, name):
    """Reject NaN and infinite values.

    Args:
        x (float or array): the value(s)
        name (str): the name used in the error message

    Returns:
        ndarray: the value(s) as a float array
    """
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise InvalidQuantityError("%s must be finite, got %r" % (name, x))
    return arr


def check_frequency(f, name="frequency"):
    arr = check_finite(f, name)
    if np.any(arr <= 0):
        raise InvalidQuantityError("%s must be > 0 Hz, got %r" % (name, f))
    return arr


def check_temperature(t, name="temperature"):
    arr = check_finite(t, name)
    if np.any(arr < 0):
        raise InvalidQuantityError("%s must be >= 0 K, got %r" % (name, t))
    return arr


def check_occupancy(n, name="occupancy"):
    arr = check_finite(n, name)
    if np.any(arr < 0):
        raise InvalidQuantityError("%s must be >= 0 quanta, got %r" % (name, n))
    return arr


def check_efficiency(eta, name="efficiency"):
    arr = check_finite(eta, name)
    if np.any(arr <= 0) or np.any(arr > 1):
        raise InvalidQuantityError("%s must lie in (0, 1], got %r" % (name, eta))
    return arr


def check_gain(g, name="gain", minimum=1.0):
    arr = check_finite(g, name)
    if np.any(arr < minimum):
        raise InvalidQuantityError("%s must be >= %g, got %r" % (name, minimum, g))
    return arr


def xcoth(u):
    """Evaluate u*coth(u), continuous at u = 0 where it equals 1."""
    u = np.asarray(u, dtype=float)
    small = np.abs(u) < 1e-6
    safe = np.where(small, 1.0, u)
    return np.where(small, 1.0 + u * u / 3.0, safe / np.tanh(safe))


def thermal_occupancy(t, f):
    """Mean photon number emitted by a bath, 0.5*coth(hf/(2 k_B T)).

    Args:
        t (float or array): bath temperature in K (0 gives the vacuum 0.5)
        f (float or array): frequency in Hz

    Returns:
        float or ndarray: the occupancy in quanta
    """
    t = check_temperature(t)
    f = check_frequency(f)
    hot = t > 0
    safe_t = np.where(hot, t, 1.0)
    x = PLANCK * f / (2 * BOLTZMANN * safe_t)
    n = VACUUM_OCCUPANCY / np.tanh(x)
    return _scalar_or_array(np.where(hot, n, VACUUM_OCCUPANCY))


def occupancy_to_temperature(n, f):
    """Noise temperature of an occupancy in the linear convention T = N*hf/k_B.

    This is NOT the inverse of ``thermal_occupancy``.
    """
    n = check_occupancy(n)
    f = check_frequency(f)
    return _scalar_or_array(n * PLANCK * f / BOLTZMANN)


def temperature_to_occupancy(t, f):
    """Linear inverse of ``occupancy_to_temperature``, N = T*k_B/(hf)."""
    t = check_temperature(t)
    f = check_frequency(f)
    return _scalar_or_array(t * BOLTZMANN / (PLANCK * f))


def db_to_linear(g_db):
    g_db = check_finite(g_db, "gain [dB]")
    return _scalar_or_array(10.0 ** (g_db / 10.0))


def linear_to_db(g):
    g = check_finite(g, "gain")
    if np.any(g <= 0):
        raise InvalidQuantityError("linear gain must be > 0 to express in dB, got %r" % (g,))
    return _scalar_or_array(10.0 * np.log10(g))


def dbm_to_watts(p_dbm):
    p_dbm = check_finite(p_dbm, "power [dBm]")
    return _scalar_or_array(1e-3 * 10.0 ** (p_dbm / 10.0))


def watts_to_dbm(p_w):
    p_w = check_finite(p_w, "power [W]")
    if np.any(p_w <= 0):
        raise InvalidQuantityError("power must be > 0 W to express in dBm, got %r" % (p_w,))
    return _scalar_or_array(10.0 * np.log10(p_w / 1e-3))


# unit grammar for command-line values: <number><prefix><unit>
_QUANTITY_RE = re.compile(
    r"^\s*(?P<num>[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*"
    r"(?P<prefix>[fpnuµmkMGT]?)(?P<unit>[A-Za-zΩ]*)\s*$")

_PREFIXES = {"": 1.0, "f": 1e-15, "p": 1e-12, "n": 1e-9, "u": 1e-6, "µ": 1e-6,
             "m": 1e-3, "k": 1e3, "M": 1e6, "G": 1e9, "T": 1e12}

# canonical unit -> accepted spellings
_UNITS = {"Hz": ("Hz", "hz"),
          "K": ("K",),
          "V": ("V",),
          "A": ("A",),
          "W": ("W",),
          "ohm": ("ohm", "Ohm", "Ω"),
          "dB": ("dB",),
          "dBm": ("dBm",)}

# prefixes that make sense for each unit ("5T" is not five terakelvin)
_ALLOWED_PREFIXES = {"Hz": "kMGT",
                     "K": "nuµm",
                     "V": "pnuµmk",
                     "A": "fpnuµm",
                     "W": "fpnuµm",
                     "ohm": "mkMG",
                     "dB": "",
                     "dBm": ""}


def parse_quantity(text, unit):
    """Parse an SI-suffixed value such as ``4.5GHz``, ``-30dBm`` or ``0.7mA``.

    Logarithmic units (dB, dBm) take no prefix. A bare number is read in the
    expected unit.

    Args:
        text (str): the value as typed by the user
        unit (str): the expected canonical unit (Hz, K, V, A, W, ohm, dB, dBm)

    Returns:
        float: the value in the canonical unit
    """
    if unit not in _UNITS:
        raise InvalidQuantityError("unknown unit %r" % unit)
    text = str(text)
    # "dB"/"dBm" would otherwise be read as a deci- prefix we do not support
    for spelling in _UNITS[unit]:
        if unit in ("dB", "dBm") and text.strip().endswith(spelling):
            text = text.strip()[:-len(spelling)]
            break
    match = _QUANTITY_RE.match(text)
    if match is None:
        raise InvalidQuantityError("cannot parse %r as a value in %s" % (text, unit))
    value = float(match.group("num"))
    prefix, suffix = match.group("prefix"), match.group("unit")
    if unit in ("dB", "dBm"):
        if prefix or suffix:
            raise InvalidQuantityError("%r is not a value in %s" % (text, unit))
        return value
    if suffix == "" and prefix in _UNITS[unit]:
        # a lone letter may be the unit itself rather than a prefix
        prefix, suffix = "", prefix
    if suffix and suffix not in _UNITS[unit]:
        raise InvalidQuantityError("%r: expected unit %s, got %s" % (text, unit, suffix))
    if prefix and prefix not in _ALLOWED_PREFIXES[unit]:
        raise InvalidQuantityError("%r: prefix %r is not accepted for %s (allowed: %s)" %
                                   (text, prefix, unit, ", ".join(_ALLOWED_PREFIXES[unit])))
    if suffix == "" and prefix == "":
        return value
    return value * _PREFIXES[prefix]
