"""Extraction of chain gain and added noise from calibration curves.

Shot-noise curves are fitted in two stages: a linear fit of both
high-voltage branches (where the junction delivers |eV|/2hf quanta) gives the
chain gain and a first estimate of N_Sigma'; a bounded nonlinear least
squares over the whole sweep then refines N_Sigma', the junction
temperature and the bias offset with the gain frozen.

The stage-1 branches are only straight once |eV| - hf is large against the
junction temperature as well as against hf. After stage 2 the branch points
are checked at the fitted temperature; rounded points are dropped and both
stages rerun, and a sweep too narrow to reach the asymptote is flagged.
"""
import warnings
import numpy as np

from dataclasses import asdict, dataclass, field
from typing import List, NamedTuple, Tuple

from scipy.optimize import least_squares

from .errors import (FitConvergenceError, InsufficientDataError,
                     InvalidQuantityError, NoiseBudgetWarning, NumericalError)
from .quanta import (BOLTZMANN, ELEMENTARY_CHARGE, PLANCK, check_frequency,
                     occupancy_to_temperature)
from .sources import NoiseCurve, johnson_occupancy, sntj_derivatives, sntj_occupancy

ASYMPTOTE_THRESHOLD = 3.0  # quanta
MIN_BRANCH_POINTS = 4
N_SIGMA_WINDOW = 0.25
T_MIN = 1e-6  # K
T_MAX = 1.0  # K
T_INIT = 0.1  # K
FTOL = 1e-10
MAX_NFEV = 200
MIN_OCCUPANCY_SPAN = 3.0
# stage-1 reselections after a fit shows thermally rounded branch points
MAX_REFINE = 3
PARAM_NAMES = ("n_sigma_off", "source_temp", "v_offset")


class Stage1Estimate(NamedTuple):
    chain_gain: float
    n_sigma_off: float


@dataclass
class ShotFitResult:
    """Result of the two-stage shot-noise fit.

    Attributes:
        frequency (float): the frequency (Hz)
        chain_gain (float): the chain gain G_c (frozen after stage 1)
        n_sigma_off (float): the chain-added noise N_Sigma' (quanta)
        source_temp (float): the junction temperature T (K)
        v_offset (float): the bias offset V_off (V)
        residual_rms (float): RMS of the input-referred residuals (quanta)
        stage1_window (tuple of float): the |V| range used by stage 1 (V)
        stage1_n_sigma_off (float): the stage-1 estimate of N_Sigma'
        cost (float): half the sum of squared residuals (quanta^2)
        nfev (int): the number of model evaluations in stage 2
        active_bounds (list of str): the parameters at a bound
        asymptote_ok (bool): False if some stage-1 points are still thermally
            rounded at the fitted temperature (the sweep is too narrow)
    """
    frequency: float
    chain_gain: float
    n_sigma_off: float
    source_temp: float
    v_offset: float
    residual_rms: float
    stage1_window: Tuple[float, float]
    stage1_n_sigma_off: float
    cost: float
    nfev: int
    active_bounds: List[str] = field(default_factory=list)
    asymptote_ok: bool = True

    @property
    def bound_warning(self):
        return len(self.active_bounds) > 0

    @property
    def flagged(self):
        return self.bound_warning or not self.asymptote_ok

    @property
    def t_sigma_off(self):
        return occupancy_to_temperature(self.n_sigma_off, self.frequency)

    def to_dict(self):
        d = asdict(self)
        d["stage1_window"] = list(self.stage1_window)
        d["bound_warning"] = self.bound_warning
        d["flagged"] = self.flagged
        d["t_sigma_off_k"] = self.t_sigma_off
        return d


@dataclass
class JohnsonFitResult:
    """Result of the Johnson-noise fit.

    Attributes:
        frequency (float): the frequency (Hz)
        chain_gain (float): the chain gain G_c2
        n_sigma (float): the chain-added noise N_Sigma2 (quanta)
        residual_rms (float): RMS of the input-referred residuals (quanta)
    """
    frequency: float
    chain_gain: float
    n_sigma: float
    residual_rms: float

    @property
    def t_sigma(self):
        return occupancy_to_temperature(max(self.n_sigma, 0.0), self.frequency)

    def to_dict(self):
        d = asdict(self)
        d["t_sigma_k"] = self.t_sigma
        return d


def asymptote_quanta(v, f):
    """|eV|/(2hf): the high-voltage occupancy delivered by the junction."""
    return ELEMENTARY_CHARGE * np.abs(np.asarray(v, dtype=float)) / (2 * PLANCK * f)


def select_asymptote(v, f, threshold=ASYMPTOTE_THRESHOLD):
    """Points of the two high-voltage branches, |eV/(2hf)| > threshold.

    Returns:
        ndarray of bool: the positive-branch mask
        ndarray of bool: the negative-branch mask
    """
    v = np.asarray(v, dtype=float)
    far = asymptote_quanta(v, f) > threshold
    return far & (v > 0), far & (v < 0)


def thermal_asymptote(v, t, f, threshold=ASYMPTOTE_THRESHOLD):
    """Points where the junction at temperature t is on its straight asymptote.

    The lower photon-assisted energy must exceed the thermal scale,
    |eV| - hf > threshold * 2k_B T, so that its coth term is within
    2*exp(-2*threshold) of 1.

    Args:
        v (array): bias voltages across the junction (V - V_off)
        t (float): the junction temperature (K)
        f (float): the frequency (Hz)
        threshold (float, optional): the threshold in units of 2k_B T

    Returns:
        ndarray of bool: the mask
    """
    v = np.asarray(v, dtype=float)
    return ELEMENTARY_CHARGE * np.abs(v) - PLANCK * f > threshold * 2 * BOLTZMANN * t


def _frequency(curve, f):
    return curve.frequency if f is None else float(check_frequency(f))


def fit_shot_stage1(curve, f=None, threshold=ASYMPTOTE_THRESHOLD, masks=None):
    """Linear fit of both high-voltage branches.

    Each branch is fitted against y = G_c*(|eV|/2hf + N_Sigma'); the slopes
    and intercepts of the two branches are averaged, which cancels a small
    bias offset to first order.

    Args:
        curve (NoiseCurve): the shot-noise curve (x in volts)
        f (float, optional): the frequency (default: the curve's)
        threshold (float, optional): the asymptote threshold in quanta
        masks (tuple of ndarray, optional): the (positive, negative) branch
            points (default: ``select_asymptote``)

    Returns:
        Stage1Estimate: chain gain G_c and N_Sigma'
    """
    if curve.x_kind != "volts":
        raise InvalidQuantityError("a shot-noise fit needs a curve against bias voltage, "
                                   "got x_kind=%r" % curve.x_kind)
    f = _frequency(curve, f)
    pos, neg = select_asymptote(curve.x, f, threshold) if masks is None else masks
    slopes, intercepts = [], []
    for name, mask in (("positive", pos), ("negative", neg)):
        if np.sum(mask) < MIN_BRANCH_POINTS:
            raise InsufficientDataError(
                "%s branch has %d points with |eV/(2hf)| > %g quanta, need %d" %
                (name, np.sum(mask), threshold, MIN_BRANCH_POINTS))
        slope, intercept = np.polyfit(asymptote_quanta(curve.x[mask], f), curve.y[mask], 1)
        slopes.append(slope)
        intercepts.append(intercept)
    gain = float(np.mean(slopes))
    if gain <= 0:
        raise NumericalError("stage-1 chain gain is not positive (%g)" % gain)
    return Stage1Estimate(gain, float(np.mean(intercepts)) / gain)


def shot_model(v, chain_gain, n_sigma_off, source_temp, v_offset, f):
    """Output noise of a shot-noise sweep, G_c*(N_in(V - V_off, T) + N_Sigma')."""
    v = np.asarray(v, dtype=float)
    return chain_gain * (sntj_occupancy(v - v_offset, source_temp, f) + n_sigma_off)


def shot_jacobian(v, chain_gain, n_sigma_off, source_temp, v_offset, f):
    """Jacobian of ``shot_model`` with respect to (N_Sigma', T, V_off)."""
    v = np.asarray(v, dtype=float)
    dn_dv, dn_dt = sntj_derivatives(v - v_offset, source_temp, f)
    return chain_gain * np.column_stack([np.ones_like(v), dn_dt, -dn_dv])


def _active_bounds(x, lower, upper, mask):
    names = []
    for i, name in enumerate(PARAM_NAMES):
        span = upper[i] - lower[i]
        tol = 1e-6 * (span if np.isfinite(span) else max(abs(x[i]), 1.0))
        if mask[i] != 0 or x[i] - lower[i] <= tol or upper[i] - x[i] <= tol:
            names.append(name)
    return names


def fit_shot_stage2(curve, f=None, stage1=None,
                    t_max=T_MAX,
                    threshold=ASYMPTOTE_THRESHOLD,
                    masks=None):
    """Bounded fit of the whole sweep with the chain gain frozen.

    Free parameters are N_Sigma' (within +/-25% of the stage-1 estimate),
    the junction temperature T in (0, t_max] and the bias offset V_off
    (unbounded). A solution at a bound is reported in ``active_bounds``; a
    solution whose temperature rounds some of the stage-1 points clears
    ``asymptote_ok``.

    Args:
        curve (NoiseCurve): the shot-noise curve (x in volts)
        f (float, optional): the frequency (default: the curve's)
        stage1 (tuple, optional): (G_c, N_Sigma') from stage 1 (computed if None)
        t_max (float, optional): the upper temperature bound (K)
        threshold (float, optional): the stage-1 asymptote threshold (quanta)
        masks (tuple of ndarray, optional): the stage-1 branch points

    Returns:
        ShotFitResult: the fit result
    """
    f = _frequency(curve, f)
    if masks is None:
        masks = select_asymptote(curve.x, f, threshold)
    if stage1 is None:
        stage1 = fit_shot_stage1(curve, f, threshold, masks)
    gain, n1 = float(stage1[0]), float(stage1[1])
    if not n1 > 0 or not gain > 0:
        raise NumericalError("stage-1 estimate is not positive (G_c=%g, N_Sigma'=%g)" % (gain, n1))

    v, y = curve.x, curve.y
    lower = np.array([(1 - N_SIGMA_WINDOW) * n1, T_MIN, -np.inf])
    upper = np.array([(1 + N_SIGMA_WINDOW) * n1, t_max, np.inf])
    x0 = np.array([n1, min(T_INIT, 0.5 * t_max), 0.0])
    # volts are tiny next to quanta; scale so each parameter is O(1)
    x_scale = np.array([max(n1, 1.0), 0.1 * t_max, 1e-6])

    def residuals(p):
        return (shot_model(v, gain, p[0], p[1], p[2], f) - y) / gain

    def jacobian(p):
        return shot_jacobian(v, gain, p[0], p[1], p[2], f) / gain

    res = least_squares(residuals, x0, jac=jacobian, bounds=(lower, upper),
                        method="dogbox", ftol=FTOL, xtol=1e-12, gtol=1e-12,
                        x_scale=x_scale, max_nfev=MAX_NFEV)
    active = _active_bounds(res.x, lower, upper, res.active_mask)
    if res.status <= 0:
        raise FitConvergenceError("stage-2 fit did not converge at %g Hz: %s" %
                                  (f, res.message), cost=float(res.cost),
                                  active_bounds=active)

    used = masks[0] | masks[1]
    straight = thermal_asymptote(v - res.x[2], res.x[1], f, threshold)
    far = np.abs(v[used])
    window = (float(far.min()), float(far.max())) if far.size else (0.0, 0.0)
    return ShotFitResult(frequency=f,
                         chain_gain=gain,
                         n_sigma_off=float(res.x[0]),
                         source_temp=float(res.x[1]),
                         v_offset=float(res.x[2]),
                         residual_rms=float(np.sqrt(np.mean(res.fun ** 2))),
                         stage1_window=window,
                         stage1_n_sigma_off=n1,
                         cost=float(res.cost),
                         nfev=int(res.nfev),
                         active_bounds=active,
                         asymptote_ok=bool(np.all(straight[used])))


def fit_shot(curve, f=None, t_max=T_MAX, threshold=ASYMPTOTE_THRESHOLD):
    """Run both shot-noise fit stages on one curve.

    While the fitted temperature still rounds some stage-1 points, those
    points are dropped and both stages rerun (at most MAX_REFINE times). A
    result left with ``asymptote_ok`` unset comes with a NoiseBudgetWarning.
    """
    f = _frequency(curve, f)
    masks = select_asymptote(curve.x, f, threshold)
    res = fit_shot_stage2(curve, f, fit_shot_stage1(curve, f, threshold, masks),
                          t_max=t_max, threshold=threshold, masks=masks)
    for _ in range(MAX_REFINE):
        if res.asymptote_ok:
            break
        straight = thermal_asymptote(curve.x - res.v_offset, res.source_temp, f, threshold)
        masks = (masks[0] & straight, masks[1] & straight)
        if min(np.sum(masks[0]), np.sum(masks[1])) < MIN_BRANCH_POINTS:
            break
        res = fit_shot_stage2(curve, f, fit_shot_stage1(curve, f, threshold, masks),
                              t_max=t_max, threshold=threshold, masks=masks)
    if not res.asymptote_ok:
        warnings.warn("%g Hz: the bias sweep (|V| <= %.3g V) does not reach the straight "
                      "asymptote of a junction at %.3g K; widen the sweep" %
                      (f, np.max(np.abs(curve.x)), res.source_temp), NoiseBudgetWarning)
    return res


def shot_cost(curve, chain_gain, n_sigma_off, source_temp, v_offset, f=None):
    """Half the sum of squared input-referred residuals at given parameters."""
    f = _frequency(curve, f)
    r = (shot_model(curve.x, chain_gain, n_sigma_off, source_temp, v_offset, f)
         - curve.y) / chain_gain
    return 0.5 * float(np.sum(r ** 2))


def fit_johnson(curves, f):
    """Linear fit of y = G_c2*(0.5*coth(hf/2k_B T_VTS) + N_Sigma2).

    Args:
        curves (NoiseCurve or list of (float, float)): stage temperatures (K)
            and output noise
        f (float): the frequency (Hz)

    Returns:
        JohnsonFitResult: the fit result
    """
    f = float(check_frequency(f))
    if isinstance(curves, NoiseCurve):
        if curves.x_kind != "kelvin":
            raise InvalidQuantityError("a Johnson fit needs a curve against temperature")
        temps, y = curves.x, curves.y
    else:
        pairs = np.asarray(curves, dtype=float).reshape(-1, 2)
        temps, y = pairs[:, 0], pairs[:, 1]
    if len(temps) < 3:
        raise InsufficientDataError("Johnson fit needs >= 3 temperatures, got %d" % len(temps))
    n_in = johnson_occupancy(temps, f)
    span = n_in.max() / n_in.min()
    if span < MIN_OCCUPANCY_SPAN:
        raise InsufficientDataError("Johnson fit needs occupancies spanning a factor %g, got %.3g" %
                                    (MIN_OCCUPANCY_SPAN, span))
    gain, intercept = np.polyfit(n_in, y, 1)
    if gain <= 0:
        raise NumericalError("Johnson-fit chain gain is not positive (%g)" % gain)
    n_sigma = intercept / gain
    residual = (y - gain * (n_in + n_sigma)) / gain
    return JohnsonFitResult(f, float(gain), float(n_sigma),
                            float(np.sqrt(np.mean(residual ** 2))))
