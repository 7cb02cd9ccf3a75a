"""Command-line front end.

Every subcommand computes all of its outputs in memory first; the files are
then written through temporary files renamed into place, so a failing run
leaves nothing behind. Exit codes: 0 ok, 1 input or schema error, 2
numerical error.
"""
import argparse
import csv
import io
import json
import os
import sys
import tempfile
import warnings
import jsonlines
import numpy as np

from collections import OrderedDict
from dataclasses import replace

from tensorboardX import SummaryWriter

from .budget import (build_budget, group_by_stage, infer_packaging_efficiency,
                     mc_uncertainty, pump_dissipation, pump_input_power)
from .chainmodel import (band_average, chain_added_noise, chain_noise_report_off,
                         gain_sweep, noise_from_rise, noise_table)
from .config import (load_chain, load_generator, load_priors, load_pump_path,
                     read_fit_records, read_table_csv)
from .errors import (ConfigError, InvalidQuantityError, NoiseBudgetWarning,
                     NumericalError)
from .fitter import ASYMPTOTE_THRESHOLD, T_MAX, fit_johnson, fit_shot, shot_model
from .quanta import (db_to_linear, dbm_to_watts, linear_to_db,
                     occupancy_to_temperature, parse_quantity)
from .sources import johnson_occupancy, read_curves_csv, synthesize_curve, write_curves_csv

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_NUMERICAL = 2
# relative tolerance when matching frequencies across files
FREQ_RTOL = 1e-6


class _Parser(argparse.ArgumentParser):
    """An ArgumentParser whose usage errors are input errors (exit 1)."""

    def error(self, message):
        raise ConfigError(message)


def hertz(text):
    return parse_quantity(text, "Hz")


def kelvin(text):
    return parse_quantity(text, "K")


def ohms(text):
    return parse_quantity(text, "ohm")


def dbm(text):
    return parse_quantity(text, "dBm")


def band(text):
    lo, sep, hi = text.partition(":")
    if not sep:
        raise InvalidQuantityError("a band is lo:hi, got %r" % text)
    return hertz(lo), hertz(hi)


def gain_list(text):
    return [parse_quantity(g, "dB") for g in text.split(",") if g.strip()]


def _csv_text(rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerows(rows)
    return buf.getvalue()


def _json_text(obj):
    return json.dumps(obj, indent=2) + "\n"


def _jsonl_text(records):
    buf = io.StringIO()
    with jsonlines.Writer(buf) as writer:
        writer.write_all(records)
    return buf.getvalue()


def _columns_text(columns, fmt):
    """Render equal-length named columns as CSV rows or a JSON object."""
    if fmt == "json":
        return _json_text(OrderedDict((k, [_plain(v) for v in vals])
                                      for k, vals in columns.items()))
    rows = [list(columns)]
    for values in zip(*columns.values()):
        rows.append([_cell(v) for v in values])
    return _csv_text(rows)


def _plain(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, str):
        return v
    return float(v)


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, str):
        return v
    return repr(float(v))


def write_outputs(out_dir, outputs):
    """Write every ``name -> text`` output atomically (all temp files first, then renames)."""
    os.makedirs(out_dir, exist_ok=True)
    staged = []
    try:
        for name, text in outputs.items():
            fd, tmp = tempfile.mkstemp(dir=out_dir, prefix="." + name, suffix=".tmp")
            staged.append((tmp, os.path.join(out_dir, name)))
            with os.fdopen(fd, "w", encoding="utf-8", newline="") as fout:
                fout.write(text)
        for tmp, final in staged:
            os.replace(tmp, final)
    finally:
        for tmp, _ in staged:
            if os.path.exists(tmp):
                os.remove(tmp)


def _writer(hp):
    return SummaryWriter(log_dir=hp.logdir) if hp.logdir else None


def _chain(hp):
    if not hp.config:
        raise ConfigError("this command needs --config")
    cfg = load_chain(hp.config)
    if hp.band is not None:
        cfg = replace(cfg, band=hp.band)
    return cfg


def _select(curves, frequency):
    if frequency is None:
        return curves
    picked = [c for c in curves if abs(c.frequency - frequency) <= FREQ_RTOL * frequency]
    if not picked:
        raise ConfigError("no curve at %g Hz (have %s)" %
                          (frequency, ", ".join("%g" % c.frequency for c in curves)),
                          key="--frequency")
    return picked


def _align(freqs, other_freqs, values, what):
    """Reorder ``values`` (given on ``other_freqs``) onto ``freqs``."""
    out = np.empty(len(freqs))
    for i, f in enumerate(freqs):
        hit = np.flatnonzero(np.abs(other_freqs - f) <= FREQ_RTOL * f)
        if hit.size == 0:
            raise ConfigError("no %s value at %g Hz" % (what, f))
        out[i] = values[hit[0]]
    return out


def cmd_simulate(hp):
    """Chain-added noise per frequency, band averages and the per-stage table."""
    cfg = _chain(hp)
    print("=====simulate %s=====" % (cfg.name or hp.config))
    off = chain_noise_report_off(cfg)
    report = chain_added_noise(cfg) if cfg.has_paramp else off
    columns = OrderedDict()
    columns["frequency_hz"] = cfg.freqs
    columns["n_sigma"] = report.n_sigma
    columns["t_sigma_k"] = report.t_sigma
    columns["n_sigma_off"] = off.n_sigma
    columns["t_sigma_off_k"] = off.t_sigma
    columns["total_gain_db"] = linear_to_db(report.total_gain)
    columns["valid"] = report.valid
    for st in report.stages:
        columns[st.label + "_referred_k"] = st.referred_k

    table = noise_table(report)
    band_avg = table["t_sigma_k"]
    summary = {"name": cfg.name,
               "band_hz": list(cfg.band),
               "t_sigma_k": band_avg,
               "t_sigma_off_k": band_average(cfg.freqs, off.t_sigma, cfg.band),
               "all_valid": bool(np.all(report.valid)),
               "table": table}
    table_rows = [["quantity"] + table["labels"]]
    for key in ("efficiency", "insertion_loss_db", "intrinsic_k", "referred_k"):
        table_rows.append([key] + ["" if v is None else repr(float(v)) for v in table[key]])

    writer = _writer(hp)
    if writer is not None:
        run_tag = "simulate_%s" % (cfg.name or "chain").replace(" ", "_")
        for i in range(len(cfg.freqs)):
            writer.add_scalars(run_tag, {"t_sigma_k": report.t_sigma[i],
                                         "t_sigma_off_k": off.t_sigma[i]}, i)
        writer.close()

    print("T_sigma (band average) = %.4f K" % band_avg)
    for label, ref in zip(table["labels"], table["referred_k"]):
        print("  %-10s input-referred %.4f K" % (label, ref))
    return OrderedDict([("simulate." + hp.format, _columns_text(columns, hp.format)),
                        ("simulate_band.json", _json_text(summary)),
                        ("simulate_table.csv", _csv_text(table_rows))])


def cmd_fit_shot(hp):
    """Two-stage shot-noise fit of every curve of a NoiseCurve CSV file."""
    curves = _select(read_curves_csv(hp.data), hp.frequency)
    if any(c.x_kind == "amps" for c in curves) and hp.resistance is None:
        raise ConfigError("current-biased curves need --resistance", key="resistance")
    if hp.resistance is not None:
        curves = [c.to_voltage(hp.resistance) for c in curves]
    print("=====fit-shot %s=====" % hp.data)
    records, residuals = [], OrderedDict((k, []) for k in
                                         ("frequency_hz", "x_value", "y_quanta",
                                          "model", "residual_quanta"))
    writer = _writer(hp)
    for i, curve in enumerate(curves):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", NoiseBudgetWarning)
            res = fit_shot(curve, t_max=hp.t_max, threshold=hp.threshold)
        rec = res.to_dict()
        records.append(rec)
        model = shot_model(curve.x, res.chain_gain, res.n_sigma_off, res.source_temp,
                           res.v_offset, curve.frequency)
        residuals["frequency_hz"].extend([curve.frequency] * len(curve.x))
        residuals["x_value"].extend(curve.x)
        residuals["y_quanta"].extend(curve.y)
        residuals["model"].extend(model)
        residuals["residual_quanta"].extend((curve.y - model) / res.chain_gain)
        print("%.6g Hz: G_c=%.6g N_sigma'=%.5g T=%.4g K V_off=%.4g V rms=%.3g" %
              (curve.frequency, res.chain_gain, res.n_sigma_off, res.source_temp,
               res.v_offset, res.residual_rms))
        if res.bound_warning:
            print("warning: %.6g Hz: parameters at a bound: %s" %
                  (curve.frequency, ", ".join(res.active_bounds)), file=sys.stderr)
        if not res.asymptote_ok:
            print("warning: %.6g Hz: the sweep does not reach the straight asymptote "
                  "at T=%.4g K; widen the sweep" % (curve.frequency, res.source_temp),
                  file=sys.stderr)
        if writer is not None:
            writer.add_scalars("fit_shot", {"n_sigma_off": res.n_sigma_off,
                                            "chain_gain": res.chain_gain}, i)
    if writer is not None:
        writer.close()
    return OrderedDict([("shot_fits.jsonl", _jsonl_text(records)),
                        ("shot_residuals." + hp.format, _columns_text(residuals, hp.format))])


def cmd_fit_johnson(hp):
    """Linear Johnson-noise fit of every curve of a NoiseCurve CSV file."""
    curves = _select(read_curves_csv(hp.data), hp.frequency)
    print("=====fit-johnson %s=====" % hp.data)
    records, residuals = [], OrderedDict((k, []) for k in
                                         ("frequency_hz", "x_value", "y_quanta",
                                          "model", "residual_quanta"))
    for curve in curves:
        res = fit_johnson(curve, curve.frequency)
        records.append(res.to_dict())
        model = res.chain_gain * (johnson_occupancy(curve.x, curve.frequency) + res.n_sigma)
        residuals["frequency_hz"].extend([curve.frequency] * len(curve.x))
        residuals["x_value"].extend(curve.x)
        residuals["y_quanta"].extend(curve.y)
        residuals["model"].extend(model)
        residuals["residual_quanta"].extend((curve.y - model) / res.chain_gain)
        print("%.6g Hz: G_c2=%.6g N_sigma2=%.5g (%.4g K)" %
              (curve.frequency, res.chain_gain, res.n_sigma, res.t_sigma))
    return OrderedDict([("johnson_fits.jsonl", _jsonl_text(records)),
                        ("johnson_residuals." + hp.format, _columns_text(residuals, hp.format))])


def _n_sigma_off_source(path):
    """N_Sigma' per frequency from a shot-fit JSON-lines file or a CSV table."""
    if path.endswith(".jsonl"):
        records = read_fit_records(path)
        freqs = np.array([r["frequency"] for r in records], dtype=float)
        values = np.array([r["n_sigma_off"] for r in records], dtype=float)
        return freqs, values
    table = read_table_csv(path, ["frequency_hz", "n_sigma_off"])
    return table["frequency_hz"], table["n_sigma_off"]


def cmd_noise_rise(hp):
    """Chain-added noise N_Sigma from a measured noise rise r."""
    rise = read_table_csv(hp.rise, ["frequency_hz", "noise_rise"])
    gain = read_table_csv(hp.gain, ["frequency_hz", "gain_db"])
    freqs = rise["frequency_hz"]
    g = db_to_linear(_align(freqs, gain["frequency_hz"], gain["gain_db"], "gain"))
    off_freqs, off_values = _n_sigma_off_source(hp.n_sigma_off)
    n_off = _align(freqs, off_freqs, off_values, "N_sigma'")
    print("=====noise-rise %s=====" % hp.rise)
    n_sigma = np.atleast_1d(noise_from_rise(rise["noise_rise"], g, n_off))
    if np.any(n_sigma < 0):
        raise NumericalError("negative N_sigma at %d frequencies" % np.sum(n_sigma < 0))
    t_sigma = occupancy_to_temperature(n_sigma, freqs)
    columns = OrderedDict([("frequency_hz", freqs),
                           ("noise_rise", rise["noise_rise"]),
                           ("gain_db", linear_to_db(g)),
                           ("n_sigma_off", n_off),
                           ("n_sigma", n_sigma),
                           ("t_sigma_k", np.atleast_1d(t_sigma))])
    for f, t in zip(freqs, np.atleast_1d(t_sigma)):
        print("%.6g Hz: T_sigma=%.4f K" % (f, t))
    return OrderedDict([("noise_rise." + hp.format, _columns_text(columns, hp.format))])


def _eta_alpha_c(text, freqs):
    """A constant cable transmission, or a CSV file with frequency_hz,eta_alpha_c."""
    if os.path.isfile(text):
        table = read_table_csv(text, ["frequency_hz", "eta_alpha_c"])
        return _align(freqs, table["frequency_hz"], table["eta_alpha_c"], "eta_alpha_c")
    try:
        return float(text)
    except ValueError:
        raise ConfigError("--eta-alpha-c is a number or a CSV file, got %r" % text,
                          key="eta_alpha_c")


def cmd_budget(hp):
    """Infer T_H and T_ex from fit results and tabulate the chain budget."""
    cfg = _chain(hp)
    off_freqs, off_values = _n_sigma_off_source(hp.shot_fits)
    order = np.argsort(off_freqs)
    freqs = off_freqs[order]
    n_off = off_values[order]
    rise = read_table_csv(hp.noise_rise, ["frequency_hz", "t_sigma_k"])
    t_sigma = _align(freqs, rise["frequency_hz"], rise["t_sigma_k"], "T_sigma")
    cfg = cfg.at(freqs)

    eta_p, flagged = 1.0, False
    if hp.johnson_fits:
        shot = read_fit_records(hp.shot_fits)
        johnson = read_fit_records(hp.johnson_fits)
        g_shot = _align(freqs, np.array([r["frequency"] for r in shot]),
                        np.array([r["chain_gain"] for r in shot]), "SNTJ gain")
        g_vts = _align(freqs, np.array([r["frequency"] for r in johnson]),
                       np.array([r["chain_gain"] for r in johnson]), "VTS gain")
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", NoiseBudgetWarning)
            packaging = infer_packaging_efficiency(g_shot, g_vts)
        eta_p, flagged = packaging.eta_p, packaging.flagged
    eta_alpha_c = None if hp.eta_alpha_c is None else _eta_alpha_c(hp.eta_alpha_c, freqs)

    print("=====budget %s=====" % (cfg.name or hp.config))
    report = build_budget(cfg, n_off, t_sigma, eta_p=eta_p, flagged=flagged,
                          eta_alpha_c=eta_alpha_c, paramp_package=hp.package_eta)
    if report.eta_1c is not None:
        print("eta_1c=%.4f (eta_alpha_c * eta_p)" % float(np.mean(report.eta_1c)))
    averages = report.band_averages()
    print("eta_p=%.4f%s T_H=%.3f K T_ex=%.3f K T_sigma=%.3f K" %
          (report.eta_p, " (flagged)" if flagged else "", averages["t_h_k"],
           averages["t_ex_k"], averages["t_sigma_k"]))
    return OrderedDict([("budget.json", _json_text(report.to_json())),
                        ("budget_table.csv", _csv_text(report.table_rows()))])


def cmd_pump_power(hp):
    """Power dissipated along the pump line, per element and per stage."""
    if not hp.config:
        raise ConfigError("pump-power needs --config (a pump-path document)")
    delivered, path = load_pump_path(hp.config)
    if hp.delivered is not None:
        delivered = hp.delivered
    print("=====pump-power %s=====" % hp.config)
    entries = pump_dissipation(delivered, path)
    totals = group_by_stage(entries)
    p_in = pump_input_power(delivered, path)
    for temp, watts in totals.items():
        print("%g K: %.4g W" % (temp, watts))
    if hp.format == "json":
        doc = {"delivered_w": dbm_to_watts(delivered), "input_w": p_in,
               "entries": [{"label": e.label, "stage_temp_k": e.stage_temp,
                            "dissipated_w": e.dissipated} for e in entries],
               "totals": [{"stage_temp_k": t, "dissipated_w": w} for t, w in totals.items()]}
        return OrderedDict([("pump_power.json", _json_text(doc))])
    rows = [["label", "stage_temp_k", "dissipated_w"]]
    rows += [[e.label, repr(float(e.stage_temp)), repr(float(e.dissipated))] for e in entries]
    total_rows = [["stage_temp_k", "dissipated_w"]]
    total_rows += [[repr(float(t)), repr(float(w))] for t, w in totals.items()]
    return OrderedDict([("pump_power.csv", _csv_text(rows)),
                        ("pump_power_totals.csv", _csv_text(total_rows))])


def cmd_synth(hp):
    """Synthetic calibration curves in the NoiseCurve CSV schema."""
    if not hp.config:
        raise ConfigError("synth needs --config (a generator document)")
    gen = load_generator(hp.config)
    rel_noise = gen.rel_noise if hp.rel_noise is None else hp.rel_noise
    print("=====synth %s=====" % gen.name)
    curves = [synthesize_curve(gen.source, gen.chain_gain, gen.n_sigma_off, f,
                               rel_noise=rel_noise, seed=hp.seed + i)
              for i, f in enumerate(gen.freqs)]
    buf = io.StringIO()
    write_curves_csv(curves, buf)
    print("%d curves, %d points each" % (len(curves), len(curves[0].x)))
    return OrderedDict([("curves.csv", buf.getvalue())])


def cmd_sweep_gain(hp):
    """Band-averaged T_Sigma as the paramp gain is swept."""
    cfg = _chain(hp)
    gains_db = np.array(hp.gains, dtype=float)
    print("=====sweep-gain %s=====" % (cfg.name or hp.config))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NoiseBudgetWarning)
        sweep = gain_sweep(cfg, db_to_linear(gains_db))
    t_band = [band_average(cfg.freqs, t, cfg.band) for _, t, _ in sweep]
    valid = [ok for _, _, ok in sweep]
    writer = _writer(hp)
    if writer is not None:
        for i, t in enumerate(t_band):
            writer.add_scalars("sweep_gain", {"t_sigma_k": t}, i)
        writer.close()
    for g, t, ok in zip(gains_db, t_band, valid):
        print("%6.2f dB: T_sigma=%.4f K%s" % (g, t, "" if ok else "  (below the high-gain limit)"))
    columns = OrderedDict([("gain_db", gains_db), ("t_sigma_k", t_band), ("valid", valid)])
    return OrderedDict([("sweep_gain." + hp.format, _columns_text(columns, hp.format))])


def cmd_mc(hp):
    """Monte-Carlo uncertainty of T_Sigma, T_H and T_ex under Gaussian parameter priors."""
    cfg = _chain(hp)
    if not hp.priors:
        raise ConfigError("mc needs --priors")
    priors, n_doc = load_priors(hp.priors)
    n_samples = hp.samples or n_doc or 1000
    print("=====mc %s (%d samples, seed %d)=====" % (cfg.name or hp.config, n_samples, hp.seed))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NoiseBudgetWarning)
        result = mc_uncertainty(cfg, priors, n_samples=n_samples, seed=hp.seed,
                                progress=hp.progress)
    for name, stats in result.band_stats.items():
        print("%s (band average) = %.4f +/- %.4f K [%.4f, %.4f]" %
              (name, stats["mean"], stats["std"], stats["p2_5"], stats["p97_5"]))
    if result.n_rejected:
        print("warning: %d draws left out of the T_H and T_ex statistics" % result.n_rejected,
              file=sys.stderr)

    columns = OrderedDict([("frequency_hz", result.freqs),
                           ("t_sigma_mean_k", result.t_sigma_mean),
                           ("t_sigma_std_k", result.t_sigma_std),
                           ("t_sigma_off_mean_k", result.t_sigma_off_mean),
                           ("t_sigma_off_std_k", result.t_sigma_off_std)])
    for name in ("t_h", "t_ex"):
        if getattr(result, name + "_mean") is not None:
            columns[name + "_mean_k"] = getattr(result, name + "_mean")
            columns[name + "_std_k"] = getattr(result, name + "_std")
    for name, (lo, hi) in result.intervals.items():
        columns[name + "_p2_5_k"] = lo
        columns[name + "_p97_5_k"] = hi

    writer = _writer(hp)
    if writer is not None:
        for i in range(len(result.freqs)):
            writer.add_scalars("mc", OrderedDict((k, float(v[i])) for k, v in columns.items()
                                                 if k != "frequency_hz"), i)
        writer.close()
    if hp.format == "json":
        return OrderedDict([("mc.json", _json_text(result.to_json()))])
    return OrderedDict([("mc.csv", _columns_text(columns, "csv"))])


def build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--config", type=str, default=None)
    common.add_argument("--out-dir", type=str, default="output/")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--band", type=band, default=None)
    common.add_argument("--format", type=str, choices=["csv", "json"], default="csv")
    common.add_argument("--logdir", type=str, default=None)

    parser = _Parser(prog="run_budget.py",
                     description="noise budgets of cryogenic amplification chains")
    sub = parser.add_subparsers(dest="command")
    sub.required = True

    p = sub.add_parser("simulate", parents=[common])
    p.set_defaults(func=cmd_simulate)

    for name, func in (("fit-shot", cmd_fit_shot), ("fit-johnson", cmd_fit_johnson)):
        p = sub.add_parser(name, parents=[common])
        p.add_argument("--data", type=str, required=True)
        p.add_argument("--frequency", type=hertz, default=None)
        p.set_defaults(func=func)
        if name == "fit-shot":
            p.add_argument("--t-max", type=kelvin, default=T_MAX)
            p.add_argument("--threshold", type=float, default=ASYMPTOTE_THRESHOLD)
            p.add_argument("--resistance", type=ohms, default=None)

    p = sub.add_parser("noise-rise", parents=[common])
    p.add_argument("--rise", type=str, required=True)
    p.add_argument("--gain", type=str, required=True)
    p.add_argument("--n-sigma-off", type=str, required=True)
    p.set_defaults(func=cmd_noise_rise)

    p = sub.add_parser("budget", parents=[common])
    p.add_argument("--shot-fits", type=str, required=True)
    p.add_argument("--noise-rise", type=str, required=True)
    p.add_argument("--johnson-fits", type=str, default=None)
    p.add_argument("--eta-alpha-c", type=str, default=None)
    p.add_argument("--package-eta", type=float, default=None)
    p.set_defaults(func=cmd_budget)

    p = sub.add_parser("pump-power", parents=[common])
    p.add_argument("--delivered", type=dbm, default=None)
    p.set_defaults(func=cmd_pump_power)

    p = sub.add_parser("synth", parents=[common])
    p.add_argument("--rel-noise", type=float, default=None)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("sweep-gain", parents=[common])
    p.add_argument("--gains", type=gain_list, default=gain_list("0,5,10,15,20,25"))
    p.set_defaults(func=cmd_sweep_gain)

    p = sub.add_parser("mc", parents=[common])
    p.add_argument("--priors", type=str, default=None)
    p.add_argument("--samples", type=int, default=None)
    p.add_argument("--progress", dest="progress", action="store_true")
    p.set_defaults(func=cmd_mc)
    return parser


def main(argv=None):
    """Run one subcommand; returns the process exit code."""
    try:
        hp = build_parser().parse_args(argv)
        outputs = hp.func(hp)
        write_outputs(hp.out_dir, outputs)
    except NumericalError as e:
        print("error: %s" % e, file=sys.stderr)
        return EXIT_NUMERICAL
    except (ConfigError, InvalidQuantityError, OSError) as e:
        print("error: %s" % e, file=sys.stderr)
        return EXIT_INPUT
    return EXIT_OK
