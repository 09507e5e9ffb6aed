"""Command-line entry point.

Examples::

    ionbath rates
    ionbath --config run.yaml --seed 3 --out results simulate relax
    ionbath fit relax results/relax_counts.csv
    ionbath reproduce table1
    ionbath --print-config
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import re
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import config as config_mod
from . import constants as const
from .collisions import TrajectoryState, default_epsilon, run_ensemble
from .detection import preset
from .estimate import FitError, MeasurementSet, fit_contrast_decay, fit_fringe, fit_relaxation
from .physics import PairParams, YB171_MASS_U, YB174_MASS_U, RB87_MASS_U, rate_table, reduced_mass
from .pipeline import format_table1, initial_state, measure_relaxation, relaxation_config, reproduce_table1
from .profiles import profile
from .ramsey import RamseySettings, scan_to_csv, simulate_fringe_scan, simulate_ramsey_mc
from .rates import decompose_rates

EXIT_CONFIG = 2
EXIT_FIT = 3

ION_MASS = {"yb171": YB171_MASS_U, "yb174": YB174_MASS_U}


def _writer(out_dir, cfg):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    prov = config_mod.provenance(cfg)
    header = [f"{k}={v}" for k, v in prov.items()]

    def write_csv(name, text_fn):
        path = out / name
        path.write_text(text_fn(header), encoding="utf-8", newline="")
        return path

    def write_json(name, payload):
        path = out / name
        payload = {"provenance": prov, **payload}
        path.write_text(json.dumps(payload, indent=2, sort_keys=False) + "\n", encoding="utf-8")
        return path

    return write_csv, write_json


def _pair(cfg, prof):
    mu = const.amu_to_kg(reduced_mass(RB87_MASS_U, ION_MASS[prof.ion]))
    kw = {"E_coll": const.mK_to_J(cfg["pair"]["E_coll_mK"])}
    if cfg["pair"]["C4"] is not None:
        kw["C4"] = cfg["pair"]["C4"]
    return PairParams(mu=mu, **kw)


def cmd_rates(cfg, args):
    prof = profile(cfg["profile"])
    pair = _pair(cfg, prof)
    tab = rate_table(pair, cfg["bath"]["density_m3"])
    print(f"ion/bath              {prof.name}")
    print(f"reduced mass          {const.kg_to_amu(pair.mu):.3f} u")
    print(f"C4                    {pair.C4:.4e} J m^4")
    print(f"density               {tab.density:.3e} m^-3")
    print(f"gamma_L / n_a         {tab.gamma_L_over_n:.4e} m^3/s")
    print(f"gamma_c / n_a         {tab.gamma_c_over_n:.4e} m^3/s  (E = {const.J_to_mK(tab.E_coll):g} mK)")
    print(f"gamma_c / gamma_L     {tab.ratio:.3f}")
    if tab.density > 0:
        print(f"gamma_L               {tab.gamma_L:.4e} 1/s")
        print(f"t_L                   {tab.t_L * 1e6:.1f} us")
    if args.out_given:
        _, write_json = _writer(cfg["out"], cfg)
        write_json("rates.json", {
            "mu_u": const.kg_to_amu(pair.mu), "C4_J_m4": pair.C4, "density_m3": tab.density,
            "gamma_L_per_s": tab.gamma_L, "gamma_c_per_s": tab.gamma_c,
            "gamma_L_over_n_m3_s": tab.gamma_L_over_n if tab.density else None,
            "gamma_c_over_n_m3_s": tab.gamma_c_over_n if tab.density else None,
            "t_L_s": tab.t_L if tab.density else None, "E_coll_mK": const.J_to_mK(tab.E_coll)})
    return 0


def _branching(cfg, prof):
    b = cfg["branching"]
    eps = b["epsilon"] if b["epsilon"] is not None else default_epsilon(prof.bath_state)
    kw = dict(epsilon=eps, energy_floor=const.mK_to_J(b["energy_floor_mK"]),
              ion_mass=ION_MASS[prof.ion], sampled_angles=b["sampled_angles"])
    r = cfg["relaxation"]
    if r["T1"] is not None or r["p_inf"] is not None:
        prof = replace(prof, T1=r["T1"] if r["T1"] is not None else prof.T1_or_fallback,
                       p_inf=r["p_inf"] if r["p_inf"] is not None else prof.p_inf)
    return prof, relaxation_config(prof, **kw)


def _grid(cfg):
    g = cfg["time_grid"]
    return np.linspace(0.0, g["stop"], g["num"])


def cmd_simulate(cfg, args):
    prof, bcfg = _branching(cfg, profile(cfg["profile"]))
    write_csv, write_json = _writer(cfg["out"], cfg)
    if args.what in ("relax", "energy"):
        init = TrajectoryState(initial_state(prof), const.mK_to_J(cfg["branching"]["initial_energy_mK"]))
        stats = run_ensemble(init, bcfg, _grid(cfg), cfg["ensemble_size"], cfg["seed"],
                             block_size=cfg["block_size"], workers=cfg["workers"])
        name = args.what
        path = write_csv(f"{name}.csv", lambda c: stats.to_csv(c))
        summary = stats.to_dict()
        summary["profile"] = prof.name
        summary["steady_energy_analytic_mK"] = const.J_to_mK(bcfg.steady_energy)
        summary["epsilon"] = bcfg.epsilon
        write_json(f"{name}.json", summary)
        if args.what == "relax":
            det = preset(cfg["detection"] or prof.detection)
            data = measure_relaxation(prof, _grid(cfg), 3000, seed=cfg["seed"], detection=det,
                                      epsilon=bcfg.epsilon, ion_mass=bcfg.ion_mass)
            write_csv("relax_counts.csv", lambda c: data.to_csv(c))
        print(f"wrote {path}")
        return 0
    # ramsey
    r = cfg["ramsey"]
    settings = RamseySettings(wait_time=r["wait_time_ms"] * 1e-3, contrast=r["contrast"],
                              decoherence_rate=r["rate_excited"] + r["rate_ground"])
    rows = []
    for i, t in enumerate(r["exposures"]):
        est = simulate_ramsey_mc(settings, r["rate_excited"], t, cfg["ensemble_size"],
                                 seed=cfg["seed"] + i, rate_ground=r["rate_ground"],
                                 block_size=cfg["block_size"])
        rows.append((t, est.contrast, est.stderr, est.survival))

    def contrast_csv(comments):
        buf = io.StringIO()
        for c in comments:
            buf.write(f"# {c}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t_over_tL", "contrast", "stderr", "survival"])
        for row in rows:
            w.writerow([repr(float(v)) for v in row])
        return buf.getvalue()

    write_csv("ramsey_contrast.csv", contrast_csv)
    half = r["detuning_span_hz"] / 2
    det_grid = np.linspace(-half, half, r["detuning_points"])
    rng = np.random.default_rng(np.random.SeedSequence(cfg["seed"], spawn_key=(7,)))
    for i, t in enumerate(r["exposures"]):
        scan = simulate_fringe_scan(det_grid, settings, r["n_trials"], rng, exposure=t)
        write_csv(f"ramsey_fringe_{i}.csv", lambda c, s=scan: scan_to_csv(s, c))
    pts = [(t, c, s) for t, c, s, _ in rows if s > 0]
    summary = {"exposures_t_over_tL": list(r["exposures"]),
               "contrast": [c for _, c, _, _ in rows], "stderr": [s for _, _, s, _ in rows],
               "T2_expected_t_over_tL": settings.T2}
    if len(pts) >= 2:
        fit = fit_contrast_decay(pts, C0_fixed=cfg["fit"]["C0_fixed"])
        summary["T2_fit"] = {"value": fit["T2"], "sigma": fit.sigma("T2")}
    write_json("ramsey.json", summary)
    print(f"wrote ramsey outputs to {cfg['out']}")
    return 0


def split_channels(text):
    """Split a channel list on commas that are not inside a ``|F,m>`` ket."""
    return [c.strip() for c in re.findall(r"\s*(\|[^>]*>|[^,|]+)", text or "") if c.strip()]


def cmd_fit(cfg, args):
    texts = [Path(c).read_text(encoding="utf-8") for c in args.csv]
    text = texts[0]
    if len(texts) > 1 and not (args.what == "relax" and args.model == "four-level"):
        raise config_mod.ConfigError("csv", "several files are only accepted by the four-level fit")
    _, write_json = _writer(cfg["out"], cfg)
    prof = profile(cfg["profile"])
    det = preset(args.detection or cfg["detection"] or prof.detection)
    if args.what == "relax" and args.model == "four-level":
        channels = split_channels(args.channels)
        if len(channels) != len(texts):
            raise config_mod.ConfigError("--channels", "give one channel label per CSV file")
        data = {ch: MeasurementSet.from_csv(t) for ch, t in zip(channels, texts)}
        fit = fit_relaxation(data, model="four-level", detection=det)
    elif args.what == "relax":
        data = MeasurementSet.from_csv(text)
        fit = fit_relaxation(data, model=args.model, detection=det)
    elif args.what == "fringe":
        data = MeasurementSet.from_csv(text)
        fit = fit_fringe(data, detection=det)
    else:
        rows = list(csv.DictReader(l for l in text.splitlines() if l and not l.startswith("#")))
        pts = [(float(r["t_over_tL"]), float(r["contrast"]), float(r.get("stderr") or r["sigma"]))
               for r in rows]
        # exact points (zero spread, e.g. no exposure) carry no weight information
        pts = [p for p in pts if p[2] > 0]
        fit = fit_contrast_decay(pts, C0_fixed=cfg["fit"]["C0_fixed"])
    payload = fit.to_dict()
    if args.what != "contrast":
        payload["detection"] = {"eta_dark_given_down": det.eta_dark_given_down,
                                "eta_dark_given_up": det.eta_dark_given_up}
    path = write_json(f"fit_{args.what}.json", payload)
    for n in fit.names:
        print(f"{n:<12} {fit[n]:.6g} +- {fit.sigma(n):.3g}")
    print(f"reduced chi^2 {fit.reduced_chi_square:.3f}; wrote {path}")
    return 0


def cmd_reproduce(cfg, args):
    rows = reproduce_table1(seed=cfg["seed"])
    print(format_table1(rows))
    ref = decompose_rates(2.50, 0.609)
    print()
    print("stretched-bath split from T1 = 2.50 t_L, p_inf = 0.609: "
          f"gamma_down_SE = {ref.down_se * 2.50:.3f}/T1, gamma_SR = {ref.up_sr * 2.50:.3f}/T1")
    print("all times carry a 40% systematic from the density calibration")
    if args.out_given:
        _, write_json = _writer(cfg["out"], cfg)
        write_json("table1.json", {"rows": [{
            "profile": r.profile.name, "T1": r.T1, "T1_sigma": r.T1_sigma,
            "p_inf": r.p_inf, "p_inf_sigma": r.p_inf_sigma,
            "reported_T1": r.profile.T1, "reported_p_inf": r.profile.p_inf,
            "se_T1": r.se_T1, "sr_T1": r.sr_T1} for r in rows]})
    return 0


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS, help="YAML configuration file")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="base random seed")
    common.add_argument("--out", default=argparse.SUPPRESS, help="output directory")
    common.add_argument("--workers", type=int, default=argparse.SUPPRESS, help="worker processes")
    common.add_argument("--print-config", action="store_true", default=argparse.SUPPRESS,
                        help="print the resolved configuration and exit")

    p = argparse.ArgumentParser(prog="ionbath", parents=[common], description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command")
    sub.add_parser("rates", parents=[common], help="collision rates and Langevin time")
    s = sub.add_parser("simulate", parents=[common], help="Monte Carlo simulations")
    s.add_argument("what", choices=["relax", "energy", "ramsey"])
    f = sub.add_parser("fit", parents=[common], help="fit measurement CSV files")
    f.add_argument("what", choices=["relax", "fringe", "contrast"])
    f.add_argument("csv", nargs="+", help="measurement CSV (one per channel for four-level)")
    f.add_argument("--model", default="two-level", choices=["two-level", "four-level"])
    f.add_argument("--channels", default=None,
                   help="comma-separated channel labels, e.g. '|1,-1>,|1,0>,|1,1>'")
    f.add_argument("--detection", default=None, help="detection preset name")
    r = sub.add_parser("reproduce", parents=[common], help="reproduce reported tables")
    r.add_argument("what", choices=["table1"])
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    overrides = {}
    if hasattr(args, "seed"):
        overrides["seed"] = args.seed
    if hasattr(args, "out"):
        overrides["out"] = args.out
    if hasattr(args, "workers"):
        overrides["workers"] = args.workers
    args.out_given = hasattr(args, "out")
    try:
        cfg = config_mod.load(getattr(args, "config", None), overrides)
    except config_mod.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if getattr(args, "print_config", False):
        sys.stdout.write(config_mod.dump(cfg))
        return 0
    if args.command is None:
        parser.print_help()
        return EXIT_CONFIG
    handlers = {"rates": cmd_rates, "simulate": cmd_simulate, "fit": cmd_fit, "reproduce": cmd_reproduce}
    try:
        return handlers[args.command](cfg, args)
    except config_mod.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FitError as exc:
        print(f"fit failed: {exc}", file=sys.stderr)
        return EXIT_FIT


if __name__ == "__main__":
    sys.exit(main())
