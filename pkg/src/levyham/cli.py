"""Command line front end.

Subcommands::

    levyham constants   --config CFG --out DIR
    levyham verify      --config CFG --out DIR --which {B1,F1,A2,f-props,operator-identities}
    levyham rate        --config CFG --out DIR [--seed N] [--replicas N]
    levyham couple      --config CFG --out DIR [--seed N] [--replicas N]
    levyham equilibrium --config CFG --out DIR [--seed N] [--replicas N]

Exit codes: 0 success, 1 usage/config error, 2 completed with flags
(degenerate constants, failed verification, insufficient decay).
Outputs are bitwise-stable given (config, seed); the manifest additionally
records wall-clock timings. Worker count comes from LEVYHAM_WORKERS.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import constants as cn
from . import ergodicity as erg
from . import generator as gen
from . import model as md
from . import simulate as sim
from .config import ExperimentConfig, RunManifest, load_config
from .errors import ConfigError, InsufficientDecay, LevyhamError
from .pair import PairState

__all__ = ["main"]


def _write_json(path, payload):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=float)
        fh.write("\n")


def _write_csv(path, header, columns):
    rows = np.column_stack(columns)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def _bundle_from(cfg: ExperimentConfig) -> cn.ConstantsBundle:
    levy = cfg.build_levy()
    langevin = cfg.build_langevin()
    return cn.build_constants(
        langevin, levy, a=cfg.model["a"], b=cfg.model["b"],
        r0_jump=cfg.constants["r0_jump"],
        grid_radius=cfg.lyapunov["grid_radius"], n_grid=cfg.lyapunov["grid_points"],
        position_radius=cfg.constants["position_radius"],
        scheme=cfg.build_scheme(),
    )


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_constants(cfg: ExperimentConfig, out: str, seed: int, replicas: int | None) -> int:
    manifest = RunManifest(cfg.config_hash(), seed, "constants")
    bundle = _bundle_from(cfg)
    rep = bundle.report
    payload = rep.to_dict()
    payload["positivity_violations"] = rep.positivity_violations()
    payload["monitor_is_fallback"] = bundle.monitor_is_fallback
    path = os.path.join(out, "constants.json")
    _write_json(path, payload)
    manifest.outputs.append(path)

    s_grid = np.geomspace(max(rep.R0 * 1e-9, 1e-12), 2.0 * rep.R0, 512)
    path_csv = os.path.join(out, "profile_curve.csv")
    _write_csv(path_csv, ["s", "f", "f_slope", "g"],
               [s_grid, bundle.profile.value(s_grid), bundle.profile.slope(s_grid),
                bundle.profile.g(s_grid)])
    manifest.outputs.append(path_csv)
    manifest.finish(os.path.join(out, "run_manifest.json"))
    degenerate = [f for f in rep.flags if "degenerate" in f or "failed" in f]
    return 2 if degenerate else 0


def _verify_b1(cfg):
    langevin = cfg.build_langevin()
    pot = cfg.build_potential()
    try:
        cert = md.auto_certificate(pot, cfg.model["dim"], cfg.lyapunov["grid_radius"])
        source = "auto"
    except md.GrowthTestFailed:
        cert = md.PotentialCertificate(lam1=1.0)
        source = "manual_fallback"
    rep = md.verify_certificate(pot, cert, cfg.lyapunov["grid_radius"],
                                cfg.lyapunov["grid_points"] * 10, cfg.model["dim"],
                                langevin.alpha_damp, langevin.beta)
    payload = rep.to_dict()
    payload["certificate"] = {k: getattr(cert, k) for k in
                              ("lam1", "lam2", "lam3", "lam4", "lam5")}
    payload["certificate_source"] = source
    return payload, rep.passed


def _verify_f1(cfg):
    langevin = cfg.build_langevin()
    pot = cfg.build_potential()
    try:
        cert = md.auto_certificate(pot, cfg.model["dim"], cfg.lyapunov["grid_radius"])
    except md.GrowthTestFailed:
        cert = md.PotentialCertificate(lam1=1.0)
    choice = md.choose_quadratic_form(langevin, cert, cfg.lyapunov["grid_radius"])
    v0 = md.build_position_weight(langevin, cert)
    lyap = md.LyapunovSpec(r=choice.r, r0_cross=choice.r0_cross,
                           theta=cfg.lyapunov["theta"], v0=v0, dim=cfg.model["dim"],
                           drift_c=choice.c, drift_C=choice.C)
    rep = md.verify_gamma_drift(lyap, langevin.system(a=cfg.model["a"], b=cfg.model["b"]),
                                cfg.lyapunov["grid_radius"], cfg.lyapunov["grid_points"])
    payload = {"choice": choice.to_dict(), **rep}
    return payload, rep["passed"]


def _verify_a2(cfg):
    levy = cfg.build_levy()
    langevin = cfg.build_langevin()
    try:
        cert = md.auto_certificate(langevin.potential, cfg.model["dim"],
                                   cfg.lyapunov["grid_radius"])
    except md.GrowthTestFailed:
        cert = md.PotentialCertificate(lam1=1.0)
    choice = md.choose_quadratic_form(langevin, cert, cfg.lyapunov["grid_radius"])
    v0 = md.build_position_weight(langevin, cert)
    lyap = md.LyapunovSpec(r=choice.r, r0_cross=choice.r0_cross,
                           theta=cfg.lyapunov["theta"], v0=v0, dim=cfg.model["dim"])
    eta, c_star, rep = md.verify_jump_regularity(lyap, levy.slice_part,
                                                 min(cfg.lyapunov["grid_radius"], 10.0), 9)
    moments = levy.measure.moment_pair(levy.theta)
    payload = {"eta": eta, "c_star": c_star, "sup_ratio": rep["sup_ratio"],
               "moment_small": moments.small_jump, "moment_theta": moments.theta_moment,
               "moment_divergent": moments.divergent}
    return payload, bool(c_star > 0 and not moments.divergent)


def _verify_fprops(cfg):
    bundle = _bundle_from(cfg)
    rep = cn.profile_property_report(bundle.profile)
    live = cn.DistanceProfile(log_c1=-0.6 * 10 ** 0.4, c2=1.5, g_coef=0.4,
                              theta0=0.4, cap=10.0)
    rep_live = cn.profile_property_report(live)
    payload = {"certified_profile": rep, "reference_live_profile": rep_live}
    return payload, bool(rep["passed"] and rep_live["passed"])


def _verify_operator_identities(cfg, seed):
    levy = cfg.build_levy()
    if levy.dim != 1:
        raise ConfigError("operator identities require dim == 1")
    bundle = _bundle_from(cfg)
    scheme = cfg.build_scheme()
    rng = np.random.default_rng(seed)
    alpha, alpha0, kappa = bundle.report.alpha, bundle.report.alpha0, bundle.report.kappa
    hfn = bundle.hhat_fn()
    gfn = bundle.g_fn()

    def bump(c):
        return {"value": lambda v, c=c: np.exp(-np.sum((np.asarray(v, dtype=float) - c) ** 2,
                                                       axis=-1)),
                "grad": lambda v, c=c: -2.0 * (np.asarray(v, dtype=float) - c)
                * np.exp(-np.sum((np.asarray(v, dtype=float) - c) ** 2, axis=-1)),
                "hess": lambda v, c=c: (-2.0 + 4.0 * (float(v[0]) - c) ** 2)
                * math.exp(-(float(v[0]) - c) ** 2)}

    marg, prod = [], []
    for _ in range(20):
        x, xp, v, vp = rng.normal(0, 1, size=(4, 1))
        marg.append(gen.marginal_identity_residual(
            x, xp, bump(float(rng.normal())), bump(float(rng.normal())), v, vp,
            bundle.system, levy, alpha, kappa, scheme))
        pair = PairState(x, v, xp, vp)
        prod.append(gen.product_rule_residual(pair, hfn, gfn, bundle.system, levy,
                                              alpha, kappa, scheme))
    payload = {"marginal_residual_max": float(max(marg)),
               "product_rule_residual_max": float(max(prod))}
    ok = payload["marginal_residual_max"] <= 1e-4 and payload["product_rule_residual_max"] <= 1e-6
    return payload, bool(ok)


_VERIFY = {
    "B1": lambda cfg, seed: _verify_b1(cfg),
    "F1": lambda cfg, seed: _verify_f1(cfg),
    "A2": lambda cfg, seed: _verify_a2(cfg),
    "f-props": lambda cfg, seed: _verify_fprops(cfg),
    "operator-identities": _verify_operator_identities,
}


def cmd_verify(cfg: ExperimentConfig, out: str, seed: int, which: str) -> int:
    if which not in _VERIFY:
        raise ConfigError(f"unknown check suite {which!r}; choose from {sorted(_VERIFY)}")
    manifest = RunManifest(cfg.config_hash(), seed, f"verify:{which}")
    payload, passed = _VERIFY[which](cfg, seed)
    payload["which"] = which
    payload["passed"] = bool(passed)
    path = os.path.join(out, f"verify_{which.replace('-', '_')}.json")
    _write_json(path, payload)
    manifest.outputs.append(path)
    manifest.finish(os.path.join(out, "run_manifest.json"))
    return 0 if passed else 2


def cmd_rate(cfg: ExperimentConfig, out: str, seed: int, replicas: int | None) -> int:
    manifest = RunManifest(cfg.config_hash(), seed, "rate")
    bundle = _bundle_from(cfg)
    sim_cfg = cfg.build_sim(seed=seed, n_replicas=replicas)
    x0, v0, xp0, vp0 = cfg.initial_pair()
    try:
        report = erg.estimate_decay(bundle, sim_cfg, PairState(x0, v0, xp0, vp0))
    except InsufficientDecay as exc:
        _write_json(os.path.join(out, "rate.json"),
                    {"error": "InsufficientDecay", "detail": str(exc)})
        manifest.finish(os.path.join(out, "run_manifest.json"))
        return 2
    path = os.path.join(out, "rate.json")
    _write_json(path, report.to_dict())
    manifest.outputs.append(path)
    path_csv = os.path.join(out, "decay_curve.csv")
    safe_log = np.where(report.means > 0, np.log(np.maximum(report.means, 1e-300)), np.nan)
    _write_csv(path_csv, ["t", "mean", "se", "log_mean"],
               [report.times, report.means, report.ses, safe_log])
    manifest.outputs.append(path_csv)
    manifest.finish(os.path.join(out, "run_manifest.json"))
    return 0


def cmd_couple(cfg: ExperimentConfig, out: str, seed: int, replicas: int | None) -> int:
    manifest = RunManifest(cfg.config_hash(), seed, "couple")
    bundle = _bundle_from(cfg)
    sim_cfg = cfg.build_sim(seed=seed, n_replicas=replicas)
    x0, v0, xp0, vp0 = cfg.initial_pair()
    trajectories = sim.run_pair_ensemble(bundle.system, bundle.levy, sim_cfg,
                                         PairState(x0, v0, xp0, vp0),
                                         bundle.report.alpha, bundle.report.kappa)
    hhat, gfn = bundle.monitor_fns()
    prod = gen.ProductPairFn(hhat, gfn)
    d = bundle.system.dim
    for idx, tr in enumerate(trajectories):
        cols = [tr.times]
        names = ["t"]
        for label, arr in (("x", tr.x), ("v", tr.v), ("xp", tr.xp), ("vp", tr.vp)):
            for k in range(d):
                names.append(f"{label}{k}" if d > 1 else label)
                cols.append(arr[:, k])
        rvals = np.array([tr.state_at(k).r(bundle.report.alpha, bundle.monitor_alpha0)
                          for k in range(len(tr.times))])
        psis = np.array([prod.value(tr.state_at(k)) for k in range(len(tr.times))])
        names += ["r", "psi_tilde"]
        cols += [rvals, psis]
        path = os.path.join(out, f"trajectory_{idx:04d}.csv")
        _write_csv(path, names, cols)
        manifest.outputs.append(path)
    manifest.finish(os.path.join(out, "run_manifest.json"))
    return 0


def cmd_equilibrium(cfg: ExperimentConfig, out: str, seed: int, replicas: int | None) -> int:
    manifest = RunManifest(cfg.config_hash(), seed, "equilibrium")
    levy = cfg.build_levy()
    langevin = cfg.build_langevin()
    system = langevin.system(a=cfg.model["a"], b=cfg.model["b"])
    sim_cfg = cfg.build_sim(seed=seed, n_replicas=replicas)
    if sim_cfg.n_save < 3:
        raise ConfigError("equilibrium diagnostics need sim n_save >= 3")
    x0, v0, xp0, vp0 = cfg.initial_pair()
    payload = erg.equilibrium_diagnostics(system, levy, sim_cfg, (x0, v0), (xp0, vp0),
                                          theta=levy.theta)
    threshold = cfg.constants["decay_threshold"]
    if threshold is not None:
        payload["threshold"] = threshold
        payload["within_threshold"] = bool(payload["cross_distance"] <= threshold
                                           and payload["stationarity_distance"] <= threshold)
    path = os.path.join(out, "equilibrium.json")
    _write_json(path, payload)
    manifest.outputs.append(path)
    manifest.finish(os.path.join(out, "run_manifest.json"))
    if threshold is not None and not payload["within_threshold"]:
        return 2
    return 0


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


_COMMANDS = {
    "constants": cmd_constants,
    "rate": cmd_rate,
    "couple": cmd_couple,
    "equilibrium": cmd_equilibrium,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="levyham",
        description="Coupled-pair simulation and contraction certification for "
                    "jump-driven Hamiltonian dynamics.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("constants", "verify", "rate", "couple", "equilibrium"):
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="INI config path (defaults built in)")
        p.add_argument("--seed", type=int, default=None, help="master seed override")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--replicas", type=int, default=None, help="replica count override")
        if name == "verify":
            p.add_argument("--which", required=True,
                           choices=sorted(_VERIFY), help="check suite to run")
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    os.makedirs(args.out, exist_ok=True)
    seed = args.seed if args.seed is not None else cfg.sim["seed"]

    try:
        if args.command == "verify":
            return cmd_verify(cfg, args.out, seed, args.which)
        return _COMMANDS[args.command](cfg, args.out, seed, args.replicas)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except LevyhamError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
