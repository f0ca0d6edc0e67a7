"""Command-line front end.

Subcommands wrap the library modules and emit deterministic CSV/JSON plus a
run manifest; identical configs give identical output checksums.  Exit
codes: 0 success, 1 numerical failure (diagnostic.json written), 2 config
or usage error.
"""

import argparse
import datetime
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__, localmap, manifolds, melnikov, search
from .config import ConfigError, RunConfig, write_manifest
from .fields import FieldId
from .manifolds import SectionSpec

PAPER_DERIVATIVE_ENCLOSURE = (-5.15341, -4.56572)


def _write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(f"{x:.17g}" for x in row) + "\n")


def _write_json(path, payload):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)


PLOT_SCRIPT = """\
#!/usr/bin/env python3
\"\"\"Plot the Melnikov scan emitted alongside this script.\"\"\"
import csv
import sys
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

here = Path(__file__).parent


def load(name):
    th, lo, hi, val = [], [], [], []
    with open(here / name, newline="") as fh:
        for row in csv.DictReader(fh):
            th.append(float(row["theta"]))
            val.append(float(row["value"]))
            lo.append(float(row["err_low"]))
            hi.append(float(row["err_high"]))
    return th, val, lo, hi


fig, axes = plt.subplots(2, 1, figsize=(8, 8), sharex=True)
for ax, name, label in (
    (axes[0], "melnikov_plus.csv", "M+"),
    (axes[1], "melnikov_plus_derivative.csv", "dM+/dtheta"),
):
    th, val, lo, hi = load(name)
    ax.fill_between(th, lo, hi, alpha=0.3, label="error budget")
    ax.plot(th, val, ".", ms=2, label=label)
    ax.axhline(0.0, color="k", lw=0.5)
    ax.set_ylabel(label)
    ax.legend()
axes[1].set_xlabel("theta")
out = here / "melnikov_scan.png"
fig.savefig(out, dpi=150)
print(out)
"""


def cmd_melnikov_scan(cfg: RunConfig, outdir: Path, threads: int) -> dict:
    budget = cfg.budget()
    n = cfg["melnikov.n"]
    thetas = np.linspace(cfg["melnikov.theta_min"], cfg["melnikov.theta_max"], n, endpoint=False)
    outputs = {}

    _, vals, errs = melnikov.scan(thetas, budget, kind="value", threads=threads)
    keep = ~np.isnan(vals)
    if not np.any(keep):
        raise ConfigError("empty admissible scan range")
    path = outdir / "melnikov_plus.csv"
    _write_csv(
        path,
        ["theta", "value", "err_low", "err_high"],
        zip(thetas[keep], vals[keep], (vals - errs)[keep], (vals + errs)[keep]),
    )
    outputs["melnikov_plus"] = path

    _, dvals, derrs = melnikov.scan(thetas, budget, kind="derivative", threads=threads)
    keep = ~np.isnan(dvals)
    path = outdir / "melnikov_plus_derivative.csv"
    _write_csv(
        path,
        ["theta", "value", "err_low", "err_high"],
        zip(thetas[keep], dvals[keep], (dvals - derrs)[keep], (dvals + derrs)[keep]),
    )
    outputs["melnikov_plus_derivative"] = path

    d0 = melnikov.melnikov_plus_derivative(0.0, budget)
    lo, hi = PAPER_DERIVATIVE_ENCLOSURE
    report = {
        "derivative_at_zero": {
            "value": d0.value,
            "err": d0.err,
            "enclosure": [d0.lo, d0.hi],
            "budget_width": d0.err * 2.0,
            "reference_enclosure": [lo, hi],
            "point_estimate_inside_reference": bool(lo <= d0.value <= hi),
        },
        "value_at_zero": {
            "value": melnikov.melnikov_plus(0.0, budget).value,
            "err": melnikov.melnikov_plus(0.0, budget).err,
        },
    }
    cert = melnikov.certify_sign_on_b_plus(
        grid_n=cfg["melnikov.cert_n"],
        budget=cfg.budget(certification=True),
        threads=threads,
    )
    report["certification"] = cert
    path = outdir / "certification.json"
    _write_json(path, report)
    outputs["certification"] = path

    path = outdir / "plot_melnikov.py"
    path.write_text(PLOT_SCRIPT, encoding="utf-8")
    outputs["plot_script"] = path
    return outputs


def cmd_distance(cfg: RunConfig, outdir: Path, threads: int) -> dict:
    mu0 = cfg["mu"]
    section = SectionSpec(delta=cfg["delta"], h=cfg["h"])
    theta_hat_0 = -cfg["h"]
    icfg = cfg.integrator()
    budget = cfg.budget()
    n = cfg["distance.n_theta"]
    mus = [mu0 / 10**k for k in range(cfg["distance.mu_decades"])]

    thetas = []
    for th in np.linspace(-math.pi, math.pi, 4 * n, endpoint=False):
        shifted = th + section.w_sigma
        if melnikov.is_admissible(shifted, budget.exclusion + 0.1) and melnikov.is_admissible(
            -shifted, budget.exclusion + 0.1
        ):
            thetas.append(float(th))
        if len(thetas) == n:
            break

    rows = []
    worst = {mu: 0.0 for mu in mus}
    for th in thetas:
        m_val = melnikov.melnikov_plus(th + section.w_sigma, budget).value
        row = [th, m_val]
        for mu in mus:
            d = manifolds.distance(th, "+", mu, theta_hat_0, section, config=icfg)
            q = (d - theta_hat_0) / mu
            row.extend([d, q, abs(q - m_val)])
            worst[mu] = max(worst[mu], abs(q - m_val))
        rows.append(row)
    header = ["theta", "melnikov_plus"]
    for mu in mus:
        header.extend([f"d_plus_mu{mu:g}", f"quotient_mu{mu:g}", f"error_mu{mu:g}"])
    path = outdir / "quotient_convergence.csv"
    _write_csv(path, header, rows)
    outputs = {"quotient_convergence": path}

    col_curve = manifolds.collision_curve("+", mu0, section, n=96, config=icfg)
    inf_curve = manifolds.infinity_curve(theta_hat_0, mu0, section, n=72, config=icfg)
    for name, curve in (("collision_curve", col_curve), ("infinity_curve", inf_curve)):
        cpath = outdir / f"{name}.csv"
        curve.to_csv(cpath)
        outputs[name] = cpath

    # intersection report on the first sign change of d+ along the samples
    intersection = None
    qs = [(row[0], row[3]) for row in rows]  # (theta, quotient at mu0)
    for (ta, qa), (tb, qb) in zip(qs[:-1], qs[1:]):
        da, db = theta_hat_0 + mu0 * qa, theta_hat_0 + mu0 * qb
        if (da < 0) != (db < 0):
            root, slope, transversal = manifolds.find_transverse_intersection(
                "+", mu0, theta_hat_0, (ta, tb), section, config=icfg
            )
            intersection = {
                "theta_root": root,
                "slope": slope,
                "transversal": bool(transversal),
            }
            break
    summary = {
        "mus": mus,
        "worst_error": {f"{mu:g}": worst[mu] for mu in mus},
        "first_order_ratio": (
            worst[mus[0]] / worst[mus[1]] if len(mus) > 1 and worst[mus[1]] > 0 else None
        ),
        "intersection": intersection,
    }
    spath = outdir / "distance_summary.json"
    _write_json(spath, summary)
    outputs["distance_summary"] = spath
    return outputs


def cmd_eco(cfg: RunConfig, outdir: Path, threads: int) -> dict:
    section = SectionSpec(delta=cfg["delta"], h=cfg["h"])
    orbits = search.find_ecos(
        cfg["mu"], cfg["h"], k_max=cfg["eco.k_max"], section=section,
        config=cfg.integrator(), n_probe=cfg["eco.n_probe"],
    )
    outputs = {}
    records = []
    for orbit in orbits:
        eject, exc, capture = search.eco_trajectory(orbit, section, cfg.integrator())
        epath = outdir / f"eco_{orbit.k}_ejection.csv"
        cpath = outdir / f"eco_{orbit.k}_capture.csv"
        eject.to_csv(epath)
        capture.to_csv(cpath)
        outputs[f"eco_{orbit.k}_ejection"] = epath
        outputs[f"eco_{orbit.k}_capture"] = cpath
        rec = orbit.as_dict()
        rec["ejection_trajectory"] = epath.name
        rec["capture_trajectory"] = cpath.name
        rec["capture_classification"] = capture.flags.get("classification")
        rec["capture_s_min"] = capture.flags.get("s_min")
        # a matched orbit reaches s ~ sqrt(residual * delta), far above the
        # hard capture floor; "ends in collision" means within the fiber
        # seeding tolerance
        rec["collision_within_s0"] = bool(capture.flags.get("s_min", 1.0) < 1e-4)
        records.append(rec)
    path = outdir / "eco.json"
    _write_json(path, {"orbits": records, "count": len(records)})
    outputs["eco"] = path
    return outputs


def cmd_triple(cfg: RunConfig, outdir: Path, threads: int) -> dict:
    res = search.find_triple_energy(cfg["mu"], cfg["triple.delta"], cfg.integrator())
    payload = res.as_dict()
    payload["h_star_over_mu"] = res.h_star / res.mu
    payload["angles_ordered"] = bool(-math.pi / 2 < res.angle_A < res.angle_B < 0.0)
    payload["slope_antisymmetry_rel"] = abs(res.d_plus_slope + res.d_minus_slope) / abs(
        res.d_plus_slope
    )
    path = outdir / "triple.json"
    _write_json(path, payload)
    return {"triple": path}


def cmd_localmap(cfg: RunConfig, outdir: Path, threads: int) -> dict:
    nus = np.geomspace(cfg["localmap.nu_min"], cfg["localmap.nu_max"], cfg["localmap.n_nu"])
    z0, z1 = cfg["localmap.z0"], cfg["localmap.z_slope"]
    rep = localmap.verify_transition_estimates(
        cfg["localmap.delta"], nus, cfg["mu"], cfg["h"],
        z_in=lambda nu: z0 + z1 * nu, config=cfg.integrator(),
    )
    jpath = outdir / "transit.json"
    cpath = outdir / "transit.csv"
    rep.to_json(jpath)
    rep.to_csv(cpath)
    return {"transit_report": jpath, "transit_data": cpath}


def cmd_integrate(cfg: RunConfig, outdir: Path, threads: int) -> dict:
    from . import flow

    name = cfg["integrate.field"].upper()
    try:
        field = FieldId[name]
    except KeyError:
        raise ConfigError(f"unknown field {cfg['integrate.field']!r}")
    state = [float(x) for x in str(cfg["integrate.state"]).split(",")]
    traj = flow.integrate(
        field, state, (cfg["integrate.t0"], cfg["integrate.t1"]), cfg["mu"],
        cfg["h"], cfg.integrator(),
    )
    path = outdir / "trajectory.csv"
    traj.to_csv(path)
    return {"trajectory": path}


COMMANDS = {
    "melnikov-scan": cmd_melnikov_scan,
    "distance": cmd_distance,
    "eco": cmd_eco,
    "triple": cmd_triple,
    "localmap": cmd_localmap,
    "integrate": cmd_integrate,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="pcrtbp",
        description="Collision/infinity manifold laboratory for the planar "
        "circular restricted three-body problem",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, default=None, help="config file (key = value)")
        p.add_argument("--out", type=Path, default=Path("run"), help="output directory")
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--seed", type=int, default=None, help="override the config seed")

    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0

    started = datetime.datetime.now(datetime.timezone.utc).isoformat()
    try:
        overrides = {"seed": args.seed} if args.seed is not None else None
        cfg = RunConfig.load(args.config, overrides)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    outdir = args.out
    outdir.mkdir(parents=True, exist_ok=True)
    try:
        outputs = COMMANDS[args.command](cfg, outdir, max(1, args.threads))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # numerical failure: diagnose, exit 1
        diag = outdir / "diagnostic.json"
        _write_json(diag, {"command": args.command, "error": repr(exc)})
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 1
    manifest = write_manifest(outdir, cfg, outputs, started, args.command)
    print(manifest)
    return 0


if __name__ == "__main__":
    sys.exit(main())
