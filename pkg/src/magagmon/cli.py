"""Experiment CLI: config-driven runs that emit CSV/JSON artifacts plus a manifest.

Every run records the config hash, seed, and library versions; identical
config and seed produce byte-identical numeric artifacts, and --threads only
distributes fixed work chunks, so it never changes any output byte.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys

import numpy as np

from . import __version__
from .agmon import (AgmonParams, ConcaveBound, ConfineBound, NU1_DISC,
                    OptimizerSpec, agmon_distance, beta_bar, BetaBarQuery,
                    carmona_bound, classically_allowed, corollary_bounds)
from .config import ConfigError, RunConfig, load_config
from .fields import (ScalarField2D, VectorField2D, constant_field, concave_field,
                     gaussian_bump_field, grid_field, kato_lp_check, landau_gauge,
                     radial_quadratic_field, split_field, transversal_gauge)
from .geometry import Domain, Grid2D, Polyline, make_grid
from .heatkernel import fki_kernel_estimate, mehler_kernel
from .paths import Sampling, dump_paths, levy_area, mc_from_values, sample_brownian
from .spectral import build_peierls, ground_state_profile, lowest_eigenpairs
from .verify import default_sample_points, verify_decay

_F = "{:.17g}".format


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return _F(float(v))
    return str(v)


class ArtifactWriter:
    """Collects artifacts in an output directory and finalizes the manifest."""

    def __init__(self, out_dir: str):
        self.out_dir = out_dir
        self.entries = []
        os.makedirs(out_dir, exist_ok=True)

    def write_csv(self, name: str, header: str, rows) -> str:
        path = os.path.join(self.out_dir, name)
        n = 0
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(header + "\n")
            for row in rows:
                fh.write(",".join(_fmt(v) for v in row) + "\n")
                n += 1
        self._register(name, path, n)
        return path

    def write_text(self, name: str, text: str, rows: int = 0) -> str:
        path = os.path.join(self.out_dir, name)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        self._register(name, path, rows)
        return path

    def write_json(self, name: str, payload) -> str:
        return self.write_text(name, json.dumps(payload, sort_keys=True, indent=2,
                                                 default=_json_default) + "\n")

    def _register(self, name: str, path: str, rows: int):
        with open(path, "rb") as fh:
            digest = hashlib.sha256(fh.read()).hexdigest()
        self.entries.append({"name": name, "rows": rows, "sha256": digest})

    def finalize(self, cfg: RunConfig, seed: int) -> str:
        manifest = {
            "subcommand": cfg.subcommand,
            "config_sha256": hashlib.sha256(cfg.text.encode()).hexdigest(),
            "seed": seed,
            "versions": {
                "magagmon": __version__,
                "numpy": np.__version__,
                "python": ".".join(map(str, sys.version_info[:3])),
            },
            "artifacts": sorted(self.entries, key=lambda e: e["name"]),
        }
        import scipy
        manifest["versions"]["scipy"] = scipy.__version__
        path = os.path.join(self.out_dir, "manifest.json")
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(json.dumps(manifest, sort_keys=True, indent=2) + "\n")
        return path


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


# ---------------------------------------------------------------------------
# config -> objects
# ---------------------------------------------------------------------------

def _field_from(cfg: RunConfig) -> ScalarField2D:
    kind = cfg["field.kind"]
    if kind == "constant":
        return constant_field(cfg["field.beta0"])
    if kind == "zero":
        return constant_field(0.0)
    if kind == "radial-quadratic":
        return radial_quadratic_field(cfg["field.beta0"])
    if kind == "concave":
        return concave_field(cfg["field.beta0"], cfg["field.curvature"])
    if kind == "gaussian-bump":
        return gaussian_bump_field(cfg["field.beta0"], cfg["field.width"])
    if kind == "grid":
        path = cfg["field.csv"]
        if not path:
            raise ConfigError("field.csv", "grid-backed field needs a sample file")
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        xs = np.unique(data[:, 0])
        ys = np.unique(data[:, 1])
        if len(xs) * len(ys) != len(data):
            raise ConfigError("field.csv", "samples must cover a full x,y grid")
        order = np.lexsort((data[:, 1], data[:, 0]))
        values = data[order, 2].reshape(len(xs), len(ys))
        return grid_field(xs, ys, values)
    raise ConfigError("field.kind", f"unknown field kind {kind!r}")


def _gauge_from(cfg: RunConfig, beta: ScalarField2D) -> VectorField2D:
    if cfg["gauge.kind"] == "landau":
        if beta.kind != "constant":
            raise ConfigError("gauge.kind", "landau gauge needs a constant field")
        return landau_gauge(beta.beta0 if beta.beta0 is not None else 0.0)
    return transversal_gauge(beta, cfg["gauge.quad_n"])


def _domain_from(cfg: RunConfig) -> Domain:
    kind = cfg["domain.kind"]
    if kind == "rectangle":
        return Domain.rectangle(cfg["domain.xmin"], cfg["domain.xmax"],
                                cfg["domain.ymin"], cfg["domain.ymax"])
    if kind == "disc":
        return Domain.disc(cfg["domain.center"], cfg["domain.radius"])
    return Domain.plane()


def _grid_from(cfg: RunConfig, domain: Domain) -> Grid2D:
    box = None
    if domain.kind == "plane":
        hw = cfg["grid.box_halfwidth"]
        box = (-hw, hw, -hw, hw)
    return make_grid(domain, cfg["grid.nx"], cfg["grid.ny"], box=box)


def _params_from(cfg: RunConfig) -> AgmonParams:
    nu1 = cfg["agmon.nu1"]
    return AgmonParams(lam=cfg["agmon.lambda"], a=cfg["agmon.a"],
                       nu1=NU1_DISC if nu1 is None else nu1,
                       convention=cfg["agmon.convention"])


def _opt_from(cfg: RunConfig, grid: Grid2D) -> OptimizerSpec:
    if cfg["opt.preset"] == "light":
        return OptimizerSpec.light(grid, seed=cfg["opt.seed"])
    return OptimizerSpec(grid, restarts=cfg["opt.restarts"],
                         interior_vertices=cfg["opt.interior_vertices"],
                         seed=cfg["opt.seed"], max_cycles=cfg["opt.max_cycles"],
                         n_gh=cfg["quad.n_gh"] if "quad.n_gh" in cfg.values else 20,
                         n_s=cfg["quad.n_s"] if "quad.n_s" in cfg.values else 16)


def _point_str(p) -> str:
    return f"{_F(float(p[0]))} {_F(float(p[1]))}"


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_heatkernel(cfg: RunConfig, writer: ArtifactWriter, seed: int, threads: int) -> None:
    if cfg["field.kind"] != "constant":
        raise ConfigError("field.kind", "heatkernel reference needs a constant field")
    beta0 = cfg["field.beta0"]
    x = np.asarray(cfg["heatkernel.x"])
    y = np.asarray(cfg["heatkernel.y"])
    sampling = Sampling(cfg["sampling.n_steps"], cfg["sampling.n_paths"], seed,
                        cfg["sampling.chunk"], threads)
    method = cfg["heatkernel.method"]
    rows = []
    for t in cfg["heatkernel.t"]:
        if method in ("mehler", "all"):
            k = mehler_kernel(x, y, t, beta0)
            rows.append((_point_str(x), _point_str(y), t, k.real, k.imag, 0.0, "mehler"))
        if method in ("bridge", "all"):
            est = fki_kernel_estimate(x, y, t, beta0, sampling, method="bridge")
            rows.append((_point_str(x), _point_str(y), t, est.value.real,
                         est.value.imag, est.stderr, "bridge"))
        if method in ("binned", "all"):
            est = fki_kernel_estimate(x, y, t, beta0, sampling, method="binned",
                                      bin_radius=cfg["heatkernel.bin_radius"])
            rows.append((_point_str(x), _point_str(y), t, est.value.real,
                         est.value.imag, est.stderr, "binned"))
    writer.write_csv("kernel.csv", "x,y,t,re,im,stderr,method", rows)


def cmd_levy_area(cfg: RunConfig, writer: ArtifactWriter, seed: int, threads: int) -> None:
    x = np.asarray(cfg["levy.x"])
    horizon = cfg["levy.horizon"]
    beta0 = cfg["levy.beta0"]
    bundle = sample_brownian(x, horizon, cfg["sampling.n_steps"],
                             cfg["sampling.n_paths"], seed)
    areas = levy_area(bundle)
    mean_est = mc_from_values(areas, seed)
    char_est = mc_from_values(np.exp(1j * beta0 * areas), seed)
    reference = 1.0 / np.cosh(beta0 * horizon)  # characteristic function of the area
    rows = [
        ("mean_area", mean_est.value, 0.0, mean_est.stderr, 0.0, 0.0),
        ("char_fn", char_est.value.real, char_est.value.imag, char_est.stderr,
         reference, 0.0),
    ]
    writer.write_csv("levy.csv",
                     "quantity,re,im,stderr,reference_re,reference_im", rows)
    if cfg["levy.dump_paths"]:
        path = os.path.join(writer.out_dir, "paths.csv")
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            n = dump_paths(bundle, fh)
        writer._register("paths.csv", path, n)


def cmd_betabar(cfg: RunConfig, writer: ArtifactWriter, seed: int, threads: int) -> None:
    beta = _field_from(cfg)
    x = cfg["betabar.x"]
    rows = []
    for p in cfg["betabar.p"]:
        for t in cfg["betabar.t"]:
            base = BetaBarQuery(beta, x, p, t, n_gh=cfg["quad.n_gh"],
                                n_s=cfg["quad.n_s"], seed=seed,
                                mc_samples=cfg["betabar.mc_samples"])
            if cfg["betabar.method"] in ("gh", "both"):
                rows.append((p[0], p[1], t, "gh", beta_bar(base), 0.0))
            if cfg["betabar.method"] in ("mc", "both"):
                est = beta_bar(BetaBarQuery(beta, x, p, t, n_gh=cfg["quad.n_gh"],
                                            n_s=cfg["quad.n_s"], method="mc",
                                            mc_samples=cfg["betabar.mc_samples"],
                                            seed=seed))
                rows.append((p[0], p[1], t, "mc", est.value, est.stderr))
    writer.write_csv("betabar.csv", "p1,p2,t,method,value,stderr", rows)


def cmd_agmon_dist(cfg: RunConfig, writer: ArtifactWriter, seed: int, threads: int) -> None:
    beta = _field_from(cfg)
    gauge = _gauge_from(cfg, beta)
    grid = make_grid(Domain.plane(), cfg["grid.nx"], cfg["grid.ny"],
                     box=(-cfg["grid.box_halfwidth"], cfg["grid.box_halfwidth"],
                          -cfg["grid.box_halfwidth"], cfg["grid.box_halfwidth"]))
    params = _params_from(cfg)
    opt = _opt_from(cfg, grid)
    results = []
    for i, x in enumerate(cfg["agmon.x"]):
        res = agmon_distance(np.asarray(x), gauge, beta, params, opt)
        entry = {
            "x": list(x),
            "distance": res.distance,
            "converged": res.converged,
            "diagnostics": res.diagnostics,
            "params": {"lambda": params.lam, "a": params.a, "nu1": params.nu1,
                       "convention": params.convention},
        }
        if res.polyline is not None:
            entry["polyline"] = {"t": res.polyline.times.tolist(),
                                 "x": res.polyline.vertices[:, 0].tolist(),
                                 "y": res.polyline.vertices[:, 1].tolist()}
            rows = zip(res.polyline.times, res.polyline.vertices[:, 0],
                       res.polyline.vertices[:, 1])
            writer.write_csv(f"polyline_{i}.csv", "t,x,y", rows)
        results.append(entry)
    writer.write_json("agmon.json", {"results": results})


def cmd_eigs(cfg: RunConfig, writer: ArtifactWriter, seed: int, threads: int) -> None:
    beta = _field_from(cfg)
    gauge = _gauge_from(cfg, beta)
    domain = _domain_from(cfg)
    grid = _grid_from(cfg, domain)
    op = build_peierls(grid, gauge)
    res = lowest_eigenpairs(op, cfg["eigs.k"])
    writer.write_csv("eigenvalues.csv", "j,lambda,residual",
                     [(j, res.eigenvalues[j], res.residuals[j])
                      for j in range(len(res.eigenvalues))])
    f = np.abs(res.to_grid(0))
    rows = []
    for i in range(grid.nx):
        for j in range(grid.ny):
            rows.append((i, j, grid.xs[i], grid.ys[j], f[i, j]))
    writer.write_csv("ground_absf.csv", "i,j,x,y,absf", rows)
    profile = ground_state_profile(res)
    writer.write_json("profile.json", {
        "amplitude_slope": profile.amplitude_slope,
        "density_slope": profile.density_slope,
        "argmax_point": list(profile.argmax_point),
        "eigenvalues": res.eigenvalues.tolist(),
        "gauge": res.gauge,
    })


def cmd_verify_bound(cfg: RunConfig, writer: ArtifactWriter, seed: int, threads: int) -> None:
    beta = _field_from(cfg)
    gauge = _gauge_from(cfg, beta)
    domain = _domain_from(cfg)
    grid = _grid_from(cfg, domain)
    op = build_peierls(grid, gauge)
    res = lowest_eigenpairs(op, max(1, cfg["eigs.k"]))
    params = _params_from(cfg)
    opt = _opt_from(cfg, grid)
    report = verify_decay(res, beta, gauge, params, opt)
    writer.write_csv("boundreport.csv", "x1,x2,absf,rho,slack", list(report.rows()))
    gauges = {report.gauge: report.log_ca}
    if beta.kind == "constant" and gauge.gauge == "landau":
        # the transversal gauge of a constant field equals the landau gauge
        gauges["transversal"] = report.log_ca
    writer.write_json("summary.json", {
        "lambda": report.lam,
        "f_inf": report.f_inf,
        "log_ca": report.log_ca,
        "violations_at_fitted_ca": report.violations,
        "correlation": report.correlation,
        "samples": len(report.abs_f),
        "gauges": gauges,
    })


def cmd_bounds(cfg: RunConfig, writer: ArtifactWriter, seed: int, threads: int) -> None:
    beta = _field_from(cfg)
    grid = make_grid(Domain.plane(), cfg["grid.nx"], cfg["grid.ny"],
                     box=(-cfg["grid.box_halfwidth"], cfg["grid.box_halfwidth"],
                          -cfg["grid.box_halfwidth"], cfg["grid.box_halfwidth"]))
    params = _params_from(cfg)
    opt = _opt_from(cfg, grid)
    kind_name = cfg["bounds.kind"]
    rows = []
    if kind_name in ("confine", "concave"):
        gauge = _gauge_from(cfg, beta)
        for x in cfg["bounds.x"]:
            res = agmon_distance(np.asarray(x), gauge, beta, params, opt)
            if res.polyline is None:
                raise ValueError("bounds: empty classically allowed region")
            if kind_name == "confine":
                kind = ConfineBound(cfg["bounds.beta0"], cfg["bounds.compact_radius"])
                val = corollary_bounds(kind, x, res.polyline, beta, params, grid)
                aux = float(np.sum((np.asarray(x) + res.polyline.end) ** 2))
            else:
                kind = ConcaveBound(cfg["bounds.beta_inf"])
                val = corollary_bounds(kind, x, res.polyline, beta, params, grid)
                aux = res.polyline.length()
            rows.append((kind_name, x[0], x[1], 0.0, val, aux))
    else:
        w = beta
        u = constant_field(cfg["bounds.u_level"])
        split = split_field(w, u, grid)
        nodes = grid.nodes().reshape(-1, 2)
        y = nodes[np.argmin(w.fn(nodes))]
        for x in cfg["bounds.x"]:
            poly = Polyline.line(np.asarray(x), y, n_segments=16)
            for horizon in cfg["bounds.horizons"]:
                out = carmona_bound(x, horizon, poly, split, params,
                                    params.lam, grid)
                rows.append(("carmona", x[0], x[1], horizon, out.value, out.w_tube_min))
    writer.write_csv("bounds.csv", "kind,x1,x2,horizon,value,aux", rows)


def cmd_kato_check(cfg: RunConfig, writer: ArtifactWriter, seed: int, threads: int) -> None:
    beta = _field_from(cfg)
    gauge = _gauge_from(cfg, beta)
    hw = cfg["grid.box_halfwidth"]
    box = Domain.rectangle(-hw, hw, -hw, hw)
    grid = make_grid(box, cfg["grid.nx"], cfg["grid.ny"])
    report = kato_lp_check(gauge, box, cfg["kato.p"], grid)
    writer.write_json("kato.json", {
        "finite": report.finite,
        "verdict": report.verdict,
        "sup_value": report.sup_value,
        "sup_center": list(report.sup_center),
        "exponent": report.exponent,
    })
    rows = []
    for i in range(grid.nx):
        for j in range(grid.ny):
            rows.append((grid.xs[i], grid.ys[j], report.ball_integrals[i, j]))
    writer.write_csv("kato_map.csv", "x,y,value", rows)


_COMMANDS = {
    "heatkernel": cmd_heatkernel,
    "levy-area": cmd_levy_area,
    "betabar": cmd_betabar,
    "agmon-dist": cmd_agmon_dist,
    "eigs": cmd_eigs,
    "verify-bound": cmd_verify_bound,
    "bounds": cmd_bounds,
    "kato-check": cmd_kato_check,
}

_NEEDS_SEED = ("heatkernel", "levy-area")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="magagmon",
        description="Decay metrics, stochastic heat kernels, and Dirichlet "
                    "eigenproblems for 2-D magnetic Schrodinger operators.")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="path to a key = value config file")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override sampling.seed")
        p.add_argument("--threads", type=int, default=1,
                       help="worker threads (never changes results)")
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.subcommand, args.config)
    except FileNotFoundError as err:
        print(f"magagmon: cannot read config: {err}", file=sys.stderr)
        return 2
    except ConfigError as err:
        print(f"magagmon: config error: {err}", file=sys.stderr)
        return 2

    seed = args.seed
    if seed is None:
        seed = cfg.values.get("sampling.seed")
    if seed is None and args.subcommand in _NEEDS_SEED:
        print("magagmon: config error: missing required key: sampling.seed",
              file=sys.stderr)
        return 2
    seed = int(seed) if seed is not None else 0

    out_dir = args.out or os.environ.get("MAGAGMON_OUT") or cfg.values.get("output.dir") or "out"
    writer = ArtifactWriter(out_dir)
    try:
        _COMMANDS[args.subcommand](cfg, writer, seed, max(1, args.threads))
    except ConfigError as err:
        print(f"magagmon: config error: {err}", file=sys.stderr)
        return 2
    except (ValueError, np.linalg.LinAlgError) as err:
        print(f"magagmon.{args.subcommand}: {err}", file=sys.stderr)
        return 1
    writer.finalize(cfg, seed)
    return 0


if __name__ == "__main__":
    sys.exit(main())
