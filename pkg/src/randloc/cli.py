"""Command-line front end.

Every subcommand reads an optional `key = value` config file, applies
`--set` overrides, resolves against its typed schema, and writes CSV
files plus a `config.echo` into `<out>/<subcommand>/<name-or-hash>/`.
Outputs carry the resolved config in `#` header lines and contain no
timestamps, so re-running an identical config rewrites identical bytes.

Exit codes: 0 success, 1 invalid configuration or arguments, 2 solver or
quadrature non-convergence (including mass-loss and step instability),
3 filesystem trouble.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .csvio import format_value, write_density, write_table, write_trajectory
from .errors import ConfigError, ConvergenceError, MassLossError, StepInstabilityError
from .gamma import closed_trajectory, gamma_ode
from .gaussoracle import GaussPair, convergence_study, posterior_moments
from .meanfield import SolverConfig, evolve_transient, residual_resummed, residual_steady, solve_steady
from .popmc import empirical_density, run_steady, run_transient
from .udist import UGrid, default_init_density, exponential_density, moment, point_mass

__all__ = ["main"]


def _meta(cfg: dict, **extra) -> dict:
    out = {}
    for k, v in cfg.items():
        out[k] = ",".join(format_value(x) for x in v) if isinstance(v, tuple) else v
    out.update(extra)
    return out


def _run_dir(out_root: str, subcommand: str, cfg: dict) -> Path:
    d = Path(out_root) / subcommand / cfgmod.run_name(cfg)
    d.mkdir(parents=True, exist_ok=True)
    (d / "config.echo").write_text(
        "\n".join(cfgmod.echo_lines(cfg)) + "\n", encoding="utf-8", newline="\n"
    )
    return d


def _solver_config(cfg: dict, **kw) -> SolverConfig:
    return SolverConfig(
        u_max=cfg["u_max"],
        h=cfg["h"],
        alpha=cfg["alpha"],
        tol_fixed_point=cfg["tol_fixed_point"],
        max_iters=cfg["max_iters"],
        **kw,
    )


_INITS = {"ue": default_init_density, "exp": exponential_density, "point": lambda g: point_mass(g, 1.0)}


def cmd_gamma(cfg: dict, run_dir: Path) -> None:
    if cfg["method"] == "closed":
        traj = closed_trajectory(cfg["g0"], cfg["tau_end"], cfg["dtau"])
    else:
        traj = gamma_ode(cfg["g0"], cfg["tau_end"], cfg["dtau"])
    write_trajectory(run_dir / "gamma.csv", traj.taus, traj.values, _meta(cfg))


def cmd_steady(cfg: dict, run_dir: Path) -> None:
    sc = _solver_config(cfg)
    p = solve_steady(sc, cfg["init"])
    resid = residual_steady(p)
    write_density(
        run_dir / "steady.csv",
        p,
        _meta(cfg, residual_l1=resid.l1, residual_sup=resid.sup, mean_u=moment(p, 1)),
    )


def cmd_transient(cfg: dict, run_dir: Path) -> None:
    dtau = cfg["dtau"] if cfg["dtau"] > 0.0 else None
    sc = _solver_config(cfg, dtau=dtau)
    grid = sc.grid
    p0 = _INITS[cfg["init"]](grid)
    if cfg["g_mode"] == "closed":
        g = closed_trajectory(cfg["g0"], cfg["tau_end"], sc.dtau_resolved)
    else:
        g = float(cfg["g0"])
    if cfg["residual_m_max"] > 0 and cfg["snapshot_stride"] > 10:
        raise ConfigError(
            "residual_m_max needs snapshot_stride <= 10 so the time quadrature "
            "has dense enough snapshots"
        )
    sol = evolve_transient(p0, g, cfg["tau_end"], sc, snapshot_stride=cfg["snapshot_stride"])
    n_nodes = grid.n_nodes
    taus = np.repeat(sol.taus, n_nodes)
    us = np.tile(grid.nodes(), sol.taus.size)
    write_table(
        run_dir / "transient.csv",
        {"tau": taus, "u": us, "p": sol.densities.ravel()},
        _meta(cfg, max_renorm_drift=sol.max_renorm_drift, lost_mass=sol.lost_mass),
    )
    if cfg["residual_m_max"] > 0:
        res = residual_resummed(sol, g, cfg["residual_m_max"])
        write_table(
            run_dir / "residual.csv",
            {"tau": res.taus, "residual_l1": res.footnote},
            _meta(cfg),
        )


def _hist_grid(cfg: dict) -> UGrid:
    return UGrid.from_spacing(cfg["hist_u_max"], cfg["hist_h"])


def _write_mc_outputs(run_dir: Path, cfg: dict, seed: int, snaps, final_pop) -> None:
    taus = [s.tau for s in snaps] + [final_pop.tau]
    gs = [s.g_empirical for s in snaps] + [final_pop.g_empirical]
    write_trajectory(
        run_dir / f"g_seed{seed}.csv", np.asarray(taus), np.asarray(gs),
        _meta(cfg, seed=seed, overflow_count=final_pop.overflow_count),
        names=("tau", "g_empirical"),
    )
    grid = _hist_grid(cfg)
    blocks_t, blocks_u, blocks_p = [], [], []
    for s in snaps:
        if s.u_values.size == 0:
            continue
        d = empirical_density(s.u_values, grid)
        blocks_t.append(np.full(grid.n_nodes, s.tau))
        blocks_u.append(grid.nodes())
        blocks_p.append(d.values)
    if final_pop.n_localized > 0:
        d = empirical_density(final_pop, grid)
        blocks_t.append(np.full(grid.n_nodes, final_pop.tau))
        blocks_u.append(grid.nodes())
        blocks_p.append(d.values)
    write_table(
        run_dir / f"density_seed{seed}.csv",
        {
            "tau": np.concatenate(blocks_t) if blocks_t else np.empty(0),
            "u_bin": np.concatenate(blocks_u) if blocks_u else np.empty(0),
            "p_hat": np.concatenate(blocks_p) if blocks_p else np.empty(0),
        },
        _meta(cfg, seed=seed),
    )


def _mc_one(subcommand: str, cfg: dict, run_dir_s: str, seed: int) -> None:
    run_dir = Path(run_dir_s)
    inner = [t for t in cfg["snapshot_taus"] if t < cfg["tau_end"] - 1e-12]
    if subcommand == "mc-steady":
        pop, snaps = run_steady(
            cfg["m_particles"], cfg["tau_end"], seed, inner, u_ceiling=cfg["u_ceiling"]
        )
    else:
        pop, snaps = run_transient(
            cfg["m_particles"], cfg["g0"], cfg["tau_end"], seed,
            cfg["entrant_rule"], inner,
            entrant_cap=cfg["entrant_cap"], u_ceiling=cfg["u_ceiling"],
        )
    _write_mc_outputs(run_dir, cfg, seed, snaps, pop)


def cmd_mc(subcommand: str, cfg: dict, run_dir: Path, jobs: int) -> None:
    seeds = cfg["seeds"]
    if not seeds:
        raise ConfigError("seeds must list at least one integer")
    if jobs > 1 and len(seeds) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(seeds))) as ex:
            futures = [
                ex.submit(_mc_one, subcommand, cfg, str(run_dir), s) for s in seeds
            ]
            for f in futures:
                f.result()
    else:
        for s in seeds:
            _mc_one(subcommand, cfg, str(run_dir), s)


def cmd_oracle(cfg: dict, run_dir: Path) -> None:
    kw = dict(
        box_convention=cfg["box_convention"],
        halfwidth_sigmas=cfg["halfwidth_sigmas"],
        quad_points=cfg["quad_points"],
        max_doublings=cfg["max_doublings"],
    )
    boxes = cfg["boxes"]
    extra = {}
    if cfg["fit_order"] == "yes":
        study = convergence_study(cfg["xi1_sq"], cfg["xi2_sq"], boxes, **kw)
        boxes_out = study.boxes
        moments = study.moments
        extra["fitted_order"] = study.order
    else:
        boxes_out = np.asarray(sorted((float(b) for b in boxes), reverse=True))
        moments = tuple(
            posterior_moments(GaussPair(cfg["xi1_sq"], cfg["xi2_sq"], b, **kw))
            for b in boxes_out
        )
    write_table(
        run_dir / "oracle.csv",
        {
            "box": boxes_out,
            "var1": np.array([m.var1 for m in moments]),
            "var2": np.array([m.var2 for m in moments]),
            "var_rel": np.array([m.var_rel for m in moments]),
            "norm": np.array([m.norm for m in moments]),
        },
        _meta(cfg, **extra),
    )


def cmd_fig1(cfg: dict, run_dir: Path) -> None:
    for g0 in cfg["g0_list"]:
        traj = closed_trajectory(g0, cfg["tau_end"], cfg["dtau"])
        write_trajectory(
            run_dir / f"curve_{g0!r}.csv", traj.taus, traj.values, _meta(cfg, g0=g0)
        )
    sc = SolverConfig(
        u_max=cfg["u_max"], h=cfg["h"], alpha=cfg["alpha"],
        tol_fixed_point=cfg["tol_fixed_point"], max_iters=cfg["max_iters"],
    )
    p = solve_steady(sc)
    write_density(run_dir / "inset_steady.csv", p, _meta(cfg, mean_u=moment(p, 1)))


_DISPATCH = {
    "gamma": cmd_gamma,
    "steady": cmd_steady,
    "transient": cmd_transient,
    "oracle": cmd_oracle,
    "fig1": cmd_fig1,
}


def _parse_sets(pairs: list[str]) -> dict[str, str]:
    out = {}
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError(f"--set expects key=value, got {pair!r}")
        key, _, val = pair.partition("=")
        out[key.strip()] = val.strip()
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="randloc",
        description="Mean-field kinetics of measurement-induced random localization.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in cfgmod.SCHEMAS:
        p = sub.add_parser(name, help=f"run the {name} computation")
        p.add_argument("--config", default=None, help="key = value config file")
        p.add_argument(
            "--set", action="append", default=[], metavar="KEY=VALUE",
            help="override one config key (repeatable)",
        )
        p.add_argument("--seed", type=int, default=None, help="single MC seed shortcut")
        p.add_argument("--out", default="out", help="output root directory")
        p.add_argument("--jobs", type=int, default=1, help="parallel workers for seed sweeps")
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        overrides = _parse_sets(args.set)
        cfg = cfgmod.resolve(args.subcommand, args.config, overrides)
        if args.seed is not None:
            if "seeds" not in cfg:
                raise ConfigError(f"subcommand {args.subcommand} takes no --seed")
            cfg["seeds"] = (args.seed,)
        run_dir = _run_dir(args.out, args.subcommand, cfg)
        if args.subcommand in ("mc-steady", "mc-transient"):
            cmd_mc(args.subcommand, cfg, run_dir, args.jobs)
        else:
            _DISPATCH[args.subcommand](cfg, run_dir)
        print(run_dir)
        return 0
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ConvergenceError, MassLossError, StepInstabilityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
