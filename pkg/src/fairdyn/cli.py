"""Command line entry point: ``fairdyn {simulate,equilibrium,sweep,suite,check}``."""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
import time
import warnings

from .config import ConfigError, ScenarioConfig, apply_sweep_value, load
from .dynamics import fmt, simulate
from .equilibrium import find_equilibria

EXIT_OK, EXIT_VIOLATION, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3

log = logging.getLogger("fairdyn")


def _out_dir(args, cfg: ScenarioConfig | None) -> str:
    out = args.out or (cfg.out if cfg is not None else None) or "."
    os.makedirs(out, exist_ok=True)
    return out


def _settings(args, cfg: ScenarioConfig) -> tuple[int, float]:
    max_steps = args.max_steps if args.max_steps is not None else cfg.max_steps
    tol = args.tol if args.tol is not None else cfg.tol
    return max_steps, tol


def _initial_states(args, cfg: ScenarioConfig):
    if cfg.initial_states and args.seed is None:
        return cfg.initial_states
    from .config import _initial_states

    seed = cfg.seed if args.seed is None else args.seed
    n = max(len(cfg.initial_states), 6)
    return _initial_states({"random": n}, seed, "initial_states")


def _plot_phase(path, cfg: ScenarioConfig, trajectories) -> None:
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        warnings.warn("matplotlib is not installed; skipping plots")
        return
    from .equilibrium import balanced_functions

    fig, axes = plt.subplots(1, len(cfg.constraints), figsize=(4.2 * len(cfg.constraints), 4),
                             squeeze=False)
    for ax, c in zip(axes[0], cfg.constraints):
        bf = balanced_functions(cfg.scenario, c, grid=41)
        for i, roots in enumerate(bf.psi_a):
            ax.plot(roots, [bf.grid[i]] * len(roots), ".", color="tab:blue", ms=2)
        for i, roots in enumerate(bf.psi_b):
            ax.plot([bf.grid[i]] * len(roots), roots, ".", color="tab:orange", ms=2)
        for traj in trajectories[c]:
            xs = [s.alpha_a for s in traj.states]
            ys = [s.alpha_b for s in traj.states]
            ax.plot(xs, ys, "-", lw=0.8, color="0.3")
            ax.plot(xs[-1], ys[-1], "*", color="red", ms=9)
        ax.set(xlim=(0, 1), ylim=(0, 1), xlabel="alpha A", ylabel="alpha B", title=c.value)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def cmd_simulate(args, cfg: ScenarioConfig) -> int:
    out = _out_dir(args, cfg)
    max_steps, tol = _settings(args, cfg)
    inits = _initial_states(args, cfg)
    trajectories = {}
    for c in cfg.constraints:
        trajectories[c] = []
        for i, s0 in enumerate(inits):
            traj = simulate(cfg.scenario, c, s0, max_steps=max_steps, tol=tol)
            traj.to_csv(os.path.join(out, f"{cfg.name}_{c.value}_{i}.csv"))
            trajectories[c].append(traj)
            f = traj.final
            print(f"{c.value:5s} start=({fmt(s0.alpha_a)}, {fmt(s0.alpha_b)}) "
                  f"{traj.termination} final=({fmt(f.alpha_a)}, {fmt(f.alpha_b)})")
    if cfg.generation is not None:
        from .gendyn import gen_simulate

        g = cfg.generation
        traj = gen_simulate(g.model, g.initial_alpha, max_steps=max_steps, tol=tol)
        with open(os.path.join(out, f"{cfg.name}_generation.csv"), "w", newline="",
                  encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["step", "zeta11", "zeta10", "zeta01", "zeta00", "alpha", "theta"])
            for k, (s, th) in enumerate(zip(traj.states, traj.thresholds)):
                w.writerow([k, *map(fmt, s.as_array()), fmt(s.alpha), fmt(th)])
        print(f"generation {traj.termination} alpha={fmt(traj.final.alpha)}")
    if args.plot:
        _plot_phase(os.path.join(out, f"{cfg.name}_phase.png"), cfg, trajectories)
    return EXIT_OK


EQ_COLUMNS = ["constraint", "index", "alphaA", "alphaB", "disparity", "residual", "stable",
              "conditionA", "conditionB", "unique_by_theorem2", "lipschitz"]


def _equilibrium_rows(scenario, c):
    rep = find_equilibria(scenario, c, diagnostics=True)
    uniq = "unknown" if rep.unique_by_theorem2 is None else str(rep.unique_by_theorem2)
    for i, (e, r, st) in enumerate(zip(rep.equilibria, rep.residuals, rep.stable_flags)):
        yield [c.value, i, fmt(e.alpha_a), fmt(e.alpha_b), fmt(e.disparity), fmt(r), str(st),
               *rep.condition_class, uniq, fmt(rep.lipschitz_constant_estimate)]


def cmd_equilibrium(args, cfg: ScenarioConfig) -> int:
    out = _out_dir(args, cfg)
    path = os.path.join(out, f"{cfg.name}_equilibria.csv")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(EQ_COLUMNS)
        for c in cfg.constraints:
            for row in _equilibrium_rows(cfg.scenario, c):
                w.writerow(row)
                print(",".join(str(v) for v in row))
    if cfg.generation is not None:
        _generation_equilibrium(cfg, out)
    return EXIT_OK


def _generation_equilibrium(cfg: ScenarioConfig, out: str) -> None:
    from .gendyn import gen_equilibrium

    model = cfg.generation.model
    variant = model.variant()
    if variant is None:
        print("generation: equilibrium structure only characterised for the restricted variants")
        return
    rep = gen_equilibrium(model, variant)
    with open(os.path.join(out, f"{cfg.name}_generation_equilibria.csv"), "w", newline="",
              encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["variant", "index", "alpha", "zeta", "residual", "feasible", "stable",
                    "base_alpha", "predicted", "observed"])
        base = rep.base_equilibria[0] if len(rep.base_equilibria) == 1 else None
        for i, ((a, z), r, fe, st) in enumerate(zip(rep.equilibria, rep.residuals,
                                                     rep.feasible, rep.stable)):
            w.writerow([variant, i, fmt(a), fmt(z), fmt(r), str(fe), str(st), fmt(base),
                        rep.predicted or "", rep.observed or ""])
    print(f"generation ({variant}): equilibria={rep.equilibria} base={rep.base_equilibria} "
          f"predicted={rep.predicted} observed={rep.observed}")


SWEEP_COLUMNS = ["point", "value", "constraint", "kind", "index", "alphaA", "alphaB",
                 "disparity", "stable", "period"]


def _sweep_point(cfg: ScenarioConfig, k: int, value: float, max_steps: int, tol: float):
    sc = apply_sweep_value(cfg.scenario, cfg.sweep, value)
    rows = []
    start = cfg.initial_states[0] if cfg.initial_states else None
    for c in cfg.constraints:
        rep = find_equilibria(sc, c)
        for i, (e, st) in enumerate(zip(rep.equilibria, rep.stable_flags)):
            rows.append([k, fmt(value), c.value, "equilibrium", i, fmt(e.alpha_a),
                         fmt(e.alpha_b), fmt(e.disparity), str(st), ""])
        if start is not None:
            traj = simulate(sc, c, start, max_steps=max_steps, tol=tol)
            f = traj.final
            kind = traj.termination.kind
            rows.append([k, fmt(value), c.value, kind, 0, fmt(f.alpha_a), fmt(f.alpha_b),
                         fmt(f.disparity), "", traj.termination.period or ""])
    return rows


def cmd_sweep(args, cfg: ScenarioConfig) -> int:
    if cfg.sweep is None:
        raise ConfigError("sweep", "config has no sweep block")
    out = _out_dir(args, cfg)
    max_steps, tol = _settings(args, cfg)
    jobs = list(enumerate(cfg.sweep.values))
    if args.jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(args.jobs) as pool:
            results = list(pool.map(_sweep_point, [cfg] * len(jobs), [k for k, _ in jobs],
                                    [v for _, v in jobs], [max_steps] * len(jobs),
                                    [tol] * len(jobs)))
    else:
        results = [_sweep_point(cfg, k, v, max_steps, tol) for k, v in jobs]
    path = os.path.join(out, f"{cfg.name}_sweep.csv")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(SWEEP_COLUMNS)
        for rows in results:
            w.writerows(rows)
    print(f"wrote {sum(map(len, results))} rows to {path}")
    return EXIT_OK


def cmd_suite(args) -> int:
    from .analysis import SUITES, run_suite

    if args.name not in SUITES:
        print(f"unknown suite {args.name!r}; choose from {', '.join(sorted(SUITES))}",
              file=sys.stderr)
        return EXIT_CONFIG
    seed = 0 if args.seed is None else args.seed
    t0 = time.perf_counter()
    results = run_suite(args.name, args.n, seed)
    dt = time.perf_counter() - t0
    for res in results:
        if args.out:
            os.makedirs(args.out, exist_ok=True)
            res.to_csv(os.path.join(args.out, f"suite_{res.name}.csv"))
        print(f"{res.name}: {res.passed}/{res.total} passed, {res.skipped} skipped")
        for row in res.failures():
            print(f"  FAIL {row}")
    print(f"elapsed {dt:.1f} s")
    return EXIT_OK if all(r.ok for r in results) else EXIT_VIOLATION


def cmd_check(args, cfg: ScenarioConfig) -> int:
    sc = cfg.scenario
    print(f"{cfg.name}: conditions A={sc.conditions[0]} B={sc.conditions[1]}, "
          f"constraints={[c.value for c in cfg.constraints]}, "
          f"{len(cfg.initial_states)} initial states"
          + (f", sweep over {len(cfg.sweep.values)} points" if cfg.sweep else "")
          + (", generation block" if cfg.generation else ""))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fairdyn",
                                description="Qualification dynamics under fair threshold policies")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config=True):
        if config:
            sp.add_argument("--config", required=True, help="JSON scenario file or bundled name")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--out", default=None, help="output directory")
        sp.add_argument("--plot", action="store_true")
        sp.add_argument("--tol", type=float, default=None)
        sp.add_argument("--max-steps", type=int, default=None)
        return sp

    common(sub.add_parser("simulate", help="trajectories for every constraint and start"))
    common(sub.add_parser("equilibrium", help="equilibria, stability and uniqueness"))
    sp = common(sub.add_parser("sweep", help="equilibria over a parameter grid"))
    sp.add_argument("--jobs", type=int, default=1, help="worker processes")
    sp = common(sub.add_parser("suite", help="run a randomized property suite"), config=False)
    sp.add_argument("name")
    sp.add_argument("--n", type=int, default=None, help="number of scenarios")
    common(sub.add_parser("check", help="validate a config file"))
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if args.tol is not None and args.tol <= 0:
        parser.error("--tol must be positive")
    if args.max_steps is not None and args.max_steps < 1:
        parser.error("--max-steps must be at least 1")
    try:
        if args.command == "suite":
            return cmd_suite(args)
        cfg = load(args.config)
        handler = {"simulate": cmd_simulate, "equilibrium": cmd_equilibrium,
                   "sweep": cmd_sweep, "check": cmd_check}[args.command]
        return handler(args, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ArithmeticError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
