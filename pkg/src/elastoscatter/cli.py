"""Command-line driver: spectrum | simulate | sweep | homogenize.

Exit codes: 0 success, 2 invalid input, 3 numerical failure.
"""
import argparse
import csv
import json
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from .effective import (EffectiveConfig, assemble_ls_system, compare_cluster_vs_effective,
                        effective_farfield, effective_matrix, homogenized_density_sign,
                        solve_effective)
from .errors import NumericalError, ValidationError
from .fields import (convergence_sweep, farfield, fit_slope, scattered_field, sphere_directions)
from .foldy import assemble_system, born_truncation, invertibility_check, solve
from .pipeline import prepare_cluster
from .scenario import load_scenario
from .spectra import shape_spectrum, write_spectrum


def _fmt(x):
    return f"{x:.17g}"


def _cplx_cols(prefix):
    return [f"{prefix}{c}_{part}" for c in "xyz" for part in ("re", "im")]


def _cplx_vals(v):
    return [_fmt(p) for z in v for p in (z.real, z.imag)]


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


class Run:
    """Collects report fields and the output manifest for one command."""

    def __init__(self, command, scenario, out):
        self.out = Path(out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.report = {"command": command, "scenario": str(scenario.source), "outputs": [],
                       "timings": {}}
        self._t = time.perf_counter()

    def file(self, name):
        p = self.out / name
        self.report["outputs"].append(str(p))
        return p

    def tick(self, label):
        now = time.perf_counter()
        self.report["timings"][label] = round(now - self._t, 6)
        self._t = now

    def finish(self):
        path = self.out / "report.json"
        with open(path, "w") as fh:
            json.dump(self.report, fh, indent=2, default=_jsonable)
        for p in self.report["outputs"]:
            if not Path(p).exists():
                raise NumericalError(f"missing output {p}")
        return path


def _jsonable(x):
    if isinstance(x, complex):
        return [x.real, x.imag]
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    return str(x)


def _spectrum(sc):
    shape = sc.shape.build(sc.source.parent if sc.source else Path("."))
    top = None if sc.shape.eigenpairs in (None, 0) else int(sc.shape.eigenpairs)
    return shape, shape_spectrum(shape, sc.material, top=top)


def cmd_spectrum(sc, args):
    run = Run("spectrum", sc, args.out)
    shape, spec = _spectrum(sc)
    run.tick("spectrum")
    write_spectrum(run.file("spectrum.csv"), spec)
    a, c = sc.config.a, sc.config.c
    rho = c / a**2
    groups = spec.clusters(sc.shape.group_tol)
    res = [{"n0": i, "multiplicity": len(g), "eigenvalue": float(spec.eigenvalues[g[0]]),
            "omega": float(np.sqrt(1.0 / (rho * a**2 * spec.eigenvalues[g[0]])))}
           for i, g in enumerate(groups)]
    run.report.update(shape=shape.name, resolution=list(shape.resolution), ncells=shape.ncells,
                      eigenpairs=len(spec), resonances=res,
                      negative_eigenvalues=spec.negative_eigenvalues.tolist())
    print(f"{shape.name} {shape.resolution} cells={shape.ncells}")
    for n in range(min(len(spec), args.top)):
        m = spec.moments[n]
        print(f"{n:4d} {spec.eigenvalues[n]:.10e}  m=({m[0]:+.4e}, {m[1]:+.4e}, {m[2]:+.4e})")
    for r in res[:5]:
        print(f"n0={r['n0']} mult={r['multiplicity']} omega={r['omega']:.8g}")
    if spec.negative_eigenvalues.size:
        print(f"warning: {spec.negative_eigenvalues.size} non-positive eigenvalues excluded from resonances")
    return run


def _prepared(sc, spec_b, shape, a=None):
    cfg = sc.config if a is None else replace(sc.config, a=a)
    return prepare_cluster(sc.material, spec_b, cfg, shape.circumradius, sc.shape.group_tol)


def cmd_simulate(sc, args):
    run = Run("simulate", sc, args.out)
    shape, spec = _spectrum(sc)
    pc = _prepared(sc, spec, shape)
    cl, freq = pc.cluster, pc.freq
    run.tick("setup")
    system = assemble_system(cl, sc.material, freq, sc.wave)
    inv = invertibility_check(system)
    N = args.born if args.born is not None else sc.born_order
    if N is None:
        Q = solve(system)
        run.report["residual"] = Q.residual
    else:
        Q = born_truncation(system, N)
    run.tick("solve")
    dirs = sphere_directions(sc.n_directions)
    ff = farfield(cl, Q, sc.material, freq, dirs)
    _write_csv(run.file("farfield.csv"), ["dx", "dy", "dz"] + _cplx_cols("up") + _cplx_cols("us"),
               [[_fmt(v) for v in d] + _cplx_vals(p) + _cplx_vals(s)
                for d, p, s in zip(dirs, ff.up, ff.us)])
    us = scattered_field(cl, Q, sc.material, freq, sc.points)
    _write_csv(run.file("scattered.csv"), ["x", "y", "z"] + _cplx_cols("u"),
               [[_fmt(v) for v in x] + _cplx_vals(u) for x, u in zip(sc.points, us)])
    run.tick("fields")
    run.report.update(a=sc.config.a, s=sc.config.s, t=sc.config.t, h=sc.config.h, M=cl.M,
                      lattice=list(cl.lattice), lambda_tilde_n0=pc.selection.eigenvalue,
                      multiplicity=pc.selection.multiplicity, lambda_n0=pc.lambda_n0,
                      omega_n0=pc.omega_n0, omega=freq.omega, kappa_s=freq.kappa_s,
                      kappa_p=freq.kappa_p, denominator=complex(pc.coefficient.denominator),
                      normB=inv.norm_inf, born_safe=inv.born_safe, condition=inv.condition,
                      mode="full" if N is None else f"born(N={N})")
    print(f"M={cl.M} omega={freq.omega:.8g} |B|inf={inv.norm_inf:.4e} cond={inv.condition:.4e} "
          f"mode={run.report['mode']}")
    return run


def cmd_sweep(sc, args):
    run = Run("sweep", sc, args.out)
    if len(sc.a_values) < 3:
        raise ValidationError("sweep needs regime.a_values with at least three entries")
    shape, spec = _spectrum(sc)
    N = args.born if args.born is not None else (sc.born_order or 0)
    res = convergence_sweep(sc.config, sc.a_values, sc.sweep_mode, sc.material, spec,
                            shape.circumradius, sc.wave, N=N, rel_tol=sc.shape.group_tol)
    run.tick("sweep")
    slope = res.slope
    _write_csv(run.file("sweep.csv"),
               ["a", "M", "h", "s", "N", "omega", "normB", "metric", "slope_pred", "slope_fit"],
               [[_fmt(r["a"]), r["M"], _fmt(sc.config.h), _fmt(sc.config.s), N, _fmt(r["omega"]),
                 _fmt(r["normB"]), _fmt(r["metric"]), _fmt(res.predicted), _fmt(slope)]
                for r in res.rows])
    run.report.update(mode=sc.sweep_mode, N=N, slope_pred=res.predicted, slope_fit=slope,
                      rows=res.rows)
    print(f"mode={sc.sweep_mode} predicted slope {res.predicted:.4f}, fitted {slope:.4f}")
    for r in res.rows:
        print(f"  a={r['a']:.4g} M={r['M']} normB={r['normB']:.4e} metric={r['metric']:.4e}")
    return run


def cmd_homogenize(sc, args):
    run = Run("homogenize", sc, args.out)
    shape, spec = _spectrum(sc)
    hom = sc.homogenize
    grid = int(hom.get("grid", 10))
    if grid < 4:
        raise ValidationError("homogenize.grid must be at least 4")
    dirs = sphere_directions(int(hom.get("directions", sc.n_directions)))
    b1, b2 = float(hom.get("beta1", 1.0)), float(hom.get("beta2", 1.0))
    a_values = sc.a_values or [sc.config.a]
    rows, diff_rows, table = [], [], []
    for a in a_values:
        pc = _prepared(sc, spec, shape, a)
        system = assemble_system(pc.cluster, sc.material, pc.freq, sc.wave)
        inv = invertibility_check(system)
        cf = farfield(pc.cluster, solve(system), sc.material, pc.freq, dirs)
        C = np.zeros((3, 3)) if hom.get("zero_matrix") else effective_matrix(pc, sc.config.omega_box.volume)
        ecfg = EffectiveConfig(grid, C, pc.freq, sc.config.omega_box)
        esys = assemble_ls_system(ecfg, sc.material, sc.wave, dense_limit=args.dense_limit,
                                  mode=hom.get("solver", "auto"))
        ef = effective_farfield(solve_effective(esys), sc.material, dirs)
        d = compare_cluster_vs_effective(cf, ef, sc.material, b1, b2)
        alpha1 = float(pc.cluster.alpha[0])
        sign = homogenized_density_sign(alpha1, pc.lambda_n0, pc.freq, pc.coefficient.C)
        table.append((a, d.max))
        rows.append([a, pc.cluster.M, inv.norm_inf, d.max, d.mean, sign["sign"], sign["threshold"],
                     pc.freq.omega])
        for x, dp, ds, v in zip(d.directions, d.dp, d.ds, d.diff):
            diff_rows.append([_fmt(a)] + [_fmt(c) for c in x] + [_fmt(dp.real), _fmt(dp.imag)]
                             + _cplx_vals(ds) + [_fmt(v)])
        run.tick(f"a={a:.4g}")
    pred = min(sc.config.h, sc.config.s / 3)
    slope = fit_slope(*zip(*table)) if len(table) >= 2 and min(t[1] for t in table) > 0 else float("nan")
    _write_csv(run.file("homogenize.csv"),
               ["a", "M", "h", "s", "normB", "diff_max", "diff_mean", "sign", "omega_threshold",
                "omega", "slope_pred", "slope_fit"],
               [[_fmt(r[0]), r[1], _fmt(sc.config.h), _fmt(sc.config.s), _fmt(r[2]), _fmt(r[3]),
                 _fmt(r[4]), r[5], _fmt(r[6]), _fmt(r[7]), _fmt(pred), _fmt(slope)] for r in rows])
    _write_csv(run.file("farfield_diff.csv"),
               ["a", "dx", "dy", "dz", "dp_re", "dp_im"] + _cplx_cols("ds") + ["diff"], diff_rows)
    run.report.update(grid=grid, slope_pred=pred, slope_fit=slope,
                      rows=[dict(zip(("a", "M", "normB", "diff_max", "diff_mean", "sign",
                                      "omega_threshold", "omega"), r)) for r in rows])
    print(f"predicted slope min(h, s/3) = {pred:.4f}, fitted {slope:.4f}")
    for r in rows:
        print(f"  a={r[0]:.4g} M={r[1]} diff max={r[3]:.4e} mean={r[4]:.4e} sign={r[5]:+d}")
    return run


COMMANDS = {"spectrum": cmd_spectrum, "simulate": cmd_simulate, "sweep": cmd_sweep,
            "homogenize": cmd_homogenize}


def build_parser():
    p = argparse.ArgumentParser(prog="elastoscatter", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--scenario", required=True, help="YAML scenario file")
    p.add_argument("--out", default=None, help="output directory (default: output.dir of the scenario)")
    p.add_argument("--threads", type=int, default=None, help="BLAS/LAPACK thread count")
    p.add_argument("--born", type=int, default=None, help="Born truncation order N")
    p.add_argument("--dense-limit", type=int, default=1000,
                   help="largest effective-medium grid (cells) solved densely")
    p.add_argument("--top", type=int, default=20, help="eigenvalues printed by 'spectrum'")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        sc = load_scenario(args.scenario)
        if args.out is None:
            args.out = sc.output_dir
        if args.born is not None and args.born < 0:
            raise ValidationError("--born must be non-negative")
        with threadpool_limits(limits=args.threads):
            run = COMMANDS[args.command](sc, args)
            run.finish()
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (NumericalError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
