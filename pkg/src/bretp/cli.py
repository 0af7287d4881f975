"""Command-line front end.

Subcommands
-----------
acid      boundary density and ACID of a model file
mirate    information rate of a model file, optionally swept over a parameter
phase     rate, gradient and region labels for telegraph input, plus the k1-nullcline
validate  Monte Carlo comparisons (dark-current ACID, Hawkes vs Gamma, rate estimates)

Every run writes its outputs and a ``manifest.json`` into ``--out``.  On a
package error the process prints ``{"error": <code>, "message": ...}`` and
exits with status 2.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .errors import BretpError, InvalidParameters
from .io import write_csv, write_json
from .models import build_model


def _cells(text):
    parts = [int(p) for p in str(text).lower().split("x")]
    return parts[0] if len(parts) == 1 else tuple(parts)


def _range(text):
    """``start:stop:count`` or a comma list."""
    if ":" in text:
        a, b, n = text.split(":")
        return np.linspace(float(a), float(b), int(n))
    return np.array([float(v) for v in text.split(",")])


def _load_spec(path):
    """Model spec from a JSON file, or inline JSON if the argument starts with ``{``."""
    if str(path).lstrip().startswith("{"):
        return json.loads(path)
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(str(p))
    with open(p) as fh:
        return json.load(fh)


class _Run:
    def __init__(self, args, command):
        self.args = args
        self.command = command
        self.out = Path(args.out)
        self.outputs = []
        self.diagnostics = {}
        self.t0 = time.perf_counter()
        self.warnings = []

    def csv(self, name, header, rows):
        self.outputs.append(str(write_csv(self.out / name, header, rows)))

    def json(self, name, obj):
        self.outputs.append(str(write_json(self.out / name, obj)))

    def finish(self, model_spec=None):
        settings = {k: v for k, v in vars(self.args).items()
                    if k not in ("func", "command") and not k.startswith("_")}
        self.warnings = [f"{w.category.__name__}: {w.message}"
                         for w in getattr(self.args, "_caught", []) if "TBB" not in str(w.message)]
        manifest = {"command": self.command, "model": model_spec, "settings": settings,
                    "seed": getattr(self.args, "seed", None), "outputs": self.outputs,
                    "diagnostics": dict(self.diagnostics, wall_time=time.perf_counter() - self.t0,
                                        warnings=self.warnings),
                    "version": __version__}
        write_json(self.out / "manifest.json", manifest)


def cmd_acid(args):
    from .solver import Partition, acid_pdf, build_boundary_matrix, solve_boundary_density
    spec = _load_spec(args.model)
    model = build_model(spec)
    run = _Run(args, "acid")
    part = Partition.for_model(model, _cells(args.cells), args.reps)
    I = build_boundary_matrix(model, part, opts=_opts(args))
    p0 = solve_boundary_density(I, L=args.iters, norm=model.mean_intensity)
    acid = acid_pdf(model, p0, dm=args.mesh, bins=args.bins, opts=_opts(args))
    cols = [f"theta{k + 1}" for k in range(part.n)]
    rows = ([*c, a] for c, a in zip(part.centers(), p0.values)) if part.n else [[p0.values[0]]]
    run.csv("boundary_density.csv", cols + ["p0"], rows)
    run.csv("acid.csv", ["m_lo", "m_hi", "weight", "density"],
            zip(acid.edges[:-1], acid.edges[1:], acid.weights, acid.density))
    run.diagnostics.update({
        "column_sum_deviation": float(np.abs(I.column_sums() - 1).max()),
        "fixed_point_residual": p0.residual, "p0_integral": p0.integral,
        "mean_intensity": model.mean_intensity, "mass_deficit": 1.0 - acid.total_mass,
        "truncated_mass": p0.truncated_mass, "acid_mean": acid.mean,
        "acid_variance": acid.variance, "matrix_method": I.method})
    run.finish(spec)
    return 0


def _opts(args):
    from dataclasses import replace
    from .core import DEFAULT_OPTIONS
    return replace(DEFAULT_OPTIONS, tau_max=float(args.tmax))


def _set_param(spec, name, value):
    out = json.loads(json.dumps(spec))
    out.setdefault("params", {})[name] = float(value)
    return out


def cmd_mirate(args):
    from .inforate import mi_rate
    spec = _load_spec(args.model)
    run = _Run(args, "mirate")
    if args.sweep:
        name, rng = args.sweep.split("=")
        rows = []
        for v in _range(rng):
            sp = _set_param(spec, name, v)
            res = mi_rate(build_model(sp), cells=_cells(args.cells), reps=args.reps,
                          opts=_opts(args))
            rows.append([v, res.rate, res.input_term, res.output_term, res.truncation_error_bound])
        run.csv("mirate_sweep.csv", [name, "rate", "input_term", "output_term",
                                     "truncation_error_bound"], rows)
    else:
        res = mi_rate(build_model(spec), cells=_cells(args.cells), reps=args.reps,
                      opts=_opts(args))
        run.json("mirate.json", res.as_dict())
        run.diagnostics.update(res.diagnostics)
    run.finish(spec)
    return 0


def cmd_phase(args):
    from .inforate import diagonal_crossing, nullcline_slope, phase_plane, trace_nullcline
    run = _Run(args, "phase")
    constraint = tuple(float(v) for v in args.constraint.split(",")) if args.constraint else None
    rep = phase_plane(_range(args.k1), _range(args.k2), constraint=constraint)
    run.csv("phase_plane.csv", ["k1", "k2", "rate", "d1", "d2", "region"], rep.rows())
    summary = {"optimum": rep.optimum}
    if args.nullcline:
        a, b, n = args.nullcline.split(":")
        k = diagonal_crossing(1)
        line = trace_nullcline(1, (k, k), (float(a), float(b)), steps=int(n))
        run.csv("nullcline.csv", ["k1", "k2"], line)
        summary.update({"diagonal_crossing": k, "slope_at_crossing": nullcline_slope(k, k)})
    run.json("phase.json", summary)
    run.finish(None)
    return 0


def cmd_validate(args):
    from . import mc
    from .solver import acid as acid_run, wasserstein1
    run = _Run(args, "validate")
    spec = None
    if args.check == "acid-mc":
        spec = _load_spec(args.model)
        model = build_model(spec)
        a, p0, _ = acid_run(model, cells=_cells(args.cells), reps=args.reps, L=args.iters,
                            bins=args.bins)
        T = args.horizon or (mc.default_burn_in(model) + args.samples * args.sample_dt)
        emp = mc.empirical_acid(model, T, sample_dt=args.sample_dt, seed=args.seed, edges=a.edges)
        w1 = wasserstein1(a, emp)
        run.csv("acid_vs_mc.csv", ["m_lo", "m_hi", "weight_solver", "weight_mc"],
                zip(a.edges[:-1], a.edges[1:], a.weights, emp.weights))
        run.json("validate.json", {"w1": w1, "samples": int(emp.diagnostics.get("samples", 0))})
    elif args.check == "hawkes-gamma":
        from .models import GammaFilterParams, HawkesParams, gamma_filter_model, hawkes_model
        rows = []
        for s2 in _range(args.sigma2):
            for g in _range(args.gamma):
                gm = gamma_filter_model(GammaFilterParams(args.mu, s2, g, args.c))
                hm = hawkes_model(HawkesParams.from_input(args.mu, s2, g, args.c))
                # both ACIDs on one mesh so the distance is not a binning artefact
                edges = np.linspace(0.0, max(gm.acid_range[1], hm.acid_range[1]), args.bins + 1)
                ga, _, _ = acid_run(gm, cells=_cells(args.cells), reps=args.reps, L=args.iters,
                                    edges=edges)
                ha, _, _ = acid_run(hm, cells=200, reps=3, L=args.iters, edges=edges)
                rows.append([s2, g, wasserstein1(ga, ha)])
        run.csv("hawkes_gamma_w1.csv", ["sigma2", "gamma", "w1"], rows)
    elif args.check == "mirate-mc":
        from .models import GammaFilterParams, HawkesParams, gamma_filter_model, hawkes_model
        bd = mc.BirthDeathInput(args.mu, args.gamma_bd, args.c)
        hm = hawkes_model(HawkesParams.from_input(args.mu, args.mu, args.gamma_bd, args.c))
        gm = gamma_filter_model(GammaFilterParams(args.mu, args.mu, args.gamma_bd, args.c, "birth-death"),
                                support=[[args.mu * 0.1, args.mu * 3], [0.1, args.mu * 3]])
        out = {"anchor": bd.anchor()}
        for name, fm in (("hawkes", hm), ("gamma", gm)):
            out[name] = mc.mc_mi_rate(bd, args.horizon or 200.0, args.samples, args.seed,
                                      filter_model=fm).as_dict()
        run.json("validate.json", out)
    run.finish(spec)
    return 0


def build_parser():
    ap = argparse.ArgumentParser(prog="bretp", description=__doc__.split("\n\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, model=True):
        if model:
            p.add_argument("--model", required=True, help="model JSON {type, params}")
        p.add_argument("--cells", default="200", help="cells per axis, e.g. 200 or 50x25")
        p.add_argument("--reps", type=int, default=1, help="representatives per axis")
        p.add_argument("--iters", type=int, default=15, help="squarings L")
        p.add_argument("--mesh", type=float, default=None, help="ACID bin width")
        p.add_argument("--bins", type=int, default=1000, help="ACID bins if --mesh is absent")
        p.add_argument("--tmax", type=float, default=200.0, help="integration horizon per sojourn")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", default="out")
        p.add_argument("--samples", type=int, default=10000)
        p.add_argument("--horizon", type=float, default=None)

    p = sub.add_parser("acid", help="boundary density and ACID")
    common(p)
    p.set_defaults(func=cmd_acid)

    p = sub.add_parser("mirate", help="information rate")
    common(p)
    p.add_argument("--sweep", default=None, help="NAME=START:STOP:COUNT")
    p.set_defaults(func=cmd_mirate)

    p = sub.add_parser("phase", help="telegraph phase plane")
    common(p, model=False)
    p.add_argument("--k1", default="0.05:1:10")
    p.add_argument("--k2", default="0.05:1:10")
    p.add_argument("--nullcline", default=None, help="K1MIN:K1MAX:STEPS")
    p.add_argument("--constraint", default=None, help="r1,r2")
    p.set_defaults(func=cmd_phase)

    p = sub.add_parser("validate", help="Monte Carlo comparisons")
    common(p, model=False)
    p.add_argument("--check", choices=["acid-mc", "hawkes-gamma", "mirate-mc"], required=True)
    p.add_argument("--model", default=None)
    p.add_argument("--sample-dt", type=float, default=1.0)
    p.add_argument("--mu", type=float, default=2.0)
    p.add_argument("--c", type=float, default=1.0)
    p.add_argument("--sigma2", default="4")
    p.add_argument("--gamma", default="0.65")
    p.add_argument("--gamma-bd", type=float, default=1.0, help="birth-death decay rate")
    p.set_defaults(func=cmd_validate)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            args._caught = caught
            status = args.func(args)
        for w in caught:
            if "TBB" in str(w.message):
                continue
            print(f"warning: {w.category.__name__}: {w.message}", file=sys.stderr)
        return status
    except FileNotFoundError as exc:
        err = {"error": "FileNotFound", "message": str(exc)}
    except BretpError as exc:
        err = {"error": exc.code, "message": str(exc)}
    except (ValueError, KeyError, json.JSONDecodeError) as exc:
        err = {"error": InvalidParameters.code, "message": str(exc)}
    print(json.dumps(err))
    try:
        write_json(Path(args.out) / "error.json", err)
    except OSError:
        pass
    return 2


if __name__ == "__main__":
    sys.exit(main())
