"""Command-line entry point ``sparse-sampler``."""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import basis as _basis
from . import domains as _domains
from . import indexsets as _indexsets
from . import measures as _measures
from . import ortho as _ortho
from .experiments import (ExperimentConfig, auto_lambda, relative_linf_error, resolve_function,
                          run_experiment)
from .lsq import assemble_ls, solve_ls
from .rng import StreamId
from .srlasso import SrLassoProblem, lower_set_weights, sr_lasso


def _index_set(args) -> _indexsets.MultiIndexSet:
    iset = _indexsets.from_family(args.indexset, args.dim, args.ordering)
    if args.basis == "fourier":
        iset = _indexsets.signed_variant(iset)
    return iset


def _setup(args, grid_factor: int):
    """Grid, source dictionary and its grid QR for the common flags."""
    iset = _index_set(args)
    domain_name = args.domain or ("torus" if args.basis == "fourier" else "D1")
    domain = _domains.from_name(domain_name, args.dim)
    k = args.grid_size or grid_factor * len(iset)
    grid = _domains.mc_grid(domain, k, StreamId(args.seed, "grid"))
    family = "fourier" if args.basis == "fourier" else "legendre"
    source = _basis.DictionarySpec(family, iset)
    ob = _ortho.orthonormalize_dictionary(source, grid)
    spec = ob.dictionary() if args.basis == "ortho" else source
    B = ob.Q if args.basis == "ortho" else _basis.assemble_eval_matrix(
        source, grid.points, "one_over_sqrt_k").values
    return grid, spec, ob, B


def _plan(scheme: str, grid, ob, B):
    if scheme == "mc":
        return _measures.mc_plan(grid)
    if scheme == "opt-nonhier":
        return _measures.ls_optimal_plan(ob.Q)
    if scheme == "cs-opt":
        return _measures.cs_optimal_plan(B)
    if scheme == "precond":
        return _measures.preconditioned_plan(grid)
    raise ValueError(f"scheme {scheme!r} has no single plan")


def _samples(args, grid, ob, B) -> _measures.SampleSet:
    stream = StreamId(args.seed, f"draw:{args.scheme}")
    if args.scheme == "opt-hier":
        return _measures.ls_hierarchical_draw(ob.Q, args.m, stream, grid)
    return _measures.draw(_plan(args.scheme, grid, ob, B), args.m, stream, grid)


def _emit(record: dict, out: str | None) -> None:
    text = json.dumps(record, indent=2, sort_keys=True)
    print(text)
    if out:
        Path(out + ".json").write_text(text + "\n")


def cmd_indexset(args) -> int:
    iset = _indexsets.from_family(args.indexset, args.dim, args.ordering)
    if args.signed:
        iset = _indexsets.signed_variant(iset)
    if args.out:
        _indexsets.save(iset, args.out)
    else:
        sys.stdout.write(f"{iset.dimension} {len(iset)} {iset.ordering} {iset.family}\n")
        for row in iset.indices.tolist():
            sys.stdout.write(" ".join(map(str, row)) + "\n")
    return 0


def cmd_constants(args) -> int:
    grid, spec, ob, B = _setup(args, 10)
    plan = _plan(args.scheme, grid, ob, B)
    if args.dump_matrix:
        _basis.save_matrix(B, args.dump_matrix, "one_over_sqrt_k")
    rep = _measures.constants_report(B, ob.Q, plan)
    print(rep.to_json(indent=2))
    return 0


def _fit_common(args, grid_factor):
    grid, spec, ob, B = _setup(args, grid_factor)
    samples = _samples(args, grid, ob, B)
    f = resolve_function(args.function)
    f_grid = f(grid.points)
    values = f(samples.points)
    if args.noise > 0:
        values = values + args.noise * StreamId(args.seed, "noise").generator().standard_normal(samples.m)
    A, V = assemble_ls(samples, spec, values)
    if args.dump_matrix:
        _basis.save_matrix(A, args.dump_matrix, "sqrt_w_over_sqrt_m")
    grid_vals = ob.grid_values if spec.family == "ortho" else math.sqrt(grid.k) * B
    return grid, spec, ob, samples, A, V, f_grid, grid_vals


def cmd_fit_ls(args) -> int:
    grid, spec, ob, samples, A, V, f_grid, grid_vals = _fit_common(args, 30)
    R = None if spec.family == "ortho" else ob.R
    fit = solve_ls(A, V, args.solver, orthonormalizer=R)
    err = relative_linf_error(f_grid, grid_vals @ fit.coefficients[:, 0])
    if args.out:
        _basis.save_matrix(fit.coefficients, args.out + ".coef")
    _emit({"alpha_hat": fit.alpha_hat, "beta_hat": fit.beta_hat, "cond_bound": fit.cond_bound,
           "residual_norm": fit.residual_norm, "solver": fit.solver, "m": samples.m,
           "s": A.shape[1], "k": grid.k, "rel_err": err}, args.out)
    return 0


def cmd_fit_l1(args) -> int:
    grid, spec, ob, samples, A, V, f_grid, grid_vals = _fit_common(args, 10)
    weights = lower_set_weights(spec, grid) if args.weights == "lower" else None
    n = A.shape[1]
    lam = args.lam if args.lam is not None else auto_lambda(n, weights)
    res = sr_lasso(SrLassoProblem(A, V, lam, weights, max_iters=args.max_iters, tol=args.tol))
    err = relative_linf_error(f_grid, grid_vals @ res.coefficients[:, 0])
    if args.out:
        _basis.save_matrix(res.coefficients, args.out + ".coef")
    _emit({"objective": res.objective, "iterations": res.iterations, "converged": res.converged,
           "residual_norm": res.residual_norm, "lambda": lam, "m": samples.m, "n": n,
           "k": grid.k, "rel_err": err}, args.out)
    return 0


def cmd_experiment(args) -> int:
    cfg = ExperimentConfig.from_json(args.config)
    if args.run_id:
        cfg.run_id = args.run_id
    if args.seed is not None:
        cfg.seed = args.seed
    records = run_experiment(cfg, args.out_dir)
    out = Path(args.out_dir)
    print(f"{len(records)} records -> {out / (cfg.run_id + '.csv')}")
    return 0


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--basis", choices=("legendre", "fourier", "ortho"), default="legendre")
    p.add_argument("--indexset", default="HC:10", help="family and order, e.g. HC:10, TD:4, TP:3")
    p.add_argument("--dim", type=int, default=1)
    p.add_argument("--domain", default=None, help="D1/cube, D2/annulus, D3/cut, torus")
    p.add_argument("--ordering", default="total_degree", choices=_indexsets.ORDERINGS)
    p.add_argument("--grid-size", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dump-matrix", default=None, help="write the assembled matrix here")


def _fit_flags(p: argparse.ArgumentParser, schemes) -> None:
    p.add_argument("--scheme", choices=schemes, default="mc")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--function", default="f1")
    p.add_argument("--noise", type=float, default=0.0, help="Gaussian noise standard deviation")
    p.add_argument("--out", default=None, help="output prefix for .coef and .json")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sparse-sampler",
                                 description="Sampling, least squares and sparse recovery "
                                             "for polynomial approximation on general domains.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("indexset", help="generate a multi-index set")
    p.add_argument("--indexset", default="HC:10")
    p.add_argument("--dim", type=int, default=1)
    p.add_argument("--ordering", default="total_degree", choices=_indexsets.ORDERINGS)
    p.add_argument("--signed", action="store_true")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_indexset)

    p = sub.add_parser("constants", help="print sampling constants as JSON")
    _common(p)
    p.add_argument("--scheme", choices=("mc", "opt-nonhier", "cs-opt", "precond"), default="mc")
    p.set_defaults(func=cmd_constants)

    p = sub.add_parser("fit-ls", help="weighted least-squares fit")
    _common(p)
    _fit_flags(p, ("mc", "opt-nonhier", "opt-hier", "precond", "cs-opt"))
    p.add_argument("--solver", choices=("qr", "svd", "cg"), default="qr")
    p.set_defaults(func=cmd_fit_ls)

    p = sub.add_parser("fit-l1", help="(weighted) SR-LASSO fit")
    _common(p)
    _fit_flags(p, ("mc", "cs-opt", "precond"))
    p.add_argument("--lambda", dest="lam", type=float, default=None)
    p.add_argument("--weights", choices=("none", "lower"), default="none")
    p.add_argument("--max-iters", type=int, default=4000)
    p.add_argument("--tol", type=float, default=1e-8)
    p.set_defaults(func=cmd_fit_l1)

    p = sub.add_parser("experiment", help="run an experiment from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", default=".")
    p.add_argument("--run-id", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_experiment)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, OverflowError, np.linalg.LinAlgError, RuntimeError) as exc:
        print(f"sparse-sampler: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
