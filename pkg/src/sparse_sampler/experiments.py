r"""End-to-end approximation experiments.

An experiment fixes a target function, a domain, a dictionary and a ladder of
index sets or sample counts, then repeats sample / fit / evaluate for several
sampling schemes.  Errors are measured in the discrete sup norm of the grid
$\tau$ that also defines the sampling plans:

.. math:: E = \frac{\max_i |f(z_i) - \hat f(z_i)|}{\max_i |f(z_i)|}.

One grid is built per experiment and shared by every scheme and step so that
comparisons between schemes are paired.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import platform
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import basis as _basis
from . import domains as _domains
from . import indexsets as _indexsets
from . import measures as _measures
from . import ortho as _ortho
from .lsq import solve_ls
from .rng import StreamId
from .srlasso import SrLassoProblem, default_lambda, lower_set_weights, sr_lasso

__all__ = [
    "TEST_FUNCTIONS",
    "eval_test_function",
    "relative_linf_error",
    "log_stats",
    "m_slogs",
    "ExperimentConfig",
    "TrialRecord",
    "run_experiment",
    "write_records",
    "CSV_HEADER",
]

log = logging.getLogger(__name__)

ERROR_FLOOR = 1e-16
CSV_HEADER = ("scheme", "m", "s", "trial", "rel_err", "alpha_hat", "seconds")


def f1(y: np.ndarray) -> np.ndarray:
    r"""$\exp(-\frac1d \sum_k y_k)$."""
    return np.exp(-y.mean(axis=1))


def f2(y: np.ndarray) -> np.ndarray:
    r"""$\prod_{k > \lceil d/2\rceil} \cos(16 y_k / 2^k) \big/
    \prod_{k \le \lceil d/2\rceil} (1 - y_k / 4^k)$, with 1-based $k$."""
    d = y.shape[1]
    h = math.ceil(d / 2)
    k = np.arange(1, d + 1, dtype=float)
    num = np.prod(np.cos(16 * y[:, h:] / 2 ** k[h:]), axis=1)
    den = np.prod(1 - y[:, :h] / 4 ** k[:h], axis=1)
    return num / den


def f3(y: np.ndarray) -> np.ndarray:
    r"""$\prod_i \frac{d/4}{d/4 + (y_i + (-1)^{i+1}/(i+1))^2}$, 1-based $i$."""
    d = y.shape[1]
    i = np.arange(1, d + 1)
    shift = (-1.0) ** (i + 1) / (i + 1)
    return np.prod((d / 4) / (d / 4 + (y + shift) ** 2), axis=1)


def f4(y: np.ndarray) -> np.ndarray:
    r"""$1 / \sum_i \sqrt{|y_i|}$; undefined at the origin."""
    den = np.sqrt(np.abs(y)).sum(axis=1)
    if np.any(den == 0):
        raise ValueError("f4 is undefined at the origin")
    return 1.0 / den


TEST_FUNCTIONS: dict[str, Callable] = {"f1": f1, "f2": f2, "f3": f3, "f4": f4}


def _user_expression(expr: str) -> Callable:
    # Expressions see only numpy as ``np`` and the (N, d) point array ``y``.
    code = compile(expr, "<function>", "eval")

    def fn(y):
        out = eval(code, {"__builtins__": {}}, {"np": np, "y": y})
        return np.broadcast_to(np.asarray(out), (y.shape[0],)).copy()

    return fn


def resolve_function(name: str) -> Callable:
    """``"f1"``..``"f4"`` or ``"expr:<numpy expression in y>"``."""
    if name.startswith("expr:"):
        return _user_expression(name[5:])
    try:
        return TEST_FUNCTIONS[name.lower()]
    except KeyError:
        raise ValueError(f"unknown test function {name!r}") from None


def eval_test_function(name: str, y) -> np.ndarray | float:
    """Evaluate a named test function at one point or an ``(N, d)`` array."""
    y = np.asarray(y, dtype=float)
    single = y.ndim == 1
    out = resolve_function(name)(np.atleast_2d(y))
    return float(out[0]) if single else out


def relative_linf_error(f_vals, fhat_vals) -> float:
    f_vals = np.asarray(f_vals)
    den = np.max(np.abs(f_vals))
    if den == 0:
        raise ZeroDivisionError("target vanishes on the grid")
    return float(np.max(np.abs(f_vals - np.asarray(fhat_vals))) / den)


def log_stats(errors: Sequence[float]) -> tuple[float, float]:
    """Geometric mean and multiplicative standard deviation, after flooring
    errors at ``1e-16``."""
    e = np.maximum(np.asarray(errors, dtype=float), ERROR_FLOOR)
    le = np.log(e)
    return float(np.exp(le.mean())), float(np.exp(le.std()))


def m_slogs(s: int) -> int:
    """Smallest integer ``m >= s ln s`` (``m = s`` when ``s = 1``)."""
    if s <= 1:
        return 1
    return max(1, math.ceil(s * math.log(s)))


LS_SCHEMES = ("mc", "opt-nonhier", "opt-hier", "precond", "cs-opt")
L1_SCHEMES = ("mc", "cs-opt", "precond")


@dataclass
class ExperimentConfig:
    """Experiment description; mirrors the JSON accepted by the CLI.

    Attributes:
        function: ``"f1"``..``"f4"`` or ``"expr:..."``.
        domain: Domain name (``"D1"``, ``"D2"``, ``"D3"``, ``"torus"``...).
        dimension: ``d``.
        basis: ``"legendre"``, ``"fourier"`` or ``"ortho"`` (Legendre
            orthonormalized on the grid).  Least squares always fits in the
            grid-orthonormal basis spanning the same space.
        index_family: ``"HC"``, ``"TD"`` or ``"TP"``.
        orders: Ladder of orders ``t``.  For least squares each order is one
            step; for l1 runs the last order fixes the dictionary.
        schemes: Sampling schemes to compare.
        m_values: Explicit sample counts.  ``None`` selects ``m = ceil(s ln s)``.
        trials: Trials per step.
        solver: ``"ls"``, ``"l1"`` or ``"l1-weighted"``.
        grid_size: Grid size ``k``; default ``30 s_max`` (ls) or ``10 n`` (l1).
        seed: Master seed.
        lam: Fixed SR-LASSO parameter; ``None`` selects the automatic rule.
        noise_sigma: Standard deviation of additive Gaussian noise.
        ordering: Index ordering before orthonormalization.
        max_iters, tol: SR-LASSO options.
        timing: Record wall-clock seconds (makes the CSV run-dependent).
        run_id: Output file stem.
    """

    function: str = "f1"
    domain: str = "D1"
    dimension: int = 1
    basis: str = "legendre"
    index_family: str = "HC"
    orders: list = field(default_factory=lambda: [10])
    schemes: list = field(default_factory=lambda: ["mc"])
    m_values: list | None = None
    trials: int = 50
    solver: str = "ls"
    grid_size: int | None = None
    seed: int = 0
    lam: float | None = None
    noise_sigma: float = 0.0
    ordering: str = "total_degree"
    max_iters: int = 4000
    tol: float = 1e-8
    timing: bool = False
    run_id: str = "run"

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not self.orders:
            raise ValueError("the ladder must be nonempty")
        if self.solver not in ("ls", "l1", "l1-weighted"):
            raise ValueError(f"unknown solver {self.solver!r}")
        allowed = LS_SCHEMES if self.solver == "ls" else L1_SCHEMES
        bad = [s for s in self.schemes if s not in allowed]
        if bad:
            raise ValueError(f"schemes {bad} not available for solver {self.solver!r}")
        if self.m_values is not None and len(self.orders) not in (1, len(self.m_values)):
            raise ValueError("orders must have one entry or match m_values")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown config keys {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class TrialRecord:
    scheme: str
    m: int
    s: int
    trial: int
    rel_err: float
    alpha_hat: float
    seconds: float | None = None


def _nested_index_set(cfg: ExperimentConfig) -> tuple[_indexsets.MultiIndexSet, list[int]]:
    # Concatenate ladder increments so every step's set is a prefix.
    rows: list[tuple] = []
    seen: set = set()
    sizes = []
    for t in cfg.orders:
        iset = _indexsets.from_family(f"{cfg.index_family}:{t}", cfg.dimension, cfg.ordering)
        if cfg.basis == "fourier":
            iset = _indexsets.signed_variant(iset)
        members = iset.as_set()
        if not seen <= members:
            raise ValueError("ladder index sets must be nested")
        rows += [r for r in iset if r not in seen]
        seen |= members
        sizes.append(len(rows))
    fam = f"{cfg.index_family}:{cfg.orders[-1]}"
    return _indexsets.MultiIndexSet(np.array(rows), "custom", fam), sizes


def _steps(cfg: ExperimentConfig, sizes: list[int]) -> list[tuple[int, int]]:
    if cfg.m_values is None:
        return [(s, m_slogs(s)) for s in sizes]
    if len(sizes) == 1:
        return [(sizes[0], int(m)) for m in cfg.m_values]
    return [(s, int(m)) for s, m in zip(sizes, cfg.m_values)]


def _source_family(cfg: ExperimentConfig) -> str:
    return "fourier" if cfg.basis == "fourier" else "legendre"


def auto_lambda(n: int, weights=None) -> float:
    r"""SR-LASSO parameter used when none is configured.

    The recovery guarantee needs $\lambda \le \tfrac{15}{26}\sqrt{a/s}$ for
    the sparsity level $s$ of interest.  Taking $a = 1$ and the largest
    possible level, the (weighted) cardinality $|\mathcal I|_v$ of the whole
    dictionary, makes the condition hold at every level.
    """
    card = n if weights is None else float(np.sum(np.asarray(weights) ** 2))
    return default_lambda(max(1, round(card)))


class _Context:
    """Grid, bases and target values shared by all schemes of one run."""

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.domain = _domains.from_name(cfg.domain, cfg.dimension)
        self.iset, self.sizes = _nested_index_set(cfg)
        self.steps = _steps(cfg, self.sizes)
        n = len(self.iset)
        k = cfg.grid_size or (30 * n if cfg.solver == "ls" else 10 * n)
        self.grid = _domains.mc_grid(self.domain, k, StreamId(cfg.seed, "grid"))
        self.source = _basis.DictionarySpec(_source_family(cfg), self.iset)
        self.f_grid = resolve_function(cfg.function)(self.grid.points)
        raw = _basis.assemble_eval_matrix(self.source, self.grid.points, "one_over_sqrt_k").values
        self.B_raw = raw
        need_q = cfg.solver == "ls" or cfg.basis == "ortho"
        self.ortho = _ortho.orthonormalize(raw, self.source, self.grid) if need_q else None
        # Grid values of the dictionary actually used for fitting.
        if cfg.solver == "ls" or cfg.basis == "ortho":
            self.fit_values = self.ortho.grid_values
        else:
            self.fit_values = np.sqrt(k) * raw

    @property
    def k(self) -> int:
        return self.grid.k


def _plan(ctx: _Context, scheme: str, s: int) -> _measures.SamplingPlan:
    if scheme == "mc":
        return _measures.mc_plan(ctx.grid)
    if scheme == "precond":
        return _measures.preconditioned_plan(ctx.grid)
    if scheme == "opt-nonhier":
        return _measures.ls_optimal_plan(ctx.ortho.Q[:, :s])
    if scheme == "cs-opt":
        return _measures.cs_optimal_plan(ctx.fit_values[:, :s] / math.sqrt(ctx.k))
    raise ValueError(f"scheme {scheme!r} has no single plan")


def _noise(ctx: _Context, m: int, stream: StreamId) -> np.ndarray:
    if ctx.cfg.noise_sigma <= 0:
        return np.zeros(m)
    return ctx.cfg.noise_sigma * stream.child(1).generator().standard_normal(m)


def _fit_ls(ctx: _Context, ids: np.ndarray, w: np.ndarray, s: int, stream) -> tuple[float, float]:
    m = ids.size
    scale = np.sqrt(w / m)[:, None]
    A = scale * ctx.fit_values[ids, :s]
    V = scale[:, 0] * (ctx.f_grid[ids] + _noise(ctx, m, stream))
    fit = solve_ls(A, V)
    fhat = ctx.fit_values[:, :s] @ fit.coefficients
    return relative_linf_error(ctx.f_grid, fhat), fit.alpha_hat


def _fit_l1(ctx: _Context, ids: np.ndarray, w: np.ndarray, stream, weights) -> float:
    cfg = ctx.cfg
    m = ids.size
    n = ctx.fit_values.shape[1]
    scale = np.sqrt(w / m)[:, None]
    A = scale * ctx.fit_values[ids]
    V = scale[:, 0] * (ctx.f_grid[ids] + _noise(ctx, m, stream))
    lam = cfg.lam if cfg.lam is not None else auto_lambda(n, weights)
    res = sr_lasso(SrLassoProblem(A, V, lam, weights, max_iters=cfg.max_iters, tol=cfg.tol))
    fhat = ctx.fit_values @ res.coefficients[:, 0]
    return relative_linf_error(ctx.f_grid, fhat)


def _record(cfg, scheme, m, s, trial, fn) -> TrialRecord:
    t0 = time.perf_counter()
    try:
        err, alpha = fn()
    except Exception as exc:  # noqa: BLE001 - a failed step is recorded, not fatal
        log.warning("scheme %s m=%d s=%d trial %d failed: %s", scheme, m, s, trial, exc)
        err, alpha = float("nan"), float("nan")
    secs = time.perf_counter() - t0 if cfg.timing else None
    return TrialRecord(scheme, m, s, trial, err, alpha, secs)


def _run_hierarchical(ctx: _Context) -> list[TrialRecord]:
    # One trial is one nested point set: per-column draw sequences are
    # extended, never redrawn, as the ladder grows.
    cfg = ctx.cfg
    Q = ctx.ortho.Q
    per = [max(1, math.ceil(m / s)) for s, m in ctx.steps]
    s_max = max(s for s, _ in ctx.steps)
    out: dict[tuple[int, int], TrialRecord] = {}
    for trial in range(cfg.trials):
        stream = StreamId(cfg.seed, "draw:opt-hier", (trial,))
        draws = _measures.hierarchical_column_draws(Q[:, :s_max], max(per), stream)
        for step, ((s, _), c) in enumerate(zip(ctx.steps, per)):
            ids = np.concatenate([draws[j][:c] for j in range(s)])
            K = ctx.k * np.sum(np.abs(Q[:, :s]) ** 2, axis=1)
            w = s / K[ids]
            out[(step, trial)] = _record(
                cfg, "opt-hier", ids.size, s, trial,
                lambda: _fit_ls(ctx, ids, w, s, stream.child(step)))
    return [out[(step, t)] for step in range(len(ctx.steps)) for t in range(cfg.trials)]


def run_experiment(config: ExperimentConfig | dict,
                   out_dir=None) -> list[TrialRecord]:
    """Run every scheme over the ladder and return records ordered by
    (scheme, step, trial).  With ``out_dir``, also writes
    ``<run_id>.csv`` and ``<run_id>.meta.json`` there."""
    cfg = config if isinstance(config, ExperimentConfig) else ExperimentConfig.from_dict(config)
    ctx = _Context(cfg)
    weights = None
    if cfg.solver == "l1-weighted":
        spec = ctx.ortho.dictionary() if cfg.basis == "ortho" else ctx.source
        weights = lower_set_weights(spec, ctx.grid)

    records: list[TrialRecord] = []
    for scheme in cfg.schemes:
        if scheme == "opt-hier":
            records += _run_hierarchical(ctx)
            continue
        for step, (s, m) in enumerate(ctx.steps):
            try:
                plan = _plan(ctx, scheme, s)
            except Exception as exc:  # noqa: BLE001
                log.warning("scheme %s step %d: plan failed: %s", scheme, step, exc)
                records += [TrialRecord(scheme, m, s, t, float("nan"), float("nan"))
                            for t in range(cfg.trials)]
                continue
            for trial in range(cfg.trials):
                stream = StreamId(cfg.seed, f"draw:{scheme}", (step, trial))
                ids = _measures.draw(plan, m, stream).point_ids
                w = plan.weights[ids]
                if cfg.solver == "ls":
                    fn = lambda: _fit_ls(ctx, ids, w, s, stream)  # noqa: E731
                else:
                    fn = lambda: (_fit_l1(ctx, ids, w, stream, weights), float("nan"))  # noqa: E731
                records.append(_record(cfg, scheme, m, s, trial, fn))

    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_records(records, out / f"{cfg.run_id}.csv")
        (out / f"{cfg.run_id}.meta.json").write_text(
            json.dumps(_metadata(cfg, ctx, records), indent=2, sort_keys=True) + "\n")
    return records


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def write_records(records: Sequence[TrialRecord], path=None) -> str:
    """Serialize records as CSV (deterministic float formatting)."""
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(CSV_HEADER)
    for r in records:
        wr.writerow([_fmt(getattr(r, f)) for f in CSV_HEADER])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


def _metadata(cfg: ExperimentConfig, ctx: _Context, records) -> dict:
    B = ctx.fit_values / math.sqrt(ctx.k)
    report = _measures.constants_report(B)
    summary = {}
    for scheme in cfg.schemes:
        for s, m in ctx.steps:
            errs = [r.rel_err for r in records
                    if r.scheme == scheme and r.s == s and not math.isnan(r.rel_err)
                    and (r.m == m or scheme == "opt-hier")]
            if errs:
                lm, ls = log_stats(errs)
                summary.setdefault(scheme, []).append(
                    {"s": s, "m": m, "log_mean": lm, "log_std": ls, "count": len(errs)})
    return {
        "config": asdict(cfg),
        "grid": {"k": ctx.k, "stream": ctx.grid.seed_info,
                 "acceptance_rate": ctx.grid.acceptance_rate},
        "n": len(ctx.iset),
        "steps": [{"s": s, "m": m} for s, m in ctx.steps],
        "constants": json.loads(report.to_json()),
        "m_rule": "explicit" if cfg.m_values is not None else "ceil(s*ln(s)), natural log",
        "summary": summary,
        "environment": {"python": platform.python_version(), "numpy": np.__version__},
    }
