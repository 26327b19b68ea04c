"""Experiment driver: matrix ingestion, multi-restart runs, trace emission.

Input matrices come from a generator spec or from files: Matrix Market
coordinate files (``%%MatrixMarket matrix coordinate real symmetric`` or
``general``) load as sparse symmetric matrices, whitespace-delimited dense
text with a ``rows cols`` header loads as a dense array. Every selected
solver within a restart starts from the same initial factor; traces are
written as one CSV per (solver, restart) plus a summary in both
human-readable and JSON form.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import baselines, certificates, splitting
from .errors import ConfigError, MatrixParseError, ShapeError
from .linalg import SparseSym
from .problem import GenSpec, SymProblem, gen_dataset

__all__ = [
    "load_matrix",
    "save_matrix",
    "ExperimentConfig",
    "run_experiment",
    "main",
]

SOLVER_NAMES = ("ns", "pgd", "anls")

EXIT_OK = 0
EXIT_CONFIG_ERROR = 1
EXIT_ALL_RUNS_FAILED = 2


# ---------------------------------------------------------------------------
# matrix files

def _tokens(path):
    """Yield (line_number, tokens) for non-comment, non-blank lines."""
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("%"):
                continue
            yield lineno, stripped.split()


def load_matrix(path):
    """Read a square matrix from a Matrix Market or dense text file."""
    with open(path) as fh:
        first = fh.readline()
    if first.startswith("%%MatrixMarket"):
        return _load_matrix_market(path, first.rstrip("\n"))
    return _load_dense_text(path)


def _load_matrix_market(path, header):
    fields = header.split()
    if len(fields) != 5:
        raise MatrixParseError(f"malformed MatrixMarket header: {header!r}", line=1)
    _, obj, fmt, valtype, symmetry = (f.lower() for f in fields)
    if obj != "matrix" or fmt != "coordinate":
        raise MatrixParseError(
            f"only coordinate matrices are supported, got {obj}/{fmt}", line=1)
    if valtype not in ("real", "integer"):
        raise MatrixParseError(f"unsupported value type {valtype!r}", line=1)
    if symmetry not in ("symmetric", "general"):
        raise MatrixParseError(f"unsupported symmetry {symmetry!r}", line=1)

    it = _tokens(path)
    try:
        lineno, toks = next(it)
    except StopIteration:
        raise MatrixParseError("missing size line", line=1) from None
    if len(toks) != 3:
        raise MatrixParseError(f"size line needs 'rows cols nnz', got {toks}",
                               line=lineno)
    try:
        n, m, nnz = (int(t) for t in toks)
    except ValueError:
        raise MatrixParseError(f"non-integer size entry in {toks}",
                               line=lineno) from None
    if n != m:
        raise ShapeError(f"matrix must be square, got {n}x{m}")

    rows, cols, vals = [], [], []
    count = 0
    for lineno, toks in it:
        if len(toks) != 3:
            raise MatrixParseError(f"entry needs 'i j value', got {toks!r}",
                                   line=lineno)
        try:
            i, j, v = int(toks[0]), int(toks[1]), float(toks[2])
        except ValueError:
            raise MatrixParseError(f"malformed entry {toks!r}",
                                   line=lineno) from None
        if not (1 <= i <= n and 1 <= j <= n):
            raise MatrixParseError(
                f"index ({i}, {j}) out of range for n={n}", line=lineno)
        rows.append(i - 1)
        cols.append(j - 1)
        vals.append(v)
        count += 1
    if count != nnz:
        raise MatrixParseError(f"expected {nnz} entries, found {count}")

    if symmetry == "general":
        # a general file may carry both triangles; store (M + M^T)/2
        acc = {}
        for i, j, v in zip(rows, cols, vals):
            acc[(i, j)] = acc.get((i, j), 0.0) + v
        sym = {}
        for (i, j), v in acc.items():
            key = (min(i, j), max(i, j))
            sym[key] = sym.get(key, 0.0) + (v if i == j else 0.5 * v)
        rows = [i for i, _ in sym]
        cols = [j for _, j in sym]
        vals = list(sym.values())
    return SparseSym(n, rows, cols, vals)


def _load_dense_text(path):
    it = _tokens(path)
    try:
        lineno, toks = next(it)
    except StopIteration:
        raise MatrixParseError("empty matrix file", line=1) from None
    if len(toks) != 2:
        raise MatrixParseError(
            f"dense header needs 'rows cols', got {toks!r}", line=lineno)
    try:
        rows, cols = int(toks[0]), int(toks[1])
    except ValueError:
        raise MatrixParseError(f"non-integer dense header {toks!r}",
                               line=lineno) from None
    if rows != cols:
        raise ShapeError(f"matrix must be square, got {rows}x{cols}")
    data = np.empty((rows, cols))
    r = 0
    for lineno, toks in it:
        if r >= rows:
            raise MatrixParseError("more data rows than declared", line=lineno)
        if len(toks) != cols:
            raise MatrixParseError(
                f"expected {cols} values per row, got {len(toks)}", line=lineno)
        try:
            data[r] = [float(t) for t in toks]
        except ValueError:
            raise MatrixParseError(f"malformed value in row {r + 1}",
                                   line=lineno) from None
        r += 1
    if r != rows:
        raise MatrixParseError(f"expected {rows} data rows, found {r}")
    return data


def save_matrix(path, z):
    """Write a matrix in the format ``load_matrix`` reads back exactly."""
    path = Path(path)
    with open(path, "w") as fh:
        if isinstance(z, SparseSym):
            fh.write("%%MatrixMarket matrix coordinate real symmetric\n")
            fh.write(f"{z.n} {z.n} {len(z.vals)}\n")
            # Matrix Market convention stores the lower triangle
            for i, j, v in zip(z.rows, z.cols, z.vals):
                fh.write(f"{j + 1} {i + 1} {v:.17g}\n")
        else:
            z = np.asarray(z)
            fh.write(f"{z.shape[0]} {z.shape[1]}\n")
            for row in z:
                fh.write(" ".join(f"{v:.17g}" for v in row) + "\n")


# ---------------------------------------------------------------------------
# experiment configuration

@dataclass
class ExperimentConfig:
    solvers: list[str] = field(default_factory=lambda: ["ns"])
    gen: GenSpec | None = None
    input_path: str | None = None
    k: int | None = None
    restarts: int = 1
    seed: int = 0
    out_dir: str = "runs"
    certify: bool = False
    stop_eps: float = 1e-8
    max_iters: int = 2000
    pgd_step: float = 1e-5
    anls_nu: float | None = None
    rho_init_mode: str = "sqrt_n_tau_bar"

    def __post_init__(self):
        if self.restarts < 1:
            raise ConfigError("restarts must be >= 1")
        if not self.solvers:
            raise ConfigError("at least one solver must be selected")
        for s in self.solvers:
            if s not in SOLVER_NAMES:
                raise ConfigError(f"unknown solver {s!r}; choose from {SOLVER_NAMES}")
        if (self.gen is None) == (self.input_path is None):
            raise ConfigError("exactly one of a generator spec or an input "
                              "file must be given")
        if self.input_path is not None and self.k is None:
            raise ConfigError("--k is required with --input")


def _build_problem(cfg: ExperimentConfig) -> SymProblem:
    if cfg.gen is not None:
        return gen_dataset(cfg.gen)
    z = load_matrix(cfg.input_path)
    return SymProblem.build(z, cfg.k)


def _run_one(name, prob, cfg: ExperimentConfig, seed, x0):
    if name == "ns":
        scfg = splitting.SolverConfig(
            max_outer_iters=cfg.max_iters, stop_eps=cfg.stop_eps,
            rho_init_mode=cfg.rho_init_mode, seed=seed)
        res = splitting.run(prob, scfg, x0=x0)
        return res.x, res.trace
    bcfg = baselines.BaselineConfig(
        algorithm=name, max_iters=cfg.max_iters, pgd_step=cfg.pgd_step,
        anls_nu=cfg.anls_nu, seed=seed)
    res = baselines.pgd_run(prob, bcfg, x0=x0) if name == "pgd" \
        else baselines.anls_run(prob, bcfg, x0=x0)
    return res.x, res.trace


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


def write_trace_csv(path, trace):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(splitting.IterTrace.COLUMNS)
        for row in trace.rows():
            writer.writerow([_fmt(v) for v in row])


def _certificate_record(cert):
    rec = dataclasses.asdict(cert)
    rec["scan"] = [dataclasses.asdict(p) for p in cert.scan]
    return rec


def run_experiment(cfg: ExperimentConfig) -> int:
    """Run every selected solver across all restarts; returns an exit code."""
    prob = _build_problem(cfg)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    finals = {name: [] for name in cfg.solvers}
    failures = {name: [] for name in cfg.solvers}
    cert_records = []
    any_ok = False
    for r in range(cfg.restarts):
        seed = cfg.seed + r
        x0 = splitting.initial_factor(prob, seed)
        for name in cfg.solvers:
            try:
                x, trace = _run_one(name, prob, cfg, seed, x0)
            except Exception as exc:  # noqa: BLE001 - recorded per run
                failures[name].append({"restart": r, "error": str(exc)})
                print(f"[{name} restart {r}] failed: {exc}", file=sys.stderr)
                continue
            any_ok = True
            write_trace_csv(out / f"{name}_restart{r:03d}.csv", trace)
            finals[name].append(trace[-1].rel_objective)
            if name == "ns" and cfg.certify:
                gc = certificates.global_certificate(x, prob)
                lc = (certificates.local_certificate_k1(x, prob)
                      if prob.K == 1 else certificates.local_certificate(x, prob))
                cert_records.append({
                    "restart": r,
                    "global": _certificate_record(gc),
                    "local": _certificate_record(lc),
                })

    summary = {"restarts": cfg.restarts, "seed": cfg.seed, "solvers": {}}
    lines = [f"{'solver':<8} {'runs':>4} {'mean rel_obj':>14} {'std':>12}"]
    for name in cfg.solvers:
        vals = finals[name]
        mean = float(np.mean(vals)) if vals else float("nan")
        std = float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0
        summary["solvers"][name] = {
            "final_rel_objective": {"mean": mean, "std": std, "values": vals},
            "failures": failures[name],
        }
        lines.append(f"{name:<8} {len(vals):>4} {mean:>14.6e} {std:>12.3e}")

    table = "\n".join(lines)
    print(table)
    (out / "summary.txt").write_text(table + "\n")
    with open(out / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2)
    if cfg.certify and cert_records:
        with open(out / "certificates.json", "w") as fh:
            json.dump(cert_records, fh, indent=2)

    return EXIT_OK if any_ok else EXIT_ALL_RUNS_FAILED


# ---------------------------------------------------------------------------
# command line

_CONFIG_KEYS = {
    "input": str, "generate": str, "n": int, "k": int, "cluster_sizes": str,
    "solver": str, "restarts": int, "seed": int, "out": str,
    "certify": lambda s: s.lower() in ("1", "true", "yes"),
    "stop_eps": float, "max_iters": int, "pgd_step": float,
    "anls_nu": float, "rho_init_mode": str,
}


def _read_config_file(path):
    values = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if "=" not in stripped:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, _, raw = stripped.partition("=")
            key = key.strip().replace("-", "_")
            if key not in _CONFIG_KEYS:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            try:
                values[key] = _CONFIG_KEYS[key](raw.strip())
            except ValueError as exc:
                raise ConfigError(f"{path}:{lineno}: bad value for {key}: {exc}")
    return values


def _parse_args(argv):
    ap = argparse.ArgumentParser(
        prog="symsplit",
        description="Symmetric nonnegative factorization experiment runner")
    ap.add_argument("--config", help="key = value configuration file")
    ap.add_argument("--input", help="matrix file (Matrix Market or dense text)")
    ap.add_argument("--generate", choices=GenSpec.KINDS,
                    help="draw a synthetic instance instead of reading a file")
    ap.add_argument("--n", type=int, help="generated instance size")
    ap.add_argument("--k", type=int, help="target rank")
    ap.add_argument("--cluster-sizes", help="comma list for adjacency instances")
    ap.add_argument("--solver", action="append", choices=SOLVER_NAMES,
                    help="solver to run (repeatable; default: ns)")
    ap.add_argument("--restarts", type=int, help="independent restarts")
    ap.add_argument("--seed", type=int, help="base seed; restart r uses seed+r")
    ap.add_argument("--out", help="output directory")
    ap.add_argument("--certify", action="store_true", default=None,
                    help="emit optimality certificates for ns outputs")
    ap.add_argument("--stop-eps", type=float, help="progress-metric threshold")
    ap.add_argument("--max-iters", type=int, help="outer iteration budget")
    return ap.parse_args(argv)


def _build_experiment_config(args) -> ExperimentConfig:
    values = _read_config_file(args.config) if args.config else {}
    solvers = []
    if values.get("solver"):
        solvers = [s.strip() for s in values["solver"].split(",") if s.strip()]
    if args.solver:
        solvers = list(args.solver)
    if not solvers:
        solvers = ["ns"]

    def pick(flag, key, default):
        if flag is not None:
            return flag
        return values.get(key, default)

    generate = pick(args.generate, "generate", None)
    input_path = pick(args.input, "input", None)
    n = pick(args.n, "n", None)
    k = pick(args.k, "k", None)
    seed = pick(args.seed, "seed", 0)
    sizes_raw = pick(args.cluster_sizes, "cluster_sizes", None)

    gen = None
    if generate is not None:
        if n is None or k is None:
            raise ConfigError("--generate requires --n and --k")
        sizes = None
        if sizes_raw:
            sizes = tuple(int(s) for s in str(sizes_raw).split(","))
        gen = GenSpec(kind=generate, n=n, k=k, cluster_sizes=sizes, seed=seed)

    return ExperimentConfig(
        solvers=solvers,
        gen=gen,
        input_path=input_path,
        k=k,
        restarts=pick(args.restarts, "restarts", 1),
        seed=seed,
        out_dir=pick(args.out, "out", "runs"),
        certify=bool(pick(args.certify, "certify", False)),
        stop_eps=pick(args.stop_eps, "stop_eps", 1e-8),
        max_iters=pick(args.max_iters, "max_iters", 2000),
        pgd_step=values.get("pgd_step", 1e-5),
        anls_nu=values.get("anls_nu"),
        rho_init_mode=values.get("rho_init_mode", "sqrt_n_tau_bar"),
    )


def main(argv=None) -> int:
    args = _parse_args(argv)
    try:
        cfg = _build_experiment_config(args)
        return run_experiment(cfg)
    except (ConfigError, MatrixParseError, ShapeError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR


if __name__ == "__main__":
    sys.exit(main())
