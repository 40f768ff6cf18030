"""Command line front end.

Dispatches the subcommands, resolves flag / config-file precedence, and owns
all artifact writing: CSV with a '#' metadata preamble, JSON reports, and a
manifest per file-producing run. Writes are atomic (temp file + rename) and
numeric formatting is repr-exact, so a manifest re-run reproduces every
artifact byte for byte regardless of the worker count.

Exit codes: 0 success, 1 usage or validation error, 2 failed check,
3 numerical non-convergence.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import io
import json
import os
import random
import re
import sys
import tempfile

import numpy as np

from . import __version__
from . import diagrams as dg
from .chebyshev import ConvergenceError, propagate
from .config import (DIAGRAM_CHECKS, DISTRIBUTIONS, SHAPES, VERIFY_SUITES,
                     RunConfig)
from .diffusion import estimate_rho, second_moment_check, weak_test
from .ensemble import EntryDistribution, sample_matrix
from .lattice import build_profile, get_shape, wigner_profile
from .limit_density import covariance_of_shape, limit_profile
from .spectral_edge import EigenConvergenceError, edge_experiment
from .verify import run_suite


# ---------------------------------------------------------------------------
# artifact writing
# ---------------------------------------------------------------------------

def _atomic_write(path, data: bytes):
    path = os.path.abspath(path)
    directory = os.path.dirname(path) or "."
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".bandlab-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _f(value) -> str:
    return repr(float(value))


def _csv_bytes(cfg: RunConfig, meta: dict, header, rows) -> bytes:
    """CSV with the '#' preamble: version, seed, config hash, then run keys."""
    buf = io.StringIO()
    buf.write(f"# bandlab {__version__}\n")
    buf.write(f"# seed={cfg.seed}\n")
    buf.write(f"# config={cfg.config_hash()}\n")
    for key, value in meta.items():
        buf.write(f"# {key}={value}\n")
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(row) + "\n")
    return buf.getvalue().encode()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def _json_bytes(obj) -> bytes:
    return (json.dumps(_jsonable(obj), sort_keys=True, indent=2) + "\n").encode()


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


class _Artifacts:
    """Collects written files and emits the run manifest next to `out`."""

    def __init__(self, cfg: RunConfig, default_out: str):
        self.cfg = cfg
        self.out = cfg.out or default_out
        self.stem = os.path.splitext(self.out)[0]
        self.written = {}

    def write(self, path, data: bytes):
        _atomic_write(path, data)
        self.written[os.path.basename(path)] = _sha256(data)
        return path

    def sibling(self, suffix) -> str:
        return self.stem + suffix

    def finish(self):
        manifest = {
            "version": __version__,
            "subcommand": self.cfg.subcommand,
            "config": self.cfg.as_dict(),
            "config_hash": self.cfg.config_hash(),
            "artifacts": dict(sorted(self.written.items())),
        }
        path = self.sibling(".manifest.json")
        _atomic_write(path, _json_bytes(manifest))
        return path


# ---------------------------------------------------------------------------
# shared ensemble construction
# ---------------------------------------------------------------------------

def _profile_of(cfg: RunConfig):
    if cfg.M is not None:
        return wigner_profile(cfg.M)
    return build_profile(cfg.d, cfg.N, cfg.W, cfg.shape)


def _dist_of(cfg: RunConfig) -> EntryDistribution:
    return EntryDistribution(kind=cfg.dist, complex_entries=cfg.complex_entries,
                             delta=cfg.delta)


def _resolve_t(cfg: RunConfig, profile) -> float:
    if cfg.t is not None:
        return float(cfg.t)
    d = profile.lattice.d
    return float(profile.W ** (d * cfg.kappa) * cfg.T)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_gen(cfg: RunConfig) -> int:
    profile = _profile_of(cfg)
    dist = _dist_of(cfg)
    art = _Artifacts(cfg, "bandlab-gen.json")
    descriptor = {
        **profile.descriptor(),
        "dist": dist.descriptor(),
        "seed": cfg.seed,
    }
    art.write(art.out, _json_bytes(descriptor))
    if cfg.export_matrix:
        sample = sample_matrix(profile, dist, cfg.seed)
        buf = io.StringIO()
        sample.write_coordinates(buf)
        art.write(cfg.export_matrix, buf.getvalue().encode())
    manifest = art.finish()
    print(f"profile d={profile.lattice.d} N={profile.lattice.N} W={profile.W} "
          f"M={profile.M!r} row_sum={profile.row_sum!r}")
    print(f"wrote {art.out} ({manifest})")
    return 0


def cmd_evolve(cfg: RunConfig) -> int:
    profile = _profile_of(cfg)
    dist = _dist_of(cfg)
    t = _resolve_t(cfg, profile)
    lat = profile.lattice
    psi0 = np.zeros(lat.size, dtype=np.complex128)
    psi0[lat.flat_index(np.zeros(lat.d, dtype=np.int64))] = 1.0
    sample = sample_matrix(profile, dist, cfg.seed)
    res = propagate(sample, t, residual_target=cfg.residual_target, psi0=psi0)
    coords = lat.all_sites()
    rho = res.rho
    art = _Artifacts(cfg, "bandlab-evolve.csv")
    header = [f"x{i + 1}" for i in range(lat.d)] + ["rho"]
    rows = (
        [str(int(c)) for c in coords[i]] + [_f(rho[i])]
        for i in range(lat.size)
    )
    meta = {"t": _f(t), "residual": _f(res.residual),
            "n_max": res.n_max, "norm": _f(res.norm)}
    art.write(art.out, _csv_bytes(cfg, meta, header, rows))
    art.finish()
    print(f"wrote {art.out}: {lat.size} sites, t={t!r}, "
          f"n_max={res.n_max}, norm={res.norm!r}")
    return 0


def cmd_diffusion(cfg: RunConfig) -> int:
    profile = _profile_of(cfg)
    dist = _dist_of(cfg)
    t = _resolve_t(cfg, profile)
    result = estimate_rho(profile, dist, t, cfg.realizations, cfg.seed,
                          residual_target=cfg.residual_target,
                          threads=cfg.threads)
    summary = weak_test(result, cfg.kappa, limit_nodes=cfg.nodes)
    moment = second_moment_check(result, cfg.kappa)

    art = _Artifacts(cfg, "bandlab-diffusion.csv")
    lat = profile.lattice
    coords = lat.all_sites()
    header = [f"x{i + 1}" for i in range(lat.d)] + ["rho", "se"]
    rows = (
        [str(int(c)) for c in coords[i]] + [_f(result.rho[i]), _f(result.rho_se[i])]
        for i in range(lat.size)
    )
    meta = {"t": _f(t), "kappa": _f(cfg.kappa), "T": _f(summary.T),
            "realizations": cfg.realizations,
            "mass_defect_max": _f(result.mass_defect_max)}
    art.write(art.out, _csv_bytes(cfg, meta, header, rows))

    report = {
        "ensemble": result.descriptor(),
        "rescaled": summary.as_dict(),
        "second_moment": moment.as_dict(),
        "reproducibility": {
            "seed": cfg.seed,
            "config_hash": cfg.config_hash(),
            "version": __version__,
        },
    }
    art.write(art.sibling(".summary.json"), _json_bytes(report))
    art.finish()

    worst = max(e.gap for e in summary.entries)
    print(f"wrote {art.out} and {art.sibling('.summary.json')}")
    print(f"T={summary.T!r} x_scale={summary.x_scale!r} "
          f"worst weak-test gap={worst!r} "
          f"moment ratio={moment.ratio!r}")
    return 0


def cmd_limit(cfg: RunConfig) -> int:
    lo, hi, count = cfg.grid_points()
    xs = np.linspace(lo, hi, count)
    sigma = covariance_of_shape(get_shape(cfg.shape), d=1)
    T = float(cfg.T if cfg.T is not None else cfg.t)
    values = limit_profile(T, xs, sigma, nodes=cfg.nodes)
    art = _Artifacts(cfg, "bandlab-limit.csv")
    meta = {"T": _f(T), "sigma": _f(sigma.matrix[0, 0]), "nodes": cfg.nodes}
    rows = ([_f(x), _f(v)] for x, v in zip(xs, values))
    art.write(art.out, _csv_bytes(cfg, meta, ["X", "L"], rows))
    art.finish()
    print(f"wrote {art.out}: {count} points on [{lo!r}, {hi!r}], T={T!r}")
    return 0


def _diagram_check_narayana(max_edges):
    k_census = min(max_edges, 8)
    bad = []
    for k in range(1, k_census + 1):
        census = dg.leaf_census(k)
        for leaves in range(1, k + 1):
            want = dg.narayana(k, leaves)
            got = census.get(leaves, 0)
            if got != want:
                bad.append({"k": k, "leaves": leaves, "census": got,
                            "narayana": want})
    for k in range(1, 21):
        total = sum(dg.narayana(k, leaves) for leaves in range(1, k + 1))
        if total != dg.catalan(k):
            bad.append({"k": k, "sum": total, "catalan": dg.catalan(k)})
    detail = f"tree census k <= {k_census}, Catalan sums k <= 20"
    return detail, bad


def _diagram_check_skeleton(max_edges, orders=50):
    rng = random.Random(20260814)
    bad = []
    checked = 0
    for L in range(4, max_edges + 1, 2):
        for n in range(1, L):
            stems = dg.StemCycle(n, L - n)
            edges = list(range(L))
            for _ in range(3):
                rng.shuffle(edges)
                bridges = tuple(frozenset(edges[i:i + 2]) for i in range(0, L, 2))
                tags = tuple(rng.choice((dg.STRAIGHT, dg.TWISTED)) for _ in bridges)
                tagged = dg.TaggedPairing(stems, bridges, tags)
                sizes = {dg.skeleton(tagged, rng=random.Random(o)).size
                         for o in range(orders)}
                checked += 1
                if len(sizes) != 1:
                    bad.append({"n": n, "nprime": L - n,
                                "bridges": [sorted(b) for b in bridges],
                                "tags": list(tags),
                                "terminal_sizes": sorted(sizes)})
    detail = f"{checked} tagged pairings x {orders} collapse orders"
    return detail, bad


def _diagram_check_greedy(max_edges):
    bad = []
    runs = 0
    for L in range(6, max_edges + 1, 2):
        block_sets = [b for b in dg.even_lumpings(L)
                      if not all(len(block) == 2 for block in b)]
        for n in range(1, L):
            stems = dg.StemCycle(n, L - n)
            for blocks in block_sets:
                gamma = dg.Lumping(stems, blocks)
                runs += 1
                pairing = dg.greedy_refining_pairing(gamma)
                target = max(gamma.p / 4.0, 2.0)
                m = dg.min_skeleton_size(pairing.bridges, stems)
                ok = dg.refines(pairing.bridges, gamma) and m >= target
                if not ok:
                    bad.append({"n": n, "nprime": L - n,
                                "lumps": [sorted(l) for l in gamma.lumps],
                                "bridges": [sorted(b) for b in pairing.bridges],
                                "m": m, "target": target})
    detail = f"{runs} lumpings, n+n' <= {max_edges}, brute-force m"
    return detail, bad


_DIAGRAM_RUNNERS = {
    "narayana": _diagram_check_narayana,
    "skeleton": _diagram_check_skeleton,
    "greedy": _diagram_check_greedy,
}


def cmd_diagrams(cfg: RunConfig) -> int:
    checks = [cfg.check] if cfg.check else list(DIAGRAM_CHECKS)
    failures = {}
    for name in checks:
        detail, bad = _DIAGRAM_RUNNERS[name](cfg.max_edges)
        status = "PASS" if not bad else f"FAIL ({len(bad)} counterexamples)"
        print(f"{status}  {name:10s} {detail}")
        if bad:
            failures[name] = bad
    if failures:
        art = _Artifacts(cfg, "bandlab-diagrams.json")
        art.write(art.out, _json_bytes({"counterexamples": failures}))
        art.finish()
        print(f"counterexamples written to {art.out}", file=sys.stderr)
        return 2
    return 0


def cmd_edge(cfg: RunConfig) -> int:
    profile = _profile_of(cfg)
    dist = _dist_of(cfg)
    kappa = cfg.kappa if cfg.kappa is not None else 0.25
    report = edge_experiment(profile, dist, cfg.epsilon, cfg.trials,
                             seed=cfg.seed, kappa=kappa, threads=cfg.threads)
    art = _Artifacts(cfg, "bandlab-edge.csv")
    meta = {"M": _f(report.M), "epsilon": _f(report.epsilon),
            "threshold": _f(report.threshold), "bound_n": report.bound_n}
    rows = ([str(i), _f(v)] for i, v in enumerate(report.lambda_samples))
    art.write(art.out, _csv_bytes(cfg, meta, ["trial", "lambda_max"], rows))
    art.write(art.sibling(".report.json"), _json_bytes(report.as_dict()))
    art.finish()
    print(f"wrote {art.out} and {art.sibling('.report.json')}")
    print(f"threshold={report.threshold!r} "
          f"exceedance={report.exceed_fraction!r} "
          f"tail bound={report.bound_value!r}")
    return 0


def cmd_verify(cfg: RunConfig) -> int:
    kwargs = {}
    if cfg.suite == "nonbacktracking":
        kwargs = {"n_max": cfg.n_max, "seeds": cfg.seeds}
    rows = run_suite(cfg.suite or "all", **kwargs)
    for row in rows:
        status = "PASS" if row.passed else "FAIL"
        print(f"{status}  {row.suite:16s} {row.name:24s} {row.detail}")
    failed = [r for r in rows if not r.passed]
    if cfg.out:
        art = _Artifacts(cfg, cfg.out)
        art.write(art.out, _json_bytes({"checks": [dataclasses.asdict(r) for r in rows],
                                        "failed": len(failed)}))
        art.finish()
    print(f"{len(rows) - len(failed)}/{len(rows)} checks passed")
    return 2 if failed else 0


_HANDLERS = {
    "gen": cmd_gen,
    "evolve": cmd_evolve,
    "diffusion": cmd_diffusion,
    "limit": cmd_limit,
    "diagrams": cmd_diagrams,
    "edge": cmd_edge,
    "verify": cmd_verify,
}


# ---------------------------------------------------------------------------
# argument parsing and config resolution
# ---------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    """Usage problems exit 1 (argparse defaults to 2).

    Tokens like '-4:4:0.05' must parse as values, not flags, so the
    negative-number matcher accepts anything starting with a digit after
    the dash; no option name here looks like that.
    """

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self._negative_number_matcher = re.compile(r"^-\d")

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _add_common(p):
    p.add_argument("--config", metavar="JSON",
                   help="config file (a manifest also works); flags override")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--threads", type=int, default=None,
                   help="worker threads (env BANDLAB_THREADS is the fallback)")
    p.add_argument("--out", default=None, metavar="PATH",
                   help="primary output file; siblings derive from its stem")


def _add_ensemble(p, with_M=False):
    p.add_argument("--d", type=int, default=None)
    p.add_argument("--N", type=int, default=None)
    p.add_argument("--W", type=int, default=None)
    p.add_argument("--shape", choices=SHAPES, default=None)
    p.add_argument("--dist", choices=DISTRIBUTIONS, default=None)
    p.add_argument("--delta", type=float, default=None,
                   help="truncation exponent; entries beyond M^delta are zeroed")
    p.add_argument("--real", action="store_const", const=False,
                   dest="complex_entries", default=None,
                   help="real symmetric entries instead of complex Hermitian")
    p.add_argument("--complex", action="store_const", const=True,
                   dest="complex_entries")
    if with_M:
        p.add_argument("--M", type=int, default=None,
                       help="mean-field preset: N = M, every variance 1/M")


def _add_time(p):
    p.add_argument("--t", type=float, default=None, help="microscopic time")
    p.add_argument("--kappa", type=float, default=None)
    p.add_argument("--T", type=float, default=None,
                   help="macroscopic time; t = W^(d kappa) T")


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bandlab",
                     description="Band matrix diffusion experiments")
    parser.add_argument("--version", action="version",
                        version=f"bandlab {__version__}")
    subs = parser.add_subparsers(dest="subcommand", required=True,
                                 parser_class=_Parser)

    p = subs.add_parser("gen", help="write a profile descriptor "
                                    "(optionally a sampled matrix)")
    _add_common(p)
    _add_ensemble(p, with_M=True)
    p.add_argument("--export-matrix", default=None, metavar="PATH",
                   help="also write one realization as 'x y re im' lines")

    p = subs.add_parser("evolve", help="single realization site profile at time t")
    _add_common(p)
    _add_ensemble(p)
    _add_time(p)
    p.add_argument("--residual-target", type=float, default=None)

    p = subs.add_parser("diffusion", help="averaged profile, weak tests, moments")
    _add_common(p)
    _add_ensemble(p)
    _add_time(p)
    p.add_argument("--realizations", type=int, default=None)
    p.add_argument("--nodes", type=int, default=None,
                   help="quadrature nodes for the limit-side integrals")
    p.add_argument("--residual-target", type=float, default=None)

    p = subs.add_parser("limit", help="limiting density L(T, X) on a grid")
    _add_common(p)
    p.add_argument("--T", type=float, default=None)
    p.add_argument("--t", type=float, default=None, help=argparse.SUPPRESS)
    p.add_argument("--grid", default=None, metavar="LO:HI:STEP")
    p.add_argument("--shape", choices=SHAPES, default=None)
    p.add_argument("--nodes", type=int, default=None)
    p.add_argument("--xmax", type=float, default=None)
    p.add_argument("--points", type=int, default=None)

    p = subs.add_parser("diagrams", help="pairing / skeleton / tree count checks")
    _add_common(p)
    p.add_argument("--check", choices=DIAGRAM_CHECKS, default=None,
                   help="run one check instead of all three")
    p.add_argument("--max-edges", type=int, default=None)

    p = subs.add_parser("edge", help="largest-eigenvalue tail experiment")
    _add_common(p)
    _add_ensemble(p, with_M=True)
    p.add_argument("--epsilon", type=float, default=None,
                   help="threshold exponent: 2 + M^(-2/3+epsilon)")
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--kappa", type=float, default=None,
                   help="Chebyshev degree exponent for the tail bound")

    p = subs.add_parser("verify", help="fixed-seed identity suites")
    _add_common(p)
    p.add_argument("suite", choices=VERIFY_SUITES)
    p.add_argument("--n-max", type=int, default=None,
                   help="nonbacktracking: largest power checked (cap 8)")
    p.add_argument("--seeds", type=int, default=None,
                   help="nonbacktracking: number of seeded instances")

    return parser


def _resolve_config(args) -> RunConfig:
    base = RunConfig(subcommand=args.subcommand)
    if getattr(args, "config", None):
        with open(args.config, "r", encoding="utf-8") as fh:
            base = RunConfig.from_json(fh.read())
        base.subcommand = args.subcommand
    names = {f.name for f in dataclasses.fields(RunConfig)}
    overrides = {k: v for k, v in vars(args).items()
                 if k in names and v is not None}
    return dataclasses.replace(base, **overrides)


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = _resolve_config(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    errors = cfg.validate()
    if errors:
        for err in errors:
            print(f"error: {err}", file=sys.stderr)
        return 1
    try:
        return _HANDLERS[cfg.subcommand](cfg)
    except (ConvergenceError, EigenConvergenceError) as exc:
        print(f"error: numerical non-convergence: {exc}", file=sys.stderr)
        return 3
    except RuntimeError as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
