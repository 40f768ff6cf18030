"""Run configuration: one flat record per invocation, lossless JSON round
trip, and a content hash that identifies the experiment.

The hash covers only result-determining fields; worker count and output
location are execution details, so re-running a manifest with a different
--threads still yields byte-identical artifacts.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, fields

SUBCOMMANDS = ("gen", "evolve", "diffusion", "limit", "diagrams", "edge", "verify")
SHAPES = ("box", "triangular", "gaussian")
DISTRIBUTIONS = ("gaussian", "rademacher", "uniform")
DIAGRAM_CHECKS = ("skeleton", "greedy", "narayana")
VERIFY_SUITES = ("chebyshev", "nonbacktracking", "diagrams", "limit", "all")

# fields that do not affect numeric results, excluded from the hash
_EXECUTION_FIELDS = ("threads", "out", "export_matrix")


def parse_grid(spec):
    """'lo:hi:step' -> (lo, hi, step) floats, or None when malformed."""
    parts = str(spec).split(":")
    if len(parts) != 3:
        return None
    try:
        lo, hi, step = (float(p) for p in parts)
    except ValueError:
        return None
    if not (hi > lo and step > 0 and math.isfinite(lo) and math.isfinite(hi)):
        return None
    if (hi - lo) / step > 1e6:
        return None
    return lo, hi, step


@dataclass
class RunConfig:
    subcommand: str = "verify"
    d: int = 1
    N: int = 256
    W: int = 16
    shape: str = "box"
    dist: str = "gaussian"
    complex_entries: bool = True
    delta: float | None = None
    t: float | None = None
    kappa: float | None = None
    T: float | None = None
    realizations: int = 100
    epsilon: float = 0.2
    trials: int = 50
    M: int | None = None
    check: str | None = None
    max_edges: int = 10
    suite: str | None = None
    n_max: int = 6
    seeds: int = 3
    nodes: int = 200
    grid: str | None = None      # "lo:hi:step" overrides the symmetric default
    xmax: float = 4.0
    points: int = 161
    residual_target: float = 1e-12
    seed: int = 0
    threads: int | None = None
    out: str | None = None
    export_matrix: str | None = None

    def as_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ValueError(f"{unknown[0]}: unknown configuration field")
        return cls(**data)

    def canonical_dict(self):
        d = self.as_dict()
        for k in _EXECUTION_FIELDS:
            d.pop(k)
        return d

    def config_hash(self) -> str:
        blob = json.dumps(self.canonical_dict(), sort_keys=True,
                          separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()

    def validate(self):
        """Collect 'field: message' strings; empty means the config is usable."""
        errs = []
        if self.subcommand not in SUBCOMMANDS:
            errs.append(f"subcommand: unknown value {self.subcommand!r}")
        if self.d < 1:
            errs.append(f"d: dimension must be positive, got {self.d}")
        if self.N < 2:
            errs.append(f"N: lattice side must be at least 2, got {self.N}")
        if self.W < 1:
            errs.append(f"W: band width must be positive, got {self.W}")
        if self.W > self.N:
            errs.append(f"W: band width {self.W} exceeds lattice side N = {self.N}")
        if self.shape not in SHAPES:
            errs.append(f"shape: unknown value {self.shape!r}")
        if self.dist not in DISTRIBUTIONS:
            errs.append(f"dist: unknown value {self.dist!r}")
        if self.delta is not None and not 0.0 < self.delta < 0.5:
            errs.append(f"delta: truncation exponent must lie in (0, 0.5), got {self.delta}")
        if self.t is not None and self.t < 0:
            errs.append(f"t: time must be nonnegative, got {self.t}")
        if self.kappa is not None and not 0.0 < self.kappa:
            errs.append(f"kappa: scaling exponent must be positive, got {self.kappa}")
        if self.T is not None and self.T <= 0:
            errs.append(f"T: macroscopic time must be positive, got {self.T}")
        if self.realizations < 1:
            errs.append(f"realizations: need at least 1, got {self.realizations}")
        if self.trials < 1:
            errs.append(f"trials: need at least 1, got {self.trials}")
        if self.epsilon <= 0:
            errs.append(f"epsilon: must be positive, got {self.epsilon}")
        if self.M is not None and (self.M < 2 or self.M % 2):
            errs.append(f"M: mean-field size must be even and at least 2, got {self.M}")
        if self.check is not None and self.check not in DIAGRAM_CHECKS:
            errs.append(f"check: unknown value {self.check!r}")
        if not 2 <= self.max_edges <= 16 or self.max_edges % 2:
            errs.append(f"max_edges: need an even value in [2, 16], got {self.max_edges}")
        if self.suite is not None and self.suite not in VERIFY_SUITES:
            errs.append(f"suite: unknown value {self.suite!r}")
        if not 0 <= self.n_max <= 8:
            errs.append(f"n_max: direct-sum checks are capped at 8, got {self.n_max}")
        if self.seeds < 1:
            errs.append(f"seeds: need at least 1, got {self.seeds}")
        if self.nodes < 8:
            errs.append(f"nodes: quadrature needs at least 8 nodes, got {self.nodes}")
        if self.grid is not None and parse_grid(self.grid) is None:
            errs.append(f"grid: expected 'lo:hi:step' with hi > lo and step > 0, "
                        f"got {self.grid!r}")
        if self.points < 2:
            errs.append(f"points: output grid needs at least 2 points, got {self.points}")
        if self.residual_target <= 0:
            errs.append(f"residual_target: must be positive, got {self.residual_target}")
        if self.threads is not None and self.threads < 1:
            errs.append(f"threads: must be positive, got {self.threads}")
        if self.subcommand == "evolve" and self.t is None and (
                self.kappa is None or self.T is None):
            errs.append("t: evolve needs either t or both kappa and T")
        if self.subcommand == "diffusion" and self.kappa is None:
            errs.append("kappa: diffusion needs the scaling exponent")
        if self.subcommand == "diffusion" and self.T is None and self.t is None:
            errs.append("T: diffusion needs either T or t")
        if self.subcommand == "limit" and self.T is None and self.t is None:
            errs.append("T: limit needs the macroscopic time T")
        return errs

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), sort_keys=True, indent=2) + "\n"

    def grid_points(self):
        """Output grid (lo, hi, count): parsed 'lo:hi:step' or the symmetric default."""
        if self.grid is not None:
            parsed = parse_grid(self.grid)
            if parsed is None:
                raise ValueError(f"grid: malformed spec {self.grid!r}")
            lo, hi, step = parsed
            return lo, hi, int(round((hi - lo) / step)) + 1
        return -self.xmax, self.xmax, self.points

    @classmethod
    def from_json(cls, text):
        data = json.loads(text)
        if isinstance(data, dict) and "config" in data and "config_hash" in data:
            data = data["config"]  # accept a manifest in place of a bare config
        if not isinstance(data, dict):
            raise ValueError("config: top-level JSON value must be an object")
        return cls.from_dict(data)
