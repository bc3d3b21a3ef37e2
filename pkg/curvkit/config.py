"""Run configuration shared by the command line and the acceptance suite."""

import os
from dataclasses import dataclass, field
from typing import List, Optional

from curvkit.utils import VERDICT_TOL, ConfigError

DEFAULT_SEED = 0xA1E
JOBS_ENV = "CURVKIT_JOBS"


def default_jobs():
    raw = os.environ.get(JOBS_ENV)
    if not raw:
        return 1
    try:
        jobs = int(raw)
    except ValueError:
        raise ConfigError(f"{JOBS_ENV} must be an integer, got {raw!r}") from None
    if jobs < 1:
        raise ConfigError(f"{JOBS_ENV} must be at least 1")
    return jobs


@dataclass
class RunConfig:
    command: str
    inputs: List[str] = field(default_factory=list)
    kappa: float = 0.0
    kappa_min: Optional[float] = None
    kappa_max: Optional[float] = None
    tol: float = VERDICT_TOL
    seed: int = DEFAULT_SEED
    jobs: int = 1
    out: Optional[str] = None
    plot: Optional[str] = None
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kappa_min is not None and self.kappa_max is not None and self.kappa_min > self.kappa_max:
            raise ConfigError(f"kappa range is empty: {self.kappa_min} > {self.kappa_max}")
        if self.tol <= 0:
            raise ConfigError("tolerance must be positive")
        if self.jobs < 1:
            raise ConfigError("jobs must be at least 1")

    @classmethod
    def from_args(cls, args):
        common = {"command", "inputs", "kappa", "kappa_min", "kappa_max", "tol", "seed", "jobs", "out", "plot"}
        values = vars(args).copy()
        values.pop("verbose", None)
        values.pop("handler", None)
        options = {k: v for k, v in values.items() if k not in common}
        jobs = values.get("jobs")
        return cls(
            command=values["command"],
            inputs=list(values.get("inputs") or []),
            kappa=values.get("kappa", 0.0) if values.get("kappa") is not None else 0.0,
            kappa_min=values.get("kappa_min"),
            kappa_max=values.get("kappa_max"),
            tol=values.get("tol") or VERDICT_TOL,
            seed=values.get("seed") if values.get("seed") is not None else DEFAULT_SEED,
            jobs=jobs if jobs is not None else default_jobs(),
            out=values.get("out"),
            plot=values.get("plot"),
            options=options,
        )
