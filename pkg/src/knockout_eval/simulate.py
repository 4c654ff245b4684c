"""Monte-Carlo comparison of assessment methods with the simulated judge.

Each trial draws one synthetic question whose answers have known latent
qualities, runs every requested method against an oracle judge, and scores
the method by the Pearson correlation between its final scores and the
latents.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

from .judges import Judge, OracleBackend, stable_seed
from .metrics import try_pearson
from .models import CandidateAnswer, EvaluationItem, Method
from .tournament import EngineConfig, run_assessment


@dataclass(frozen=True)
class SimConfig:
    n_answers: int = 8
    trials: int = 100
    sigma: float = 0.0
    bias: float = 0.0
    max_points: float = 10.0
    latent_dist: str = "grid"  # "grid" (half-point steps) | "uniform"
    latent_low: float | None = None
    latent_high: float | None = None
    methods: tuple[Method, ...] = tuple(Method)
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "methods", tuple(Method(m) for m in self.methods))
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.n_answers < 2:
            raise ValueError("n_answers must be >= 2")
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")
        if self.latent_dist not in ("grid", "uniform"):
            raise ValueError(f"unknown latent distribution {self.latent_dist!r}")
        if not self.low <= self.high:
            raise ValueError("latent_low must not exceed latent_high")

    # default range keeps latents a tenth of the scale away from both ends so a
    # unit position bias does not hit the clamp on typical 10-point items
    @property
    def low(self) -> float:
        return 0.1 * self.max_points if self.latent_low is None else self.latent_low

    @property
    def high(self) -> float:
        return 0.9 * self.max_points if self.latent_high is None else self.latent_high


@dataclass
class MethodSummary:
    method: Method
    mean_r: float | None
    n_defined: int
    n_excluded: int
    mean_judge_calls: float
    per_trial_r: list[float | None] = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {
            "method": self.method.value,
            "mean_pearson": self.mean_r,
            "trials_defined": self.n_defined,
            "trials_excluded": self.n_excluded,
            "mean_judge_calls": self.mean_judge_calls,
        }


def draw_latents(config: SimConfig, rng: random.Random) -> list[float]:
    n = config.n_answers
    if config.latent_dist == "uniform":
        return [rng.uniform(config.low, config.high) for _ in range(n)]
    lo = math.ceil(config.low * 2)
    hi = math.floor(config.high * 2)
    grid = [k / 2 for k in range(lo, hi + 1)]
    if not grid:
        raise ValueError("latent range contains no half-point value")
    return rng.sample(grid, n) if len(grid) >= n else [rng.choice(grid) for _ in range(n)]


def synthetic_item(config: SimConfig, trial: int) -> EvaluationItem:
    rng = random.Random(stable_seed("sim-item", config.seed, trial))
    latents = draw_latents(config, rng)
    answers = tuple(
        CandidateAnswer(id=f"a{k:02d}", text=f"synthetic answer {k} of trial {trial}", latent_quality=q)
        for k, q in enumerate(latents)
    )
    return EvaluationItem(
        id=f"sim-{trial:05d}",
        prompt_text=f"Synthetic question {trial}",
        max_points=config.max_points,
        answers=answers,
    )


def run_simulation(config: SimConfig) -> list[MethodSummary]:
    per_method: dict[Method, list[float | None]] = {m: [] for m in config.methods}
    calls: dict[Method, int] = {m: 0 for m in config.methods}
    for trial in range(config.trials):
        item = synthetic_item(config, trial)
        backend = OracleBackend(config.sigma, config.bias, stable_seed("sim-oracle", config.seed, trial))
        judge = Judge(backend)
        latent = {a.id: a.latent_quality for a in item.answers}
        for method in config.methods:
            res = run_assessment(item, judge, EngineConfig(method=method, seed=trial))
            calls[method] += res.judge_call_count
            scored = res.scored()
            ids = sorted(scored)
            per_method[method].append(try_pearson([scored[a] for a in ids], [latent[a] for a in ids]))
    out = []
    for method in config.methods:
        rs = per_method[method]
        defined = [r for r in rs if r is not None]
        out.append(MethodSummary(
            method=method,
            mean_r=math.fsum(defined) / len(defined) if defined else None,
            n_defined=len(defined),
            n_excluded=len(rs) - len(defined),
            mean_judge_calls=calls[method] / config.trials,
            per_trial_r=rs,
        ))
    return out
