"""Monte Carlo operating characteristics of fixed-weight and EB robust MAP priors.

Each (truth, replicate) pair gets its own generator seeded by
``SeedSequence([seed, truth_index, replicate])``. The simulated current
trial is shared by every method, so method contrasts use common random
numbers, and results do not depend on how replicates are scheduled.
"""
from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence, Union

import numpy as np

from .analysis import DecisionRule, eb_weight, posterior_update
from .conjmix import ConjugateMixture, MixtureComponent, parse_component, robustify
from .records import Design, Endpoint, Payload

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Fixed:
    w_v: float

    def __post_init__(self):
        if not 0.0 <= self.w_v <= 1.0:
            raise ValueError(f"fixed weight {self.w_v} outside [0,1]")

    @property
    def label(self) -> str:
        return f"w={self.w_v:g}"


@dataclass(frozen=True)
class EmpiricalBayes:
    gamma: float
    grid_step: float = 0.01

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("gamma must be in (0,1)")

    @property
    def label(self) -> str:
        return f"EB(gamma={self.gamma:g})"


Method = Union[Fixed, EmpiricalBayes]


def parse_method(spec) -> Method:
    """``fixed:0.5`` / ``eb:0.9`` / ``eb:0.9,0.005`` or the equivalent mapping."""
    if isinstance(spec, (Fixed, EmpiricalBayes)):
        return spec
    if isinstance(spec, dict):
        kind = spec.get("kind", "")
        if kind == "fixed":
            return Fixed(float(spec["w_v"]))
        if kind == "eb":
            return EmpiricalBayes(float(spec["gamma"]), float(spec.get("grid_step", 0.01)))
        raise ValueError(f"unknown method kind {kind!r}")
    kind, _, rest = str(spec).partition(":")
    vals = [float(v) for v in rest.split(",") if v.strip()]
    if kind.strip() == "fixed" and len(vals) == 1:
        return Fixed(vals[0])
    if kind.strip() == "eb" and len(vals) in (1, 2):
        return EmpiricalBayes(*vals)
    raise ValueError(f"cannot parse method {spec!r}; expected fixed:W or eb:GAMMA[,STEP]")


def _method_dict(m: Method) -> dict:
    if isinstance(m, Fixed):
        return {"kind": "fixed", "w_v": m.w_v}
    return {"kind": "eb", "gamma": m.gamma, "grid_step": m.grid_step}


@dataclass(frozen=True)
class Scenario:
    map_mix: ConjugateMixture
    vague: MixtureComponent
    methods: tuple[Method, ...]
    design: Design
    truth_grid: tuple[float, ...]
    rule: DecisionRule
    replications: int = 5000
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "methods", tuple(parse_method(m) for m in self.methods))
        object.__setattr__(self, "truth_grid", tuple(float(t) for t in self.truth_grid))
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if not self.methods:
            raise ValueError("no methods to compare")
        labels = [m.label for m in self.methods]
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate methods {labels}")
        if not self.truth_grid:
            raise ValueError("empty truth grid")
        fam = self.design.endpoint.family
        if self.map_mix.family is not fam or self.vague.family is not fam:
            raise ValueError(f"priors do not match the {self.design.endpoint.value} endpoint")
        for t in self.truth_grid:
            _check_truth(self.design.endpoint, t)
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    @property
    def endpoint(self) -> Endpoint:
        return self.design.endpoint

    def to_dict(self) -> dict:
        d = {k: v for k, v in asdict(self.design).items() if v is not None}
        d["endpoint"] = self.design.endpoint.value
        v = self.vague
        return {
            "map": self.map_mix.to_dict(),
            "vague": {"family": v.family.value, "params": [v.p1, v.p2]},
            "methods": [_method_dict(m) for m in self.methods],
            "design": d,
            "truth_grid": list(self.truth_grid),
            "rule": self.rule.to_dict(),
            "replications": self.replications,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict, base_dir: Path | None = None) -> "Scenario":
        mp = d["map"]
        if isinstance(mp, str):
            path = Path(mp) if base_dir is None else base_dir / mp
            mp = json.loads(path.read_text())
        vg = d["vague"]
        if isinstance(vg, str):
            vague = parse_component(vg)
        else:
            vague = MixtureComponent(vg["family"], *map(float, vg["params"]))
        rule = d["rule"]
        rule = DecisionRule.parse(rule) if isinstance(rule, str) else DecisionRule(**rule)
        return cls(
            map_mix=ConjugateMixture.from_dict(mp),
            vague=vague,
            methods=tuple(parse_method(m) for m in d["methods"]),
            design=Design(**d["design"]),
            truth_grid=tuple(d["truth_grid"]),
            rule=rule,
            replications=int(d.get("replications", 5000)),
            seed=int(d.get("seed", 0)),
        )


def load_scenario(path) -> Scenario:
    """Read a scenario from ``.toml`` or ``.json``."""
    path = Path(path)
    if path.suffix == ".toml":
        try:
            import tomllib
        except ModuleNotFoundError:  # python < 3.11
            import tomli as tomllib
        d = tomllib.loads(path.read_text())
    else:
        d = json.loads(path.read_text())
    return Scenario.from_dict(d, base_dir=path.parent)


def save_scenario(s: Scenario, path) -> None:
    Path(path).write_text(json.dumps(s.to_dict(), indent=2))


def _check_truth(endpoint: Endpoint, t: float):
    if not math.isfinite(t):
        raise ValueError(f"truth {t} is not finite")
    if endpoint is Endpoint.BINOMIAL and not 0.0 <= t <= 1.0:
        raise ValueError(f"binomial truth {t} outside [0,1]")
    if endpoint is Endpoint.TTE and t < 0:
        raise ValueError(f"hazard truth {t} is negative")


def simulate_current(truth: float, design: Design, rng: np.random.Generator) -> Payload:
    """One current-trial summary under the true parameter."""
    _check_truth(design.endpoint, truth)
    if design.endpoint is Endpoint.BINOMIAL:
        return design.observe(rng.binomial(design.n, truth))
    if design.endpoint is Endpoint.NORMAL:
        return design.observe(rng.normal(truth, design.sd / math.sqrt(design.n)))
    return design.observe(rng.poisson(truth * design.exposure))


@dataclass(frozen=True)
class OcRow:
    truth: float
    method: str
    pos: float
    abs_bias: float
    mse: float
    mc_se_pos: float
    replications: int
    median_w: float = field(default=float("nan"))


OC_COLUMNS = ("truth", "method", "pos", "abs_bias", "mse", "mc_se_pos", "replications", "median_w")


class SimulationError(RuntimeError):
    pass


def replicate_stream(seed: int, truth_index: int, rep: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, truth_index, rep]))


def _one_replicate(s: Scenario, ti: int, rep: int):
    """(success, median, weight) per method for one simulated trial."""
    truth = s.truth_grid[ti]
    data = simulate_current(truth, s.design, replicate_stream(s.seed, ti, rep))
    out = np.empty((len(s.methods), 3))
    for j, m in enumerate(s.methods):
        try:
            if isinstance(m, Fixed):
                w = m.w_v
            else:
                w = eb_weight(s.map_mix, s.vague, data, m.gamma, m.grid_step).w_eb
            post = posterior_update(robustify(s.map_mix, s.vague, w), data)
            prob = s.rule.probability(post)
            out[j] = (prob > s.rule.prob_cutoff, post.quantile(0.5), w)
        except Exception as exc:
            raise SimulationError(
                f"truth={truth!r} (index {ti}), method={m.label}, replicate={rep}: {exc}"
            ) from exc
    return out


def _run_truth(s: Scenario, ti: int, threads: int) -> np.ndarray:
    reps = range(s.replications)
    if threads <= 1:
        res = [_one_replicate(s, ti, r) for r in reps]
    else:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            # map preserves replicate order regardless of completion order
            res = list(ex.map(lambda r: _one_replicate(s, ti, r), reps, chunksize=64))
    return np.stack(res)  # (reps, methods, 3)


def run_scenario(s: Scenario, threads: int = 1) -> list[OcRow]:
    """PoS, |bias| and MSE of the posterior median for every (truth, method)."""
    if threads < 1:
        raise ValueError("threads must be >= 1")
    rows = []
    for ti, truth in enumerate(s.truth_grid):
        res = _run_truth(s, ti, threads)
        n = s.replications
        for j, m in enumerate(s.methods):
            succ, med, w = res[:, j, 0], res[:, j, 1], res[:, j, 2]
            pos = float(succ.mean())
            rows.append(
                OcRow(
                    truth=truth,
                    method=m.label,
                    pos=pos,
                    abs_bias=abs(float(med.mean()) - truth),
                    mse=float(np.mean((med - truth) ** 2)),
                    mc_se_pos=math.sqrt(pos * (1 - pos) / n),
                    replications=n,
                    median_w=float(np.median(w)),
                )
            )
        log.info("truth %g done", truth)
    return rows


@dataclass(frozen=True)
class OcDelta:
    truth: float
    method: str
    d_pos: float
    d_abs_bias: float
    d_mse: float


@dataclass(frozen=True)
class OcComparison:
    baseline: str
    deltas: tuple[OcDelta, ...]
    max_abs: dict  # method -> {"pos": .., "abs_bias": .., "mse": ..}

    def to_dict(self) -> dict:
        return {
            "baseline": self.baseline,
            "deltas": [asdict(d) for d in self.deltas],
            "max_abs": self.max_abs,
        }


def oc_compare(rows: Sequence[OcRow], baseline: str) -> OcComparison:
    """Per-truth differences (method minus baseline) and their largest magnitudes."""
    base = {r.truth: r for r in rows if r.method == baseline}
    if not base:
        raise ValueError(f"baseline method {baseline!r} not among {sorted({r.method for r in rows})}")
    deltas = []
    for r in rows:
        if r.truth not in base:
            raise ValueError(f"baseline has no row at truth {r.truth}")
        b = base[r.truth]
        deltas.append(OcDelta(r.truth, r.method, r.pos - b.pos, r.abs_bias - b.abs_bias, r.mse - b.mse))
    max_abs: dict = {}
    for d in deltas:
        cur = max_abs.setdefault(d.method, {"pos": 0.0, "abs_bias": 0.0, "mse": 0.0})
        cur["pos"] = max(cur["pos"], abs(d.d_pos))
        cur["abs_bias"] = max(cur["abs_bias"], abs(d.d_abs_bias))
        cur["mse"] = max(cur["mse"], abs(d.d_mse))
    return OcComparison(baseline, tuple(deltas), max_abs)


def rows_by(rows: Sequence[OcRow], method: str) -> dict[float, OcRow]:
    return {r.truth: r for r in rows if r.method == method}


def write_oc_csv(rows: Sequence[OcRow], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(OC_COLUMNS)
        for r in rows:
            w.writerow(
                [
                    v if isinstance(v, (str, int)) else format(v, ".17g")
                    for v in (getattr(r, c) for c in OC_COLUMNS)
                ]
            )


def read_oc_csv(path) -> list[OcRow]:
    with open(path, newline="") as fh:
        rd = csv.DictReader(fh)
        return [
            OcRow(
                truth=float(d["truth"]),
                method=d["method"],
                pos=float(d["pos"]),
                abs_bias=float(d["abs_bias"]),
                mse=float(d["mse"]),
                mc_se_pos=float(d["mc_se_pos"]),
                replications=int(d["replications"]),
                median_w=float(d["median_w"]),
            )
            for d in rd
        ]
