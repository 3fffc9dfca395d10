"""Real-coded genetic algorithm over the six free dimensions of a machine.

Fitness is the stroke-mean static torque at one current on a coarse mesh.
Randomness is drawn from a generator seeded by ``(rng_seed, generation,
individual)``, so the order in which a pool evaluates individuals cannot
change the result.
"""

from __future__ import annotations

import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import fem as F
from . import mesh as M
from .geometry import DESIGN_BOUNDS, DESIGN_FIELDS, GeometryError, MotorGeometry, geometry_violations
from .maps import mech_angle_for, stroke_angles

PENALTY = -1.0e3
SHORT_NAMES = ("b_sv", "h_s", "beta_s", "beta_r", "beta_ir", "h_r")


@dataclass(frozen=True)
class DesignVector:
    b_sv: float
    h_s: float
    beta_s: float
    beta_r: float
    beta_ir: float
    h_r: float

    @classmethod
    def of(cls, values: Sequence[float]) -> "DesignVector":
        return cls(*map(float, values))

    @classmethod
    def from_geometry(cls, geom: MotorGeometry) -> "DesignVector":
        return cls.of(geom.design_vector())

    def as_array(self) -> np.ndarray:
        return np.array([self.b_sv, self.h_s, self.beta_s, self.beta_r, self.beta_ir, self.h_r])


def bounds(variant: str) -> np.ndarray:
    """``(6, 2)`` array of lower/upper limits in design order."""
    box = DESIGN_BOUNDS[variant]
    return np.array([box[f] for f in DESIGN_FIELDS], dtype=float)


def in_box(x, box: np.ndarray) -> bool:
    x = np.asarray(x, dtype=float)
    return bool(np.all(x >= box[:, 0] - 1e-12) and np.all(x <= box[:, 1] + 1e-12))


@dataclass(frozen=True)
class GaConfig:
    population_size: int = 24
    generations: int = 40
    crossover_rate: float = 1.0
    mutation_rate: float = 0.05
    mutation_sigma: float = 0.10
    blend_alpha: float = 0.5
    tournament_size: int = 2
    elitism_count: int = 2
    rng_seed: int = 2024
    current: float = 15.0
    n_angles: int = 16
    resolution: str = "coarse"
    workers: int = 1

    def __post_init__(self):
        for name in ("crossover_rate", "mutation_rate"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.population_size < 4:
            raise ValueError("population_size must be >= 4")
        if self.generations < 1:
            raise ValueError("generations must be >= 1")
        if not 0 <= self.elitism_count < self.population_size:
            raise ValueError("elitism_count must be in [0, population_size)")
        if self.mutation_sigma <= 0 or self.tournament_size < 1:
            raise ValueError("mutation_sigma and tournament_size must be positive")


@dataclass(frozen=True)
class Evaluation:
    fitness: float
    feasible: bool
    message: str = ""


def stroke_mean_torque(geom: MotorGeometry, current: float = 15.0, n_angles: int = 16,
                       resolution="coarse", materials: F.MaterialSet | None = None) -> float:
    """Trapezoidal mean of the static torque over one stroke at a single current.

    Angles are solved in order, each starting from the previous field.
    """
    res = M.resolution(resolution)
    if res.band_divisions is None and res.angles_per_stroke != n_angles:
        from dataclasses import replace
        res = replace(res, angles_per_stroke=n_angles)
    base = M.generate_for(geom, res)
    n_r = geom.layout.n_rotor_teeth
    pitch = base.band.pitch_deg
    angles = stroke_angles(n_angles)
    exc = F.ExcitationState.single("A", current, geom.turns_per_pole)
    a = None
    torque = []
    for th in angles:
        steps = int(round(mech_angle_for(th, n_r) / pitch))
        if abs(steps * pitch * n_r + 180.0 - th) > 1e-9:
            raise M.MeshError(f"{n_angles} angles do not land on the band grid")
        model = F.FemModel.for_geometry(M.rotate_band(base, steps), geom, materials)
        sol = model.solve(exc, a0=a).require_converged()
        a = sol.a_z
        torque.append(F.torque_arkkio(sol))
    return float(np.trapezoid(torque, angles) / (angles[-1] - angles[0]))


def evaluate(design, variant: str = "proposed_8_14", cfg: GaConfig | None = None,
             template: MotorGeometry | None = None) -> Evaluation:
    """Fitness of one design; infeasible or failing designs get ``PENALTY``."""
    cfg = cfg or GaConfig()
    x = np.asarray(design.as_array() if isinstance(design, DesignVector) else design, float)
    box = bounds(variant)
    if not in_box(x, box):
        bad = [SHORT_NAMES[k] for k in range(len(x)) if not box[k, 0] <= x[k] <= box[k, 1]]
        return Evaluation(PENALTY - 1.0, False, "outside the box: " + ", ".join(bad))
    geom = (template or MotorGeometry.for_variant(variant)).with_design(x)
    bad = geometry_violations(geom)
    if bad:
        return Evaluation(PENALTY - len(bad), False, "; ".join(bad))
    try:
        t = stroke_mean_torque(geom, cfg.current, cfg.n_angles, cfg.resolution)
    except (GeometryError, F.FemError, ValueError, RuntimeError, np.linalg.LinAlgError) as exc:
        return Evaluation(PENALTY, False, f"{type(exc).__name__}: {exc}")
    if not math.isfinite(t):
        return Evaluation(PENALTY, False, "non-finite torque")
    return Evaluation(t, True)


def sphere_stub(variant: str = "proposed_8_14") -> Callable[[np.ndarray], Evaluation]:
    """Test fitness with its maximum (zero) at the box centre."""
    box = bounds(variant)
    centre = box.mean(axis=1)
    width = box[:, 1] - box[:, 0]

    def fitness(x):
        return Evaluation(-float(np.sum(((np.asarray(x) - centre) / width) ** 2)), True)

    return fitness


@dataclass
class GaResult:
    best: DesignVector
    best_fitness: float
    history: list                     # best-so-far fitness per generation
    log: list = field(default_factory=list)   # (gen, best, mean, worst, genes)
    evaluations: int = 0
    messages: dict = field(default_factory=dict)

    def log_csv(self) -> str:
        buf = io.StringIO()
        buf.write("generation,best,mean,worst," + ",".join(SHORT_NAMES) + "\n")
        for g, best, mean, worst, genes in self.log:
            buf.write(f"{g},{best!r},{mean!r},{worst!r}," + ",".join(repr(float(v)) for v in genes)
                      + "\n")
        return buf.getvalue()

    def write_log(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.log_csv())


def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


def _motor_fitness(args):
    x, variant, cfg = args
    return evaluate(x, variant, cfg)


def _tournament(rng, fit, size):
    picks = rng.integers(0, len(fit), size)
    return picks[np.argmax(fit[picks])]


def _child(rng, pop, fit, box, cfg: GaConfig) -> np.ndarray:
    p1 = pop[_tournament(rng, fit, cfg.tournament_size)]
    p2 = pop[_tournament(rng, fit, cfg.tournament_size)]
    if rng.random() < cfg.crossover_rate:
        lo, hi = np.minimum(p1, p2), np.maximum(p1, p2)
        span = hi - lo
        x = rng.uniform(lo - cfg.blend_alpha * span, hi + cfg.blend_alpha * span)
    else:
        x = p1.copy()
    width = box[:, 1] - box[:, 0]
    hit = rng.random(len(x)) < cfg.mutation_rate
    x = x + hit * rng.normal(0.0, cfg.mutation_sigma * width)
    return np.clip(x, box[:, 0], box[:, 1])


def run_ga(cfg: GaConfig | None = None, variant: str = "proposed_8_14",
           fitness: Callable | None = None, initial: Sequence | None = None,
           log: Callable | None = None) -> GaResult:
    """Tournament selection, blend crossover, clipped Gaussian mutation, elitism.

    ``fitness`` maps a gene array to an ``Evaluation`` (defaults to the coarse
    motor evaluation).  ``initial`` optionally replaces the first members of
    the random starting population.
    """
    cfg = cfg or GaConfig()
    box = bounds(variant)
    n, dim = cfg.population_size, len(box)
    pop = np.array([_rng(cfg.rng_seed, 0, k).uniform(box[:, 0], box[:, 1]) for k in range(n)])
    for k, x in enumerate(initial or ()):
        pop[k] = np.clip(np.asarray(x, dtype=float), box[:, 0], box[:, 1])
    cache: dict = {}
    messages: dict = {}

    def score(members) -> np.ndarray:
        todo = [x for x in {tuple(m) for m in members} if x not in cache]
        todo.sort()
        if fitness is not None:
            results = [fitness(np.array(x)) for x in todo]
        elif cfg.workers > 1 and len(todo) > 1:
            with ProcessPoolExecutor(cfg.workers) as ex:
                results = list(ex.map(_motor_fitness, [(np.array(x), variant, cfg) for x in todo]))
        else:
            results = [evaluate(np.array(x), variant, cfg) for x in todo]
        for x, r in zip(todo, results):
            cache[x] = r
            if r.message:
                messages[x] = r.message
        return np.array([cache[tuple(m)].fitness for m in members])

    fit = score(pop)
    history, rows = [], []
    for gen in range(cfg.generations):
        order = np.argsort(-fit, kind="stable")
        pop, fit = pop[order], fit[order]
        history.append(float(fit[0]))
        rows.append((gen, float(fit[0]), float(fit.mean()), float(fit[-1]), pop[0].copy()))
        if log:
            log(f"generation {gen}: best {fit[0]:.4f}, mean {fit.mean():.4f}")
        if gen == cfg.generations - 1:
            break
        children = [_child(_rng(cfg.rng_seed, gen + 1, k), pop, fit, box, cfg)
                    for k in range(n - cfg.elitism_count)]
        new = np.vstack([pop[:cfg.elitism_count]] + children) if children else pop.copy()
        pop, fit = new, score(new)
    return GaResult(DesignVector.of(pop[0]), float(fit[0]), history, rows, len(cache), messages)
