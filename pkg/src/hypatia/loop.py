"""Expert iteration: solve batches, induce tactics, retrain, evaluate.

Each iteration samples a batch of problems (uniformly over sections, or
through a curriculum scheduler), solves them with the current policy,
appends the successes to the corpus, induces and registers new tactics,
rewrites the corpus so the policy always trains on irreducible solutions,
and evaluates on fixed held-out sets.  Every artifact is persisted after
each iteration and a run can resume bit-identically from its directory.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Optional

from .actions import Solution, read_trace, write_trace
from .curriculum import Curriculum, Scheduler
from .domains import Problem, SECTIONS, generate_problem, load_domain
from .kernel import KernelError
from .search import CountPolicy, Policy, SearchConfig, evaluate, solve, validate
from .tactics import TacticRegistry, _tactic_key, induce, rewrite_solutions

__all__ = ["RunConfig", "RunMetrics", "MetricsRow", "LoopError",
           "train", "resume", "derive_seed", "load_curriculum_file"]

SECTION_IDS = tuple(s.id for s in SECTIONS)


class LoopError(KernelError):
    pass


def derive_seed(*parts) -> int:
    """A stable 63-bit seed from the given parts (resume-safe randomness)."""
    text = "|".join(str(p) for p in parts)
    digest = hashlib.sha256(text.encode()).digest()
    return int.from_bytes(digest[:8], "big") >> 1


@dataclass(frozen=True)
class RunConfig:
    out_dir: str
    batch_size: int = 500
    iterations: int = 40
    heldout_per_section: int = 50
    search: SearchConfig = field(default_factory=SearchConfig)
    u_min: int = 4
    max_tactic_len: int = 4
    max_new_tactics: int = 3
    induction: bool = True
    curriculum_file: Optional[str] = None
    sections: tuple[str, ...] = SECTION_IDS
    seed: int = 0
    stop_on: Optional[dict] = None  # section id -> success threshold
    jobs: int = 1

    def __post_init__(self):
        assert self.batch_size >= 1

    def manifest(self) -> dict:
        data = asdict(self)
        data["stop_on"] = dict(self.stop_on) if self.stop_on else None
        return data

    def config_hash(self) -> str:
        blob = json.dumps(self.manifest(), sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()


@dataclass(frozen=True)
class MetricsRow:
    iteration: int
    section: str
    success_rate: float
    n_tactics: int
    corpus_size: int


@dataclass
class RunMetrics:
    rows: list[MetricsRow] = field(default_factory=list)

    def by_iteration(self) -> dict[int, dict[str, float]]:
        out: dict[int, dict[str, float]] = {}
        for r in self.rows:
            out.setdefault(r.iteration, {})[r.section] = r.success_rate
        return out

    def iterations_to_threshold(self, section: str, threshold: float) -> Optional[int]:
        """First iteration whose held-out rate reaches the threshold."""
        for r in self.rows:
            if r.section == section and r.success_rate >= threshold:
                return r.iteration
        return None


# ---------------------------------------------------------------------------
# Batch solving


def _solve_one(args):
    problem, policy, search_cfg, registry = args
    library, _ = load_domain()
    return solve(problem, policy, search_cfg, registry, library)


def _solve_batch(problems, policy, search_cfg, registry, jobs: int):
    if jobs <= 1:
        library, _ = load_domain()
        return [solve(p, policy, search_cfg, registry, library)
                for p in problems]
    work = [(p, policy, search_cfg, registry) for p in problems]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_solve_one, work, chunksize=4))


# ---------------------------------------------------------------------------
# Persistence


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _save_iteration(run: Path, iteration: int, corpus, registry, policy,
                    metrics: RunMetrics, sched_state: Optional[dict]) -> None:
    corpus_dir = run / "corpus"
    corpus_dir.mkdir(exist_ok=True)
    for k, (problem, solution) in enumerate(corpus):
        _atomic_write(corpus_dir / f"{k:05d}_{problem.id}.trace",
                      write_trace(solution))
    tactics_dir = run / "tactics"
    tactics_dir.mkdir(exist_ok=True)
    _atomic_write(tactics_dir / f"iter{iteration:03d}.tactics",
                  registry.to_text())
    policy_dir = run / "policy"
    policy_dir.mkdir(exist_ok=True)
    _atomic_write(policy_dir / f"iter{iteration:03d}.policy", policy.to_text())
    lines = ["iteration,section,success_rate,n_tactics,corpus_size"]
    for r in metrics.rows:
        lines.append(f"{r.iteration},{r.section},{r.success_rate},"
                     f"{r.n_tactics},{r.corpus_size}")
    _atomic_write(run / "metrics.csv", "\n".join(lines) + "\n")
    state = {"iteration": iteration, "scheduler": sched_state}
    _atomic_write(run / "state.json", json.dumps(state, indent=2))


def _load_metrics(path: Path) -> RunMetrics:
    metrics = RunMetrics()
    if not path.exists():
        return metrics
    with path.open() as fh:
        for row in csv.DictReader(fh):
            metrics.rows.append(MetricsRow(
                int(row["iteration"]), row["section"],
                float(row["success_rate"]), int(row["n_tactics"]),
                int(row["corpus_size"])))
    return metrics


def _problem_from_id(problem_id: str) -> Problem:
    section, _, seed = problem_id.rpartition("-")
    return generate_problem(section, int(seed))


def _load_corpus(run: Path):
    corpus = []
    corpus_dir = run / "corpus"
    if not corpus_dir.is_dir():
        return corpus
    for path in sorted(corpus_dir.glob("*.trace")):
        solution = read_trace(path.read_text())
        corpus.append((_problem_from_id(solution.problem_id), solution))
    return corpus


def load_curriculum_file(path: str) -> Curriculum:
    data = json.loads(Path(path).read_text())
    return Curriculum(tuple(data["problem_ids"]),
                      tuple(int(k) for k in data["khan_indices"]),
                      int(data.get("seed", 0)))


# ---------------------------------------------------------------------------
# The loop


def _heldout_sets(cfg: RunConfig) -> dict[str, list[Problem]]:
    out = {}
    for section in cfg.sections:
        out[section] = [
            generate_problem(section, derive_seed(cfg.seed, "eval", section, i))
            for i in range(cfg.heldout_per_section)]
    return out


def _sample_batch(cfg: RunConfig, iteration: int,
                  scheduler: Optional[Scheduler]) -> list[Problem]:
    problems = []
    if scheduler is not None:
        rng = random.Random(derive_seed(cfg.seed, "sched", iteration))
        for _ in range(cfg.batch_size):
            problems.append(_problem_from_id(scheduler.sample(rng)))
        return problems
    for i in range(cfg.batch_size):
        pick = derive_seed(cfg.seed, "train", iteration, i)
        section = cfg.sections[pick % len(cfg.sections)]
        problems.append(generate_problem(
            section, derive_seed(cfg.seed, "train-seed", iteration, i)))
    return problems


def train(cfg: RunConfig) -> RunMetrics:
    """Run expert iteration from scratch; artifacts land in cfg.out_dir."""
    run = Path(cfg.out_dir)
    run.mkdir(parents=True, exist_ok=True)
    if (run / "manifest.json").exists():
        raise LoopError(f"{run} already holds a run; use resume()")
    manifest = {"config": cfg.manifest(), "config_hash": cfg.config_hash()}
    _atomic_write(run / "manifest.json", json.dumps(manifest, indent=2))
    return _drive(cfg, run, start_iteration=0, corpus=[],
                  registry=TacticRegistry(), scheduler=_make_scheduler(cfg),
                  metrics=RunMetrics())


def resume(out_dir: str) -> RunMetrics:
    """Continue an interrupted run; future outputs match an unbroken run."""
    run = Path(out_dir)
    manifest_path = run / "manifest.json"
    if not manifest_path.exists():
        raise LoopError(f"no manifest in {run}")
    manifest = json.loads(manifest_path.read_text())
    data = manifest["config"]
    data["search"] = SearchConfig(**data["search"])
    data["sections"] = tuple(data["sections"])
    cfg = RunConfig(**data)
    if cfg.config_hash() != manifest["config_hash"]:
        raise LoopError("manifest hash mismatch; refusing to resume")
    state_path = run / "state.json"
    if not state_path.exists():
        return _drive(cfg, run, 0, [], TacticRegistry(),
                      _make_scheduler(cfg), RunMetrics())
    state = json.loads(state_path.read_text())
    done = int(state["iteration"])
    corpus = _load_corpus(run)
    tactics_file = run / "tactics" / f"iter{done:03d}.tactics"
    if not tactics_file.exists():
        raise LoopError(f"missing artifact {tactics_file}; cannot resume")
    registry = TacticRegistry.from_text(tactics_file.read_text())
    scheduler = _make_scheduler(cfg)
    if scheduler is not None and state.get("scheduler"):
        scheduler.restore(state["scheduler"])
    metrics = _load_metrics(run / "metrics.csv")
    if _stopped(cfg, metrics):
        return metrics
    return _drive(cfg, run, done + 1, corpus, registry, scheduler, metrics)


def _make_scheduler(cfg: RunConfig) -> Optional[Scheduler]:
    if cfg.curriculum_file is None:
        return None
    return Scheduler(load_curriculum_file(cfg.curriculum_file))


def _stopped(cfg: RunConfig, metrics: RunMetrics) -> bool:
    if not cfg.stop_on or not metrics.rows:
        return False
    last = max(r.iteration for r in metrics.rows)
    rates = metrics.by_iteration()[last]
    return all(rates.get(sec, 0.0) >= threshold
               for sec, threshold in cfg.stop_on.items())


def _drive(cfg: RunConfig, run: Path, start_iteration: int, corpus,
           registry: TacticRegistry, scheduler: Optional[Scheduler],
           metrics: RunMetrics) -> RunMetrics:
    library, _ = load_domain()
    heldout = _heldout_sets(cfg)
    policy: Policy = CountPolicy().update(corpus)
    for iteration in range(start_iteration, cfg.iterations):
        problems = _sample_batch(cfg, iteration, scheduler)
        solutions = _solve_batch(problems, policy, cfg.search, registry,
                                 cfg.jobs)
        solved = 0
        for problem, solution in zip(problems, solutions):
            if solution is None:
                continue
            if not validate(problem, solution, registry, library):
                raise LoopError(f"search produced an invalid solution "
                                f"for {problem.id}")
            corpus.append((problem, solution))
            solved += 1
        batch_rate = solved / len(problems)

        if cfg.induction:
            known = {_tactic_key(t) for n in registry.names()
                     for t in [registry.lookup(n)]}
            candidates = [
                t for t in induce(corpus, Fraction(cfg.u_min),
                                  cfg.max_tactic_len,
                                  name_start=len(registry))
                if _tactic_key(t) not in known]
            for candidate in candidates[:cfg.max_new_tactics]:
                named = registry.register_fresh(candidate)
                corpus = rewrite_solutions(corpus, named, registry, library)

        policy = CountPolicy().update(corpus)
        report = evaluate(policy, heldout, cfg.search, registry, library)
        for section in cfg.sections:
            metrics.rows.append(MetricsRow(
                iteration, section, report.get(section, 0.0),
                len(registry), len(corpus)))

        if scheduler is not None:
            scheduler.report(batch_rate)
        _save_iteration(run, iteration, corpus, registry, policy, metrics,
                        scheduler.state() if scheduler else None)
        if _stopped(cfg, metrics):
            break
    return metrics
