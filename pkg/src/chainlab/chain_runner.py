"""Chain execution and finite-horizon recurrence statistics.

A chain applies one kernel for ``T`` steps, each step conditioned only
on the previous state (and, for schedules, the iteration index).  The
recurrence statistics work on canonical sentence keys:

* first recurrence time -- the first step whose output exactly matches
  any earlier state, ``T + 1`` when no repeat occurs within the horizon;
* distinct count -- the number of unique canonical keys over the whole
  trajectory including the seed.

Cycle length is only reported when it is well defined: always for
deterministic kernels (where a repeat pins down the period exactly),
and under sampling only when the repeated key keeps returning at a
constant interval at least three times in a row.
"""

from __future__ import annotations

import csv
import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import BatchError, ChainLabError, InvalidInputError
from .kernels import DecodingConfig, Kernel, KernelStep
from .textunit import Corpus, Sentence


@dataclass
class TrajectoryStep:
    t: int
    sentence: Sentence
    meta: KernelStep


@dataclass
class Trajectory:
    """Seed plus the ordered outputs of each iteration."""

    seed: Sentence
    steps: list[TrajectoryStep]
    horizon: int
    run_id: str
    config: dict = field(default_factory=dict)
    error: str | None = None

    @property
    def complete(self) -> bool:
        return self.error is None and len(self.steps) == self.horizon

    def states(self) -> list[Sentence]:
        return [self.seed] + [s.sentence for s in self.steps]

    def keys(self) -> list[str]:
        return [s.key for s in self.states()]


@dataclass
class RecurrenceReport:
    """Finite-horizon recurrence statistics of one trajectory."""

    tau: int
    distinct_count: int
    recurrence_partner: int | None = None
    cycle_length: int | None = None
    fixed_point: bool = False


def run_chain(kernel: Kernel, seed: Sentence, horizon: int, rng: np.random.Generator,
              decoding: DecodingConfig | None = None, run_id: str = "chain-0000",
              config: dict | None = None) -> Trajectory:
    """Apply ``kernel`` for ``horizon`` steps starting from ``seed``.

    A kernel failure stops the chain early; the partial trajectory is
    kept with an error marker rather than discarded.
    """
    if horizon < 1:
        raise InvalidInputError("horizon must be at least 1")
    snapshot = dict(config or {})
    snapshot.setdefault("kernel", kernel.describe())
    snapshot.setdefault("decoding", decoding.to_dict() if decoding is not None else None)
    snapshot.setdefault("horizon", horizon)
    snapshot.setdefault("deterministic", kernel.deterministic(decoding))

    steps: list[TrajectoryStep] = []
    state = seed
    error = None
    for t in range(horizon):
        try:
            ks = kernel.step(state, rng, t=t, decoding=decoding)
        except ChainLabError as exc:
            error = f"step {t + 1} failed: {exc}"
            break
        steps.append(TrajectoryStep(t=t + 1, sentence=ks.output, meta=ks))
        state = ks.output
    return Trajectory(seed=seed, steps=steps, horizon=horizon, run_id=run_id,
                      config=snapshot, error=error)


def _constant_interval_cycle(keys: list[str], tau: int) -> int | None:
    occurrences = [i for i, k in enumerate(keys) if k == keys[tau]]
    gaps = [b - a for a, b in zip(occurrences, occurrences[1:])]
    if len(gaps) >= 3 and len(set(gaps)) == 1:
        return gaps[0]
    return None


def recurrence_stats(traj: Trajectory) -> RecurrenceReport:
    """First recurrence time, distinct count, and cycle structure."""
    if not traj.complete:
        raise InvalidInputError("recurrence statistics need a complete trajectory")
    keys = traj.keys()
    horizon = traj.horizon

    first_seen = {keys[0]: 0}
    tau = None
    partner = None
    for t in range(1, len(keys)):
        if keys[t] in first_seen:
            tau = t
            partner = first_seen[keys[t]]
            break
        first_seen[keys[t]] = t

    distinct = len(set(keys))
    if tau is None:
        return RecurrenceReport(tau=horizon + 1, distinct_count=distinct)

    cycle = None
    if traj.config.get("deterministic"):
        cycle = tau - partner
    else:
        cycle = _constant_interval_cycle(keys, tau)
    return RecurrenceReport(
        tau=tau,
        distinct_count=distinct,
        recurrence_partner=partner,
        cycle_length=cycle,
        fixed_point=cycle == 1,
    )


@dataclass
class ChainOutcome:
    index: int
    trajectory: Trajectory | None
    report: RecurrenceReport | None
    error: str | None = None

    @property
    def status(self) -> str:
        if self.error is not None:
            return "failed"
        if self.trajectory is not None and not self.trajectory.complete:
            return "truncated"
        return "ok"


@dataclass
class BatchResult:
    outcomes: list[ChainOutcome]
    config: dict

    def completed(self) -> list[tuple[Trajectory, RecurrenceReport]]:
        return [(o.trajectory, o.report) for o in self.outcomes if o.status == "ok"]

    def failures(self) -> list[ChainOutcome]:
        return [o for o in self.outcomes if o.status != "ok"]


def run_batch(kernel: Kernel, corpus: Corpus, horizon: int,
              decoding: DecodingConfig | None = None, parallelism: int = 1,
              master_seed: int = 0, model_label: str | None = None) -> BatchResult:
    """One chain per corpus seed; chain ``i`` draws from rng seeded ``(master_seed, i)``.

    Chains are independent workers; failures stay isolated per chain and
    results keep corpus order no matter the execution order.  Truncated
    trajectories are kept (their drift is still meaningful) but carry no
    recurrence report, so they never bias the recurrence aggregates.
    """
    seeds = corpus.seed_states()
    if not seeds:
        raise InvalidInputError("corpus has no seeds")
    kernel_label = model_label if model_label is not None else kernel.label
    decoding_label = decoding.label if decoding is not None else "none"
    base_config = {
        "kernel": kernel.describe(),
        "decoding": decoding.to_dict() if decoding is not None else None,
        "horizon": horizon,
        "master_seed": master_seed,
        "dataset": corpus.dataset_name,
        "model_decoding": f"{kernel_label} {decoding_label}",
        "deterministic": kernel.deterministic(decoding),
        "unit": corpus.unit,
    }
    api_seed_base = decoding.rng_seed if decoding is not None and decoding.rng_seed is not None else master_seed

    def one(i: int) -> ChainOutcome:
        run_id = f"chain-{i:04d}"
        try:
            rng = np.random.default_rng([master_seed, i])
            chain_kernel = kernel.with_chain_seed(api_seed_base + i)
            cfg = dict(base_config)
            cfg["chain_index"] = i
            traj = run_chain(chain_kernel, seeds[i], horizon, rng,
                             decoding=decoding, run_id=run_id, config=cfg)
            report = recurrence_stats(traj) if traj.complete else None
            return ChainOutcome(index=i, trajectory=traj, report=report)
        except Exception as exc:  # isolate chain failures
            return ChainOutcome(index=i, trajectory=None, report=None, error=str(exc))

    if parallelism > 1:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            outcomes = list(pool.map(one, range(len(seeds))))
    else:
        outcomes = [one(i) for i in range(len(seeds))]

    if all(o.status == "failed" for o in outcomes):
        raise BatchError(f"all {len(outcomes)} chains failed; first error: {outcomes[0].error}")
    return BatchResult(outcomes=outcomes, config=base_config)


# --- persistence --------------------------------------------------------------


def trajectory_records(traj: Trajectory):
    """Step records in the JSONL persistence shape (seed row has t=0)."""
    yield {
        "run_id": traj.run_id, "t": 0, "raw": traj.seed.raw, "key": traj.seed.key,
        "prompt_index": None, "step_probability": None, "intermediate": None,
    }
    for step in traj.steps:
        yield {
            "run_id": traj.run_id, "t": step.t, "raw": step.sentence.raw,
            "key": step.sentence.key, "prompt_index": step.meta.prompt_index,
            "step_probability": step.meta.step_probability,
            "intermediate": step.meta.intermediate,
        }


def write_trajectories(path, trajectories) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for traj in trajectories:
            for record in trajectory_records(traj):
                fh.write(json.dumps(record, sort_keys=True, ensure_ascii=False) + "\n")


def read_trajectories(path, config: dict | None = None) -> list[Trajectory]:
    """Rebuild trajectories from a JSONL file written by :func:`write_trajectories`."""
    by_run: dict[str, list[dict]] = {}
    order: list[str] = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            record = json.loads(line)
            run_id = record["run_id"]
            if run_id not in by_run:
                by_run[run_id] = []
                order.append(run_id)
            by_run[run_id].append(record)

    out = []
    for run_id in order:
        records = sorted(by_run[run_id], key=lambda r: r["t"])
        seed_rec = records[0]
        seed = Sentence(raw=seed_rec["raw"], key=seed_rec["key"])
        steps = []
        for rec in records[1:]:
            sentence = Sentence(raw=rec["raw"], key=rec["key"])
            meta = KernelStep(
                output=sentence,
                step_probability=rec.get("step_probability"),
                prompt_index=rec.get("prompt_index") or 0,
                intermediate=rec.get("intermediate"),
            )
            steps.append(TrajectoryStep(t=rec["t"], sentence=sentence, meta=meta))
        out.append(Trajectory(
            seed=seed, steps=steps, horizon=len(steps), run_id=run_id,
            config=dict(config or {}),
        ))
    return out


RECURRENCE_CSV_FIELDS = (
    "run_id", "status", "tau", "distinct_count", "recurrence_partner",
    "cycle_length", "fixed_point", "seed_word_count",
)


def write_recurrence_csv(path, batch: BatchResult) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(RECURRENCE_CSV_FIELDS)
        for o in batch.outcomes:
            run_id = o.trajectory.run_id if o.trajectory is not None else f"chain-{o.index:04d}"
            if o.report is not None:
                r = o.report
                writer.writerow([
                    run_id, o.status, r.tau, r.distinct_count,
                    "" if r.recurrence_partner is None else r.recurrence_partner,
                    "" if r.cycle_length is None else r.cycle_length,
                    str(r.fixed_point).lower(),
                    o.trajectory.seed.word_count,
                ])
            else:
                seed_words = o.trajectory.seed.word_count if o.trajectory is not None else ""
                writer.writerow([run_id, o.status, "", "", "", "", "", seed_words])


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(65536), b""):
            h.update(block)
    return h.hexdigest()


def write_batch(out_dir, batch: BatchResult, toolkit_version: str = "0",
                extra_manifest: dict | None = None) -> dict:
    """Write trajectories.jsonl, recurrence.csv and manifest.json.

    Returns the manifest dict.  The data files are byte-deterministic
    for a fixed batch; only the manifest carries timestamps.
    """
    import datetime

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    started = datetime.datetime.now(datetime.timezone.utc).isoformat()

    traj_path = out / "trajectories.jsonl"
    write_trajectories(traj_path, [o.trajectory for o in batch.outcomes if o.trajectory is not None])
    csv_path = out / "recurrence.csv"
    write_recurrence_csv(csv_path, batch)

    finished = datetime.datetime.now(datetime.timezone.utc).isoformat()
    manifest = {
        "schema_version": 1,
        "toolkit_version": toolkit_version,
        "started_utc": started,
        "finished_utc": finished,
        "config": batch.config,
        "chains": [
            {
                "run_id": o.trajectory.run_id if o.trajectory is not None else f"chain-{o.index:04d}",
                "status": o.status,
                "error": o.error if o.error is not None else (
                    o.trajectory.error if o.trajectory is not None else None),
            }
            for o in batch.outcomes
        ],
        "files": {
            "trajectories.jsonl": file_sha256(traj_path),
            "recurrence.csv": file_sha256(csv_path),
        },
    }
    if extra_manifest:
        manifest.update(extra_manifest)
    with open(out / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest
