"""Experiment pipeline: configuration, orchestration, persistence, reporting.

Subcommands
-----------
``run``        execute one batch of chains from a config file
``simulate``   decoding-regime study on a synthetic finite kernel
``analyze``    drift/recurrence/length-diversity reports from trajectory files
``report``     pretty-print the tables an analyze step produced

One YAML config file fully determines a run; re-running with the same
config and master seed reproduces byte-identical trajectory and report
files for non-LLM kernels.  Plots are never rendered here -- the
analyze step emits the exact CSV/JSON series a plotting notebook needs.
Aggregate spreads are sample standard deviations (ddof=1) and are
labeled as such in the column names.
"""

from __future__ import annotations

import argparse
import csv
import json
import statistics
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .chain_runner import (
    BatchError,
    Trajectory,
    file_sha256,
    read_trajectories,
    recurrence_stats,
    run_batch,
    run_chain,
    write_batch,
)
from .errors import ChainLabError, ConfigParseError, InvalidInputError
from .kernels import (
    DecodingConfig,
    FiniteKernel,
    Kernel,
    LLMKernel,
    PromptSchedule,
    PromptTemplate,
    ScheduledKernel,
    ScriptedKernel,
    compose_round_trip,
    load_template,
    random_logits_kernel,
)
from .llm_client import EndpointConfig
from .metrics import drift_csv_rows, drift_series
from .stats import correlation_rows_to_csv, format_correlation_table, length_diversity_table
from .textunit import Corpus, Sentence, load_corpus

SCHEMA_VERSION = 1


# --- config loading -----------------------------------------------------------


def _load_yaml(path: Path) -> dict:
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigParseError(f"cannot read config {path}: {exc}", path=str(path)) from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        line = None
        mark = getattr(exc, "problem_mark", None)
        if mark is not None:
            line = mark.line + 1
        raise ConfigParseError(
            f"{path}:{line or '?'}: invalid YAML: {exc}", path=str(path), line=line
        ) from exc
    if not isinstance(data, dict):
        raise ConfigParseError(f"{path}: config must be a mapping", path=str(path))
    return data


def _require(data: dict, key: str, path: str):
    if key not in data:
        raise ConfigParseError(f"{path}: missing required field {key!r}", path=path, field=key)
    return data[key]


def _decoding_from_dict(d: dict | None) -> DecodingConfig | None:
    if d is None:
        return None
    try:
        return DecodingConfig(
            mode=d.get("mode", "sampling"),
            temperature=float(d.get("temperature", 0.7)),
            top_p=float(d.get("top_p", 0.9)),
            rng_seed=d.get("rng_seed"),
        )
    except InvalidInputError as exc:
        raise ConfigParseError(f"bad decoding config: {exc}", field="decoding") from exc


def _endpoint_from_dict(d: dict) -> EndpointConfig:
    return EndpointConfig(
        base_url=str(d["base_url"]),
        model_name=str(d.get("model_name", "unknown")),
        auth_env_var=str(d.get("auth_env_var", "CHAINLAB_API_TOKEN")),
        timeout=float(d.get("timeout", 60.0)),
        max_retries=int(d.get("max_retries", 3)),
        backoff_base=float(d.get("backoff_base", 0.5)),
    )


def _template_from_spec(spec) -> PromptTemplate:
    if isinstance(spec, str):
        return load_template(spec)
    return PromptTemplate(template_id=str(spec.get("id", "inline")), body=str(spec["body"]))


def build_kernel(spec: dict, endpoints: dict[str, EndpointConfig] | None = None,
                 base_dir: Path | None = None) -> Kernel:
    """Construct a kernel from its spec mapping (or a path to one)."""
    endpoints = endpoints or {}
    if isinstance(spec, str):
        path = (base_dir / spec) if base_dir is not None else Path(spec)
        return build_kernel(_load_yaml(path), endpoints, base_dir=path.parent)
    kind = _require(spec, "kind", "kernel spec")
    common = {
        "source_lang": spec.get("source_lang", "en"),
        "target_lang": spec.get("target_lang", "en"),
    }
    if kind == "finite":
        if "generator" in spec:
            g = spec["generator"]
            kernel = random_logits_kernel(
                m=int(g["m"]), seed=int(g["seed"]),
                noise_scale=float(g.get("noise_scale", 1.0)),
                attraction_scale=float(g.get("attraction_scale", 2.5)),
                label=spec.get("label"),
            )
            kernel.source_lang = common["source_lang"]
            kernel.target_lang = common["target_lang"]
            return kernel
        return FiniteKernel(
            states=_require(spec, "states", "finite kernel spec"),
            logits=_require(spec, "logits", "finite kernel spec"),
            out_states=spec.get("out_states"),
            label=spec.get("label", "finite"),
            **common,
        )
    if kind == "scripted":
        return ScriptedKernel(
            script=_require(spec, "script", "scripted kernel spec"),
            default=spec.get("default", "identity"),
            label=spec.get("label", "scripted"),
            **common,
        )
    if kind == "llm":
        endpoint_id = _require(spec, "endpoint", "llm kernel spec")
        if endpoint_id not in endpoints:
            raise ConfigParseError(f"unknown endpoint id {endpoint_id!r}", field="endpoint")
        policy = spec.get("policy", "first")
        if isinstance(policy, dict) and "retry" in policy:
            policy = ("retry", int(policy["retry"]))
        rpm = spec.get("requests_per_minute")
        return LLMKernel(
            endpoint=endpoints[endpoint_id],
            template=_template_from_spec(_require(spec, "template", "llm kernel spec")),
            policy=policy,
            target_lang_name=spec.get("target_lang_name"),
            max_output_tokens=int(spec.get("max_output_tokens", 256)),
            max_in_flight=int(spec.get("max_in_flight", 4)),
            requests_per_minute=float(rpm) if rpm is not None else None,
            label=spec.get("label"),
            **common,
        )
    if kind == "roundtrip":
        forward = build_kernel(_require(spec, "forward", "roundtrip spec"), endpoints, base_dir)
        backward = build_kernel(_require(spec, "backward", "roundtrip spec"), endpoints, base_dir)
        return compose_round_trip(forward, backward)
    if kind == "scheduled":
        templates = tuple(_template_from_spec(t) for t in _require(spec, "templates", "schedule spec"))
        schedule = PromptSchedule(templates=templates, policy=spec.get("policy", "alternate"))
        base_spec = _require(spec, "base", "schedule spec")
        if isinstance(base_spec, list):
            base = [build_kernel(b, endpoints, base_dir) for b in base_spec]
        else:
            base = build_kernel(base_spec, endpoints, base_dir)
        return ScheduledKernel(schedule, base)
    raise ConfigParseError(f"unknown kernel kind {kind!r}", field="kind")


def override_endpoint(spec, endpoint_id: str):
    """Rewrite every llm kernel node in a spec tree to use ``endpoint_id``."""
    if not isinstance(spec, dict):
        return spec
    out = dict(spec)
    if out.get("kind") == "llm":
        out["endpoint"] = endpoint_id
    for key in ("forward", "backward", "base"):
        if key in out:
            child = out[key]
            if isinstance(child, list):
                out[key] = [override_endpoint(c, endpoint_id) for c in child]
            else:
                out[key] = override_endpoint(child, endpoint_id)
    return out


@dataclass
class ExperimentConfig:
    """Everything one `run` needs, parsed from a single YAML file."""

    corpus: dict
    kernel: dict | str
    decoding: DecodingConfig | None
    horizon: int = 50
    parallelism: int = 1
    master_seed: int = 0
    output_dir: str | None = None
    endpoints: dict = field(default_factory=dict)
    endpoint: str | None = None
    base_dir: Path = field(default_factory=Path)

    def normalized(self) -> dict:
        """Stable dict form; parsing then re-serializing is idempotent."""
        return {
            "schema_version": SCHEMA_VERSION,
            "corpus": {
                "path": str(self.corpus["path"]),
                "n": int(self.corpus["n"]),
                "sample_seed": int(self.corpus.get("sample_seed", 0)),
                "unit": self.corpus.get("unit", "sentence"),
                "dataset_name": self.corpus.get("dataset_name"),
            },
            "kernel": self.kernel,
            "decoding": self.decoding.to_dict() if self.decoding is not None else None,
            "horizon": int(self.horizon),
            "parallelism": int(self.parallelism),
            "master_seed": int(self.master_seed),
            "output_dir": self.output_dir,
            "endpoint": self.endpoint,
        }


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    data = _load_yaml(path)
    version = data.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigParseError(
            f"{path}: unsupported schema_version {version!r}", path=str(path), field="schema_version"
        )
    corpus = _require(data, "corpus", str(path))
    _require(corpus, "path", f"{path} corpus")
    _require(corpus, "n", f"{path} corpus")
    endpoints = {
        str(eid): _endpoint_from_dict(spec)
        for eid, spec in (data.get("endpoints") or {}).items()
    }
    horizon = int(data.get("horizon", 50))
    if horizon < 1:
        raise ConfigParseError(f"{path}: horizon must be >= 1", path=str(path), field="horizon")
    return ExperimentConfig(
        corpus=dict(corpus),
        kernel=_require(data, "kernel", str(path)),
        decoding=_decoding_from_dict(data.get("decoding")),
        horizon=horizon,
        parallelism=int(data.get("parallelism", 1)),
        master_seed=int(data.get("master_seed", 0)),
        output_dir=data.get("output_dir"),
        endpoints=endpoints,
        endpoint=data.get("endpoint"),
        base_dir=path.parent,
    )


# --- run ----------------------------------------------------------------------


def execute_run(config: ExperimentConfig, out_dir: Path) -> dict:
    corpus = load_corpus(
        path=config.base_dir / str(config.corpus["path"]),
        n=int(config.corpus["n"]),
        sample_seed=int(config.corpus.get("sample_seed", 0)),
        unit=config.corpus.get("unit", "sentence"),
        dataset_name=config.corpus.get("dataset_name"),
    )
    spec = config.kernel
    base_dir = config.base_dir
    if isinstance(spec, str):
        path = base_dir / spec
        spec = _load_yaml(path)
        base_dir = path.parent
    if config.endpoint is not None:
        spec = override_endpoint(spec, config.endpoint)
    kernel = build_kernel(spec, config.endpoints, base_dir=base_dir)
    # a kernel spec may carry a default decoding; the experiment config wins
    decoding = config.decoding
    if decoding is None and isinstance(spec, dict):
        decoding = _decoding_from_dict(spec.get("decoding"))
    batch = run_batch(
        kernel, corpus, config.horizon,
        decoding=decoding,
        parallelism=config.parallelism,
        master_seed=config.master_seed,
    )
    return write_batch(out_dir, batch, toolkit_version=__version__,
                       extra_manifest={"experiment_config": config.normalized()})


def cmd_run(args) -> int:
    try:
        config = load_config(args.config)
    except ConfigParseError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if args.master_seed is not None:
        config.master_seed = args.master_seed
    if args.parallelism is not None:
        config.parallelism = args.parallelism
    if args.endpoint is not None:
        config.endpoint = args.endpoint
    # --out is taken relative to the shell; output_dir inside a config is
    # relative to the config file, like every other path in it
    out_dir = Path(args.out) if args.out else config.base_dir / (config.output_dir or "out")
    try:
        manifest = execute_run(config, out_dir)
    except ConfigParseError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except BatchError as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return 1
    except (ChainLabError, OSError) as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return 1
    failed = [c for c in manifest["chains"] if c["status"] != "ok"]
    print(f"run complete: {len(manifest['chains']) - len(failed)} ok, "
          f"{len(failed)} failed/truncated -> {out_dir}")
    return 0


# --- simulate -----------------------------------------------------------------


@dataclass
class StudySummary:
    label: str
    taus: list[int]
    distincts: list[int]

    @property
    def mean_tau(self) -> float:
        return statistics.fmean(self.taus)

    @property
    def std_tau(self) -> float:
        return statistics.stdev(self.taus) if len(self.taus) > 1 else 0.0

    @property
    def mean_distinct(self) -> float:
        return statistics.fmean(self.distincts)

    @property
    def std_distinct(self) -> float:
        return statistics.stdev(self.distincts) if len(self.distincts) > 1 else 0.0

    def no_repeat_fraction(self, horizon: int) -> float:
        return sum(1 for t in self.taus if t == horizon + 1) / len(self.taus)


def run_decoding_study(kernel: FiniteKernel, decodings: list[tuple[str, DecodingConfig]],
                       chains: int, horizon: int, master_seed: int) -> list[StudySummary]:
    """Run the same kernel under several decoding configs with paired seeds.

    Chain ``i`` starts from state ``i % m`` and uses rng seeded
    ``(master_seed, i)`` under every config, so configs differ only in
    the decoding, not in the random draws available to them.
    """
    summaries = []
    for label, decoding in decodings:
        taus, distincts = [], []
        for i in range(chains):
            rng = np.random.default_rng([master_seed, i])
            seed = Sentence.from_raw(kernel.states[i % kernel.size])
            traj = run_chain(kernel, seed, horizon, rng, decoding=decoding,
                             run_id=f"{label}-{i:04d}")
            report = recurrence_stats(traj)
            taus.append(report.tau)
            distincts.append(report.distinct_count)
        summaries.append(StudySummary(label=label, taus=taus, distincts=distincts))
    return summaries


def _write_study_files(out: Path, summaries: list[StudySummary], horizon: int,
                       prefix: str) -> None:
    with open(out / f"{prefix}_summary.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["label", "chains", "mean_tau", "std_tau_sample",
                         "mean_distinct", "std_distinct_sample", "no_repeat_fraction"])
        for s in summaries:
            writer.writerow([s.label, len(s.taus), repr(s.mean_tau), repr(s.std_tau),
                             repr(s.mean_distinct), repr(s.std_distinct),
                             repr(s.no_repeat_fraction(horizon))])
    with open(out / f"{prefix}_details.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["label", "chain", "tau", "distinct_count"])
        for s in summaries:
            for i, (tau, u) in enumerate(zip(s.taus, s.distincts)):
                writer.writerow([s.label, i, tau, u])


def cmd_simulate(args) -> int:
    try:
        data = _load_yaml(Path(args.config))
        kernel = build_kernel(_require(data, "kernel", args.config), base_dir=Path(args.config).parent)
        if not isinstance(kernel, FiniteKernel):
            raise ConfigParseError("simulate needs a finite kernel", field="kernel")
        chains = int(data.get("chains", 200))
        horizon = int(data.get("horizon", 50))
        master_seed = int(args.master_seed if args.master_seed is not None
                          else data.get("master_seed", 0))
        decodings = []
        for d in _require(data, "configs", args.config):
            cfg = _decoding_from_dict(d)
            decodings.append((d.get("label", cfg.label), cfg))
        sweep = data.get("sweep") or {}
    except ConfigParseError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    out = (Path(args.out) if args.out
           else Path(args.config).parent / data.get("output_dir", "out"))
    out.mkdir(parents=True, exist_ok=True)

    summaries = run_decoding_study(kernel, decodings, chains, horizon, master_seed)
    _write_study_files(out, summaries, horizon, "decoding")

    sweep_summaries = []
    if sweep:
        top_p = float(sweep.get("top_p", 0.9))
        sweep_decodings = [
            (f"t={t:g}", DecodingConfig(mode="sampling", temperature=float(t), top_p=top_p))
            for t in sweep.get("temperatures", [])
        ]
        sweep_summaries = run_decoding_study(kernel, sweep_decodings, chains, horizon, master_seed)
        _write_study_files(out, sweep_summaries, horizon, "sweep")

    plot_data = {
        "horizon": horizon,
        "chains": chains,
        "decoding": [
            {"label": s.label, "mean_tau": s.mean_tau, "std_tau_sample": s.std_tau,
             "mean_distinct": s.mean_distinct, "std_distinct_sample": s.std_distinct,
             "taus": s.taus, "distincts": s.distincts}
            for s in summaries + sweep_summaries
        ],
    }
    with open(out / "plot_data.json", "w", encoding="utf-8") as fh:
        json.dump(plot_data, fh, sort_keys=True)
        fh.write("\n")
    for s in summaries:
        print(f"{s.label}: mean_tau={s.mean_tau:.2f} mean_distinct={s.mean_distinct:.2f}")
    return 0


# --- analyze ------------------------------------------------------------------


def _collect_inputs(paths: list[str]) -> list[tuple[Path, dict | None]]:
    """Resolve run directories / JSONL files to (jsonl path, manifest)."""
    found = []
    for p in sorted(paths):
        path = Path(p)
        if path.is_dir():
            jsonl = path / "trajectories.jsonl"
            manifest_path = path / "manifest.json"
            manifest = None
            if manifest_path.exists():
                manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
            found.append((jsonl, manifest))
        else:
            found.append((path, None))
    return found


def analyze_runs(inputs: list[str], out_dir) -> dict:
    """Pure function of the input files; writes the report files into out_dir."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    errors: dict[str, str] = {}
    runs: list[tuple[Trajectory, object]] = []

    for jsonl_path, manifest in _collect_inputs(inputs):
        try:
            config = (manifest or {}).get("config", {})
            status = {c["run_id"]: c["status"] for c in (manifest or {}).get("chains", [])}
            for traj in read_trajectories(jsonl_path, config=config):
                if status and status.get(traj.run_id) != "ok":
                    runs.append((traj, None))
                else:
                    runs.append((traj, recurrence_stats(traj)))
        except (OSError, ValueError, KeyError, ChainLabError) as exc:
            errors[str(jsonl_path)] = str(exc)

    if not runs:
        raise BatchError(f"nothing analyzable in {len(inputs)} inputs; errors: {errors}")

    # drift
    drift_agg: dict[tuple[str, str, int], list[float]] = {}
    with open(out / "drift_per_run.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["run_id", "t", "metric", "mode", "value"])
        for traj, _ in runs:
            if len(traj.steps) < 1:
                continue
            for row in drift_csv_rows(traj.run_id, drift_series(traj)):
                writer.writerow([row[0], row[1], row[2], row[3], repr(row[4])])
                drift_agg.setdefault((row[2], row[3], row[1]), []).append(row[4])

    with open(out / "drift_aggregate.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["metric", "mode", "t", "mean", "std_sample", "count"])
        for (metric, mode, t) in sorted(drift_agg):
            values = drift_agg[(metric, mode, t)]
            std = statistics.stdev(values) if len(values) > 1 else 0.0
            writer.writerow([metric, mode, t, repr(statistics.fmean(values)), repr(std),
                             len(values)])

    # recurrence aggregates per (dataset, model_decoding)
    rec_groups: dict[tuple[str, str], list] = {}
    for traj, report in runs:
        if report is None:
            continue
        key = (str(traj.config.get("dataset", "unknown")),
               str(traj.config.get("model_decoding", "unknown")))
        horizon = int(traj.config.get("horizon", traj.horizon))
        rec_groups.setdefault(key, []).append((report, horizon))
    with open(out / "recurrence_aggregate.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["dataset", "model_decoding", "chains", "mean_tau", "std_tau_sample",
                         "mean_distinct", "std_distinct_sample", "no_repeat_fraction"])
        for key in sorted(rec_groups):
            group = rec_groups[key]
            taus = [r.tau for r, _ in group]
            distincts = [r.distinct_count for r, _ in group]
            no_repeat = sum(1 for r, h in group if r.tau == h + 1) / len(group)
            writer.writerow([
                key[0], key[1], len(group),
                repr(statistics.fmean(taus)),
                repr(statistics.stdev(taus) if len(taus) > 1 else 0.0),
                repr(statistics.fmean(distincts)),
                repr(statistics.stdev(distincts) if len(distincts) > 1 else 0.0),
                repr(no_repeat),
            ])

    # length-diversity association
    rows = length_diversity_table(runs)
    correlation_rows_to_csv(rows, out / "length_diversity.csv")
    (out / "length_diversity.txt").write_text(format_correlation_table(rows) + "\n",
                                              encoding="utf-8")

    plot_data = {
        "drift": [
            {"metric": metric, "mode": mode, "t": t,
             "mean": statistics.fmean(v),
             "std_sample": statistics.stdev(v) if len(v) > 1 else 0.0}
            for (metric, mode, t), v in sorted(drift_agg.items())
        ],
        "length_diversity": [
            {"dataset": r.dataset, "model_decoding": r.model_decoding, "n": r.n,
             "r": r.r, "p": r.p, "r_squared": r.r_squared, "slope": r.slope,
             "error": r.error}
            for r in rows
        ],
    }
    with open(out / "plot_data.json", "w", encoding="utf-8") as fh:
        json.dump(plot_data, fh, sort_keys=True)
        fh.write("\n")

    files = sorted(p.name for p in out.iterdir()
                   if p.is_file() and p.name != "analysis_manifest.json")
    manifest = {
        "toolkit_version": __version__,
        "inputs": sorted(str(p) for p in inputs),
        "errors": errors,
        "files": {name: file_sha256(out / name) for name in files},
    }
    with open(out / "analysis_manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def cmd_analyze(args) -> int:
    try:
        manifest = analyze_runs(args.inputs, Path(args.out))
    except BatchError as exc:
        print(f"analyze failed: {exc}", file=sys.stderr)
        return 1
    if manifest["errors"]:
        for path, err in manifest["errors"].items():
            print(f"skipped {path}: {err}", file=sys.stderr)
    print(f"analysis written to {args.out}")
    return 0


def cmd_report(args) -> int:
    base = Path(args.analysis_dir)
    table = base / "length_diversity.txt"
    if table.exists():
        print(table.read_text(encoding="utf-8"), end="")
    rec = base / "recurrence_aggregate.csv"
    if rec.exists():
        print()
        with open(rec, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
        for r in rows:
            print("  ".join(v.ljust(w) for v, w in zip(r, widths)))
    if not table.exists() and not rec.exists():
        print(f"no report files under {base}", file=sys.stderr)
        return 1
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="chainlab",
                                     description="iterated sentence-chain toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a batch of chains from a config file")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out", default=None)
    p_run.add_argument("--parallelism", type=int, default=None)
    p_run.add_argument("--master-seed", type=int, default=None, dest="master_seed")
    p_run.add_argument("--endpoint", default=None)
    p_run.set_defaults(func=cmd_run)

    p_sim = sub.add_parser("simulate", help="decoding study on a synthetic kernel")
    p_sim.add_argument("--config", required=True)
    p_sim.add_argument("--out", default=None)
    p_sim.add_argument("--master-seed", type=int, default=None, dest="master_seed")
    p_sim.set_defaults(func=cmd_simulate)

    p_an = sub.add_parser("analyze", help="compute drift/recurrence/correlation reports")
    p_an.add_argument("inputs", nargs="+", help="run directories or trajectory JSONL files")
    p_an.add_argument("--out", required=True)
    p_an.set_defaults(func=cmd_analyze)

    p_rep = sub.add_parser("report", help="print tables from an analysis directory")
    p_rep.add_argument("analysis_dir")
    p_rep.set_defaults(func=cmd_report)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
