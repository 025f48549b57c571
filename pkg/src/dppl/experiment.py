"""Dataset generation, solving, training, evaluation and runtime benchmarks.

Every artifact lives under one output directory::

    manifest.json              config echo, seeds, instance list
    instances/<id>.json        one network instance per file
    labels-<solver>.json       schedules for the training split
    records-<solver>.csv       EvalRecords for the test split
    model.json, trace.csv      trained parameters and log-likelihood trace
    cdf.csv, runtime.csv       sorted sum-rate columns; wall time by link count
    summary.json               mean sum-rates and runtime ratios
    bench.csv                  controlled runtime-vs-size sweep

Per-instance randomness is derived from (master seed, split, index), so
results do not depend on the worker count or on execution order.
"""
from __future__ import annotations

import csv
import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import dpp
from . import model as md
from .network import AdHocConfig, DroneCellConfig, NetworkInstance, generate, sum_rate
from .schedulers import GpConfig, brute_force_schedule, estimate_pa, gp_schedule, independent_thinning

log = logging.getLogger(__name__)

SPLITS = {"train": 0, "test": 1, "bench": 2}
SOLVERS = ("gp", "brute")
EVAL_TAGS = ("gp", "brute", "dppl-map", "dppl-sample", "thinning")
RECORD_FIELDS = ("instanceId", "solverTag", "sumRate", "wallTimeMicros", "subsetSize", "subset")
TIMING_FIELDS = ("wallTimeMicros",)
# offsets so sampling and thinning draw from streams distinct from generation
_STREAM = {"dppl-sample": 1, "thinning": 2}


class ConfigError(ValueError):
    """Invalid experiment configuration or missing input artifact."""


@dataclass
class ExperimentConfig:
    scenario: str = "adhoc"
    train_size: int | None = None  # 300 ad-hoc, 200 drone
    test_size: int = 200
    seed: int = 0
    scenario_config: dict = field(default_factory=dict)
    gp: dict = field(default_factory=dict)
    solvers: list = field(default_factory=lambda: ["gp"])
    modes: list = field(default_factory=lambda: ["map", "sample"])
    bench_sizes: list = field(default_factory=list)
    bench_reps: int = 200
    workers: int = 1

    _KEYS = {"scenario": "scenario", "trainSize": "train_size", "testSize": "test_size",
             "seed": "seed", "scenarioConfig": "scenario_config", "gp": "gp",
             "solvers": "solvers", "modes": "modes", "benchSizes": "bench_sizes",
             "benchReps": "bench_reps", "workers": "workers"}

    def __post_init__(self):
        if self.train_size is None:
            self.train_size = 300 if self.scenario == "adhoc" else 200
        self.validate()

    def validate(self):
        if self.scenario not in ("adhoc", "dronecell"):
            raise ConfigError(f"unknown scenario {self.scenario!r}")
        if self.train_size < 1 or self.test_size < 1:
            raise ConfigError("trainSize and testSize must be >= 1")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError("seed must be a non-negative integer")
        bad = [s for s in self.solvers if s not in SOLVERS]
        if bad:
            raise ConfigError(f"unknown solver(s) {bad}")
        bad = [m for m in self.modes if m not in ("map", "sample")]
        if bad:
            raise ConfigError(f"unknown inference mode(s) {bad}")
        if self.workers < 1 or self.bench_reps < 1:
            raise ConfigError("workers and benchReps must be >= 1")
        try:
            self.network_config().validate()
            self.gp_config()
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    def network_config(self, **override):
        cls = AdHocConfig if self.scenario == "adhoc" else DroneCellConfig
        known = {f.name for f in fields(cls)}
        unknown = set(self.scenario_config) - known
        if unknown:
            raise ConfigError(f"unknown {self.scenario} config keys {sorted(unknown)}")
        return cls(**{**self.scenario_config, **override})

    def gp_config(self) -> GpConfig:
        return GpConfig.for_scenario(self.scenario, **self.gp)

    def to_dict(self) -> dict:
        # the worker count does not affect results, so it is not echoed
        return {k: getattr(self, a) for k, a in self._KEYS.items() if a != "workers"}

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        unknown = set(d) - set(cls._KEYS)
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        return cls(**{cls._KEYS[k]: v for k, v in d.items()})

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc


def instance_seed(master: int, split: str, idx: int) -> list[int]:
    return [int(master), SPLITS[split], int(idx)]


def instance_id(split: str, idx: int) -> str:
    return f"{split}-{idx:05d}"


# -- I/O helpers ------------------------------------------------------------

def _write_json(path: Path, obj):
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _read_json(path: Path):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ConfigError(f"missing file {path}") from exc


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def read_csv(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def _ensure_dir(path: Path):
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {path}: {exc}") from exc
    if not os.access(path, os.W_OK):
        raise ConfigError(f"output directory {path} is not writable")


def _pmap(fn, items, workers: int):
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items, chunksize=max(1, len(items) // (4 * workers))))


def _fmt(x: float) -> str:
    return repr(float(x))


class Dataset:
    """Read access to a generated output directory."""

    def __init__(self, out):
        self.out = Path(out)
        self.manifest = _read_json(self.out / "manifest.json")
        self.config = ExperimentConfig.from_dict(self.manifest["config"])

    def ids(self, split: str) -> list[str]:
        return [e["id"] for e in self.manifest["instances"] if e["split"] == split]

    def instance(self, iid: str) -> NetworkInstance:
        return NetworkInstance.from_dict(_read_json(self.out / "instances" / f"{iid}.json"))

    def instances(self, split: str) -> list[tuple[str, NetworkInstance]]:
        return [(i, self.instance(i)) for i in self.ids(split)]

    def training_set(self, solver: str = "gp") -> list[md.TrainingSample]:
        labels = _read_json(self.out / f"labels-{solver}.json")
        ok = {r["instanceId"]: r["active"] for r in labels if r.get("error") is None}
        return [md.TrainingSample(inst, tuple(ok[i])) for i, inst in self.instances("train") if i in ok]


# -- generate ---------------------------------------------------------------

def _gen_one(args):
    scenario, net_cfg, seed = args
    return generate(scenario, net_cfg, seed)


def cmd_generate(cfg: ExperimentConfig, out) -> Path:
    out = Path(out)
    _ensure_dir(out / "instances")
    net_cfg = cfg.network_config()
    jobs, entries = [], []
    for split, size in (("train", cfg.train_size), ("test", cfg.test_size)):
        for idx in range(size):
            seed = instance_seed(cfg.seed, split, idx)
            jobs.append((cfg.scenario, net_cfg, seed))
            entries.append({"id": instance_id(split, idx), "split": split, "seed": seed})
    for entry, inst in zip(entries, _pmap(_gen_one, jobs, cfg.workers)):
        entry["m"] = inst.m
        (out / "instances" / f"{entry['id']}.json").write_text(inst.to_json() + "\n", encoding="utf-8")
    manifest = {"schemaVersion": 1, "scenario": cfg.scenario, "seed": cfg.seed,
                "config": cfg.to_dict(), "networkConfig": asdict(net_cfg), "instances": entries}
    _write_json(out / "manifest.json", manifest)
    return out


# -- solve ------------------------------------------------------------------

def _solve_one(args):
    solver, inst, gp_cfg = args
    try:
        if solver == "gp":
            res = gp_schedule(inst, gp_cfg)
        else:
            res = brute_force_schedule(inst)
        return res.to_dict(), None
    except Exception as exc:  # recorded per instance; the run continues
        return None, f"{type(exc).__name__}: {exc}"


def _record_row(iid, tag, inst, subset, wall_s):
    subset = tuple(int(i) for i in subset)
    return [iid, tag, _fmt(sum_rate(inst, subset)), int(round(wall_s * 1e6)), len(subset),
            " ".join(map(str, subset))]


def cmd_solve(out, solver: str = "gp", workers: int | None = None) -> int:
    """Schedule every instance; returns the number of failed instances."""
    if solver not in SOLVERS:
        raise ConfigError(f"unknown solver {solver!r}")
    ds = Dataset(out)
    workers = workers or ds.config.workers
    gp_cfg = ds.config.gp_config()
    failures = 0
    for split in ("train", "test"):
        items = ds.instances(split)
        results = _pmap(_solve_one, [(solver, inst, gp_cfg) for _, inst in items], workers)
        labels, rows = [], []
        for (iid, inst), (res, err) in zip(items, results):
            if err is not None:
                failures += 1
                log.error("%s on %s failed: %s", solver, iid, err)
                labels.append({"instanceId": iid, "error": err})
                continue
            labels.append({"instanceId": iid, **res})
            rows.append(_record_row(iid, solver, inst, res["active"], res["wallTimeMicros"] * 1e-6))
        if split == "train":
            _write_json(ds.out / f"labels-{solver}.json", labels)
        else:
            _write_csv(ds.out / f"records-{solver}.csv", RECORD_FIELDS, rows)
    return failures


# -- train ------------------------------------------------------------------

def cmd_train(out, solver: str = "gp", init: md.ModelParams | None = None,
              train_cfg: md.TrainConfig | None = None) -> md.ModelParams:
    ds = Dataset(out)
    samples = ds.training_set(solver)
    if not samples:
        raise ValueError("training set is empty")
    train_cfg = train_cfg or md.TrainConfig(seed=ds.config.seed)
    trace: list = []
    params = md.train(samples, init=init or md.ModelParams.default(ds.config.scenario),
                      cfg=train_cfg, trace=trace)
    params.meta["activationProbability"] = estimate_pa(samples)
    if params.family == "dronecell":
        params.meta["thetaSigmaProduct"] = params.scale
    ds.out.joinpath("model.json").write_text(params.to_json() + "\n", encoding="utf-8")
    _write_csv(ds.out / "trace.csv", ("iteration", "logLik"),
               [(i, _fmt(v)) for i, v in enumerate(trace)])
    return params


# -- eval -------------------------------------------------------------------

def _eval_one(args):
    iid, idx, inst, params, modes, master, p_active = args
    rows = []
    for mode in modes:
        tag = f"dppl-{mode}"
        rng = np.random.default_rng(instance_seed(master, "test", idx) + [_STREAM.get(tag, 0)])
        t0 = time.perf_counter()
        subset = md.infer(inst, params, mode, rng)
        rows.append(_record_row(iid, tag, inst, subset, time.perf_counter() - t0))
    rng = np.random.default_rng(instance_seed(master, "test", idx) + [_STREAM["thinning"]])
    t0 = time.perf_counter()
    subset = independent_thinning(inst, p_active, rng)
    rows.append(_record_row(iid, "thinning", inst, subset, time.perf_counter() - t0))
    return rows


def load_params(path) -> md.ModelParams:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read model file {path}: {exc}") from exc
    return md.ModelParams.from_json(text)


def cmd_eval(out, params_path=None, modes=None, workers: int | None = None) -> dict:
    ds = Dataset(out)
    params = load_params(params_path or ds.out / "model.json")
    modes = list(modes or ds.config.modes)
    workers = workers or ds.config.workers
    p_active = params.meta.get("activationProbability")
    if p_active is None:
        p_active = estimate_pa(ds.training_set())
    items = ds.instances("test")
    jobs = [(iid, k, inst, params, modes, ds.config.seed, p_active)
            for k, (iid, inst) in enumerate(items)]
    rows = [r for chunk in _pmap(_eval_one, jobs, workers) for r in chunk]
    _write_csv(ds.out / "records-dppl.csv", RECORD_FIELDS, rows)

    records = []
    for tag in ("gp", "brute"):
        path = ds.out / f"records-{tag}.csv"
        if path.exists():
            records += read_csv(path)
    records += [dict(zip(RECORD_FIELDS, map(str, r))) for r in rows]
    sizes = {iid: inst.m for iid, inst in items}
    return write_reports(ds.out, records, sizes)


def write_reports(out: Path, records: list[dict], sizes: dict) -> dict:
    by_tag: dict[str, list[dict]] = {}
    for r in records:
        by_tag.setdefault(r["solverTag"], []).append(r)
    tags = [t for t in EVAL_TAGS if t in by_tag]

    # sorted sum-rate columns; shorter columns (failed instances) are padded
    cols = {t: sorted(float(r["sumRate"]) for r in by_tag[t]) for t in tags}
    depth = max(len(c) for c in cols.values())
    cdf_rows = []
    for k in range(depth):
        cdf_rows.append([_fmt((k + 1) / depth)] + [_fmt(cols[t][k]) if k < len(cols[t]) else ""
                                                    for t in tags])
    _write_csv(out / "cdf.csv", ["cdf"] + tags, cdf_rows)

    rt_rows = []
    for t in tags:
        groups: dict[int, list[float]] = {}
        for r in by_tag[t]:
            groups.setdefault(sizes[r["instanceId"]], []).append(float(r["wallTimeMicros"]))
        for m in sorted(groups):
            rt_rows.append([m, t, len(groups[m]), _fmt(np.mean(groups[m]))])
    _write_csv(out / "runtime.csv", ("m", "solverTag", "count", "meanWallTimeMicros"), rt_rows)

    summary = {"meanSumRate": {t: float(np.mean(cols[t])) for t in tags},
               "count": {t: len(cols[t]) for t in tags},
               "meanWallTimeMicros": {t: float(np.mean([float(r["wallTimeMicros"]) for r in by_tag[t]]))
                                      for t in tags}}
    if "gp" in tags:
        gp_time = summary["meanWallTimeMicros"]["gp"]
        summary["runtimeRatioGpOver"] = {t: gp_time / max(summary["meanWallTimeMicros"][t], 1.0)
                                         for t in tags if t != "gp"}
    _write_json(out / "summary.json", summary)
    return summary


# -- bench ------------------------------------------------------------------

def bench_instance(cfg: ExperimentConfig, size: int, idx: int) -> NetworkInstance:
    """Instance with ``size`` links: fixed link count (ad hoc) or ring count (drone)."""
    seed = instance_seed(cfg.seed, "bench", size * 1_000_000 + idx)
    if cfg.scenario == "adhoc":
        return generate("adhoc", cfg.network_config(num_links=size), seed)
    rings = {3 * (1 + 3 * r * (r + 1)): r for r in range(6)}
    if size not in rings:
        raise ConfigError(f"drone sizes must be 3 * cell count, one of {sorted(rings)}")
    r = rings[size]
    base = cfg.network_config()
    per_cell = base.num_drones / (1 + 3 * base.rings * (base.rings + 1))
    net = cfg.network_config(rings=r, wraparound=base.wraparound and r == 2,
                             num_drones=int(round(per_cell * (1 + 3 * r * (r + 1)))))
    for retry in range(100):
        inst = generate("dronecell", net, seed + [retry])
        if inst.m == size:
            return inst
    raise RuntimeError(f"could not draw a drone instance with every sector served (m={size})")


def _time_pair(inst, params, gp_cfg):
    t0 = time.perf_counter()
    gp_schedule(inst, gp_cfg)
    t1 = time.perf_counter()
    dpp.map_infer(md.kernel(inst, params))
    t2 = time.perf_counter()
    return t1 - t0, t2 - t1


def cmd_bench(cfg: ExperimentConfig, out, sizes=None, params: md.ModelParams | None = None,
              reps: int | None = None) -> list[dict]:
    """Mean GP and DPPL (kernel build + MAP) wall time per network size.

    One warm-up pair per size is run first and discarded.
    """
    out = Path(out)
    _ensure_dir(out)
    sizes = list(sizes or cfg.bench_sizes)
    if not sizes:
        raise ConfigError("no benchmark sizes given")
    reps = reps or cfg.bench_reps
    params = params or md.ModelParams.default(cfg.scenario)
    gp_cfg = cfg.gp_config()
    rows = []
    for size in sizes:
        _time_pair(bench_instance(cfg, size, reps), params, gp_cfg)  # warm-up
        times = np.array([_time_pair(bench_instance(cfg, size, k), params, gp_cfg)
                          for k in range(reps)])
        gp_t, dppl_t = times.mean(axis=0)
        rows.append({"m": size, "reps": reps, "gpMeanMicros": gp_t * 1e6,
                     "dpplMeanMicros": dppl_t * 1e6, "ratio": gp_t / dppl_t})
    _write_csv(out / "bench.csv", ("m", "reps", "gpMeanMicros", "dpplMeanMicros", "ratio"),
               [[r["m"], r["reps"], _fmt(r["gpMeanMicros"]), _fmt(r["dpplMeanMicros"]),
                 _fmt(r["ratio"])] for r in rows])
    return rows
