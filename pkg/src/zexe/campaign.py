"""Attack campaigns: inject sections into each malicious sample, run an
optimizer against a detector and collect per-sample metrics."""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict
import csv
import io
import json
import math
import os

import numpy as np

from . import detectors, texe
from .byte_domain import ByteWindow, decode_array
from .optim import FULL_BOUNDS, PRINTABLE_BOUNDS, OptimizerConfig, preset, run_attack

CSV_COLUMNS = ("sample_id", "algo", "seed", "evaded", "queries", "payload_bytes",
               "total_growth_bytes", "final_conf")
WINDOWS = {"printable": (ByteWindow.printable(), PRINTABLE_BOUNDS),
           "full": (ByteWindow.full(), FULL_BOUNDS)}


@dataclass
class CampaignConfig:
    """One attack campaign; ``optimizer`` overrides the preset of ``algo``."""

    algo: str = "zexe"
    budget: int = 1000
    n_sections: int = 50
    section_bytes: int = 2048
    window: str = "printable"
    seeds: list = field(default_factory=lambda: [0])
    max_samples: int | None = None
    threshold: float | None = None
    optimizer: dict = field(default_factory=dict)
    workers: int = 1

    def __post_init__(self):
        if self.budget <= 0:
            raise ValueError(f"budget must be positive, got {self.budget}")
        if self.window not in WINDOWS:
            raise ValueError(f"unknown byte window {self.window!r}; choose printable or full")
        if self.n_sections <= 0 or self.section_bytes <= 0:
            raise ValueError("n_sections and section_bytes must be positive")
        if not self.seeds:
            raise ValueError("at least one seed is required")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")
        self.optimizer_config(0.5)  # fail early on bad optimizer overrides

    def optimizer_config(self, threshold):
        bounds = WINDOWS[self.window][1]
        over = dict(self.optimizer)
        over.setdefault("bounds", bounds)
        return preset(self.algo, budget=self.budget, threshold=threshold, **over)

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class SampleRecord:
    sample_id: str
    algo: str
    seed: int
    evaded: bool
    queries: int
    payload_bytes: int
    total_growth_bytes: int
    final_conf: float
    initial_conf: float = math.nan
    error: str | None = None

    def csv_row(self):
        return [self.sample_id, self.algo, self.seed, int(self.evaded), self.queries,
                self.payload_bytes, self.total_growth_bytes, repr(self.final_conf)]


@dataclass
class CampaignReport:
    config: dict
    records: list
    skipped: list

    @property
    def aggregates(self):
        return aggregate(self.records)

    def per_seed(self):
        seeds = sorted({r.seed for r in self.records})
        return {s: aggregate([r for r in self.records if r.seed == s]) for s in seeds}

    def to_json(self):
        return {"config": self.config, "aggregates": self.aggregates,
                "per_seed": {str(k): v for k, v in self.per_seed().items()},
                "skipped": self.skipped}

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.records:
            w.writerow(r.csv_row())
        return buf.getvalue()

    def write(self, out_prefix):
        """Write ``<prefix>.csv`` and ``<prefix>.json``; returns both paths."""
        d = os.path.dirname(out_prefix)
        if d:
            os.makedirs(d, exist_ok=True)
        csv_path, json_path = out_prefix + ".csv", out_prefix + ".json"
        with open(csv_path, "w", encoding="utf-8", newline="") as fh:
            fh.write(self.to_csv())
        with open(json_path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        return csv_path, json_path


def _mean_std(xs):
    if not xs:
        return None, None
    a = np.asarray(xs, dtype=np.float64)
    return float(a.mean()), float(a.std())


def aggregate(records):
    """Evasion rate plus mean/std of queries (evaded only), size and confidence.

    Works on :class:`SampleRecord` objects or on dicts read back from the CSV.
    """
    rows = [r if isinstance(r, dict) else asdict(r) for r in records]
    n = len(rows)
    evaded = [r for r in rows if _truthy(r["evaded"])]
    mq, sq = _mean_std([int(r["queries"]) for r in evaded])
    mp, sp = _mean_std([int(r["payload_bytes"]) for r in rows])
    mg, sg = _mean_std([int(r["total_growth_bytes"]) for r in rows])
    mc, sc = _mean_std([float(r["final_conf"]) for r in rows])
    return {"n": n, "evaded": len(evaded), "er": len(evaded) / n if n else None,
            "mu_queries": mq, "sigma_queries": sq,
            "mu_payload_bytes": mp, "sigma_payload_bytes": sp,
            "mu_growth_bytes": mg, "sigma_growth_bytes": sg,
            "mu_conf": mc, "sigma_conf": sc}


def _truthy(x):
    if isinstance(x, str):
        return x.strip().lower() in ("1", "true", "yes")
    return bool(x)


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if rows and set(CSV_COLUMNS) - set(rows[0]):
        raise ValueError(f"{path}: missing columns {sorted(set(CSV_COLUMNS) - set(rows[0]))}")
    return rows


# -- objectives ----------------------------------------------------------------

def make_objective(model, manipulator, window):
    """Detector score of the manipulated file as a function of ``v``.

    For histogram models the byte counts outside the placement are fixed, so
    only the content is counted per query; the score is identical to scoring
    the full file.
    """
    if isinstance(model, detectors.HistogramModel):
        base = manipulator.baseline.copy()
        base[manipulator.placement.offsets] = 0
        fixed = np.bincount(base, minlength=256)
        fixed[0] -= manipulator.placement.d
        n = base.size
        w, b = model.weights, model.bias

        def objective(v):
            counts = fixed + np.bincount(decode_array(v, window), minlength=256)
            return float(detectors.sigmoid((counts / n) @ w + b))
        return objective

    def objective(v):
        return model.score(manipulator.apply_array(decode_array(v, window)))
    return objective


def _sample_rng(seed, index):
    return np.random.default_rng(np.random.SeedSequence([seed, index]))


def attack_sample(model, data, sample_id, index, seed, cfg):
    """Attack one sample; returns a :class:`SampleRecord` or raises ``TexeError``."""
    window, (lo, hi) = WINDOWS[cfg.window]
    threshold = model.threshold if cfg.threshold is None else cfg.threshold
    base = texe.parse(data)
    rng = _sample_rng(seed, index)
    v0 = rng.uniform(lo, hi, size=cfg.n_sections * cfg.section_bytes)
    payload = decode_array(v0, window).tobytes()
    injected, placement = texe.inject_sections(base, cfg.n_sections, payload)
    objective = make_objective(model, texe.Manipulator(injected, placement), window)
    res = run_attack(objective, v0, cfg.optimizer_config(threshold), seed=seed)
    return SampleRecord(
        sample_id=sample_id, algo=cfg.algo, seed=seed, evaded=res.evaded,
        queries=res.queries_to_evasion if res.evaded else res.queries_used,
        payload_bytes=placement.payload_bytes,
        total_growth_bytes=texe.injection_growth(injected, placement),
        final_conf=res.f_best, initial_conf=res.f_initial, error=res.error)


def _job(args):
    model_bytes, data, sample_id, index, seed, cfg = args
    model = detectors.load_model(model_bytes)
    try:
        return attack_sample(model, data, sample_id, index, seed, cfg)
    except texe.TexeError as exc:
        return {"sample_id": sample_id, "seed": seed, "reason": str(exc)}


def run_campaign(model, corpus, cfg):
    """Attack every malicious sample of ``corpus`` once per seed.

    Records come back in (seed, sample) order whatever the worker count, so
    reports are byte-identical across runs.
    """
    from .corpus import MALICIOUS

    mal = corpus.subset(MALICIOUS)
    items = list(zip(mal.names, mal.samples))[: cfg.max_samples]
    model_bytes = detectors.dump_model(model)
    jobs = [(model_bytes, data, name, i, seed, cfg)
            for seed in cfg.seeds for i, (name, data) in enumerate(items)]
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_job, jobs, chunksize=1))
    else:
        results = [_job(j) for j in jobs]
    records = [r for r in results if isinstance(r, SampleRecord)]
    skipped = [r for r in results if isinstance(r, dict)]
    conf = cfg.to_dict()
    conf["resolved_optimizer"] = cfg.optimizer_config(
        model.threshold if cfg.threshold is None else cfg.threshold).to_dict()
    conf["detector"] = {"kind": model.kind, "threshold": model.threshold}
    conf.pop("workers")
    return CampaignReport(conf, records, skipped)
