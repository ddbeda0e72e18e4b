"""Experiment configs, result records and the job runners behind the CLI."""
import copy
import csv
import hashlib
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
import yaml
from scipy.optimize import brentq

from . import bch, bitmapper, channel, fiber, scgldpc, scldpc

WORKERS_ENV = "SCCODING_WORKERS"

DEFAULTS = {
    "job": "threshold",
    "code": {
        "family": "scldpc",
        "blocks": [[[1, 2, 1, 2]], [[3, 2, 3, 2]]],
        "nu": 9, "t": 4, "s": 223, "w": 2, "C": 200,
    },
    "modes": ["terminated", "tailbiting"],
    "order_per_dim": 8,
    "W": 5,
    "l_max": 10,
    "T": [30],
    "target_ber": 1e-5,
    "bracket": [-2.0, 30.0],
    "tol_db": 0.01,
    "seed": 0,
    "optimizer": {"population": 30, "F": 0.7, "CR": 0.9, "generations": 150,
                  "optimize_prefix": 8, "offset": "auto", "patience": None, "max_buffer": None},
    "simulation": {"channel": "awgn", "snr_db": [], "spans": [], "lifting": 600,
                   "min_errors": 100, "max_frames": 50, "mapper": "baseline", "mapper_file": None,
                   "fiber": {}},
    "output": "results",
}

JOBS = ("threshold", "optimize", "gain-sweep", "capacity-gap", "simulate", "inspect")


def _merge(base, over):
    out = copy.deepcopy(base)
    for k, v in (over or {}).items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def _set_dotted(d, key, value):
    parts = key.split(".")
    for p in parts[:-1]:
        d = d.setdefault(p, {})
    d[parts[-1]] = value


@dataclass
class ExperimentConfig:
    data: dict

    @classmethod
    def from_dict(cls, d, overrides=()):
        data = _merge(DEFAULTS, d)
        for item in overrides:
            if "=" not in item:
                raise ValueError(f"override {item!r} is not key=value")
            k, v = item.split("=", 1)
            _set_dotted(data, k, yaml.safe_load(v))
        cfg = cls(data)
        cfg.validate()
        return cfg

    @classmethod
    def from_file(cls, path, overrides=()):
        with open(path) as fh:
            return cls.from_dict(yaml.safe_load(fh) or {}, overrides)

    def validate(self):
        d = self.data
        unknown = set(d) - set(DEFAULTS)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        if d["job"] not in JOBS:
            raise ValueError(f"unknown job {d['job']!r}")
        if d["code"]["family"] not in ("scldpc", "scgldpc"):
            raise ValueError("code.family must be scldpc or scgldpc")
        for m in d["modes"]:
            if m not in ("terminated", "tailbiting"):
                raise ValueError(f"unknown mode {m!r}")
        if isinstance(d["T"], int):
            d["T"] = [d["T"]]
        channel.build_constellation(d["order_per_dim"])
        if not 0 < d["target_ber"] < 0.5:
            raise ValueError("target_ber must lie in (0, 0.5)")

    def __getitem__(self, key):
        return self.data[key]

    @property
    def hash(self):
        blob = json.dumps(self.data, sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def echo(self, fh):
        yaml.safe_dump(self.data, fh, sort_keys=True)


@dataclass
class ResultRecord:
    job: str
    config_hash: str
    metric: str
    x: float
    y: float
    stderr: float | None = None
    wall_time: float = 0.0
    status: str = "ok"
    extra: dict = field(default_factory=dict)

    def to_json(self):
        return json.dumps(asdict(self), sort_keys=True, default=_jsonable)


def _jsonable(v):
    if isinstance(v, np.generic):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    raise TypeError(type(v))


class ResultWriter:
    """Append-only JSON-lines writer with a CSV projection per metric."""

    def __init__(self, out_dir):
        self.out_dir = out_dir
        os.makedirs(out_dir, exist_ok=True)
        self.path = os.path.join(out_dir, "records.jsonl")
        self.records = []

    def add(self, rec):
        self.records.append(rec)
        with open(self.path, "a") as fh:
            fh.write(rec.to_json() + "\n")

    def write_csv(self):
        by_metric = {}
        for r in self.records:
            by_metric.setdefault(r.metric, []).append(r)
        for metric, recs in by_metric.items():
            keys = sorted({k for r in recs for k in r.extra})
            with open(os.path.join(self.out_dir, f"{metric}.csv"), "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["x", "y", "stderr", "status"] + keys)
                for r in recs:
                    w.writerow([r.x, r.y, r.stderr, r.status] + [r.extra.get(k) for k in keys])


def worker_count():
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def _pmap(fn, items):
    n = worker_count()
    if n == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(n) as ex:
        return list(ex.map(fn, items))


# ---------------------------------------------------------------------------
# code / objective construction


def constellation(cfg):
    return channel.build_constellation(cfg["order_per_dim"])


def bch_code(cfg):
    cc = cfg["code"]
    return bch.construct(cc["nu"], cc["t"], cc["s"])


def base_matrix(cfg, T, mode):
    return scldpc.build_base_matrix([np.array(b) for b in cfg["code"]["blocks"]], T, mode)


def design_rate(cfg, T, mode):
    if cfg["code"]["family"] == "scldpc":
        return base_matrix(cfg, T, mode).design_rate
    return scgldpc.design_rate(bch_code(cfg), T, cfg["code"]["w"], mode)


def objective(cfg, T, mode):
    c = constellation(cfg)
    kw = dict(target_ber=cfg["target_ber"], bracket=tuple(cfg["bracket"]), tol_db=cfg["tol_db"])
    if cfg["code"]["family"] == "scldpc":
        return bitmapper.PexitObjective(base_matrix(cfg, T, mode), c, cfg["W"], cfg["l_max"], **kw)
    return bitmapper.HddObjective(bch_code(cfg), T, cfg["code"]["w"], mode, c, cfg["W"], cfg["l_max"], **kw)


def optimizer_config(cfg, T, mode):
    o = dict(cfg["optimizer"])
    family = cfg["code"]["family"]
    tie = len(cfg["code"]["blocks"][0][0]) if family == "scldpc" else 1
    if o["offset"] == "auto":
        m_s = len(cfg["code"]["blocks"]) - 1 if family == "scldpc" else cfg["code"]["w"] - 1
        P = o["optimize_prefix"] or T
        o["offset"] = bitmapper.prefix_offset(T, mode, cfg["W"], m_s, P)
    return bitmapper.OptimizerConfig(seed=cfg["seed"], tie_columns=tie, n_positions=T, **o)


# ---------------------------------------------------------------------------
# jobs


def run_threshold(cfg, writer):
    c = constellation(cfg)
    for T in cfg["T"]:
        for mode in cfg["modes"]:
            t0 = time.time()
            obj = objective(cfg, T, mode)
            A = bitmapper.baseline_mapper(c.m, obj.n_cols).entries
            th = float(obj(A)[0])
            writer.add(ResultRecord("threshold", cfg.hash, f"threshold_{mode}", T, th,
                                    wall_time=time.time() - t0, status="ok" if np.isfinite(th) else "bracket-failure",
                                    extra={"rate": design_rate(cfg, T, mode)}))


def run_optimize_one(cfg, T, mode, out_dir=None):
    c = constellation(cfg)
    res = bitmapper.optimize(objective(cfg, T, mode), c, optimizer_config(cfg, T, mode))
    if out_dir:
        stem = os.path.join(out_dir, f"mapper_T{T}_{mode}")
        with open(stem + ".txt", "w") as fh:
            bitmapper.save_mapper(fh, bitmapper.BitMapperMatrix(res.mapper.entries, cfg["code"]["family"], cfg["seed"]))
        with open(stem + "_trace.jsonl", "w") as fh:
            res.write_trace(fh)
    return res


def run_optimize(cfg, writer):
    for T in cfg["T"]:
        for mode in cfg["modes"]:
            t0 = time.time()
            res = run_optimize_one(cfg, T, mode, writer.out_dir)
            buf = bitmapper.buffer_requirement(res.mapper, res.mapper.m, T)
            writer.add(ResultRecord("optimize", cfg.hash, f"gain_{mode}", T, res.gain, wall_time=time.time() - t0,
                                    extra={"baseline": res.baseline_threshold, "optimized": res.threshold,
                                           "buffer": buf}))


def _gain_job(args):
    cfg, T, mode = args
    t0 = time.time()
    try:
        res = run_optimize_one(cfg, T, mode)
        return ResultRecord("gain-sweep", cfg.hash, f"gain_{mode}", T, res.gain, wall_time=time.time() - t0,
                            extra={"baseline": res.baseline_threshold, "optimized": res.threshold,
                                   "rate": design_rate(cfg, T, mode)})
    except Exception as exc:  # sweep continues
        return ResultRecord("gain-sweep", cfg.hash, f"gain_{mode}", T, float("nan"), wall_time=time.time() - t0,
                            status="failed", extra={"error": repr(exc)})


def run_gain_sweep(cfg, writer):
    jobs = [(cfg, T, mode) for T in cfg["T"] for mode in cfg["modes"]]
    for rec in _pmap(_gain_job, jobs):
        writer.add(rec)


def capacity_snr(cfg, rate):
    """SNR (dB) where the benchmark capacity per coded bit equals ``rate``."""
    c = constellation(cfg)
    if cfg["code"]["family"] == "scldpc":
        f = lambda s: channel.bicm_capacity(c, s) / c.m - rate
    else:
        f = lambda s: channel.bsc_capacity_avg(channel.bit_crossover_probs(c, s)) - rate
    return brentq(f, -20.0, 50.0, xtol=1e-6)


def run_capacity_gap(cfg, writer, optimize=False):
    c = constellation(cfg)
    for T in cfg["T"]:
        for mode in cfg["modes"]:
            t0 = time.time()
            obj = objective(cfg, T, mode)
            th = float(obj(bitmapper.baseline_mapper(c.m, obj.n_cols).entries)[0])
            rate = design_rate(cfg, T, mode)
            cap = capacity_snr(cfg, rate)
            extra = {"threshold": th, "capacity_snr": cap, "rate": rate}
            if optimize:
                res = run_optimize_one(cfg, T, mode)
                extra["optimized_gap"] = res.threshold - cap
            writer.add(ResultRecord("capacity-gap", cfg.hash, f"gap_{mode}", T, th - cap,
                                    wall_time=time.time() - t0, extra=extra))


# ---------------------------------------------------------------------------
# Monte Carlo


@dataclass
class LinkSimulator:
    """Finite-length BICM link: all-zero codeword, scrambler, bit mapper, channel, decoder."""

    cfg: ExperimentConfig
    T: int
    mode: str
    mapper: np.ndarray | None = None

    def __post_init__(self):
        cfg = self.cfg
        sim = cfg["simulation"]
        self.c = constellation(cfg)
        rng = np.random.default_rng(cfg["seed"])
        if cfg["code"]["family"] == "scldpc":
            base = base_matrix(cfg, self.T, self.mode)
            self.code = scldpc.lift(base, sim["lifting"], rng)
            self.decoder = scldpc.WindowDecoder(self.code, cfg["W"], cfg["l_max"])
            self.n = self.code.n
            per_col = sim["lifting"]
            n_cols = base.shape[1]
        else:
            B = bch_code(cfg)
            self.graph = scgldpc.sample_graph(B, cfg["code"]["C"], self.T, cfg["code"]["w"], self.mode, rng)
            self.decoder = scgldpc.HddDecoder(self.graph, cfg["l_max"], cfg["W"])
            self.n = self.graph.n_vn
            per_col = self.graph.vn_per_position
            n_cols = self.T
        A = self.mapper if self.mapper is not None else bitmapper.baseline_mapper(self.c.m, n_cols).entries
        counts = bitmapper.round_to_finite(A, per_col)
        self.mod_bit, self.symbol = bitmapper.mapper_assignment(counts)
        if self.n % self.c.m:
            raise ValueError(f"code length {self.n} is not a multiple of m = {self.c.m}")
        self.n_sym = self.n // self.c.m

    def frame(self, snr_db, rng, link=None):
        """Bit errors of one frame. ``link`` (FiberLinkParams) replaces the AWGN channel."""
        d = rng.integers(0, 2, self.n).astype(np.uint8)
        tx = channel.symmetrize(np.zeros(self.n, dtype=np.uint8), d)
        label = np.zeros((self.n_sym, self.c.m), dtype=np.uint8)
        label[self.symbol, self.mod_bit] = tx
        sym = self.c.modulate(label)
        if link is None:
            rx = channel.add_awgn(sym, snr_db, rng)
        else:
            out = fiber.equalize_and_sample(fiber.propagate(sym.T, link, rng), link)
            rx = fiber.carrier_sync(out, sym.T).T
            snr_db = channel.lin2db(fiber.measured_snr(rx.T, sym.T))
        if self.cfg["code"]["family"] == "scldpc":
            L = channel.llr(self.c, rx, snr_db)[self.symbol, self.mod_bit]
            dec = self.decoder.decode(channel.desymmetrize(L, d))
        else:
            hard = channel.hard_detect(self.c, rx)[self.symbol, self.mod_bit]
            dec, _ = self.decoder.decode(channel.desymmetrize(hard, d))
        return int(dec.sum())

    def ber_point(self, snr_db, rng, min_errors, max_frames, link=None):
        errors = frames = 0
        while frames < max_frames and errors < min_errors:
            errors += self.frame(snr_db, rng, link)
            frames += 1
        bits = frames * self.n
        ber = errors / bits
        return ber, errors, bits


def ber_crossing(snrs, bers, target):
    """SNR where a decreasing BER curve crosses ``target`` (log-linear interpolation), nan if none."""
    snrs, bers = np.asarray(snrs, float), np.asarray(bers, float)
    for i in range(len(snrs) - 1):
        if bers[i] >= target > bers[i + 1]:
            lo = np.log10(max(bers[i], 1e-300))
            hi = np.log10(max(bers[i + 1], 1e-300))
            return float(snrs[i] + (np.log10(target) - lo) / (hi - lo) * (snrs[i + 1] - snrs[i]))
    return float("nan")


def load_mapper_for(cfg, T, mode):
    sim = cfg["simulation"]
    if sim["mapper"] == "baseline":
        return None
    if sim["mapper"] == "file":
        with open(sim["mapper_file"]) as fh:
            return bitmapper.load_mapper(fh).entries
    if sim["mapper"] == "optimized":
        return run_optimize_one(cfg, T, mode).mapper.entries
    raise ValueError(f"unknown simulation.mapper {sim['mapper']!r}")


def run_simulation(cfg, writer):
    sim = cfg["simulation"]
    for T in cfg["T"]:
        for mode in cfg["modes"]:
            sim_obj = LinkSimulator(cfg, T, mode, load_mapper_for(cfg, T, mode))
            rng = np.random.default_rng(cfg["seed"] + 1)
            if sim["channel"] == "awgn":
                grid = [("snr_db", s, None) for s in sim["snr_db"]]
            elif sim["channel"] == "fiber":
                base = fiber.FiberLinkParams(**sim["fiber"])
                grid = [("spans", n, fiber.with_spans(base, n)) for n in sim["spans"]]
            else:
                raise ValueError(f"unknown channel {sim['channel']!r}")
            for xname, x, link in grid:
                t0 = time.time()
                ber, errors, bits = sim_obj.ber_point(x if link is None else None, rng,
                                                      sim["min_errors"], sim["max_frames"], link)
                status = "ok" if errors else "upper-bound"
                y = ber if errors else 3.0 / bits  # rule of three when no errors are seen
                writer.add(ResultRecord("simulate", cfg.hash, f"ber_{mode}", x, y,
                                        stderr=float(np.sqrt(ber * (1 - ber) / bits)), wall_time=time.time() - t0,
                                        status=status, extra={"errors": errors, "bits": bits, "x_name": xname,
                                                              "mapper": sim["mapper"]}))


def inspect(cfg):
    """Rates and graph audits as a dict."""
    out = {"family": cfg["code"]["family"], "m": constellation(cfg).m, "entries": []}
    for T in cfg["T"]:
        for mode in cfg["modes"]:
            e = {"T": T, "mode": mode, "design_rate": design_rate(cfg, T, mode)}
            if cfg["code"]["family"] == "scldpc":
                b = base_matrix(cfg, T, mode)
                e.update(base_shape=list(b.shape), check_degrees=sorted(set(b.check_degrees.tolist())),
                         variable_degrees=sorted(set(b.variable_degrees.tolist())))
            else:
                B = bch_code(cfg)
                e.update(component=[B.n, B.k], component_rate=B.rate)
            out["entries"].append(e)
    return out


RUNNERS = {
    "threshold": run_threshold,
    "optimize": run_optimize,
    "gain-sweep": run_gain_sweep,
    "capacity-gap": run_capacity_gap,
    "simulate": run_simulation,
}
