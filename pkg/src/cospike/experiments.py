"""Seeded experiment protocols: prior training, M-sweeps, classification.

Every run is a pure function of its configuration.  Child seeds are derived
from the master seed plus task indices through ``numpy.random.SeedSequence``,
tasks are dispatched in a fixed order (optionally across processes), and
aggregation is index-ordered, so a rerun with the same config produces
byte-identical output files.  Output CSVs start with a comment line carrying
the master seed and the config hash; JSON manifests echo the full config.
"""

from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .fracdiff import AnalysisDictionary, build_mfod, build_random_tight_frame
from .metrics import (
    ReconstructionReport,
    classification_accuracy,
    good_probability,
    kmeans_classify,
    pca_features,
    prd,
)
from .prior import (
    OrderVarianceModel,
    build_weights,
    estimate_order_sigma,
    fit_variance_model,
    save_model,
)
from .sensing import bernoulli_matrix
from .solver import SolverConfig, solve_al1_batch, solve_walm_batch
from .spikes import Dataset, load_dataset, synthesize_dataset

METHOD_TOKENS = ("walm", "al1", "al1-miod", "al1-iod", "al1-rtf")
_MIOD_ORDERS = (3.0, 4.0, 5.0)
_IOD_ORDERS = (4.0,)

# seed-derivation stream tags
_TAG_TRAIN_DATA = 0
_TAG_MATRIX = 1
_TAG_CLASSIFY = 2
_TAG_MEASURE_NOISE = 3
_TAG_RTF = 4


def derive_seed(master_seed: int, *indices: int) -> int:
    """Deterministic child seed for a task addressed by its indices."""
    ss = np.random.SeedSequence((master_seed, *indices))
    return int(ss.generate_state(1)[0])


@dataclass(frozen=True)
class ExperimentConfig:
    """Flat experiment description; every field maps to one config-file key."""

    dataset_path: str | None = None
    dataset_format: str = "csv"
    units: int = 3
    frames_per_unit: int = 70
    frame_length: int = 128
    noise_sigma: float = 0.0
    jitter: int = 2
    scale_jitter: float = 0.1
    orders: tuple[float, ...] = (3.5, 4.0, 4.5)
    measurements: tuple[int, ...] = (16, 24, 32, 40, 48, 56, 64, 72, 80)
    trials: int = 20
    master_seed: int = 0
    training_count: int = 100
    measurement_noise: float = 0.0
    methods: tuple[str, ...] = ("walm", "al1")
    lam: float | None = None
    penalty: float = 1.0
    abs_tol: float = 1e-7
    rel_tol: float = 1e-5
    max_iter: int = 5000
    classify_m: int = 16
    num_features: int = 10
    kmeans_restarts: int = 10
    jobs: int = 1
    output_dir: str = "results"

    def validate(self) -> None:
        n = self.frame_length
        if self.dataset_path is None and (self.units < 1 or self.frames_per_unit < 1):
            raise ConfigError("synthesis needs units >= 1 and frames_per_unit >= 1")
        if self.dataset_format not in ("csv", "raw-binary"):
            raise ConfigError(f"unknown dataset_format {self.dataset_format!r}")
        if n < 8:
            raise ConfigError(f"frame_length must be at least 8, got {n}")
        if not self.orders:
            raise ConfigError("orders must be nonempty")
        if not self.measurements:
            raise ConfigError("measurements must be nonempty")
        for m in (*self.measurements, self.classify_m):
            if m < 1:
                raise ConfigError(f"measurement count {m} must be at least 1")
        if self.trials < 1:
            raise ConfigError(f"trials must be at least 1, got {self.trials}")
        if self.training_count < 1:
            raise ConfigError("training_count must be at least 1")
        if not self.methods:
            raise ConfigError("methods must be nonempty")
        for token in self.methods:
            if token not in METHOD_TOKENS:
                raise ConfigError(
                    f"unknown method {token!r}; expected one of {METHOD_TOKENS}"
                )
        if len(set(self.methods)) != len(self.methods):
            raise ConfigError("duplicate method tokens")
        if self.num_features < 1:
            raise ConfigError("num_features must be at least 1")
        if self.kmeans_restarts < 1 or self.jobs < 1:
            raise ConfigError("kmeans_restarts and jobs must be at least 1")
        if self.noise_sigma < 0 or self.measurement_noise < 0:
            raise ConfigError("noise levels must be nonnegative")
        if self.abs_tol <= 0 or self.rel_tol <= 0:
            raise ConfigError("solver tolerances must be positive")
        if self.max_iter < 1:
            raise ConfigError("max_iter must be at least 1")
        if self.penalty <= 0:
            raise ConfigError("penalty must be positive")
        if self.lam is not None and self.lam <= 0:
            raise ConfigError("lam must be positive when given")

    def solver_config(self) -> SolverConfig:
        return SolverConfig(lam=self.lam, penalty=self.penalty,
                            abs_tol=self.abs_tol, rel_tol=self.rel_tol,
                            max_iter=self.max_iter)

    def to_flat(self) -> str:
        """Canonical ``key = value`` text; also the input to the config hash."""
        lines = []
        for f in fields(self):
            lines.append(f"{f.name} = {_format_value(getattr(self, f.name))}")
        return "\n".join(lines) + "\n"

    def config_hash(self) -> str:
        """Hash of the semantic fields only.

        ``jobs`` and ``output_dir`` control where and how fast results are
        produced, not what they are, so they stay out of the hash; a parallel
        rerun then stamps files identically to a serial one.
        """
        lines = [f"{f.name} = {_format_value(getattr(self, f.name))}"
                 for f in fields(self) if f.name not in ("jobs", "output_dir")]
        return hashlib.sha256(("\n".join(lines) + "\n").encode()).hexdigest()


def _format_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, tuple):
        return ",".join(_format_value(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse_optional_str(s):
    return s if s else None


def _parse_optional_float(s):
    return float(s) if s else None


def _parse_float_tuple(s):
    return tuple(float(v) for v in s.split(",") if v.strip())


def _parse_int_tuple(s):
    return tuple(int(v) for v in s.split(",") if v.strip())


def _parse_str_tuple(s):
    return tuple(v.strip() for v in s.split(",") if v.strip())


_FIELD_PARSERS = {
    "dataset_path": _parse_optional_str,
    "dataset_format": str,
    "units": int,
    "frames_per_unit": int,
    "frame_length": int,
    "noise_sigma": float,
    "jitter": int,
    "scale_jitter": float,
    "orders": _parse_float_tuple,
    "measurements": _parse_int_tuple,
    "trials": int,
    "master_seed": int,
    "training_count": int,
    "measurement_noise": float,
    "methods": _parse_str_tuple,
    "lam": _parse_optional_float,
    "penalty": float,
    "abs_tol": float,
    "rel_tol": float,
    "max_iter": int,
    "classify_m": int,
    "num_features": int,
    "kmeans_restarts": int,
    "jobs": int,
    "output_dir": str,
}


def parse_flat_config(text: str, base: ExperimentConfig | None = None
                      ) -> ExperimentConfig:
    """Parse ``key = value`` lines (blank lines and # comments ignored)."""
    config = base or ExperimentConfig()
    updates = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or key not in _FIELD_PARSERS:
            raise ConfigError(f"config line {lineno}: unknown key {key!r}")
        try:
            updates[key] = _FIELD_PARSERS[key](value.strip())
        except ValueError as exc:
            raise ConfigError(f"config line {lineno} ({key}): {exc}")
    return replace(config, **updates)


def apply_overrides(config: ExperimentConfig, overrides: dict
                    ) -> ExperimentConfig:
    """Apply already-typed or string-valued field overrides."""
    updates = {}
    for key, value in overrides.items():
        if key not in _FIELD_PARSERS:
            raise ConfigError(f"unknown config key {key!r}")
        try:
            updates[key] = (_FIELD_PARSERS[key](value)
                            if isinstance(value, str) else value)
        except ValueError as exc:
            raise ConfigError(f"override {key}: {exc}")
    return replace(config, **updates)


# ---------------------------------------------------------------------------
# dataset and prior resolution


def _load_eval_dataset(config: ExperimentConfig) -> Dataset:
    if config.dataset_path is not None:
        return load_dataset(config.dataset_path, fmt=config.dataset_format)
    return synthesize_dataset(
        units=config.units, frames_per_unit=config.frames_per_unit,
        n=config.frame_length, noise_sigma=config.noise_sigma,
        seed=config.master_seed, jitter=config.jitter,
        scale_jitter=config.scale_jitter)


def _load_training_frames(config: ExperimentConfig) -> np.ndarray:
    """Training split for the variance prior.

    Synthetic runs draw a dedicated dataset from a derived seed so training
    and evaluation frames are disjoint; file datasets contribute their first
    ``training_count`` frames (scale estimation is unsupervised, so the
    overlap with evaluation is harmless).
    """
    if config.dataset_path is not None:
        ds = load_dataset(config.dataset_path, fmt=config.dataset_format)
        if len(ds) < config.training_count:
            raise ConfigError(
                f"dataset has {len(ds)} frames < training_count={config.training_count}"
            )
        return ds.split(config.training_count)[0].to_matrix()
    per_unit = math.ceil(config.training_count / config.units)
    ds = synthesize_dataset(
        units=config.units, frames_per_unit=per_unit, n=config.frame_length,
        noise_sigma=config.noise_sigma,
        seed=derive_seed(config.master_seed, _TAG_TRAIN_DATA),
        jitter=config.jitter, scale_jitter=config.scale_jitter)
    return ds.to_matrix()[: config.training_count]


def fit_prior(config: ExperimentConfig,
              training_frames: np.ndarray | None = None) -> OrderVarianceModel:
    """Estimate per-order scales on training frames and fit the variance law."""
    if training_frames is None:
        training_frames = _load_training_frames(config)
    points = [(f, estimate_order_sigma(training_frames, f)) for f in config.orders]
    return fit_variance_model(points)


def _method_dictionary(token: str, config: ExperimentConfig,
                       n: int) -> AnalysisDictionary:
    if token in ("walm", "al1"):
        return build_mfod(config.orders, n)
    if token == "al1-miod":
        return build_mfod(_MIOD_ORDERS, n)
    if token == "al1-iod":
        return build_mfod(_IOD_ORDERS, n)
    if token == "al1-rtf":
        rows = len(config.orders) * n
        return build_random_tight_frame(
            rows, n, derive_seed(config.master_seed, _TAG_RTF))
    raise ConfigError(f"unknown method {token!r}")


def _method_specs(config: ExperimentConfig, n: int):
    """(token, dictionary, weights) for each enabled method; trains WALM.

    ``n`` is the frame length of the evaluation dataset, which wins over the
    config value when a dataset file is loaded.
    """
    model = None
    specs = []
    for token in config.methods:
        dictionary = _method_dictionary(token, config, n)
        weights = None
        if token == "walm":
            model = model or fit_prior(config)
            weights = build_weights(model, config.orders, n)
        specs.append((token, dictionary, weights))
    return specs, model


# ---------------------------------------------------------------------------
# shared worker plumbing (initializer keeps per-task pickling light)

_WORKER_STATE: dict | None = None


def _init_worker(state: dict) -> None:
    global _WORKER_STATE
    _WORKER_STATE = state


def _run_tasks(task_fn, state: dict, tasks, jobs: int) -> list:
    if jobs <= 1:
        _init_worker(state)
        return [task_fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs, initializer=_init_worker,
                             initargs=(state,)) as pool:
        return list(pool.map(task_fn, tasks))


def _reconstruct_batch(token, Y, phi, dictionary, weights, solver_config):
    if token == "walm":
        return solve_walm_batch(Y, phi, dictionary, weights, solver_config)
    return solve_al1_batch(Y, phi, dictionary, solver_config)


def _sweep_task(task):
    mi, ti, m = task
    state = _WORKER_STATE
    frames = state["frames"]
    master = state["master_seed"]
    phi = bernoulli_matrix(m, frames.shape[1],
                           derive_seed(master, _TAG_MATRIX, mi, ti))
    Y = frames @ phi.entries.T
    if state["measurement_noise"] > 0:
        rng = np.random.default_rng(
            derive_seed(master, _TAG_MEASURE_NOISE, mi, ti))
        Y = Y + rng.normal(0.0, state["measurement_noise"], size=Y.shape)
    out = {}
    for token, dictionary, weights in state["specs"]:
        try:
            results = _reconstruct_batch(token, Y, phi, dictionary, weights,
                                         state["solver_config"])
        except Exception as exc:
            raise RuntimeError(
                f"{token} reconstruction failed at M={m}, trial {ti}: {exc}"
            ) from exc
        vals = np.empty(len(results))
        for j, res in enumerate(results):
            try:
                vals[j] = prd(frames[j], res.x_hat)
            except Exception as exc:
                raise RuntimeError(
                    f"PRD failed at M={m}, trial {ti}, spike {j}: {exc}"
                ) from exc
        out[token] = vals
    return mi, ti, out


def _stamp_line(config: ExperimentConfig) -> str:
    return f"# master_seed={config.master_seed} config_hash={config.config_hash()}"


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _model_record(model: OrderVarianceModel | None):
    if model is None:
        return None
    return {
        "a": model.a, "b": model.b, "c": model.c,
        "residual": model.residual,
        "per_order_sigma": [[f, s] for f, s in model.per_order_sigma],
    }


# ---------------------------------------------------------------------------
# protocols


def run_training(config: ExperimentConfig) -> dict:
    """Fit the order-variance prior and write the model plus a scatter CSV."""
    config.validate()
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    frames = _load_training_frames(config)
    model = fit_prior(config, frames)

    stamp = _stamp_line(config)
    model_path = out_dir / "variance_model.txt"
    save_model(model, model_path)
    model_path.write_text(stamp + "\n" + model_path.read_text())

    scatter_path = out_dir / "training_scatter.csv"
    lines = [stamp, "order,log2_sigma_sq,fitted"]
    for f, sigma in model.per_order_sigma:
        fitted = -2.0 * model.a * f * f - 2.0 * model.b * f + math.log2(model.c)
        lines.append(f"{_format_value(f)},{_format_value(2.0 * math.log2(sigma))},"
                     f"{_format_value(fitted)}")
    scatter_path.write_text("\n".join(lines) + "\n")
    return {"model": model, "model_path": model_path, "scatter_path": scatter_path}


def run_sweep(config: ExperimentConfig) -> dict:
    """Measurement sweep over M and trials; one CSV per method plus manifest.

    Each (M, trial) task draws a fresh Bernoulli matrix from a derived seed,
    measures every spike, reconstructs with each enabled method, and reports
    per-spike PRDs.  Statistics pool all (trial, spike) pairs; the manifest
    additionally records the per-trial good probabilities and their mean.
    """
    config.validate()
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    dataset = _load_eval_dataset(config)
    frames = dataset.to_matrix()
    for m in config.measurements:
        if m > frames.shape[1]:
            raise ConfigError(
                f"measurement count {m} exceeds frame length {frames.shape[1]}")
    specs, model = _method_specs(config, frames.shape[1])

    state = {
        "frames": frames,
        "specs": specs,
        "solver_config": config.solver_config(),
        "master_seed": config.master_seed,
        "measurement_noise": config.measurement_noise,
    }
    tasks = [(mi, ti, m)
             for mi, m in enumerate(config.measurements)
             for ti in range(config.trials)]
    results = _run_tasks(_sweep_task, state, tasks, config.jobs)

    # index results, then aggregate in fixed (method, M) order
    by_key = {(mi, ti): out for mi, ti, out in results}
    reports: dict[str, dict[int, ReconstructionReport]] = {}
    trial_goods: dict[str, dict[int, list[float]]] = {}
    for token, _, _ in specs:
        reports[token] = {}
        trial_goods[token] = {}
        for mi, m in enumerate(config.measurements):
            per_trial = [by_key[(mi, ti)][token] for ti in range(config.trials)]
            pooled = np.concatenate(per_trial)
            reports[token][m] = ReconstructionReport.from_prds(pooled)
            trial_goods[token][m] = [good_probability(v) for v in per_trial]

    stamp = _stamp_line(config)
    csv_paths = {}
    for token, _, _ in specs:
        path = out_dir / f"sweep_{token}.csv"
        lines = [stamp, "M," + ",".join(ReconstructionReport.CSV_FIELDS)]
        for m in config.measurements:
            values = reports[token][m].csv_values()
            lines.append(f"{m}," + ",".join(_format_value(v) for v in values))
        path.write_text("\n".join(lines) + "\n")
        csv_paths[token] = path

    manifest = {
        "protocol": "sweep",
        "config": {f.name: _format_value(getattr(config, f.name))
                   for f in fields(config)},
        "config_hash": config.config_hash(),
        "master_seed": config.master_seed,
        "dataset": {
            "source": config.dataset_path or "synthetic",
            "name": dataset.name,
            "frames": len(dataset),
            "frame_length": dataset.frame_length,
        },
        "variance_model": _model_record(model),
        "matrix_seeds": {
            str(m): [derive_seed(config.master_seed, _TAG_MATRIX, mi, ti)
                     for ti in range(config.trials)]
            for mi, m in enumerate(config.measurements)
        },
        "methods": {
            token: {
                str(m): {
                    "mean_prd": reports[token][m].mean_prd,
                    "good_probability": reports[token][m].good_probability,
                    "good_probability_per_trial": trial_goods[token][m],
                    "good_probability_trial_mean":
                        float(np.mean(trial_goods[token][m])),
                    "q25": reports[token][m].q25,
                    "median": reports[token][m].median,
                    "q75": reports[token][m].q75,
                    "min_prd": reports[token][m].min_prd,
                    "max_prd": reports[token][m].max_prd,
                    "count": reports[token][m].count,
                }
                for m in config.measurements
            }
            for token, _, _ in specs
        },
        "files": {token: path.name for token, path in csv_paths.items()},
    }
    manifest_path = out_dir / "sweep_manifest.json"
    _write_json(manifest_path, manifest)
    return {"reports": reports, "csv_paths": csv_paths,
            "manifest_path": manifest_path, "model": model}


def _classify_frames(frames: np.ndarray, truth: np.ndarray, k: int,
                     config: ExperimentConfig, kmeans_seed: int):
    features = pca_features(frames, config.num_features)
    labels = kmeans_classify(features, k, restarts=config.kmeans_restarts,
                             seed=kmeans_seed)
    return features, labels, classification_accuracy(labels, truth)


def run_classification(config: ExperimentConfig) -> dict:
    """Cluster reconstructed spikes at ``classify_m`` and score against truth.

    Writes one scatter CSV per method (first three features, cluster label,
    true unit) plus the same for the uncompressed originals, and a JSON
    report with permutation-matched accuracies.
    """
    config.validate()
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    dataset = _load_eval_dataset(config)
    if not dataset.labeled:
        raise ConfigError("classification needs a labeled dataset")
    frames = dataset.to_matrix()
    if config.classify_m > frames.shape[1]:
        raise ConfigError(
            f"classify_m {config.classify_m} exceeds frame length {frames.shape[1]}")
    if config.num_features > frames.shape[1]:
        raise ConfigError(
            f"num_features {config.num_features} exceeds frame length {frames.shape[1]}")
    truth = dataset.labels()
    k = int(np.unique(truth).size)
    specs, model = _method_specs(config, frames.shape[1])

    phi = bernoulli_matrix(config.classify_m, frames.shape[1],
                           derive_seed(config.master_seed, _TAG_CLASSIFY, 0))
    kmeans_seed = derive_seed(config.master_seed, _TAG_CLASSIFY, 1)
    Y = frames @ phi.entries.T
    if config.measurement_noise > 0:
        rng = np.random.default_rng(
            derive_seed(config.master_seed, _TAG_CLASSIFY, 2))
        Y = Y + rng.normal(0.0, config.measurement_noise, size=Y.shape)

    stamp = _stamp_line(config)

    def write_scatter(token: str, features, labels):
        path = out_dir / f"classify_{token}.csv"
        lines = [stamp, "f1,f2,f3,cluster,truth"]
        for j in range(features.shape[0]):
            f3 = [_format_value(float(v)) for v in features[j, :3]]
            lines.append(",".join(f3) + f",{int(labels[j])},{int(truth[j])}")
        path.write_text("\n".join(lines) + "\n")
        return path

    entries = {}
    paths = {}
    features, labels, report = _classify_frames(frames, truth, k, config,
                                                kmeans_seed)
    entries["original"] = report
    paths["original"] = write_scatter("original", features, labels)

    for token, dictionary, weights in specs:
        results = _reconstruct_batch(token, Y, phi, dictionary, weights,
                                     config.solver_config())
        recon = np.vstack([res.x_hat for res in results])
        features, labels, report = _classify_frames(recon, truth, k, config,
                                                    kmeans_seed)
        entries[token] = report
        paths[token] = write_scatter(token, features, labels)

    payload = {
        "protocol": "classification",
        "config": {f.name: _format_value(getattr(config, f.name))
                   for f in fields(config)},
        "config_hash": config.config_hash(),
        "master_seed": config.master_seed,
        "classify_m": config.classify_m,
        "clusters": k,
        "matrix_seed": derive_seed(config.master_seed, _TAG_CLASSIFY, 0),
        "kmeans_seed": kmeans_seed,
        "variance_model": _model_record(model),
        "methods": {
            token: {
                "accuracy": report.accuracy,
                "confusion": report.confusion.tolist(),
                "scatter_file": paths[token].name,
            }
            for token, report in entries.items()
        },
    }
    report_path = out_dir / "classification_report.json"
    _write_json(report_path, payload)
    return {"reports": entries, "scatter_paths": paths,
            "report_path": report_path, "model": model}


def run_co_sparsity(config: ExperimentConfig, order_grid=None) -> dict:
    """Co-sparsity of single-order analysis coefficients across a dataset.

    Writes a curve CSV (order vs. co-sparsity statistics over frames) and a
    histogram CSV of exact counts for the configured dictionary orders.
    """
    from .fracdiff import difference_matrix
    from .metrics import DEFAULT_CO_SPARSITY_TOL, co_sparsity

    config.validate()
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    dataset = _load_eval_dataset(config)
    frames = dataset.to_matrix()
    n = frames.shape[1]
    if order_grid is None:
        order_grid = [round(0.25 * i, 2) for i in range(2, 25)]  # 0.5 .. 6.0

    stamp = _stamp_line(config)

    def counts_for(f: float) -> np.ndarray:
        D = difference_matrix(float(f), n)
        Z = frames @ D.T
        return np.array([co_sparsity(z, DEFAULT_CO_SPARSITY_TOL) for z in Z])

    curve_path = out_dir / "co_sparsity_curve.csv"
    lines = [stamp, "order,mean,std,min,max"]
    for f in order_grid:
        c = counts_for(f)
        lines.append(f"{_format_value(float(f))},{_format_value(float(c.mean()))},"
                     f"{_format_value(float(c.std()))},{int(c.min())},{int(c.max())}")
    curve_path.write_text("\n".join(lines) + "\n")

    hist_path = out_dir / "co_sparsity_hist.csv"
    lines = [stamp, "order,co_sparsity,count"]
    for f in config.orders:
        c = counts_for(f)
        values, freq = np.unique(c, return_counts=True)
        for v, q in zip(values, freq):
            lines.append(f"{_format_value(float(f))},{int(v)},{int(q)}")
    hist_path.write_text("\n".join(lines) + "\n")
    return {"curve_path": curve_path, "hist_path": hist_path}
