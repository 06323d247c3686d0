"""Seeded Monte Carlo sweeps of TOA RMSE against SNR, with CRLB reference.

Trial ``t`` at SNR index ``i`` draws band ``b`` noise from seed words
``(seed, i, t, b)``, so results do not depend on scheduling or thread count.
``MULTIRES_TOA_THREADS`` caps the worker threads (unset: 1, ``0``: one per CPU).
"""

import csv
import hashlib
import io
import json
import os
import subprocess
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from ._validation import check_bands, check_positive_int, check_positive_real
from .channel import (
    SCENARIO_VARIANTS,
    TWO_PI,
    BandConfig,
    MultipathChannel,
    make_benchmark_scenario,
)
from .crlb import CrlbInput, crlb_delays
from .estimator import HankelParams, estimate_multiband, single_band_esprit
from .exceptions import ConfigError, MultiresToaError, ValidationError
from .frontend import acquire_multiband

ESTIMATOR_MODES = ("single-band", "multiband-fine", "multiband-weighted")
CSV_HEADER = ("snr_db", "rmse_toa_s", "crlb_rmse_s", "failures", "scenario")
DEFAULT_DURATION_S = 640e-9
DEFAULT_SNR_GRID_DB = tuple(float(x) for x in range(0, 41, 5))
DEFAULT_TRIALS = 500
DEFAULT_SEED = 1
PRESETS = ("fig2a", "fig2b", "fig2c")
THREADS_ENV = "MULTIRES_TOA_THREADS"

_SPEC_KEYS = ("name", "variant", "scenario", "bands", "snr_grid_db", "trials", "seed",
              "estimator_mode", "hankel", "n_samples", "duration_s")


def _scenario_channel(scenario):
    if isinstance(scenario, str):
        if scenario not in SCENARIO_VARIANTS:
            raise ValidationError(
                f"unknown scenario {scenario!r}; expected one of {SCENARIO_VARIANTS} "
                "or a channel document"
            )
        return make_benchmark_scenario(scenario)
    if isinstance(scenario, MultipathChannel):
        return scenario
    if isinstance(scenario, dict):
        return MultipathChannel.from_dict(scenario)
    raise ValidationError(f"scenario must be a tag or a channel document, got {scenario!r}")


@dataclass(frozen=True)
class ExperimentSpec:
    """One RMSE-versus-SNR sweep.

    ``scenario`` is a scenario tag (``"S1"`` .. ``"S5"``, ``"default"``) or a
    channel document ``{"paths": [...]}``. ``n_samples`` defaults to
    ``round(bandwidth_hz * duration_s)`` and ``model_order`` to the number of
    paths in the scenario.
    """

    bands: tuple
    scenario: object = "default"
    snr_grid_db: tuple = DEFAULT_SNR_GRID_DB
    trials: int = DEFAULT_TRIALS
    seed: int = DEFAULT_SEED
    estimator_mode: str = "multiband-fine"
    model_order: int = None
    hankel_rows: int = None
    n_samples: int = None
    duration_s: float = DEFAULT_DURATION_S
    name: str = "custom"
    variant: str = "default"
    channel: MultipathChannel = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "bands", check_bands(self.bands))
        if isinstance(self.scenario, MultipathChannel):
            object.__setattr__(self, "scenario", self.scenario.to_dict())
        object.__setattr__(self, "channel", _scenario_channel(self.scenario))
        check_positive_int(self.trials, "trials")
        seed_ok = isinstance(self.seed, (int, np.integer)) and not isinstance(self.seed, bool)
        if not seed_ok or self.seed < 0:
            raise ValidationError(f"seed must be a non-negative integer, got {self.seed!r}")
        grid = tuple(float(x) for x in self.snr_grid_db)
        if not grid:
            raise ValidationError("snr_grid_db must not be empty")
        if any(np.isnan(x) or np.isneginf(x) for x in grid):
            raise ValidationError("snr_grid_db entries must be numbers or +inf")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValidationError(f"snr_grid_db must be strictly increasing, got {list(grid)}")
        object.__setattr__(self, "snr_grid_db", grid)
        if self.estimator_mode not in ESTIMATOR_MODES:
            raise ValidationError(
                f"unknown estimator_mode {self.estimator_mode!r}; expected one of {ESTIMATOR_MODES}"
            )
        if self.estimator_mode != "single-band" and len(self.bands) < 2:
            raise ValidationError(f"{self.estimator_mode} needs at least two bands")
        check_positive_real(self.duration_s, "duration_s")
        if self.channel.delays.max() >= self.duration_s:
            raise ValidationError(
                f"largest delay {self.channel.delays.max():.6g} s is not below "
                f"duration_s = {self.duration_s:.6g} s"
            )
        if self.n_samples is not None:
            check_positive_int(self.n_samples, "n_samples")
        self.hankel_params()
        for label in (self.name, self.variant):
            if not isinstance(label, str) or not label or any(c in label for c in "/\\"):
                raise ValidationError(
                    f"name and variant must be non-empty path-safe strings, got {label!r}")

    @property
    def resolved_n_samples(self):
        if self.n_samples is not None:
            return int(self.n_samples)
        return int(round(self.bands[0].bandwidth_hz * self.duration_s))

    @property
    def resolved_model_order(self):
        return self.channel.n_paths if self.model_order is None else int(self.model_order)

    @property
    def acquisition_bands(self):
        return self.bands[:1] if self.estimator_mode == "single-band" else self.bands

    @property
    def tag(self):
        return f"{self.name}_{self.variant}"

    def hankel_params(self):
        return HankelParams.for_length(self.resolved_n_samples, self.resolved_model_order,
                                       self.hankel_rows)

    def to_dict(self):
        return {
            "name": self.name,
            "variant": self.variant,
            "scenario": self.scenario,
            "bands": [b.to_dict() for b in self.bands],
            "snr_grid_db": list(self.snr_grid_db),
            "trials": self.trials,
            "seed": self.seed,
            "estimator_mode": self.estimator_mode,
            "hankel": {"model_order": self.model_order, "rows": self.hankel_rows},
            "n_samples": self.n_samples,
            "duration_s": self.duration_s,
        }

    @classmethod
    def from_dict(cls, doc):
        if not isinstance(doc, dict):
            raise ConfigError(f"experiment document must be an object, got {type(doc).__name__}")
        unknown = sorted(set(doc) - set(_SPEC_KEYS))
        if unknown:
            raise ConfigError(f"unknown experiment keys {unknown}; allowed: {list(_SPEC_KEYS)}")
        if "bands" not in doc:
            raise ConfigError("experiment document needs 'bands'")
        hankel = doc.get("hankel") or {}
        if not isinstance(hankel, dict) or set(hankel) - {"model_order", "rows"}:
            raise ConfigError("'hankel' must be an object with keys 'model_order' and 'rows'")
        try:
            bands = tuple(BandConfig.from_dict(b) for b in doc["bands"])
        except TypeError as exc:
            raise ConfigError(f"'bands' must be a list of band objects: {exc}") from None
        kwargs = {k: doc[k] for k in ("name", "variant", "scenario", "snr_grid_db", "trials",
                                      "seed", "estimator_mode", "n_samples", "duration_s")
                  if k in doc}
        return cls(bands=bands, model_order=hankel.get("model_order"),
                   hankel_rows=hankel.get("rows"), **kwargs)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from None
        return cls.from_dict(doc)

    def sha256(self):
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()

    def replace(self, **changes):
        doc = self.to_dict()
        doc.update(changes)
        return ExperimentSpec.from_dict(doc)


@dataclass(frozen=True)
class ResultRow:
    snr_db: float
    rmse_toa_s: float
    crlb_rmse_s: float
    failures: int
    scenario: str


@dataclass(frozen=True)
class TrialRecords:
    """Per-trial outcomes at one SNR point; ``nan`` where a trial failed outright."""

    toa: np.ndarray
    coarse_toa: np.ndarray
    cycles: np.ndarray
    failed: np.ndarray
    errors: tuple


@dataclass
class ResultTable:
    rows: list
    metadata: dict
    records: list = field(default_factory=list, repr=False)
    per_path_rmse: np.ndarray = None

    def csv_text(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for r in self.rows:
            writer.writerow([_fmt(r.snr_db), _fmt(r.rmse_toa_s), _fmt(r.crlb_rmse_s),
                             r.failures, r.scenario])
        return buf.getvalue()

    def write(self, out_dir, stem):
        """Write ``<stem>.csv`` and the ``<stem>.json`` metadata sidecar."""
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        csv_path = out_dir / f"{stem}.csv"
        csv_path.write_text(self.csv_text())
        meta_path = out_dir / f"{stem}.json"
        meta_path.write_text(json.dumps(self.metadata, indent=2, sort_keys=True) + "\n")
        return csv_path, meta_path

    @staticmethod
    def read_csv(path):
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = tuple(next(reader))
            if header != CSV_HEADER:
                raise ConfigError(f"unexpected CSV header {header}")
            return [ResultRow(float(a), float(b), float(c), int(d), e) for a, b, c, d, e in reader]


def _fmt(x):
    # repr round-trips float64 exactly
    x = float(x)
    if np.isnan(x):
        return "nan"
    return repr(x) if np.isfinite(x) else ("inf" if x > 0 else "-inf")


def thread_count(env=None):
    """Worker threads from ``MULTIRES_TOA_THREADS``."""
    env = os.environ if env is None else env
    raw = env.get(THREADS_ENV, "").strip()
    if not raw:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    if n < 0:
        raise ConfigError(f"{THREADS_ENV} must be >= 0, got {n}")
    return n if n > 0 else (os.cpu_count() or 1)


def _version_string():
    try:
        rev = subprocess.run(["git", "describe", "--always", "--dirty"],
                             cwd=Path(__file__).parent, capture_output=True, text=True,
                             timeout=5, check=True).stdout.strip()
    except (OSError, subprocess.SubprocessError):
        rev = ""
    return f"{__version__}+g{rev}" if rev else __version__


def true_cycles(spec):
    """Cycle count of the earliest path over the widest aperture of ``spec``."""
    bands = spec.bands
    return int(np.round((bands[-1].center - bands[0].center) * spec.channel.toa / TWO_PI))


def _run_trial(spec, params, snr_idx, trial_idx):
    seed = (spec.seed, snr_idx, trial_idx)
    est = acquire_multiband(spec.channel, spec.acquisition_bands, spec.resolved_n_samples,
                            spec.duration_s, spec.snr_grid_db[snr_idx], seed)
    try:
        if spec.estimator_mode == "single-band":
            band, h = est.bands[0]
            d = single_band_esprit(h, params, est.delta_omega, center=band.center)
        else:
            d = estimate_multiband(est, params.K, params, spec.estimator_mode.split("-")[1])
    except (MultiresToaError, np.linalg.LinAlgError) as exc:
        nan = np.full(params.K, np.nan)
        return nan, np.nan, np.nan, -1, True, f"{type(exc).__name__}: {exc}"
    i = d.toa_index
    cycles = int(d.cycles[i]) if d.cycles is not None else -1
    return (np.asarray(d.delays), d.toa, float(d.coarse_delays[i]), cycles,
            bool(d.flagged[i]), None)


def crlb_table(spec):
    """Square-root delay bounds, shape ``(len(snr_grid_db), K)``, paths in delay order.

    The noise variance at each SNR follows the acquisition convention: mean
    clean per-bin power of the first band over the linear SNR.
    """
    n = spec.resolved_n_samples
    unit = crlb_delays(CrlbInput(spec.channel, spec.acquisition_bands, n, spec.duration_s, 1.0))
    clean = acquire_multiband(spec.channel, spec.bands[:1], n, spec.duration_s).vectors[0]
    power = float(np.mean(np.abs(clean) ** 2))
    snr = np.asarray(spec.snr_grid_db)
    return np.sqrt(unit[None, :] * power / 10.0 ** (snr[:, None] / 10.0))


def run_experiment(spec, n_jobs=None):
    """Run every SNR point of ``spec`` and return the :class:`ResultTable`.

    Trials whose estimator raises, or whose earliest path is flagged (thin
    cycle-rounding margin or clamped delay), count as failures and are left
    out of the RMSE.
    """
    if not isinstance(spec, ExperimentSpec):
        raise ValidationError(f"expected an ExperimentSpec, got {type(spec).__name__}")
    n_jobs = thread_count() if n_jobs is None else check_positive_int(n_jobs, "n_jobs")
    params = spec.hankel_params()
    truth = np.sort(spec.channel.delays)
    crlb_col = crlb_table(spec)[:, 0]
    scenario = spec.scenario if isinstance(spec.scenario, str) else "custom"

    rows, records, per_path = [], [], []
    with ThreadPoolExecutor(max_workers=n_jobs) as pool:
        for i, snr in enumerate(spec.snr_grid_db):
            out = list(pool.map(lambda t, i=i: _run_trial(spec, params, i, t), range(spec.trials)))
            delays = np.stack([o[0] for o in out])
            toa = np.array([o[1] for o in out])
            failed = np.array([o[4] for o in out])
            ok = ~failed
            err = toa[ok] - spec.channel.toa
            rmse = float(np.sqrt(np.mean(err ** 2))) if err.size else float("nan")
            if ok.any() and delays.shape[1] == truth.size:
                per_path.append(np.sqrt(np.mean((delays[ok] - truth) ** 2, axis=0)))
            else:
                per_path.append(np.full(delays.shape[1], np.nan))
            rows.append(ResultRow(snr, rmse, float(crlb_col[i]), int(failed.sum()), scenario))
            records.append(TrialRecords(
                toa=toa,
                coarse_toa=np.array([o[2] for o in out]),
                cycles=np.array([o[3] for o in out]),
                failed=failed,
                errors=tuple(o[5] for o in out if o[5] is not None),
            ))

    per_path = np.stack(per_path)
    metadata = {
        "spec": spec.to_dict(),
        "spec_sha256": spec.sha256(),
        "seed": spec.seed,
        "trials": spec.trials,
        "version": _version_string(),
        "n_samples": spec.resolved_n_samples,
        "hankel": {"rows": params.P, "columns": params.Q + 1, "model_order": params.K},
        "per_path_rmse_s": [[_json_float(x) for x in row] for row in per_path],
        "true_cycles": true_cycles(spec) if spec.estimator_mode != "single-band" else None,
    }
    return ResultTable(rows, metadata, records, per_path)


def _json_float(x):
    return float(x) if np.isfinite(x) else None


def _bands_hz(centers_hz, bandwidth_hz):
    return tuple(BandConfig.from_hz(c, bandwidth_hz) for c in centers_hz)


def preset_experiments(tag, *, trials=DEFAULT_TRIALS, seed=DEFAULT_SEED):
    """Experiment families: bandwidth sweep, aperture sweep, scenario sweep.

    ``fig2a``: 160/200/300 MHz bands at 4 and 6 GHz. ``fig2b``: 200 MHz bands
    at 4 GHz and 4 GHz + {0.25, 0.5, 1, 2} GHz. ``fig2c``: 200 MHz bands at 4
    and 6 GHz over scenarios S1 to S5.
    """
    common = dict(trials=trials, seed=seed, name=tag)
    if tag == "fig2a":
        return [ExperimentSpec(bands=_bands_hz((4e9, 6e9), bw * 1e6), variant=f"bw{bw}", **common)
                for bw in (160, 200, 300)]
    if tag == "fig2b":
        return [ExperimentSpec(bands=_bands_hz((4e9, 4e9 + ap * 1e6), 200e6), variant=f"ap{ap}",
                               **common)
                for ap in (250, 500, 1000, 2000)]
    if tag == "fig2c":
        return [ExperimentSpec(bands=_bands_hz((4e9, 6e9), 200e6), scenario=s, variant=s, **common)
                for s in ("S1", "S2", "S3", "S4", "S5")]
    raise ValidationError(f"unknown preset {tag!r}; expected one of {PRESETS}")
