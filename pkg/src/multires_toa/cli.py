"""``multires-toa`` command line.

Exit codes: 0 success, 1 runtime failure, 2 config parse error, 3 validation
error. Failures print a JSON object ``{"error": {...}}`` on stderr.
"""

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .bench import (
    PRESETS,
    ExperimentSpec,
    crlb_table,
    preset_experiments,
    run_experiment,
)
from .channel import BandConfig, MultipathChannel, make_benchmark_scenario
from .crlb import CrlbInput, check_numerical_fim, crlb_delays, orthogonal_projector, steering_matrix
from .estimator import HankelParams, build_hankel, estimate_multiband, single_band_esprit
from .estimator.esprit import solve_invariances
from .estimator.subspace import signal_subspace
from .exceptions import ConfigError, MultiresToaError, ValidationError
from .frontend import AcquisitionConfig, acquire_multiband

log = logging.getLogger("multires_toa")

EXIT_OK, EXIT_RUNTIME, EXIT_PARSE, EXIT_VALIDATION = 0, 1, 2, 3
_OVERRIDE_KEYS = ("name", "variant", "scenario", "bands", "snr_grid_db", "trials", "seed",
                  "estimator_mode", "n_samples", "duration_s", "hankel.model_order",
                  "hankel.rows")


def _parse_override(text):
    key, sep, raw = text.partition("=")
    key = key.strip()
    if not sep or not key:
        raise ValidationError(f"override {text!r} is not of the form key=value")
    if key not in _OVERRIDE_KEYS:
        raise ValidationError(f"unknown override key {key!r}; allowed: {list(_OVERRIDE_KEYS)}")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key, value


def apply_overrides(doc, overrides):
    """Return a copy of an experiment document with ``key=value`` overrides applied."""
    doc = json.loads(json.dumps(doc))
    for text in overrides or ():
        key, value = _parse_override(text)
        if key.startswith("hankel."):
            hankel = doc.get("hankel") or {}
            hankel[key.split(".", 1)[1]] = value
            doc["hankel"] = hankel
        else:
            doc[key] = value
    return doc


def _read_json(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from None


def experiment_documents(doc):
    """Experiment documents of a config.

    A config is one experiment document, ``{"preset": tag}`` (optionally with
    an explicit ``"experiments"`` list), or ``{"experiments": [...]}``.
    """
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    if "experiments" in doc or "preset" in doc:
        extra = set(doc) - {"preset", "experiments"}
        if extra:
            raise ConfigError(f"unknown top-level keys {sorted(extra)} in experiment list")
        if "experiments" in doc:
            docs = doc["experiments"]
            if not isinstance(docs, list) or not docs:
                raise ConfigError("'experiments' must be a non-empty list")
        else:
            docs = [s.to_dict() for s in preset_experiments(doc["preset"])]
        return docs
    return [doc]


def load_specs(config, overrides=()):
    docs = experiment_documents(_read_json(config) if isinstance(config, (str, Path)) else config)
    return [ExperimentSpec.from_dict(apply_overrides(d, overrides)) for d in docs]


def preset_config(tag):
    return {"preset": tag, "experiments": [s.to_dict() for s in preset_experiments(tag)]}


def _run_specs(specs, out_dir):
    written = []
    for spec in specs:
        t0 = time.perf_counter()
        table = run_experiment(spec)
        csv_path, meta_path = table.write(out_dir, spec.tag)
        log.info("%s: %d SNR points x %d trials in %.1f s -> %s",
                 spec.tag, len(spec.snr_grid_db), spec.trials, time.perf_counter() - t0, csv_path)
        for row, per_path in zip(table.rows, table.per_path_rmse):
            log.debug("%s snr=%g per-path rmse=%s", spec.tag, row.snr_db,
                      np.array2string(per_path, precision=3))
        written.append({"csv": str(csv_path), "metadata": str(meta_path)})
    print(json.dumps({"written": written}, indent=2))
    return EXIT_OK


def cmd_run(args):
    if not args.config:
        raise ValidationError("run needs --config")
    return _run_specs(load_specs(args.config, args.override), args.out)


def cmd_preset(args):
    if args.export:
        Path(args.export).write_text(json.dumps(preset_config(args.tag), indent=2) + "\n")
        print(json.dumps({"written": [args.export]}))
        return EXIT_OK
    return _run_specs(load_specs({"preset": args.tag}, args.override), args.out)


def cmd_validate(args):
    if not args.config:
        raise ValidationError("validate needs --config")
    doc = _read_json(args.config)
    if isinstance(doc, dict) and "paths" in doc:
        MultipathChannel.from_dict(doc)
        AcquisitionConfig.from_dict(doc)
        print(json.dumps({"valid": True, "kind": "acquisition"}))
        return EXIT_OK
    specs = load_specs(doc, args.override)
    print(json.dumps({"valid": True, "kind": "experiments",
                      "experiments": [{"tag": s.tag, "spec_sha256": s.sha256()} for s in specs]},
                     indent=2))
    return EXIT_OK


def _acquisition_crlb(doc):
    channel = MultipathChannel.from_dict(doc)
    acq = AcquisitionConfig.from_dict(doc)
    if not np.isfinite(acq.snr_db):
        raise ValidationError("the bound needs a finite snr_db")
    sigma2 = acq.acquire(channel).noise_variance
    bound = crlb_delays(CrlbInput(channel, acq.bands, acq.n_samples, acq.duration, sigma2))
    return {"delays_s": channel.delays.tolist(), "noise_variance": sigma2,
            "crlb_rmse_s": np.sqrt(bound).tolist()}


def _spec_crlb(spec):
    return {
        "tag": spec.tag,
        "delays_s": spec.channel.delays.tolist(),
        "snr_db": list(spec.snr_grid_db),
        "crlb_rmse_s": crlb_table(spec).tolist(),
    }


def cmd_crlb(args):
    if args.config:
        doc = _read_json(args.config)
    elif args.tag:
        doc = {"preset": args.tag}
    else:
        raise ValidationError("crlb needs --config or --preset")
    if isinstance(doc, dict) and "paths" in doc:
        result = _acquisition_crlb(doc)
    else:
        result = {"experiments": [_spec_crlb(s) for s in load_specs(doc, args.override)]}
    text = json.dumps(result, indent=2)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "crlb.json").write_text(text + "\n")
    print(text)
    return EXIT_OK


def _selfcheck_setup():
    channel = make_benchmark_scenario()
    bands = (BandConfig.from_hz(4e9, 200e6), BandConfig.from_hz(6e9, 200e6))
    return channel, bands, 128, 640e-9


def _check_noiseless():
    channel, bands, n, T = _selfcheck_setup()
    est = acquire_multiband(channel, bands, n, T)
    multi = estimate_multiband(est, channel.n_paths)
    band, h = est.bands[0]
    params = HankelParams.for_length(n, channel.n_paths)
    single = single_band_esprit(h, params, est.delta_omega, center=band.center)
    err = max(np.max(np.abs(d.delays - channel.delays) / channel.delays) for d in (multi, single))
    return err < 1e-8, f"max relative delay error {err:.2e}"


def _check_rank():
    channel, bands, n, T = _selfcheck_setup()
    est = acquire_multiband(channel, bands, n, T)
    params = HankelParams.for_length(n, channel.n_paths)
    stacked = np.vstack([build_hankel(h, params) for h in est.vectors])
    s = np.linalg.svd(stacked, compute_uv=False)
    K = channel.n_paths
    gap_ok = s[K] < 1e-10 * s[0] and s[K - 1] > 1e-8 * s[0]
    psi, upsilon = solve_invariances(signal_subspace(stacked, K), params.P)
    lam = np.linalg.eigvals(psi)
    drift = float(np.max(np.abs(np.abs(lam) - 1)))
    shifts = np.sort(np.angle(lam))
    expected = np.sort(np.angle(np.exp(-1j * est.delta_omega * channel.delays)))
    phase_err = float(np.max(np.abs(shifts - expected)))
    ok = gap_ok and drift < 1e-9 and phase_err < 1e-9
    return ok, (f"s[K]/s[0] = {s[K] / s[0]:.1e}, s[K-1]/s[0] = {s[K - 1] / s[0]:.1e}, "
                f"eigenvalue modulus drift {drift:.1e}")


def _check_projector():
    channel, bands, n, T = _selfcheck_setup()
    B = steering_matrix(CrlbInput(channel, bands, n, T, 1.0))
    P = orthogonal_projector(B)
    err = max(np.abs(P @ P - P).max(), np.abs(P - P.conj().T).max(), np.abs(P @ B).max())
    return err < 1e-12, f"max idempotence/Hermitian/annihilation error {err:.1e}"


def _check_fim():
    channel, bands, n, T = _selfcheck_setup()
    dev = check_numerical_fim(CrlbInput(channel, bands, n, T, 1.0), rtol=1e-6)
    return True, f"max relative deviation {dev:.1e}"


SELFCHECKS = (
    ("noiseless-exactness", _check_noiseless),
    ("rank", _check_rank),
    ("projector-idempotence", _check_projector),
    ("crlb-vs-fim", _check_fim),
)


def run_selfchecks():
    """Run every self-check; returns ``[(name, passed, detail)]``."""
    results = []
    for name, check in SELFCHECKS:
        try:
            ok, detail = check()
        except (MultiresToaError, ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        results.append((name, bool(ok), detail))
    return results


def cmd_selfcheck(args):
    results = run_selfchecks()
    width = max(len(name) for name, _, _ in results)
    for name, ok, detail in results:
        print(f"{name:<{width}}  {'PASS' if ok else 'FAIL'}  {detail}")
    return EXIT_OK if all(ok for _, ok, _ in results) else EXIT_RUNTIME


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(f"usage: {message}")


def build_parser():
    parser = _Parser(prog="multires-toa", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def verbosity(p):
        p.add_argument("-v", "--verbose", action="count", default=0,
                       help="-v for progress, -vv for per-path RMSE")

    def common(p, *, config=True, out=True):
        verbosity(p)
        if config:
            p.add_argument("--config", help="JSON config file")
        if out:
            p.add_argument("--out", default="results", help="output directory")
        p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                       help="override an experiment field (value parsed as JSON)")

    p = sub.add_parser("run", help="run the experiments of a config")
    common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("preset", help="run or export a preset experiment family")
    p.add_argument("tag", choices=PRESETS)
    p.add_argument("--export", metavar="PATH", help="write the preset config instead of running")
    common(p, config=False)
    p.set_defaults(func=cmd_preset)

    p = sub.add_parser("crlb", help="print the delay bounds of a config")
    common(p)
    p.add_argument("--preset", dest="tag", choices=PRESETS)
    p.set_defaults(func=cmd_crlb, out=None)

    p = sub.add_parser("validate", help="parse and validate a config")
    common(p, out=False)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("selfcheck", help="run the numerical self-checks")
    verbosity(p)
    p.set_defaults(func=cmd_selfcheck)
    return parser


def _fail(exc, code):
    err = {"error": {"type": type(exc).__name__, "message": str(exc), "exit_code": code}}
    print(json.dumps(err), file=sys.stderr)
    return code


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except ConfigError as exc:
        return _fail(exc, EXIT_PARSE)
    logging.basicConfig(level=(logging.WARNING, logging.INFO, logging.DEBUG)[min(args.verbose, 2)],
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except ConfigError as exc:
        return _fail(exc, EXIT_PARSE)
    except ValidationError as exc:
        return _fail(exc, EXIT_VALIDATION)
    except Exception as exc:  # noqa: BLE001 - every failure maps to an exit code
        log.debug("runtime failure", exc_info=True)
        return _fail(exc, EXIT_RUNTIME)


if __name__ == "__main__":
    sys.exit(main())
