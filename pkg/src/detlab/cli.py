"""``detlab`` command-line front end.

Usage::

    detlab {ber,per,learn,gap} --config FILE [--out PATH] [--seed N] [--workers N]

The config is an INI document; see ``configs/`` for examples.  Every run
writes its CSV atomically plus ``<out>.meta``, a key-value record of all
resolved settings and conventions sufficient to reproduce the run.
"""

import argparse
import configparser
import os
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__, modem
from .adapt import AdaptParams, learning_curve
from .detect import check_detector
from .errors import ConfigError, DetlabError, ParseError, ValidationError
from .simkit import CHANNELS, CONVENTIONS, SweepResult, SweepSpec, run_ber_sweep, run_per_sweep, snr_gap_at_ber, write_atomic

COMMANDS = ("ber", "per", "learn", "gap")

# section -> key -> (type, default); default None means required-when-used
SCHEMA = {
    "run": {"command": (str, None), "output": (str, None), "workers": (int, None)},
    "link": {"m_tx": (int, 2), "n_rx": (int, 2), "constellation": (str, "bpsk"), "seed": (int, 0)},
    "sweep": {
        "detector": (str, None),
        "snr_points_db": ("floats", None),
        "max_trials": (int, 1_000_000),
        "target_errors": (int, 100),
        "fading": (str, None),
        "channel": (str, "flat"),
        "batch_size": (int, 0),
    },
    "ofdm": {"n_fft": (int, 64), "cp_len": (int, 16), "tau_rms_ns": (float, 50.0), "payload_bits": (int, 1000)},
    "adapt": {
        "algo": (str, "rls"),
        "mu": (float, 0.02),
        "lambda": (float, 0.99),
        "pi0": (float, 100.0),
        "n_train": (int, 1000),
        "n_ensemble": (int, 500),
        "snr_db": (float, 20.0),
        "n_probe": (int, 200),
    },
    "gap": {"a": (str, None), "b": (str, None), "ber_target": (float, 1e-3)},
}
KEY_SECTION = {key: sec for sec, keys in SCHEMA.items() for key in keys}
FADING = {"fast": "fast_fading_ber", "quasi_static": "quasi_static_per"}


@dataclass(frozen=True)
class LearnSpec:
    m_tx: int
    n_rx: int
    snr_db: float
    algo: str
    params: AdaptParams
    n_train: int
    n_ensemble: int
    seed: int
    constellation: str = "bpsk"
    n_probe: int = 200


@dataclass(frozen=True)
class GapSpec:
    a: str
    b: str
    ber_target: float


@dataclass
class RunConfig:
    command: str
    spec: object
    output_path: str
    workers: int
    values: dict = field(default_factory=dict)  # "section.key" -> resolved value


def _convert(key, kind, raw):
    try:
        if kind == "floats":
            vals = tuple(float(v) for v in raw.replace(",", " ").split())
            if not vals:
                raise ValueError
            return vals
        return kind(raw)
    except ValueError:
        name = "list of numbers" if kind == "floats" else kind.__name__
        raise ValidationError(f"{key}: cannot read {raw!r} as {name}") from None


def _read(text):
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ParseError(str(exc).strip()) from None
    raw = {}
    for sec in cp.sections():
        if sec not in SCHEMA:
            raise ParseError(f"unknown section [{sec}]")
        for key, val in cp.items(sec):
            if key not in SCHEMA[sec]:
                raise ParseError(f"unknown key {key!r} in section [{sec}]")
            raw[key] = val
    return raw


def _require(values, key, command):
    if values[key] is None:
        raise ValidationError(f"{key}: required for the {command} command")
    return values[key]


def parse_config(text, command=None, overrides=None):
    """Parse and fully validate a config document.

    ``command`` (from the command line) wins over ``[run] command``;
    ``overrides`` maps key names to raw string values that replace the file's.
    """
    raw = _read(text)
    raw.update({k: str(v) for k, v in (overrides or {}).items() if v is not None})
    values = {}
    for sec, keys in SCHEMA.items():
        for key, (kind, default) in keys.items():
            values[key] = _convert(key, kind, raw[key]) if key in raw else default

    command = command or values["command"]
    if command not in COMMANDS:
        raise ValidationError(f"command: expected one of {COMMANDS}, got {command!r}")
    values["command"] = command
    if values["workers"] is None:
        values["workers"] = os.cpu_count() or 1
    if values["workers"] < 1:
        raise ValidationError("workers: must be >= 1")
    if values["output"] is None:
        values["output"] = f"{command}.csv"
    for key in ("m_tx", "n_rx"):
        if values[key] < 1:
            raise ValidationError(f"{key}: must be >= 1")

    if command in ("ber", "per"):
        spec = _sweep_spec(values, command)
    elif command == "learn":
        spec = _learn_spec(values)
    else:
        if not 0 < values["ber_target"] < 1:
            raise ValidationError("ber_target: must lie in (0, 1)")
        spec = GapSpec(_require(values, "a", command), _require(values, "b", command), values["ber_target"])

    resolved = {f"{KEY_SECTION[k]}.{k}": v for k, v in values.items()}
    return RunConfig(command, spec, values["output"], values["workers"], resolved)


def _sweep_spec(values, command):
    fading = values["fading"] or ("fast" if command == "ber" else "quasi_static")
    if fading not in FADING:
        raise ValidationError(f"fading: expected one of {tuple(FADING)}, got {fading!r}")
    if command == "per" and fading != "quasi_static":
        raise ValidationError("fading: the per command needs quasi_static")
    values["fading"] = fading
    detector = _require(values, "detector", command)
    snrs = _require(values, "snr_points_db", command)
    if values["constellation"] not in modem.NAMES:
        raise ValidationError(f"constellation: expected one of {modem.NAMES}, got {values['constellation']!r}")
    if values["channel"] not in CHANNELS:
        raise ValidationError(f"channel: expected one of {CHANNELS}, got {values['channel']!r}")
    try:
        check_detector(detector, values["m_tx"], values["n_rx"], modem.get_constellation(values["constellation"]))
    except ConfigError as exc:
        raise ValidationError(f"detector: {exc}") from None
    try:
        return SweepSpec(
            detector=detector,
            m_tx=values["m_tx"],
            n_rx=values["n_rx"],
            snr_points_db=snrs,
            constellation=values["constellation"],
            max_trials=values["max_trials"],
            target_errors=values["target_errors"],
            mode=FADING[fading],
            channel=values["channel"],
            seed=values["seed"],
            tau_rms_ns=values["tau_rms_ns"],
            n_fft=values["n_fft"],
            cp_len=values["cp_len"],
            payload_bits=values["payload_bits"],
            batch_size=values["batch_size"],
        )
    except ConfigError as exc:
        raise ValidationError(f"sweep: {exc}") from None


def _learn_spec(values):
    try:
        params = AdaptParams(values["mu"], values["lambda"], values["pi0"])
    except ValueError as exc:
        raise ValidationError(f"adapt: {exc}") from None
    algo = values["algo"].lower()
    if algo not in ("lms", "rls"):
        raise ValidationError(f"algo: expected lms or rls, got {algo!r}")
    for key in ("n_train", "n_ensemble", "n_probe"):
        if values[key] < 1:
            raise ValidationError(f"{key}: must be >= 1")
    if values["constellation"] not in modem.NAMES:
        raise ValidationError(f"constellation: unknown {values['constellation']!r}")
    return LearnSpec(values["m_tx"], values["n_rx"], values["snr_db"], algo, params,
                     values["n_train"], values["n_ensemble"], values["seed"],
                     values["constellation"], values["n_probe"])


def _meta_text(config, extra):
    lines = [
        f"command = {config.command}",
        f"library = detlab {__version__}",
        f"numpy = {np.__version__}",
    ]
    lines += [f"{k} = {v}" for k, v in extra.items()]
    lines += [f"convention.{k} = {v}" for k, v in CONVENTIONS.items()]
    for key in sorted(config.values):
        val = config.values[key]
        if isinstance(val, tuple):
            val = ", ".join(repr(v) for v in val)
        lines.append(f"{key} = {val}")
    return "\n".join(lines) + "\n"


def run(config, stdout=None):
    """Execute a validated config; returns the process exit status."""
    stdout = stdout or sys.stdout
    start = time.perf_counter()
    extra = {}
    if config.command in ("ber", "per"):
        sweep = run_ber_sweep if config.command == "ber" else run_per_sweep
        result = sweep(config.spec, workers=config.workers)
        text = result.to_csv()
    elif config.command == "learn":
        s = config.spec
        lc = learning_curve(s.m_tx, s.n_rx, s.snr_db, s.algo, s.params, s.n_train, s.n_ensemble,
                            np.random.default_rng(s.seed), s.constellation, s.n_probe)
        text = "iteration,ber\n" + "".join(f"{i + 1},{b!r}\n" for i, b in enumerate(lc.ber.tolist()))
        extra["mmse_ber"] = repr(lc.mmse_ber)
    else:
        s = config.spec
        a, b = SweepResult.read_csv(s.a), SweepResult.read_csv(s.b)
        gap = snr_gap_at_ber(a, b, s.ber_target)
        print(f"gap at BER {s.ber_target:g}: {gap:.3f} dB ({s.a} minus {s.b})", file=stdout)
        return 0
    write_atomic(config.output_path, text)
    extra["wall_time_s"] = f"{time.perf_counter() - start:.3f}"
    write_atomic(config.output_path + ".meta", _meta_text(config, extra))
    print(f"wrote {config.output_path}", file=stdout)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="detlab", description="Uncoded MIMO detection link simulator.")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="INI config file")
    parser.add_argument("--out", help="output CSV path (overrides [run] output)")
    parser.add_argument("--seed", type=int, help="master seed (overrides [link] seed)")
    parser.add_argument("--workers", type=int, help="worker processes (default: all cores)")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        with open(args.config) as fh:
            text = fh.read()
    except OSError as exc:
        print(f"detlab: error: cannot read config {args.config}: {exc.strerror}", file=sys.stderr)
        return 1
    overrides = {"output": args.out, "seed": args.seed, "workers": args.workers}
    try:
        config = parse_config(text, args.command, overrides)
        return run(config)
    except DetlabError as exc:
        print(f"detlab: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"detlab: error: {exc.filename or ''}: {exc.strerror}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
