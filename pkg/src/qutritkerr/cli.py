"""Command-line entry point: ``qutritkerr <command> [--config FILE] [--seed N] [--out DIR]``.

Config files are strict JSON documents with a ``version`` field. Frequencies
are in Hz and times in seconds. Exit codes: 0 success, 2 configuration
error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import os
import sys
import warnings
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

import numpy as np

from . import __version__

CONFIG_VERSION = 1
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
COMMANDS = ("sweep-alpha", "calibrate", "cb", "xeb", "tomography", "synthesize", "verify")
ALPHA_CLIP_HZ = 3e6


class ConfigError(ValueError):
    """Invalid or inconsistent configuration; maps to exit code 2."""


class NumericalFailure(RuntimeError):
    """A computation ran but did not meet its contract; maps to exit code 3."""


# ---------------------------------------------------------------- config schema

_DEVICE = {"preset": None, "file": None, "params": None}

SCHEMAS: Dict[str, Dict[str, Any]] = {
    "sweep-alpha": {
        "device": _DEVICE, "axis": "phase", "method": "perturbative", "values": None,
        "omega_d_hz": None, "Omega_hz": 3e6, "phi": 0.0, "durations_s": None, "ramp_s": 20e-9,
    },
    "calibrate": {
        "device": _DEVICE, "target": "czdag", "decoherence": True, "search": {},
    },
    "verify": {
        "device": _DEVICE, "schedule": None, "target": "cz", "repetitions": 3,
    },
    "cb": {
        "cycle": "CZdag", "depolarizing": None, "depths": [0, 4, 8], "n_randomizations": 30,
        "shots": 2048, "channels": "all", "aggregation": "mean",
    },
    "xeb": {
        "gate": "CZdag", "depolarizing": None, "depths": [2, 5, 10, 15, 20], "n_random": 30,
        "shots": 4096,
    },
    "tomography": {
        "kind": "state", "gate": "CZ", "depolarizing": None, "shots": 10000, "max_iter": 300,
    },
    "synthesize": {
        "gate": "CZ", "targets": "haar", "n": 50, "max_depth": 6, "restarts": 50, "tol": 1e-6,
        "extra_restarts": 0, "extra_from_depth": None, "bound_restarts": 2,
    },
}
_SEARCH_FIELDS = {"freq_step_hz", "freq_window_hz", "window_pad_hz", "amplitudes_hz", "ramp_s",
                  "tau_range_s", "n_screen", "n_candidates", "max_evals", "min_overlap", "phase_weight"}


def _check_keys(data: dict, allowed, where: str):
    unknown = sorted(set(data) - set(allowed))
    if unknown:
        raise ConfigError(f"{where}: unknown field(s) {unknown}")


def resolve_config(command: str, raw: Optional[dict], preset: Optional[str]) -> dict:
    """Merge a raw config over the command defaults, rejecting unknown fields."""
    schema = SCHEMAS[command]
    raw = dict(raw or {})
    version = raw.pop("version", CONFIG_VERSION)
    if version != CONFIG_VERSION:
        raise ConfigError(f"version: expected {CONFIG_VERSION}, got {version!r}")
    seed = raw.pop("seed", None)
    _check_keys(raw, schema, "config")
    cfg = {k: (dict(v) if isinstance(v, dict) else v) for k, v in schema.items()}
    cfg.update(raw)
    if "device" in schema:
        dev = dict(cfg["device"] or {})
        _check_keys(dev, _DEVICE, "device")
        if preset is not None:
            dev = {"preset": preset, "file": None, "params": None}
        given = [k for k in _DEVICE if dev.get(k) is not None]
        if len(given) != 1:
            raise ConfigError("device: give exactly one of preset, file or params (or --preset)")
        cfg["device"] = {k: dev.get(k) for k in _DEVICE}
    if "search" in schema:
        _check_keys(cfg["search"], _SEARCH_FIELDS, "search")
    cfg["version"] = CONFIG_VERSION
    if seed is not None:
        cfg["seed"] = seed
    return cfg


def _require(cond: bool, msg: str):
    if not cond:
        raise ConfigError(msg)


def _load_device(spec: dict):
    from .crosskerr import DeviceParams, preset
    try:
        if spec["preset"] is not None:
            return preset(spec["preset"])
        if spec["file"] is not None:
            path = Path(spec["file"])
            if not path.is_file():
                raise ConfigError(f"device.file: {path} does not exist")
            return DeviceParams.from_json(path.read_text())
        return DeviceParams.from_hz_dict(spec["params"])
    except ConfigError:
        raise
    except (ValueError, TypeError, KeyError, json.JSONDecodeError) as exc:
        raise ConfigError(f"device: {exc}") from exc


def _backend(depolarizing, kind: str):
    from .simulator import NoiseModel, SimulatorBackend
    noise = NoiseModel()
    if depolarizing is not None:
        _require(0 <= depolarizing <= 1, "depolarizing: must lie in [0, 1]")
        noise.add_depolarizing(kind, float(depolarizing))
    return SimulatorBackend(noise)


def _canonical(name, choices, field: str) -> str:
    lookup = {c.lower(): c for c in choices}
    _require(isinstance(name, str) and name.lower() in lookup, f"{field}: must be one of {list(choices)}")
    return lookup[name.lower()]


def _two_qutrit_kind(name: str, field: str) -> str:
    from .simulator.gates import TWO_QUTRIT_KINDS
    return _canonical(name, TWO_QUTRIT_KINDS, field)


# ---------------------------------------------------------------- output helpers

def _write_csv(path: Path, header: List[str], rows) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow(["" if v is None else v for v in r])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def _dump(path: Path, data) -> None:
    path.write_text(json.dumps(_jsonable(data), indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------- commands
# each prepare_* validates and returns a runner writing into the output dir

def prepare_sweep_alpha(cfg: dict, seed: int, threads: int) -> Callable[[Path], dict]:
    from .crosskerr import (
        TWO_PI, DriveParams, LeakageError, PerturbativeSingularity, alpha_from_propagation,
        alpha_total, midpoint_drive_frequency,
    )
    device = _load_device(cfg["device"])
    axis, method = cfg["axis"], cfg["method"]
    _require(axis in ("phase", "amplitude", "frequency"), "axis: must be phase, amplitude or frequency")
    _require(method in ("perturbative", "propagate"), "method: must be perturbative or propagate")
    defaults = {"phase": {"start": 0.0, "stop": 2 * np.pi, "num": 25},
                "amplitude": {"start": 0.5e6, "stop": 5e6, "num": 10},
                "frequency": None}
    values = cfg["values"]
    if values is None:
        if axis == "frequency":
            f12 = sorted([(device.omega_c + device.eta_c) / TWO_PI, (device.omega_t + device.eta_t) / TWO_PI])
            values = {"start": f12[0] - 100e6, "stop": f12[1] + 100e6, "num": 41}
        else:
            values = defaults[axis]
    if isinstance(values, dict):
        _check_keys(values, ("start", "stop", "num"), "values")
        grid = np.linspace(float(values["start"]), float(values["stop"]), int(values["num"]))
    else:
        grid = np.asarray(values, dtype=float)
    _require(grid.ndim == 1 and grid.size >= 1, "values: need at least one point")
    wd0 = midpoint_drive_frequency(device) if cfg["omega_d_hz"] is None else TWO_PI * float(cfg["omega_d_hz"])
    omega0 = TWO_PI * float(cfg["Omega_hz"])
    phi0 = float(cfg["phi"])
    durations = np.asarray(cfg["durations_s"] if cfg["durations_s"] is not None
                           else np.linspace(100e-9, 1000e-9, 10), dtype=float)
    ramp = float(cfg["ramp_s"])

    def drive_at(x):
        if axis == "phase":
            return DriveParams(wd0, omega0, omega0, x)
        if axis == "amplitude":
            return DriveParams(wd0, TWO_PI * x, TWO_PI * x, phi0)
        return DriveParams(TWO_PI * x, omega0, omega0, phi0)

    def run(out: Path) -> dict:
        rows = []
        for x in grid:
            drive = drive_at(float(x))
            flag = ""
            try:
                if method == "perturbative":
                    a = alpha_total(device, drive).as_array() / TWO_PI
                else:
                    a = alpha_from_propagation(device, drive, durations, ramp).rates.as_array() / TWO_PI
                    if np.max(np.abs(a)) > ALPHA_CLIP_HZ:
                        a, flag = None, "clipped"
            except PerturbativeSingularity:
                a, flag = None, "pole"
            except (LeakageError, ValueError) as exc:
                a, flag = None, "leakage" if isinstance(exc, LeakageError) else "unwrap"
            vals = [None] * 4 if a is None else [f"{v:.9e}" for v in a]
            rows.append([f"{x:.9e}"] + vals + [method, flag])
        _write_csv(out / "alpha.csv", [axis, "alpha11_hz", "alpha12_hz", "alpha21_hz", "alpha22_hz",
                                       "method", "flag"], rows)
        return {"axis": axis, "method": method, "points": len(rows),
                "flagged": sum(1 for r in rows if r[-1]), "files": ["alpha.csv"]}

    return run


def _calibration_search(cfg: dict):
    from .crosskerr import SearchConfig, TWO_PI
    s = cfg["search"]
    kw = {}
    conv = {"freq_step_hz": ("freq_step", TWO_PI), "window_pad_hz": ("window_pad", TWO_PI),
            "ramp_s": ("ramp", 1.0), "n_screen": ("n_screen", None), "n_candidates": ("n_candidates", None),
            "max_evals": ("max_evals", None), "min_overlap": ("min_overlap", None),
            "phase_weight": ("phase_weight", None)}
    for key, (name, scale) in conv.items():
        if key in s:
            kw[name] = s[key] if scale is None else float(s[key]) * scale
    if "freq_window_hz" in s:
        kw["freq_window"] = tuple(TWO_PI * float(v) for v in s["freq_window_hz"])
    if "amplitudes_hz" in s:
        kw["amplitudes"] = tuple(TWO_PI * float(v) for v in s["amplitudes_hz"])
    if "tau_range_s" in s:
        kw["tau_range"] = tuple(float(v) for v in s["tau_range_s"])
    try:
        return SearchConfig(**kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"search: {exc}") from exc


_TARGET_NAMES = {"cz": "CZ", "czdag": "CZdag"}


def _channel_fidelity(choi: np.ndarray, target: np.ndarray) -> float:
    ideal = np.einsum("ca,db->acbd", target, target.conj()).reshape(81, 81)
    return float(np.real(np.trace(ideal @ choi)) / 81)


def prepare_calibrate(cfg: dict, seed: int, threads: int) -> Callable[[Path], dict]:
    from .crosskerr import TARGETS, calibrate_gate, propagate_channel
    device = _load_device(cfg["device"])
    _require(cfg["target"] in _TARGET_NAMES, "target: must be cz or czdag")
    target = _TARGET_NAMES[cfg["target"]]
    search = _calibration_search(cfg)

    def run(out: Path) -> dict:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            sched, report = calibrate_gate(device, target, search)
        _dump(out / "schedule.json", sched.to_dict())
        result = {"target": target, "noiseless_fidelity": report.fidelity,
                  "noiseless_infidelity": report.infidelity, "duration_s": sched.duration,
                  "success": report.success, "evaluations": report.evaluations,
                  "candidates": report.candidates, "files": ["schedule.json"]}
        if cfg["decoherence"] and device.has_decoherence:
            result["decoherent_fidelity"] = _channel_fidelity(propagate_channel(device, sched), TARGETS[target])
        if not report.success:
            result["error"] = "calibration did not reach the fidelity threshold; best schedule written"
        return result

    return run


def prepare_verify(cfg: dict, seed: int, threads: int) -> Callable[[Path], dict]:
    from .crosskerr import TARGETS, PulseSchedule, propagate_unitary, unitary_process_fidelity
    device = _load_device(cfg["device"])
    _require(cfg["target"] in _TARGET_NAMES, "target: must be cz or czdag")
    _require(isinstance(cfg["repetitions"], int) and cfg["repetitions"] >= 1, "repetitions: positive integer")
    _require(cfg["schedule"] is not None, "schedule: path to a schedule JSON is required")
    path = Path(cfg["schedule"])
    _require(path.is_file(), f"schedule: {path} does not exist")
    try:
        sched = PulseSchedule.from_dict(json.loads(path.read_text()))
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"schedule: {exc}") from exc
    target = TARGETS[_TARGET_NAMES[cfg["target"]]]
    n = cfg["repetitions"]

    def run(out: Path) -> dict:
        u = propagate_unitary(device, sched)
        single = 1 - unitary_process_fidelity(u, target)
        repeated = 1 - unitary_process_fidelity(np.linalg.matrix_power(u, n), np.linalg.matrix_power(target, n))
        ok = repeated <= n * single + 1e-12
        res = {"single_infidelity": single, "repetitions": n, "repeated_infidelity": repeated,
               "bound": n * single, "passed": bool(ok)}
        if not ok:
            res["error"] = "repeated-gate infidelity exceeds the repetition bound"
        return res

    return run


def prepare_cb(cfg: dict, seed: int, threads: int) -> Callable[[Path], dict]:
    from . import cb
    from .simulator import Circuit, Gate
    kind = _two_qutrit_kind(cfg["cycle"], "cycle")
    _require(cfg["channels"] in ("all", "subset"), "channels: must be all or subset")
    backend = _backend(cfg["depolarizing"], kind)
    cycle = Circuit(2, [Gate(kind, (0, 1))])
    chans = None if cfg["channels"] == "all" else cb.random_channel_subset(np.random.default_rng(seed))
    try:
        conf = cb.CBConfig(cycle, tuple(cfg["depths"]), chans, int(cfg["n_randomizations"]),
                           int(cfg["shots"]), seed, cfg["aggregation"])
        cb._check_clifford(cycle)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"cb: {exc}") from exc

    def run(out: Path) -> dict:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            res = cb.run_cb(conf, backend)
        recs = sorted(res.records, key=lambda r: r.decay)
        rows = [[str(r.channel), f"{r.decay:.9f}", f"{r.stderr:.9f}", f"{r.amplitude:.9f}",
                 f"{(i + 1) / len(recs):.6f}"] for i, r in enumerate(recs)]
        _write_csv(out / "cb_decays.csv", ["channel", "decay", "stderr", "amplitude", "cumulative_fraction"],
                   rows)
        d = res.to_dict()
        d["files"] = ["cb_decays.csv"]
        return d

    return run


def prepare_xeb(cfg: dict, seed: int, threads: int) -> Callable[[Path], dict]:
    from . import xeb
    from .simulator import Gate
    kind = _two_qutrit_kind(cfg["gate"], "gate")
    backend = _backend(cfg["depolarizing"], kind)
    try:
        conf = xeb.XEBConfig(Gate(kind, (0, 1)), tuple(cfg["depths"]), int(cfg["n_random"]),
                             int(cfg["shots"]), seed)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"xeb: {exc}") from exc

    def run(out: Path) -> dict:
        res = xeb.run_xeb(conf, backend)
        rows = [[r.depth, f"{r.fidelity:.9f}", f"{r.fidelity_err:.9f}", f"{r.speckle:.9f}",
                 f"{r.speckle_err:.9f}"] for r in res.per_depth]
        _write_csv(out / "xeb_depths.csv", ["depth", "fidelity", "fidelity_err", "speckle", "speckle_err"], rows)
        d = res.to_dict()
        for row in d["per_depth"]:
            row.pop("ideal"), row.pop("counts")
        d["files"] = ["xeb_depths.csv"]
        return d

    return run


def bell_circuit():
    """``(I (x) H3^dag) CZ (H3 (x) H3) |00>``, the maximally entangled state."""
    from .simulator import Circuit, Gate
    from .simulator.gates import hadamard3
    return Circuit(2, [Gate("H3", (0,)), Gate("H3", (1,)), Gate("CZ", (0, 1)),
                       Gate("CustomUnitary", (1,), matrix=hadamard3().conj().T)])


def prepare_tomography(cfg: dict, seed: int, threads: int) -> Callable[[Path], dict]:
    from . import tomography as tomo
    from .algebra import unitary_to_ptm
    from .simulator import Circuit, Gate
    _require(cfg["kind"] in ("state", "process"), "kind: must be state or process")
    kind = _two_qutrit_kind(cfg["gate"], "gate")
    _require(int(cfg["shots"]) >= tomo.MIN_SHOTS, f"shots: at least {tomo.MIN_SHOTS}")
    rng = np.random.default_rng(seed)

    def run(out: Path) -> dict:
        if cfg["kind"] == "state":
            circ = bell_circuit()
            if cfg["depolarizing"] is not None:
                circ.append(Gate("DepolarizeChannel", (0, 1), (float(cfg["depolarizing"]),)))
            res = tomo.state_tomography(circ, _backend(None, kind), int(cfg["shots"]), rng)
            psi = np.zeros(9, complex)
            psi[[0, 4, 8]] = 1 / np.sqrt(3)
            fid = tomo.state_fidelity(res.estimate, psi)
            _write_csv(out / "density_matrix.csv", ["row", "col", "re", "im"],
                       [[i, j, f"{res.estimate[i, j].real:.9e}", f"{res.estimate[i, j].imag:.9e}"]
                        for i in range(9) for j in range(9)])
            return {"kind": "state", "state_fidelity": fid, "iterations": res.diagnostics.get("iterations"),
                    "files": ["density_matrix.csv"]}
        gate = Circuit(2, [Gate(kind, (0, 1))])
        backend = _backend(cfg["depolarizing"], kind)
        res = tomo.process_tomography(gate, backend, int(cfg["shots"]), rng, max_iter=int(cfg["max_iter"]))
        ideal = unitary_to_ptm(gate.unitary())
        fid = tomo.process_fidelity(res.estimate, ideal)
        _write_csv(out / "ptm.csv", ["row", "col", "value"],
                   [[i, j, f"{res.estimate[i, j].real:.9e}"] for i in range(81) for j in range(81)])
        out_d = {"kind": "process", "gate": kind, "process_fidelity": fid, "files": ["ptm.csv"]}
        if cfg["depolarizing"] is not None:
            out_d["expected_fidelity"] = (1 + 80 * float(cfg["depolarizing"])) / 81
        return out_d

    return run


def prepare_synthesize(cfg: dict, seed: int, threads: int) -> Callable[[Path], dict]:
    from .synthesis import ENTANGLERS, coverage_study
    cfg["gate"] = _canonical(cfg["gate"], ENTANGLERS, "gate")
    _require(cfg["targets"] in ("haar", "clifford"), "targets: must be haar or clifford")
    for key in ("n", "max_depth", "restarts", "extra_restarts", "bound_restarts"):
        _require(isinstance(cfg[key], int) and cfg[key] >= 0, f"{key}: non-negative integer")
    _require(cfg["n"] >= 1, "n: at least one target")
    _require(cfg["tol"] > 0, "tol: must be positive")

    def run(out: Path) -> dict:
        res = coverage_study(cfg["gate"], cfg["targets"], cfg["n"], cfg["max_depth"], cfg["restarts"],
                             cfg["tol"], seed % (2 ** 63), cfg["extra_restarts"], cfg["extra_from_depth"],
                             cfg["bound_restarts"], workers=threads)
        (out / "success.csv").write_text(res.success_csv())
        (out / "infidelity.csv").write_text(res.infidelity_csv())
        d = res.to_dict()
        d["first_full_depth"] = res.first_full_depth()
        d["files"] = ["success.csv", "infidelity.csv"]
        return d

    return run


PREPARE = {
    "sweep-alpha": prepare_sweep_alpha, "calibrate": prepare_calibrate, "verify": prepare_verify,
    "cb": prepare_cb, "xeb": prepare_xeb, "tomography": prepare_tomography,
    "synthesize": prepare_synthesize,
}


# ---------------------------------------------------------------- driver

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qutritkerr", description="Qutrit cross-Kerr gate toolkit")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", type=Path, help="JSON config file")
        s.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
        s.add_argument("--out", type=Path, default=Path("out"), help="output directory")
        s.add_argument("--threads", type=int, default=os.cpu_count() or 1)
        s.add_argument("--preset", choices=("cz-pair", "czdag-pair"))
    return p


def _read_config(path: Optional[Path]) -> Optional[dict]:
    if path is None:
        return None
    if not path.exists():
        raise ConfigError(f"--config: {path} does not exist")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return data


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        raw = _read_config(args.config)
        if args.preset is not None and "device" not in SCHEMAS[args.command]:
            raise ConfigError(f"--preset does not apply to {args.command}")
        cfg = resolve_config(args.command, raw, args.preset)
        seed = args.seed if args.seed is not None else cfg.pop("seed", 0)
        cfg.pop("seed", None)
        if not (isinstance(seed, int) and 0 <= seed < 2 ** 64):
            raise ConfigError("seed: must be an unsigned 64-bit integer")
        if args.threads < 1:
            raise ConfigError("--threads: must be positive")
        runner = PREPARE[args.command](cfg, seed, args.threads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    from .crosskerr import IntegrationError, LeakageError, PerturbativeSingularity
    out: Path = args.out
    out.mkdir(parents=True, exist_ok=True)
    started = _dt.datetime.now(_dt.timezone.utc).isoformat()
    try:
        report = runner(out)
        code = EXIT_NUMERIC if "error" in report else EXIT_OK
    except (IntegrationError, LeakageError, PerturbativeSingularity, np.linalg.LinAlgError,
            RuntimeError) as exc:
        report = {"error": f"{type(exc).__name__}: {exc}"}
        code = EXIT_NUMERIC
    files = report.pop("files", [])
    _dump(out / "report.json", {"command": args.command, "seed": seed, "result": report})
    _dump(out / "manifest.json", {
        "command": args.command, "config": cfg, "seed": seed, "package_version": __version__,
        "threads": args.threads, "outputs": ["report.json"] + files, "exit_code": code,
        "timestamp": started,
    })
    if code:
        print(f"failed: {report.get('error')}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
