"""Command-line front end.

Subcommands: channel-info, propagate, estimate, oracle, sweep, dynamics.
Every output artifact embeds the resolved configuration, the seed and a
version string so reruns are reproducible (timing columns excepted).
Exit codes: 0 success, 2 configuration error, 3 infeasible size,
4 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import subprocess
import sys
import time

from . import __version__
from .channels import (
    InvalidChannelError,
    Scrambler,
    TwoDesign,
    WorstCase,
    channel_from_json,
    classify,
    contraction_sq_bound,
    contraction_sq_mean,
    contraction_sq_worstcase,
    effective_depolarizing_rate,
)
from .circuits import (
    Circuit,
    build_hva,
    build_trotter_tfim,
    circuit_from_json,
    EnsembleSpec,
    lattice_from_json,
    sample_circuit,
)
from .experiments import dynamics_series, sweep_table
from .montecarlo import (
    TruncFrobenius,
    TruncMSE,
    UnsupportedEnsembleError,
    Variance,
    estimate as mc_estimate,
)
from .oracle import InfeasibleSizeError, simulate_exact
from .pauli import PauliSum, ProductState, QubitCountMismatch
from .propagation import (
    FrontierOverflowError,
    TruncationConfig,
    backpropagate,
    expectation,
)


class ConfigError(ValueError):
    pass


def _version_string() -> str:
    try:
        desc = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            capture_output=True,
            text=True,
            timeout=5,
            cwd=os.path.dirname(os.path.abspath(__file__)),
        ).stdout.strip()
    except Exception:
        desc = ""
    return f"paulipath {__version__}" + (f" ({desc})" if desc else "")


def _load_config(args) -> dict:
    if not args.config:
        raise ConfigError("--config FILE is required for this command")
    try:
        with open(args.config) as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    return cfg


def _resolve_state(spec, n: int) -> ProductState:
    if spec in (None, "zeros"):
        return ProductState.zeros(n)
    if isinstance(spec, list):
        state = ProductState.from_vectors(spec)
        if state.n != n:
            raise ConfigError(f"state has {state.n} qubits, circuit has {n}")
        return state
    raise ConfigError(f"unknown state spec {spec!r}")


def _resolve_circuit(cfg: dict, seed: int) -> tuple[Circuit, dict]:
    """Build the circuit (sampling templates) and return it with the resolved spec."""
    spec = cfg.get("circuit")
    if not isinstance(spec, dict):
        raise ConfigError("config needs a 'circuit' object")
    template = _circuit_template(spec)
    resolved = dict(spec)
    if template.is_template():
        template = sample_circuit(template, seed)
        resolved["sampled_with_seed"] = seed
    return template, resolved


def _circuit_template(spec: dict) -> Circuit:
    builder = spec.get("builder")
    if builder is None:
        return circuit_from_json(spec)
    lattice = lattice_from_json(spec["lattice"])
    noise = None if spec.get("noise") is None else channel_from_json(spec["noise"])
    if builder == "hva":
        angles = spec.get("angles", "uniform")
        ens = EnsembleSpec(None if angles == "uniform" else float(angles))
        return build_hva(lattice, noise, int(spec["blocks"]), ens)
    if builder == "trotter_tfim":
        return build_trotter_tfim(
            lattice,
            float(spec["J"]),
            float(spec["h"]),
            float(spec["dt"]),
            int(spec["steps"]),
            noise,
            spec.get("noise_placement", "per_layer"),
        )
    raise ConfigError(f"unknown builder {builder!r}")


def _resolve_observable(cfg: dict, n: int) -> PauliSum:
    spec = cfg.get("observable")
    if spec is None:
        raise ConfigError("config needs an 'observable' list")
    obs = PauliSum.from_json_obj(spec)
    if obs.n != n:
        raise ConfigError(f"observable has {obs.n} qubits, circuit has {n}")
    return obs


def _resolve_trunc(cfg: dict) -> TruncationConfig:
    spec = cfg.get("truncation")
    if spec is None:
        return TruncationConfig()
    return TruncationConfig.from_json_obj(spec)


def _emit(args, payload: dict, rows: list[dict] | None = None) -> None:
    """Write JSON (payload) or CSV (rows with embedded config comment lines)."""
    fmt = args.format
    if fmt == "json" or rows is None:
        text = json.dumps(payload, sort_keys=True, indent=2) + "\n"
    else:
        buf = io.StringIO()
        buf.write(f"# version: {payload['version']}\n")
        buf.write(f"# config: {json.dumps(payload['config'], sort_keys=True)}\n")
        writer = csv.DictWriter(buf, fieldnames=list(rows[0].keys()) if rows else payload["columns"])
        writer.writeheader()
        writer.writerows(rows)
        text = buf.getvalue()
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _base_payload(args, cfg: dict, seed: int) -> dict:
    resolved = dict(cfg)
    resolved["seed"] = seed
    return {"version": _version_string(), "config": resolved}


# --- subcommands -------------------------------------------------------------------


def cmd_channel_info(args) -> int:
    if args.channel:
        spec = json.loads(args.channel)
    else:
        spec = _load_config(args).get("channel")
    if not isinstance(spec, dict):
        raise ConfigError("provide --channel JSON or a config with a 'channel' object")
    ch = channel_from_json(spec)
    ups = contraction_sq_bound(ch.d, ch.t)
    info = {
        "D": list(ch.d),
        "t": list(ch.t),
        "class": classify(ch).value,
        "norm_gain_bound": ups,
        "contraction_sq_worstcase": contraction_sq_worstcase(ch),
        "contraction_sq_two_design": contraction_sq_mean(ch, TwoDesign()),
        "effective_rate_worstcase": 1.0 - math.sqrt(contraction_sq_worstcase(ch)),
        "effective_rate_two_design": 1.0 - math.sqrt(contraction_sq_mean(ch, TwoDesign())),
    }
    if args.eta is not None:
        info["contraction_sq_scrambler"] = contraction_sq_mean(ch, Scrambler(args.eta))
        info["effective_rate_scrambler"] = 1.0 - math.sqrt(info["contraction_sq_scrambler"])
    if info["effective_rate_worstcase"] <= 0.0:
        info["warning"] = "effective depolarizing rate is zero; no path-weight decay"
    payload = {"version": _version_string(), "config": {"channel": spec}, "result": info}
    _emit(args, payload)
    return 0


def cmd_propagate(args) -> int:
    cfg = _load_config(args)
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    circuit, resolved_circuit = _resolve_circuit(cfg, seed)
    observable = _resolve_observable(cfg, circuit.n)
    state = _resolve_state(cfg.get("state"), circuit.n)
    trunc = _resolve_trunc(cfg)
    payload = _base_payload(args, cfg, seed)
    payload["config"]["circuit"] = resolved_circuit

    if "k_sweep" in cfg:
        rows = []
        for k in cfg["k_sweep"]:
            t0 = time.perf_counter()
            res = backpropagate(
                circuit,
                observable,
                TruncationConfig(
                    path_weight_cutoff=int(k),
                    coeff_cutoff=trunc.coeff_cutoff,
                    xy_count_cutoff=trunc.xy_count_cutoff,
                    current_weight_cutoff=trunc.current_weight_cutoff,
                ),
                max_terms=args.max_terms,
            )
            rows.append(
                {
                    "k": int(k),
                    "expectation": expectation(res, state),
                    "surviving_paths": res.stats.surviving_path_count,
                    "wall_time": time.perf_counter() - t0,
                }
            )
        payload["columns"] = ["k", "expectation", "surviving_paths", "wall_time"]
        _emit(args, payload, rows)
        return 0

    res = backpropagate(circuit, observable, trunc, max_terms=args.max_terms)
    value = expectation(res, state)
    if math.isnan(value) or math.isinf(value):
        raise FloatingPointError("propagation produced a non-finite expectation")
    payload["result"] = {"expectation": value, "stats": res.stats.to_json_obj()}
    _emit(args, payload)
    return 0


def cmd_oracle(args) -> int:
    cfg = _load_config(args)
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    circuit, resolved_circuit = _resolve_circuit(cfg, seed)
    observable = _resolve_observable(cfg, circuit.n)
    state = _resolve_state(cfg.get("state"), circuit.n)
    payload = _base_payload(args, cfg, seed)
    payload["config"]["circuit"] = resolved_circuit
    payload["result"] = {"expectation": simulate_exact(circuit, state, observable)}
    _emit(args, payload)
    return 0


def cmd_estimate(args) -> int:
    cfg = _load_config(args)
    est = cfg.get("estimator")
    if not isinstance(est, dict):
        raise ConfigError("config needs an 'estimator' object")
    seed = args.seed if args.seed is not None else int(est.get("seed", cfg.get("seed", 0)))
    spec = cfg.get("circuit")
    if not isinstance(spec, dict):
        raise ConfigError("config needs a 'circuit' object")
    template = _circuit_template(spec)
    observable = _resolve_observable(cfg, template.n)
    kind = est.get("functional")
    state = _resolve_state(est.get("state"), template.n)
    if kind == "variance":
        functional = Variance(state)
    elif kind == "trunc_mse":
        functional = TruncMSE(int(est["k"]), state)
    elif kind == "trunc_frobenius":
        functional = TruncFrobenius(int(est["k"]))
    else:
        raise ConfigError(f"unknown functional {kind!r}")
    samples = int(est.get("samples", 100_000))
    result = mc_estimate(template, observable, functional, samples, seed)
    payload = _base_payload(args, cfg, seed)
    payload["result"] = result.to_json_obj()
    _emit(args, payload)
    return 0


def cmd_sweep(args) -> int:
    cfg = _load_config(args)
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    lattice = lattice_from_json(cfg["lattice"])
    rows = sweep_table(
        lattice,
        int(cfg["blocks"]),  # ansatz depth is always explicit

        cfg["noise_kind"],
        [float(v) for v in cfg["noise_grid"]],
        [int(k) for k in cfg["k_grid"]],
        cfg.get("functional", "trunc_frobenius"),
        int(cfg.get("samples", 100_000)),
        seed,
        threads=args.threads,
    )
    payload = _base_payload(args, cfg, seed)
    payload["columns"] = ["noise_param", "k", "estimate", "stderr", "theory_bound"]
    if args.format == "json":
        payload["result"] = rows
        _emit(args, payload)
    else:
        _emit(args, payload, rows)
    return 0


def cmd_dynamics(args) -> int:
    cfg = _load_config(args)
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    lattice = lattice_from_json(cfg["lattice"])
    noise = None if cfg.get("noise") is None else channel_from_json(cfg["noise"])
    rows = dynamics_series(
        lattice,
        float(cfg["J"]),
        float(cfg["h"]),
        float(cfg["dt"]),
        int(cfg.get("steps", 0)),
        noise,
        _resolve_trunc(cfg),
        cfg.get("noise_placement", "per_layer"),
        max_terms=args.max_terms,
    )
    payload = _base_payload(args, cfg, seed)
    payload["columns"] = ["t", "expectation", "surviving_paths"]
    if args.format == "json":
        payload["result"] = rows
        _emit(args, payload)
    else:
        _emit(args, payload, rows)
    return 0


# --- entry point --------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="paulipath",
        description="Pauli propagation for noisy circuits: truncated backpropagation, "
        "Monte Carlo error certification and an exact dense oracle.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON configuration file")
    common.add_argument("--out", help="output file (default: stdout)")
    common.add_argument("--seed", type=int, default=None, help="overrides the config seed")
    common.add_argument(
        "--threads", type=int, default=os.cpu_count(), help="worker threads for grids"
    )
    common.add_argument(
        "--max-terms",
        type=int,
        default=None,
        help="abort (exit 3) if the propagation frontier outgrows this many terms",
    )
    common.add_argument("--format", choices=("csv", "json"), default="json")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("channel-info", parents=[common], help="analyze one noise channel")
    p.add_argument("--channel", help="inline channel JSON")
    p.add_argument("--eta", type=float, default=None, help="scrambler slack for dephasing")
    p.set_defaults(fn=cmd_channel_info)

    for name, fn, help_text in (
        ("propagate", cmd_propagate, "truncated backpropagation of an observable"),
        ("estimate", cmd_estimate, "Monte Carlo second-moment estimation"),
        ("oracle", cmd_oracle, "exact dense simulation (small n)"),
        ("sweep", cmd_sweep, "truncation-order sweep over a noise grid"),
        ("dynamics", cmd_dynamics, "transverse-field Ising time series"),
    ):
        p = sub.add_parser(name, parents=[common], help=help_text)
        p.set_defaults(fn=fn)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, InvalidChannelError, QubitCountMismatch, KeyError,
            json.JSONDecodeError, UnsupportedEnsembleError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (InfeasibleSizeError, FrontierOverflowError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (FloatingPointError, OverflowError, ZeroDivisionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
