"""Composite runs behind the CLI: truncation-order sweeps and time series."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .channels import (
    NormalFormChannel,
    contraction_sq_worstcase,
    make_amplitude_damping,
    make_dephasing,
    make_depolarizing,
)
from .circuits import Lattice, build_hva, build_trotter_tfim
from .montecarlo import TruncFrobenius, TruncMSE, estimate_many
from .pauli import PauliString, PauliSum, ProductState, expectation_product_state
from .propagation import TruncationConfig, backpropagate, expectation


def center_z(lattice: Lattice) -> PauliSum:
    n = lattice.n_sites
    return PauliSum(n, [(PauliString.single(n, lattice.center(), "Z"), 1.0)])


def theory_contraction_sq(kind: str, param: float, ch: NormalFormChannel) -> float:
    """Squared per-site damping used for reference decay curves.

    Relaxation noise gets its worst-case bound 1 - g + g^2; dephasing the
    quarter-scrambler mean (1 + (1-2p)^2)/2; uniform damping the exact
    (1-p)^2; anything else falls back to the worst-case bound.
    """
    if kind == "amplitude_damping":
        return 1.0 - param + param * param
    if kind == "dephasing":
        return (1.0 + (1.0 - 2.0 * param) ** 2) / 2.0
    if kind == "depolarizing":
        return (1.0 - param) ** 2
    return contraction_sq_worstcase(ch)


_KIND_BUILDERS = {
    "amplitude_damping": make_amplitude_damping,
    "dephasing": make_dephasing,
    "depolarizing": make_depolarizing,
}


def sweep_table(
    lattice: Lattice,
    blocks: int,
    noise_kind: str,
    noise_grid: list[float],
    k_grid: list[int],
    functional: str,
    samples: int,
    seed: int,
    state: ProductState | None = None,
    threads: int | None = None,
    noise_placement: str = "per_block",
) -> list[dict]:
    """Monte Carlo truncation-error grid over (noise strength, cutoff order).

    Each noise point runs one sampling walk evaluated at every cutoff;
    every row carries the matching reference curve value coef^k.  Noise
    defaults to once per ansatz block so the gates between noise rounds
    scramble every qubit, which is what the reference decay curve
    assumes.
    """
    if noise_kind not in _KIND_BUILDERS:
        raise ValueError(f"sweep supports kinds {sorted(_KIND_BUILDERS)}, not {noise_kind!r}")
    if functional not in ("trunc_frobenius", "trunc_mse"):
        raise ValueError("sweep functional must be trunc_frobenius or trunc_mse")
    observable = center_z(lattice)

    def run_point(item: tuple[int, float]) -> list[dict]:
        idx, param = item
        ch = _KIND_BUILDERS[noise_kind](param)
        template = build_hva(lattice, ch, blocks, noise_placement=noise_placement)
        if functional == "trunc_frobenius":
            fs = [TruncFrobenius(k) for k in k_grid]
        else:
            fs = [TruncMSE(k, state or ProductState.zeros(lattice.n_sites)) for k in k_grid]
        if not fs:
            return []
        sub = int(np.random.SeedSequence([seed, idx]).generate_state(1)[0])
        results = estimate_many(template, observable, fs, samples, sub)
        coef = theory_contraction_sq(noise_kind, param, ch)
        return [
            {
                "noise_param": param,
                "k": k,
                "estimate": r.mean,
                "stderr": r.standard_error,
                "theory_bound": coef**k,
            }
            for k, r in zip(k_grid, results)
        ]

    items = list(enumerate(noise_grid))
    if threads is not None and threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(run_point, items))
    else:
        chunks = [run_point(it) for it in items]
    return [row for chunk in chunks for row in chunk]


def dynamics_series(
    lattice: Lattice,
    j_coupling: float,
    h_field: float,
    dt: float,
    steps: int,
    noise,
    trunc: TruncationConfig,
    noise_placement: str = "per_layer",
    max_terms: int | None = None,
) -> list[dict]:
    """Center-site Z expectation after each evolution step, from the all-zero state.

    Row 0 is the initial value; row s backpropagates through the first s
    steps of the splitting sequence.
    """
    observable = center_z(lattice)
    state = ProductState.zeros(lattice.n_sites)
    rows = [
        {
            "t": 0.0,
            "expectation": expectation_product_state(observable, state),
            "surviving_paths": len(observable),
        }
    ]
    for s in range(1, steps + 1):
        circuit = build_trotter_tfim(
            lattice, j_coupling, h_field, dt, s, noise, noise_placement
        )
        res = backpropagate(circuit, observable, trunc, max_terms=max_terms)
        rows.append(
            {
                "t": s * dt,
                "expectation": expectation(res, state),
                "surviving_paths": res.stats.surviving_path_count,
            }
        )
    return rows
