"""Experiment drivers: convergence sweeps, energy traces, zero-horizon limit.

Each driver runs the manufactured or unforced wave problem on (0, 1) and
emits a CSV table.  The manufactured problem prescribes the exact solution
u(x, t) = cos(2 pi t) sin(2 pi x); the matching forcing has the closed form

    f(x, t) = -cos(2 pi t) sin(2 pi x) (4 pi^2 + c),

where c = 2 int_{-delta}^{delta} gamma(s) (cos(2 pi s) - 1) ds comes from the
odd/even split of the kernel acting on the sine mode.

CSV schemas (one header line, comma separated):

    converge: alpha,delta,k,N,h,dt,T,e_u,order
    energy:   step,time,E,rel_drift
    limit:    alpha,k,h,dt,T,delta,linf_err,order

Independent cases may run in parallel (capped by the NLDG_THREADS
environment variable); results are merged in fixed configuration order so
identical invocations produce byte-identical CSV.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .assembly import SchemeVariant, SQuadConfig, stiffness_matrix
from .cn import EnergySample, init_state, n_steps_for, solve_to
from .quadrature import KernelSpec, forcing_coefficient, make_kernel
from .space import FieldCoeffs, l2_error, linf_error, make_space

__all__ = [
    "DeltaSpec",
    "StudyConfig",
    "ErrorTable",
    "manufactured_forcing",
    "run_convergence",
    "run_energy",
    "run_delta_limit",
    "observed_orders",
]

STUDY_KINDS = ("converge", "energy", "limit", "solve")

#: Desk-scale guard: sweeps beyond this many cells x steps need --full.
FULL_RUN_CELLS = 40
FULL_RUN_STEPS = 20000


@dataclass(frozen=True)
class DeltaSpec:
    """Horizon specification: absolute values or multiples of the mesh width.

    Multiple-of-h specs are resolved after N is fixed, so refinement sweeps
    shrink the horizon together with the mesh.
    """

    kind: str
    values: tuple[float, ...]

    def __post_init__(self):
        if self.kind not in ("fixed", "mult"):
            raise ValueError(f"delta spec kind must be 'fixed' or 'mult', got {self.kind!r}")
        if not self.values:
            raise ValueError("delta spec needs at least one value")
        if any(v <= 0 for v in self.values):
            raise ValueError("delta spec values must be positive")

    def resolve(self, value: float, h: float) -> float:
        return value * h if self.kind == "mult" else value


@dataclass(frozen=True)
class StudyConfig:
    kind: str
    alphas: tuple[float, ...]
    delta: DeltaSpec
    ks: tuple[int, ...]
    cells: tuple[int, ...]
    h_t: float
    T: float
    variant: SchemeVariant = SchemeVariant.FORWARD
    squad_nodes: int = 8
    out: Optional[str] = None
    energy_stride: int = 1
    full: bool = False
    a: float = 0.0
    b: float = 1.0

    def __post_init__(self):
        if self.kind not in STUDY_KINDS:
            raise ValueError(f"unknown study kind {self.kind!r}")
        if not self.alphas:
            raise ValueError("need at least one alpha")
        for alpha in self.alphas:
            if not 0.0 < alpha < 3.0:
                raise ValueError(f"kernel exponent alpha={alpha} must lie in (0, 3)")
        if not self.ks or any(k < 0 for k in self.ks):
            raise ValueError("polynomial degrees must be >= 0")
        if not self.cells or any(n < 2 for n in self.cells):
            raise ValueError("cell counts must be >= 2")
        if self.h_t <= 0.0:
            raise ValueError(f"time step dt={self.h_t} must be positive")
        n_steps_for(self.T, self.h_t)  # raises unless T is a step multiple
        if self.squad_nodes < 1:
            raise ValueError("squad_nodes must be >= 1")
        if self.energy_stride < 1:
            raise ValueError("energy stride must be >= 1")


@dataclass
class ErrorTable:
    """A study result table mirroring its CSV schema."""

    columns: tuple[str, ...]
    rows: list[tuple] = field(default_factory=list)

    def to_csv(self) -> str:
        lines = [",".join(self.columns)]
        for row in self.rows:
            lines.append(",".join(_format_value(v) for v in row))
        return "\n".join(lines) + "\n"

    def write_csv(self, path: str) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_csv())

    @classmethod
    def from_csv(cls, text: str) -> "ErrorTable":
        lines = [ln for ln in text.splitlines() if ln]
        columns = tuple(lines[0].split(","))
        rows = [tuple(_parse_value(tok) for tok in ln.split(",")) for ln in lines[1:]]
        return cls(columns=columns, rows=rows)


def _format_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _parse_value(tok: str):
    if tok == "":
        return None
    try:
        return int(tok)
    except ValueError:
        pass
    try:
        return float(tok)
    except ValueError:
        return tok


def manufactured_forcing(kernel: KernelSpec) -> Callable:
    """Forcing that makes cos(2 pi t) sin(2 pi x) the exact solution."""
    amp = 4.0 * math.pi**2 + forcing_coefficient(kernel)

    def forcing(x, t):
        return -np.cos(2.0 * math.pi * t) * np.sin(2.0 * math.pi * x) * amp

    return forcing


def _initial_sine(x):
    return np.sin(2.0 * math.pi * x)


def _zero(x):
    return np.zeros_like(np.asarray(x, dtype=float))


def _worker_count(n_cases: int) -> int:
    raw = os.environ.get("NLDG_THREADS", "1")
    try:
        cap = max(1, int(raw))
    except ValueError:
        cap = 1
    return min(cap, max(1, n_cases))


def _map_cases(fn: Callable, cases: list) -> list:
    """Run independent cases, preserving input order in the result list."""
    workers = _worker_count(len(cases))
    if workers == 1:
        return [fn(c) for c in cases]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, cases))


def _solve_case(cfg: StudyConfig, alpha: float, delta: float, k: int, n_cells: int,
                forced: bool, energy_every: Optional[int] = None
                ) -> tuple[FieldCoeffs, list[EnergySample]]:
    """Assemble and integrate one (alpha, delta, k, N) case."""
    space = make_space(cfg.a, cfg.b, n_cells, k)
    kernel = make_kernel(alpha, delta)
    squad = SQuadConfig(nodes_per_panel=cfg.squad_nodes)
    stiff = stiffness_matrix(space, kernel, squad, cfg.variant)
    forcing = manufactured_forcing(kernel) if forced else None
    state = init_state(space, stiff, space.mass, _initial_sine, _zero, forcing, cfg.h_t)
    stride = energy_every if energy_every is not None else n_steps_for(cfg.T, cfg.h_t)
    return solve_to(state, cfg.T, energy_every=stride)


def observed_orders(errors: list, meshes: list) -> list:
    """Convergence orders log(e_i / e_{i+1}) / log(r_i) between row pairs.

    ``meshes`` holds the resolution parameter (mesh width, horizon, ...)
    and must refine strictly; r_i is the refinement ratio m_i / m_{i+1}.
    Non-positive errors yield NaN as the undefined-order marker.
    """
    if len(errors) != len(meshes) or len(errors) < 2:
        raise ValueError("need matching error/mesh lists of length >= 2")
    for m0, m1 in zip(meshes, meshes[1:]):
        if not (m0 > m1 > 0.0):
            raise ValueError("mesh list must be strictly refining and positive")
    orders = []
    for e0, e1, m0, m1 in zip(errors, errors[1:], meshes, meshes[1:]):
        if e0 <= 0.0 or e1 <= 0.0:
            orders.append(float("nan"))
        else:
            orders.append(math.log(e0 / e1) / math.log(m0 / m1))
    return orders


def _flushing(table: ErrorTable, out: Optional[str]):
    """Context that writes whatever rows exist if the body raises."""
    class _Flusher:
        def __enter__(self):
            return table

        def __exit__(self, exc_type, exc, tb):
            if out is not None and (exc_type is None or table.rows):
                table.write_csv(out)
            return False

    return _Flusher()


def run_convergence(cfg: StudyConfig) -> ErrorTable:
    """Mesh refinement sweep of the manufactured problem; one row per N."""
    if cfg.kind != "converge":
        raise ValueError(f"run_convergence got a {cfg.kind!r} config")
    max_steps = n_steps_for(cfg.T, cfg.h_t)
    if not cfg.full and max(cfg.cells) > FULL_RUN_CELLS and max_steps > FULL_RUN_STEPS:
        raise ValueError(
            f"N={max(cfg.cells)} at {max_steps} steps exceeds desk scale; "
            "pass --full to run it"
        )
    table = ErrorTable(columns=("alpha", "delta", "k", "N", "h", "dt", "T", "e_u", "order"))

    groups = [(alpha, dval, k) for alpha in cfg.alphas
              for dval in cfg.delta.values for k in cfg.ks]

    def run_group(group):
        alpha, dval, k = group
        results = []
        for n_cells in cfg.cells:
            h = (cfg.b - cfg.a) / n_cells
            delta = cfg.delta.resolve(dval, h)
            final, _ = _solve_case(cfg, alpha, delta, k, n_cells, forced=True)
            exact_amp = math.cos(2.0 * math.pi * cfg.T)
            e_u = l2_error(final, lambda x: exact_amp * np.sin(2.0 * math.pi * x))
            results.append((n_cells, h, delta, e_u))
        return results

    with _flushing(table, cfg.out):
        for group, results in zip(groups, _map_cases(run_group, groups)):
            alpha, _, k = group
            errs = [r[3] for r in results]
            widths = [r[1] for r in results]
            orders = [None] + (observed_orders(errs, widths) if len(errs) >= 2 else [])
            for (n_cells, h, delta, e_u), order in zip(results, orders):
                table.rows.append(
                    (alpha, delta, k, n_cells, h, cfg.h_t, cfg.T, e_u, order))
    return table


def run_energy(cfg: StudyConfig) -> tuple[list[EnergySample], ErrorTable]:
    """Unforced run recording the discrete-energy trace of a single case."""
    if cfg.kind != "energy":
        raise ValueError(f"run_energy got a {cfg.kind!r} config")
    if len(cfg.alphas) != 1 or len(cfg.ks) != 1 or len(cfg.cells) != 1 \
            or len(cfg.delta.values) != 1:
        raise ValueError("energy study runs a single (alpha, delta, k, N) case")
    alpha, k, n_cells = cfg.alphas[0], cfg.ks[0], cfg.cells[0]
    h = (cfg.b - cfg.a) / n_cells
    delta = cfg.delta.resolve(cfg.delta.values[0], h)
    _, samples = _solve_case(cfg, alpha, delta, k, n_cells, forced=False,
                             energy_every=cfg.energy_stride)
    table = ErrorTable(columns=("step", "time", "E", "rel_drift"))
    e_ref = samples[0].E
    for s in samples:
        drift = 0.0 if e_ref == 0.0 else (s.E - e_ref) / e_ref
        table.rows.append((s.n, s.n * cfg.h_t, s.E, drift))
    if cfg.out is not None:
        table.write_csv(cfg.out)
    return samples, table


def run_delta_limit(cfg: StudyConfig) -> ErrorTable:
    """Horizon ladder study against the local wave solution.

    Solves the unforced nonlocal problem with sine initial data for each
    delta and records the max-norm difference from cos(2 pi T) sin(2 pi x),
    the local solution at the final time, with orders along the ladder.
    """
    if cfg.kind != "limit":
        raise ValueError(f"run_delta_limit got a {cfg.kind!r} config")
    if len(cfg.cells) != 1:
        raise ValueError("limit study uses a single mesh; vary delta instead")
    n_cells = cfg.cells[0]
    h = (cfg.b - cfg.a) / n_cells
    table = ErrorTable(columns=("alpha", "k", "h", "dt", "T", "delta", "linf_err", "order"))
    exact_amp = math.cos(2.0 * math.pi * cfg.T)

    def u_loc(x):
        return exact_amp * np.sin(2.0 * math.pi * x)

    groups = [(alpha, k) for alpha in cfg.alphas for k in cfg.ks]

    def run_group(group):
        alpha, k = group
        results = []
        for dval in cfg.delta.values:
            delta = cfg.delta.resolve(dval, h)
            final, _ = _solve_case(cfg, alpha, delta, k, n_cells, forced=False)
            results.append((delta, linf_error(final, u_loc)))
        return results

    with _flushing(table, cfg.out):
        for group, results in zip(groups, _map_cases(run_group, groups)):
            alpha, k = group
            deltas = [r[0] for r in results]
            errs = [r[1] for r in results]
            orders = [None] + (observed_orders(errs, deltas) if len(errs) >= 2 else [])
            for (delta, err), order in zip(results, orders):
                table.rows.append((alpha, k, h, cfg.h_t, cfg.T, delta, err, order))
    return table
