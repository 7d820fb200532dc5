"""Time evolution of states under a :class:`HamiltonianSpec`.

The interval between consecutive envelope breakpoints is integrated with a
fourth-order commutator-free Magnus step (``scheme="cf4"``), one of two
symmetric compositions of it that reach sixth order (``"cf6-suzuki"``,
the default, and ``"cf6-jump"``), or the exponential midpoint rule.  Each
step exponential is applied by a Taylor series run to machine precision,
so the only discretisation error is the Magnus truncation.  Intervals without explicit
time dependence are propagated with one dense matrix exponential.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from . import _kernels
from .hamiltonians import HamiltonianSpec
from .hilbert import SpaceDescriptor, StateVector, SubspaceProjector, dfs4_projector

DENSE_LIMIT = 4096
MAX_SAMPLES = 5000
_SCHEMES = {"midpoint": _kernels.SCHEME_MIDPOINT, "cf4": _kernels.SCHEME_CF4,
            "cf6-jump": _kernels.SCHEME_JUMP6, "cf6-suzuki": _kernels.SCHEME_SUZUKI6}


class EvolutionError(RuntimeError):
    pass


class NonHermitianError(EvolutionError):
    pass


@dataclass(frozen=True)
class EvolveOptions:
    """Integrator settings.

    ``substeps_per_mode_period`` bounds the step by the fastest oscillation
    in the active channels.  ``record_stride`` is the number of steps
    between recorded samples; ``None`` picks a stride giving at most
    ``max_samples`` samples.
    """

    max_step: float = math.inf
    substeps_per_mode_period: int = 10
    tolerance: float = 1e-9
    record_stride: int | None = None
    scheme: str = "cf6-suzuki"
    max_samples: int = MAX_SAMPLES
    exact_static: bool = True
    max_steps: int = 50_000_000

    def __post_init__(self):
        if not self.max_step > 0:
            raise ValueError("max_step must be positive")
        if not 0 < self.tolerance <= 1e-3:
            raise ValueError("tolerance must lie in (0, 1e-3]")
        if self.substeps_per_mode_period < 1:
            raise ValueError("substeps_per_mode_period must be >= 1")
        if self.scheme not in _SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.record_stride is not None and self.record_stride < 1:
            raise ValueError("record_stride must be >= 1")

    def refined(self, factor: int = 2) -> "EvolveOptions":
        from dataclasses import replace
        return replace(self, substeps_per_mode_period=self.substeps_per_mode_period * factor,
                       max_step=self.max_step / factor)


@dataclass
class SimResult:
    times: np.ndarray
    labels: tuple[str, ...]
    populations: np.ndarray
    final_state: StateVector
    dfs4_weight: np.ndarray | None = None
    fidelity: float | None = None
    norm_drift: float = 0.0
    steps: int = 0
    wall_time: float = 0.0
    extra: dict = field(default_factory=dict)

    def population(self, label: str) -> np.ndarray:
        return self.populations[:, self.labels.index(label)]

    def max_population(self) -> dict[str, float]:
        return {lab: float(self.populations[:, k].max()) for k, lab in enumerate(self.labels)}


# -- compiled representation -------------------------------------------------


@dataclass(frozen=True, eq=False)
class _Compiled:
    indptr: np.ndarray
    col: np.ndarray
    val: np.ndarray
    slot: np.ndarray
    eop: np.ndarray
    emode: np.ndarray
    nop: int
    ch: tuple[np.ndarray, ...]
    norms: np.ndarray


def _compile(spec: HamiltonianSpec, channels=None) -> _Compiled:
    """Flatten the operators referenced by ``channels`` (default: all) into kernel arrays."""
    chans = list(spec.channels if channels is None else channels)
    used = sorted({c.op for c in chans})
    remap = {k: i for i, k in enumerate(used)}
    rows, cols, vals, ops, modes = [], [], [], [], []
    norms = np.zeros(max(len(spec.operators), 1))
    for k in used:
        m, herm = spec.operators[k], spec.hermitian[k]
        c = m.tocoo()
        if herm:
            if abs(m - m.conj().T).max() > 1e-12 if m.nnz else False:
                raise NonHermitianError(f"operator {spec.keys[k]} is flagged Hermitian but is not")
            parts = [(c.row, c.col, c.data, 2)]
        else:
            parts = [(c.row, c.col, c.data, 0), (c.col, c.row, np.conj(c.data), 1)]
        for r, cc, v, md in parts:
            rows.append(r)
            cols.append(cc)
            vals.append(v)
            ops.append(np.full(len(v), remap[k]))
            modes.append(np.full(len(v), md))
        norms[k] = sp.linalg.norm(m, 1) if m.nnz else 0.0
    dim = spec.space.dim
    if rows:
        row = np.concatenate(rows).astype(np.int64)
        col = np.concatenate(cols).astype(np.int64)
        # distinct positions in row-major order; contributions point at their slot
        pos, slot = np.unique(row * dim + col, return_inverse=True)
        urow, ucol = np.divmod(pos, dim)
        indptr = np.zeros(dim + 1, np.int64)
        np.add.at(indptr, urow + 1, 1)
        arrs = [np.cumsum(indptr), ucol.astype(np.int64), np.concatenate(vals).astype(complex),
                slot.ravel().astype(np.int64), np.concatenate(ops).astype(np.int64),
                np.concatenate(modes).astype(np.int64)]
    else:
        arrs = [np.zeros(dim + 1, np.int64), np.zeros(0, np.int64), np.zeros(0, complex),
                np.zeros(0, np.int64), np.zeros(0, np.int64), np.zeros(0, np.int64)]
    ch = (np.array([remap[c.op] for c in chans], dtype=np.int64),
          np.array([c.amplitude for c in chans], dtype=complex),
          np.array([c.omega for c in chans], dtype=float),
          np.array([c.t_start for c in chans], dtype=float),
          np.array([c.t_end for c in chans], dtype=float),
          np.array([c.ramp for c in chans], dtype=float),
          np.array([c.power for c in chans], dtype=np.int64))
    return _Compiled(*[np.ascontiguousarray(a) for a in arrs], max(len(used), 1), ch, norms)


def _active(spec: HamiltonianSpec, t0: float, t1: float):
    return [c for c in spec.channels if c.t_start < t1 and c.t_end > t0]


def _step_plan(spec: HamiltonianSpec, comp: _Compiled, t0: float, t1: float,
               opts: EvolveOptions) -> tuple[int, float]:
    T = t1 - t0
    active = _active(spec, t0, t1)
    h = min(T, opts.max_step)
    if active:
        wmax = max(abs(c.omega) for c in active)
        sub = opts.substeps_per_mode_period
        if wmax > 0:
            h = min(h, 2 * math.pi / wmax / sub)
        ramps = [c.ramp for c in active if c.ramp > 0]
        if ramps:
            h = min(h, min(ramps) / sub)
        hnorm = sum(abs(c.amplitude) * comp.norms[c.op] * (1 if spec.hermitian[c.op] else 2) for c in active)
        if hnorm > 0:
            h = min(h, 2.0 / hnorm)
    n = max(1, math.ceil(T / h * (1 - 1e-12)))
    if n > opts.max_steps or T / n < 1e-15 * max(abs(t1), 1e-300):
        raise EvolutionError(f"step size underflow on [{t0}, {t1}]: {n} steps required")
    return n, T / n


# -- block evolution ----------------------------------------------------------


Recorder = Callable[[float, np.ndarray], None]


def _evolve_interval(x: np.ndarray, spec: HamiltonianSpec, comp: _Compiled, t0: float, t1: float,
                     opts: EvolveOptions, stride: int | None, record: Recorder | None) -> int:
    """Advance ``x`` (shape ``(k, dim)``, in place) from ``t0`` to ``t1``; returns step count."""
    if t1 <= t0:
        return 0
    active = _active(spec, t0, t1)
    if not active:
        if record is not None:
            record(t1, x)
        return 0
    if opts.exact_static and spec.is_static(t0, t1) and spec.space.dim <= DENSE_LIMIT:
        tm = 0.5 * (t0 + t1)
        H = spec.at(tm).toarray()
        nrec = 1 if stride is None else max(1, min(opts.max_samples, 200))
        dt = (t1 - t0) / nrec
        U = sla.expm(-1j * dt * H)
        for k in range(nrec):
            x[:] = x @ U.T
            if record is not None:
                record(t0 + (k + 1) * dt, x)
        return nrec
    n, h = _step_plan(spec, comp, t0, t1, opts)
    comp = _compile(spec, active)
    scheme = _SCHEMES[opts.scheme]
    weights = _kernels.composition_weights(scheme)
    chunk = n if (record is None or stride is None) else stride
    done = 0
    while done < n:
        m = min(chunk, n - done)
        _kernels.evolve_steps(comp.indptr, comp.col, comp.val, comp.slot, comp.eop, comp.emode, comp.nop,
                              *comp.ch, t0 + done * h, h, m, x, scheme, weights)
        done += m
        if record is not None and (done == n or stride is not None):
            record(t1 if done == n else t0 + done * h, x)
    return n


def _as_block(states: Sequence[StateVector] | np.ndarray, space: SpaceDescriptor) -> np.ndarray:
    if isinstance(states, np.ndarray):
        x = np.array(states, dtype=complex, order="C")
        return x.reshape(-1, space.dim)
    return np.ascontiguousarray(np.stack([s.amplitudes for s in states]).astype(complex))


def _total_steps(spec, comp, cuts, opts) -> int:
    total = 0
    for a, b in zip(cuts[:-1], cuts[1:]):
        if b > a and _active(spec, a, b) and not (opts.exact_static and spec.is_static(a, b)
                                                  and spec.space.dim <= DENSE_LIMIT):
            total += _step_plan(spec, comp, a, b, opts)[0]
    return total


def _cuts(spec: HamiltonianSpec, t0: float, t1: float, extra: Sequence[float] = ()) -> list[float]:
    pts = {t0, t1}
    pts.update(t for t in spec.breakpoints() if t0 < t < t1)
    pts.update(t for t in extra if t0 < t < t1)
    tol = 1e-12 * max(abs(t0), abs(t1), 1e-300)
    out = []
    for t in sorted(pts):
        if out and t - out[-1] <= tol:
            if t == t1:
                out[-1] = t1
            continue
        out.append(t)
    return out


@dataclass
class _Tracker:
    space: SpaceDescriptor
    labels: tuple[str, ...]
    leak: SubspaceProjector | None
    times: list = field(default_factory=list)
    pops: list = field(default_factory=list)
    weights: list = field(default_factory=list)

    def __call__(self, t: float, x: np.ndarray):
        v = x[0]
        probs = np.sum(np.abs(v.reshape(self.space.qubit_dim, self.space.fock_dim)) ** 2, axis=1)
        self.times.append(t)
        self.pops.append([probs[int(lab, 2)] for lab in self.labels])
        if self.leak is not None:
            self.weights.append(float(self.leak.weight(v)))


def _default_labels(space: SpaceDescriptor) -> tuple[str, ...]:
    return tuple(space.labels()) if space.n_qubits <= 6 else ()


def _default_leak(space: SpaceDescriptor) -> SubspaceProjector | None:
    return dfs4_projector(space) if space.n_qubits == 4 else None


def run_timeline(x: np.ndarray, spec: HamiltonianSpec, t0: float, t1: float, opts: EvolveOptions,
                 events: Sequence[tuple[float, np.ndarray]] = (), tracker: _Tracker | None = None) -> int:
    """Evolve the block ``x`` in place, applying ``events`` (time, dense unitary) on the way."""
    if not t1 >= t0:
        raise EvolutionError("t1 must not precede t0")
    comp = _compile(spec)
    for t in (t0 + 0.37 * (t1 - t0), t0 + 0.81 * (t1 - t0)):
        if spec.antihermitian_residue(t) > 1e-12:
            raise NonHermitianError("assembled Hamiltonian is not Hermitian")
    ev_times = sorted({t for t, _ in events})
    cuts = _cuts(spec, t0, t1, ev_times)
    stride = None
    if tracker is not None:
        total = _total_steps(spec, comp, cuts, opts)
        stride = opts.record_stride or max(1, math.ceil(total / max(opts.max_samples - 2 * len(cuts), 1)))
        tracker(t0, x)
    steps = 0
    pending = sorted(events, key=lambda e: e[0])
    for a, b in zip(cuts[:-1], cuts[1:]):
        while pending and pending[0][0] <= a:
            x[:] = x @ pending.pop(0)[1].T
            if tracker is not None:
                tracker(a, x)
        steps += _evolve_interval(x, spec, comp, a, b, opts, stride, tracker)
    while pending:
        x[:] = x @ pending.pop(0)[1].T
        if tracker is not None:
            tracker(t1, x)
    return steps


def evolve(state: StateVector, spec: HamiltonianSpec, t0: float, t1: float,
           opts: EvolveOptions | None = None, target: StateVector | None = None,
           labels: Sequence[str] | None = None, leakage: SubspaceProjector | None | str = "auto",
           events: Sequence[tuple[float, np.ndarray]] = ()) -> SimResult:
    """Solve ``i d/dt psi = H(t) psi`` from ``t0`` to ``t1``."""
    opts = opts or EvolveOptions()
    if spec.space != state.space:
        raise EvolutionError("state and Hamiltonian live in different spaces")
    if not t1 > t0 and not (t1 == t0 and not spec.channels):
        raise EvolutionError("t1 must exceed t0")
    space = state.space
    labs = tuple(labels) if labels is not None else _default_labels(space)
    leak = _default_leak(space) if leakage == "auto" else leakage
    tr = _Tracker(space, labs, leak)
    x = _as_block([state], space)
    t_wall = time.perf_counter()
    steps = run_timeline(x, spec, t0, t1, opts, events, tr)
    wall = time.perf_counter() - t_wall
    final = StateVector(x[0].copy(), space)
    drift = abs(final.norm - state.norm)
    if drift > opts.tolerance:
        raise EvolutionError(f"norm drift {drift:.3e} exceeds tolerance {opts.tolerance:.1e}")
    fid = None
    if target is not None:
        from .hilbert import fidelity
        fid = fidelity(final.normalized(), target)
    return SimResult(np.array(tr.times), labs, np.array(tr.pops).reshape(len(tr.times), len(labs)),
                     final, np.array(tr.weights) if leak is not None else None, fid, drift, steps, wall)


def evolve_block(states: np.ndarray, spec: HamiltonianSpec, t0: float, t1: float,
                 opts: EvolveOptions | None = None,
                 events: Sequence[tuple[float, np.ndarray]] = ()) -> np.ndarray:
    """Evolve the rows of ``states`` together and return the final block."""
    x = _as_block(states, spec.space)
    run_timeline(x, spec, t0, t1, opts or EvolveOptions(), events)
    return x


def unitary_of(spec: HamiltonianSpec, t0: float, t1: float, opts: EvolveOptions | None = None,
               events: Sequence[tuple[float, np.ndarray]] = ()) -> np.ndarray:
    """Dense propagator from ``t0`` to ``t1``; column ``k`` is the image of basis state ``k``."""
    dim = spec.space.dim
    if dim > DENSE_LIMIT:
        raise EvolutionError(f"dimension {dim} exceeds dense limit {DENSE_LIMIT}")
    x = np.eye(dim, dtype=complex)
    if t1 > t0:
        run_timeline(x, spec, t0, t1, opts or EvolveOptions(), events)
    return x.T.copy()


def unitarity_residue(u: np.ndarray) -> float:
    return float(np.abs(u.conj().T @ u - np.eye(u.shape[0])).max())
