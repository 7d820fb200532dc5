"""Scenario runners shared by the command line and the acceptance tests."""
from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .compiler import (
    CNOT_LOGICAL, HardwareProfile, PulseSchedule, compile_cnot, _exchange_unitary_2q, compile_exchange_pulse, gate_fidelity, logical_basis,
)
from .config import ScenarioConfig
from .hilbert import (
    SpaceDescriptor, StateVector, SubspaceProjector, excitation_sector, fidelity, superposition,
    thermal_probabilities,
)
from .noise import ControlErrors, DephasingModel, apply_addressing_error, collective_dephase, dephasing_survival
from .propagator import EvolveOptions, SimResult, evolve, evolve_block

THERMAL_CUTOFF = 1e-4


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


# -- schedules and states ---------------------------------------------------------


def scenario_schedule(cfg: ScenarioConfig) -> PulseSchedule:
    if cfg.schedule_path is not None:
        sched = PulseSchedule.from_dict(json.loads(Path(cfg.schedule_path).read_text(encoding="utf-8")))
    elif cfg.scenario == "cnot-demo":
        sched = compile_cnot(0, 1, cfg.profile, wrappers=cfg.wrappers)
    elif cfg.scenario in ("hot-exchange", "exchange"):
        sched = compile_exchange_pulse(0, 1, math.pi / 2, 0.0, cfg.profile, n_qubits=2)
    elif cfg.scenario == "empty":
        n = len(next(iter(cfg.initial.amplitudes)))
        sched = PulseSchedule.empty(cfg.profile, n)
    else:
        raise ValueError(f"scenario {cfg.scenario!r} has no pulse schedule")
    if cfg.addressing_error > 0:
        sched = apply_addressing_error(sched, ControlErrors(cfg.addressing_error, mode=cfg.addressing_mode))
    return sched


def initial_ensemble(cfg: ScenarioConfig, space: SpaceDescriptor) -> list[tuple[float, StateVector]]:
    """Pure initial states with weights; a thermal mode gives one state per Fock level."""
    init = cfg.initial
    for lab in init.amplitudes:
        space.check_label(lab)
    if init.thermal_nbar is None:
        return [(1.0, superposition(space, init.amplitudes, init.fock))]
    p = thermal_probabilities(init.thermal_nbar, space.fock_dim)
    keep = [(float(w), n) for n, w in enumerate(p) if w >= THERMAL_CUTOFF]
    total = sum(w for w, _ in keep)
    return [(w / total, superposition(space, init.amplitudes, n)) for w, n in keep]


def ideal_target(schedule: PulseSchedule, state: StateVector, opts: EvolveOptions | None = None) -> StateVector:
    """Expected output: the declared logical action when the input is encoded, else effective dynamics."""
    space = state.space
    q = state.qubit_amplitudes()
    if schedule.logical_action is not None and schedule.n_qubits % 2 == 0:
        idx = [int(lab, 2) for lab in logical_basis(schedule.pairs)]
        inside = np.sum(np.abs(q[idx]) ** 2)
        if abs(inside - np.sum(np.abs(q) ** 2)) < 1e-12:
            out = np.zeros_like(q)
            out[idx] = schedule.logical_action @ q[idx]
            return StateVector(out.ravel(), space)
    if schedule.duration == 0 and not schedule.events(space):
        return state
    clean = schedule.map_blocks(lambda b: replace(b, pulses=tuple(
        replace(p, targets=p.nominal_targets) for p in b.pulses)))
    x = evolve_block(state.amplitudes[None, :], clean.hamiltonian(space, "effective"), 0.0,
                     clean.duration, opts, clean.events(space))
    return StateVector(x[0], space)


def options(cfg: ScenarioConfig) -> EvolveOptions:
    return EvolveOptions(substeps_per_mode_period=cfg.substeps, scheme=cfg.scheme)


# -- simulate ----------------------------------------------------------------------


@dataclass
class SimulationOutput:
    times: np.ndarray
    labels: tuple[str, ...]
    populations: np.ndarray
    dfs4_weight: np.ndarray | None
    fidelity: float
    summary: dict


def simulate(cfg: ScenarioConfig, schedule: PulseSchedule | None = None) -> SimulationOutput:
    sched = schedule if schedule is not None else scenario_schedule(cfg)
    space = sched.space()
    n_init = len(next(iter(cfg.initial.amplitudes)))
    if n_init != space.n_qubits:
        raise ValueError(f"initial labels have {n_init} qubits, schedule needs {space.n_qubits}")
    labels = tuple(cfg.track) if cfg.track else tuple(space.labels())
    for lab in labels:
        space.check_label(lab)
    opts = options(cfg)
    ens = initial_ensemble(cfg, space)
    rng = np.random.default_rng(cfg.seed)
    spec = sched.hamiltonian(space, cfg.model)
    leak = _leakage_projector(space, ens[0][1])
    t_wall = time.perf_counter()
    acc_pop = acc_w = None
    fid = 0.0
    drift = 0.0
    runs = []
    res: SimResult | None = None
    for w, psi0 in ens:
        start = psi0
        if cfg.dephasing is not None:
            model = DephasingModel(**cfg.dephasing)
            groups = 1 if model.scope == "all" else space.n_qubits // 2
            start = collective_dephase(psi0, model.sample(rng, groups), model.scope)
        target = ideal_target(sched, psi0)
        if sched.duration > 0:
            res = evolve(start, spec, 0.0, sched.duration, opts, target=target, labels=labels, leakage=leak,
                         events=sched.events(space))
        else:
            final = start
            for _, u in sched.events(space):
                final = StateVector(u @ final.amplitudes, space)
            pops = np.array([[float(np.sum(np.abs(final.qubit_amplitudes()[int(lab, 2)]) ** 2)) for lab in labels]])
            res = SimResult(np.array([0.0]), labels, pops, final,
                            np.array([float(leak.weight(final.amplitudes))]) if leak is not None else None,
                            fidelity(final, target))
        acc_pop = w * res.populations if acc_pop is None else acc_pop + w * res.populations
        if res.dfs4_weight is not None:
            acc_w = w * res.dfs4_weight if acc_w is None else acc_w + w * res.dfs4_weight
        fid += w * res.fidelity
        drift = max(drift, res.norm_drift)
        runs.append({"fock": int(np.argmax(np.abs(psi0.qubit_amplitudes()).sum(axis=0))), "weight": w,
                     "fidelity": res.fidelity, "steps": res.steps})
    wall = time.perf_counter() - t_wall
    final = res.final_state
    summary = {
        "scenario": cfg.scenario,
        "profile": sched.profile.to_dict(),
        "model": cfg.model,
        "duration_s": sched.duration,
        "fidelity": fid,
        "leakage_final": None if acc_w is None else 1.0 - float(acc_w[-1]),
        "leakage_max": None if acc_w is None else 1.0 - float(np.min(acc_w)),
        "pulse_area_two_body_pi": sched.two_body_area(),
        "pulse_area_recoupling_pi": sched.recoupling_area(),
        "norm_drift": drift,
        "wall_clock_s": wall,
        "runs": runs,
        "final_state": None if len(ens) > 1 else {
            "n_qubits": space.n_qubits, "fock_dim": space.fock_dim,
            "re": np.real(final.amplitudes).tolist(), "im": np.imag(final.amplitudes).tolist()},
    }
    return SimulationOutput(res.times, labels, acc_pop, acc_w, fid, summary)


def _leakage_projector(space: SpaceDescriptor, psi: StateVector) -> SubspaceProjector | None:
    """Fixed-excitation sector of the input (the two-pair protected space for encoded inputs)."""
    probs = np.sum(np.abs(psi.qubit_amplitudes()) ** 2, axis=1)
    counts = {lab.count("1") for lab, p in zip(space.labels(), probs) if p > 0}
    if len(counts) != 1:
        return None
    return excitation_sector(space, counts.pop())


def write_populations_csv(path: Path, out: SimulationOutput) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["time_s", *out.labels, "dfs4_weight"])
        for k, t in enumerate(out.times):
            weight = "" if out.dfs4_weight is None else _fmt(out.dfs4_weight[k])
            w.writerow([_fmt(t), *(_fmt(p) for p in out.populations[k]), weight])


def write_json(path: Path, data: dict) -> None:
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")


# -- truth table ---------------------------------------------------------------------


def cnot_table(profile: HardwareProfile, wrappers: str = "physical", addressing_error: float = 0.0,
               model: str = "full", opts: EvolveOptions | None = None,
               schedule: PulseSchedule | None = None, addressing_mode: str = "amplitude") -> dict:
    """Fidelity of each logical basis input with its truth-table output (phonon ground state)."""
    sched = schedule if schedule is not None else compile_cnot(0, 1, profile, wrappers=wrappers)
    if addressing_error > 0:
        sched = apply_addressing_error(sched, ControlErrors(addressing_error, mode=addressing_mode))
    space = sched.space()
    inputs = logical_basis(2)
    x = np.zeros((4, space.dim), dtype=complex)
    for k, lab in enumerate(inputs):
        x[k, space.index(lab)] = 1.0
    t_wall = time.perf_counter()
    if sched.duration > 0:
        x = evolve_block(x, sched.hamiltonian(space, model), 0.0, sched.duration, opts, sched.events(space))
    else:
        for _, u in sched.events(space):
            x = x @ u.T
    idx = [space.index(lab) for lab in inputs]
    u = x[:, idx].T
    rows = []
    for k, lab in enumerate(inputs):
        expect = inputs[int(np.argmax(np.abs(CNOT_LOGICAL[:, k])))]
        f = float(abs(x[k, space.index(expect)]) ** 2)
        rows.append({"input": lab, "expected": expect, "fidelity": f,
                     "norm": float(np.linalg.norm(x[k]))})
    return {"rows": rows, "min_fidelity": min(r["fidelity"] for r in rows), "duration_s": sched.duration,
            "pulse_area_two_body_pi": sched.two_body_area(), "pulse_area_recoupling_pi": sched.recoupling_area(),
            "wall_clock_s": time.perf_counter() - t_wall, "wrappers": wrappers, "model": model,
            "addressing_error": addressing_error, "gate_fidelity": gate_fidelity(u, CNOT_LOGICAL),
            "logical_unitary": {"re": np.real(u).tolist(), "im": np.imag(u).tolist()}}


def hot_gate(profile: HardwareProfile, mode: str = "dual_field", fock_levels: Sequence[int] = range(4),
             angle: float = math.pi / 2, opts: EvolveOptions | None = None) -> list[dict]:
    """Two-ion exchange against ``exp(-i angle G)`` for each initial Fock level.

    ``logical_fidelity`` is taken on the pair subspace ``{|01>, |10>}``,
    ``fidelity`` on all four qubit states.  ``phase_00_11`` is the phase of
    ``|00>`` relative to ``|11>``, where a phonon-number dependent
    ``(Z_a + Z_b)`` shift shows up while the pair subspace is blind to it.
    """
    sched = compile_exchange_pulse(0, 1, angle, 0.0, profile, n_qubits=2, mode=mode)
    space = sched.space()
    labels = ["00", "01", "10", "11"]
    ref = _exchange_unitary_2q(angle, 0.0)
    spec = sched.hamiltonian(space, "full")
    rows = []
    for n in fock_levels:
        if n >= space.fock_dim:
            raise ValueError(f"Fock level {n} needs fock_dim > {n}")
        x = np.zeros((4, space.dim), dtype=complex)
        for k, lab in enumerate(labels):
            x[k, space.index(lab, n)] = 1.0
        x = evolve_block(x, spec, 0.0, sched.duration, opts)
        u = x[:, [space.index(lab, n) for lab in labels]].T
        rows.append({"fock": int(n), "fidelity": gate_fidelity(u, ref),
                     "logical_fidelity": gate_fidelity(u[1:3, 1:3], ref[1:3, 1:3]),
                     "phase_00_11": float(np.angle(u[0, 0] / u[3, 3]))})
    return rows


# -- memory ----------------------------------------------------------------------------


def dfs_memory(model: DephasingModel, samples: int = 10_000, seed: int | None = 0) -> dict:
    """Survival of an encoded two-pair superposition and of a bare ``|+>`` under the same noise."""
    enc_space = SpaceDescriptor(4, 1)
    encoded = superposition(enc_space, {"0101": 0.5, "0110": 0.5, "1001": 0.5, "1010": 0.5})
    bare = superposition(SpaceDescriptor(1, 1), {"0": 1.0, "1": 1.0})
    bare_model = replace(model, scope="all")
    return {"encoded": dephasing_survival(encoded, model, samples, seed),
            "bare": dephasing_survival(bare, bare_model, samples, seed),
            "samples": samples, "seed": seed, "distribution": model.distribution, "width": model.width,
            "scope": model.scope}


# -- sweeps ------------------------------------------------------------------------------

SWEEP_AXES = ("rabi", "eta", "delta", "nu", "ramp_time", "addressing_error", "fock_dim", "delta_ratio",
              "stark_rabi", "stark_detuning", "fock")


def _apply_axis(cfg: ScenarioConfig, axis: str, value: float) -> ScenarioConfig:
    if axis not in SWEEP_AXES:
        raise ValueError(f"unknown sweep axis {axis!r}; choose from {SWEEP_AXES}")
    if axis == "addressing_error":
        return replace(cfg, addressing_error=float(value))
    if axis == "fock":
        return replace(cfg, initial=replace(cfg.initial, fock=int(value), thermal_nbar=None))
    if axis == "fock_dim":
        return replace(cfg, profile=cfg.profile.with_(fock_dim=int(value)))
    if axis == "delta_ratio":
        return replace(cfg, profile=cfg.profile.with_(delta=float(value) * cfg.profile.eta * cfg.profile.rabi))
    return replace(cfg, profile=cfg.profile.with_(**{axis: float(value)}))


def _sweep_point(args) -> dict:
    cfg, axis, value = args
    c = _apply_axis(cfg, axis, value)
    out = simulate(c)
    return {"value": value, "fidelity": out.fidelity, "duration_s": out.summary["duration_s"],
            "leakage": out.summary["leakage_max"]}


def sweep(cfg: ScenarioConfig, axis: str, values: Sequence[float], workers: int = 1) -> list[dict]:
    if axis not in SWEEP_AXES:
        raise ValueError(f"unknown sweep axis {axis!r}; choose from {SWEEP_AXES}")
    jobs = [(cfg, axis, v) for v in values]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_sweep_point, jobs))
    return [_sweep_point(j) for j in jobs]


def write_sweep_csv(path: Path, axis: str, rows: list[dict]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow([axis, "fidelity", "duration_s", "leakage"])
        for r in rows:
            w.writerow([_fmt(r["value"]), _fmt(r["fidelity"]), _fmt(r["duration_s"]),
                        "" if r["leakage"] is None else _fmt(r["leakage"])])
