"""Scenario model and wireless channel for multi-user, multi-server edge offloading.

A scenario fixes N user equipments (UEs), each holding one computation task,
and M edge servers (MECs) in a square service area.  The channel between a UE
and a MEC follows inverse-square path loss with optional small-scale fading,
so channel states vary per epoch while the scenario itself stays immutable.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

# Namespace keys for per-epoch channel generators, so channel draws are a pure
# function of (seed, epoch) and can be regenerated out of band.
_CHANNEL_NS = 0x0C


@dataclass(frozen=True)
class Task:
    """One computation task: input size in bits and required CPU cycles."""

    data_bits: float
    cycles: float

    def __post_init__(self) -> None:
        if self.data_bits <= 0 or self.cycles <= 0:
            raise ValueError("task size and cycle count must be positive")


@dataclass(frozen=True)
class UeSpec:
    """A user equipment: location, task, scheduling weight and local limits.

    ``f_local_max`` caps the local CPU frequency (cycles/s), ``p_max`` the
    transmit power in watts.  ``kappa`` and ``v`` parametrise the local
    computation power model p = kappa * f**v.
    """

    position: tuple[float, float]
    task: Task
    weight: float = 1.0
    f_local_max: float = 1e9
    p_max: float = 1.0
    kappa: float = 1e-27
    v: float = 3.0

    def __post_init__(self) -> None:
        if self.weight <= 0:
            raise ValueError("weight must be positive")
        if self.f_local_max <= 0 or self.p_max <= 0 or self.kappa <= 0:
            raise ValueError("local capability parameters must be positive")


@dataclass(frozen=True)
class MecSpec:
    """An edge server: location and total CPU frequency budget (cycles/s)."""

    position: tuple[float, float]
    f_max: float = 5e10

    def __post_init__(self) -> None:
        if self.f_max <= 0:
            raise ValueError("MEC frequency budget must be positive")


@dataclass(frozen=True)
class RadioParams:
    """Uplink radio parameters shared by all UE-MEC links.

    ``noise_w`` is the receiver noise power in watts, ``beta0`` the channel
    power gain at the 1 m reference distance.  ``fading`` selects the
    small-scale model: "exponential" draws unit-mean exponential power gains
    (Rayleigh amplitude), "deterministic" pins the gain factor to 1.
    """

    bandwidth_hz: float = 1e6
    noise_w: float = 1e-10
    beta0: float = 1e-3
    min_distance_m: float = 1.0
    fading: str = "exponential"

    def __post_init__(self) -> None:
        if min(self.bandwidth_hz, self.noise_w, self.beta0) <= 0:
            raise ValueError("radio parameters must be positive")
        if self.min_distance_m <= 0:
            raise ValueError("min_distance_m must be positive")
        if self.fading not in ("exponential", "deterministic"):
            raise ValueError(f"unknown fading mode {self.fading!r}")


@dataclass(frozen=True)
class Scenario:
    """Immutable deployment: UEs, MECs, radio parameters and the service area."""

    ues: tuple[UeSpec, ...]
    mecs: tuple[MecSpec, ...]
    radio: RadioParams = RadioParams()
    area_m: float = 50.0
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if not self.ues or not self.mecs:
            raise ValueError("scenario needs at least one UE and one MEC")
        for node in (*self.ues, *self.mecs):
            x, y = node.position
            if not (0.0 <= x <= self.area_m and 0.0 <= y <= self.area_m):
                raise ValueError(f"position {node.position} outside area")

    @property
    def n_ues(self) -> int:
        return len(self.ues)

    @property
    def n_mecs(self) -> int:
        return len(self.mecs)


@dataclass(frozen=True)
class ChannelState:
    """Channel power gains for one epoch, shape (N, M)."""

    gains: np.ndarray
    epoch: int

    def __post_init__(self) -> None:
        g = np.asarray(self.gains, dtype=float)
        if g.ndim != 2:
            raise ValueError("gains must be an N x M matrix")
        if not np.all(np.isfinite(g)) or np.any(g <= 0):
            raise ValueError("channel gains must be positive and finite")
        object.__setattr__(self, "gains", g)


@dataclass(frozen=True)
class OffloadDecision:
    """Placement vector: entry i is 0 for local execution, j in 1..M for MEC j."""

    assign: np.ndarray
    n_mecs: int

    def __post_init__(self) -> None:
        a = np.asarray(self.assign, dtype=np.int64)
        if a.ndim != 1:
            raise ValueError("assign must be a length-N vector")
        if np.any(a < 0) or np.any(a > self.n_mecs):
            raise ValueError("assignments must lie in {0..M}")
        object.__setattr__(self, "assign", a)

    def to_matrix(self) -> np.ndarray:
        """Binary placement matrix of shape (N, M+1); row i one-hot at assign[i]."""
        n = self.assign.shape[0]
        mat = np.zeros((n, self.n_mecs + 1), dtype=np.int64)
        mat[np.arange(n), self.assign] = 1
        return mat

    @classmethod
    def from_matrix(cls, mat: np.ndarray) -> "OffloadDecision":
        mat = np.asarray(mat)
        if mat.ndim != 2 or not np.all(mat.sum(axis=1) == 1):
            raise ValueError("each row must contain exactly one placement")
        return cls(assign=np.argmax(mat, axis=1), n_mecs=mat.shape[1] - 1)


def distance(p: Sequence[float], q: Sequence[float]) -> float:
    """Euclidean distance between two planar points, in meters."""
    return float(np.hypot(p[0] - q[0], p[1] - q[1]))


def sample_fading(shape: tuple[int, ...], rng: np.random.Generator,
                  mode: str = "exponential") -> np.ndarray:
    """Draw small-scale power gains: unit-mean exponential, or all ones."""
    if mode == "deterministic":
        return np.ones(shape)
    if mode == "exponential":
        return rng.exponential(scale=1.0, size=shape)
    raise ValueError(f"unknown fading mode {mode!r}")


def channel_gain(beta0: float, fading_l: float | np.ndarray,
                 dist: float | np.ndarray, min_distance: float = 1.0) -> np.ndarray:
    """Channel power gain beta0 * l / R**2 with the distance clamped below.

    The clamp guards the inverse-square singularity when a UE sits on top of
    a MEC.
    """
    r = np.maximum(np.asarray(dist, dtype=float), min_distance)
    return beta0 * np.asarray(fading_l, dtype=float) / (r * r)


def distance_matrix(scenario: Scenario) -> np.ndarray:
    """UE-to-MEC distances, shape (N, M)."""
    ue = np.array([u.position for u in scenario.ues], dtype=float)
    mec = np.array([m.position for m in scenario.mecs], dtype=float)
    diff = ue[:, None, :] - mec[None, :, :]
    return np.sqrt((diff ** 2).sum(axis=2))


def _epoch_rng(seed: int, epoch: int, namespace: int = _CHANNEL_NS) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(namespace, epoch))
    return np.random.Generator(np.random.PCG64(ss))


def sample_channel_state(scenario: Scenario, epoch: int,
                         seed: int | None = None) -> ChannelState:
    """Sample the (N, M) gain matrix for one epoch.

    The draw is a pure function of (scenario, epoch, seed): the generator is
    derived from the seed and the epoch index, never from call order, so any
    epoch's channel can be regenerated independently.  ``seed`` defaults to
    the scenario's own ``rng_seed``.
    """
    entropy = scenario.rng_seed if seed is None else seed
    rng = _epoch_rng(entropy, epoch)
    dist = distance_matrix(scenario)
    fad = sample_fading(dist.shape, rng, scenario.radio.fading)
    gains = channel_gain(scenario.radio.beta0, fad, dist,
                         scenario.radio.min_distance_m)
    return ChannelState(gains=gains, epoch=epoch)


def data_rate(bandwidth_hz: float, power_w: float | np.ndarray,
              gain: float | np.ndarray, noise_w: float) -> np.ndarray:
    """Achievable uplink rate B * log2(1 + p*h/sigma^2) in bits/s."""
    snr = np.asarray(power_w, dtype=float) * np.asarray(gain, dtype=float) / noise_w
    return bandwidth_hz * np.log2(1.0 + snr)


def weighted_latency(scenario: Scenario, decision: OffloadDecision,
                     freqs: np.ndarray, powers: np.ndarray,
                     channel: ChannelState) -> float:
    """Total weighted task latency for a placement and a resource assignment.

    Offloaded tasks pay upload time D/r plus remote computation F/f; local
    tasks pay F/f only.  ``freqs`` holds the CPU frequency serving each UE
    (local or remote), ``powers`` the transmit power used for offloading.
    """
    assign = decision.assign
    if assign.shape[0] != scenario.n_ues or decision.n_mecs != scenario.n_mecs:
        raise ValueError("decision does not match scenario shape")
    freqs = np.asarray(freqs, dtype=float)
    if np.any(freqs <= 0):
        raise ValueError("every active placement needs a positive frequency")
    total = 0.0
    radio = scenario.radio
    for i, ue in enumerate(scenario.ues):
        j = assign[i]
        lat = ue.task.cycles / freqs[i]
        if j > 0:
            rate = data_rate(radio.bandwidth_hz, powers[i],
                            channel.gains[i, j - 1], radio.noise_w)
            lat += ue.task.data_bits / float(rate)
        total += ue.weight * lat
    return float(total)


# Canonical MEC layouts for 1..5 servers in a 50 m square, kept proportional
# for other area sizes.
_MEC_LAYOUTS = {
    1: ((25.0, 25.0),),
    2: ((10.0, 10.0), (40.0, 40.0)),
    3: ((10.0, 10.0), (25.0, 25.0), (40.0, 40.0)),
    4: ((10.0, 10.0), (10.0, 40.0), (40.0, 10.0), (40.0, 40.0)),
    5: ((10.0, 10.0), (10.0, 40.0), (25.0, 25.0), (40.0, 10.0), (40.0, 40.0)),
}


def default_mec_positions(n_mecs: int, area_m: float = 50.0) -> tuple[tuple[float, float], ...]:
    """Symmetric server layout for small M; random corners are avoided."""
    if n_mecs in _MEC_LAYOUTS:
        scale = area_m / 50.0
        return tuple((x * scale, y * scale) for x, y in _MEC_LAYOUTS[n_mecs])
    # fall back to a ring for larger M
    angles = np.linspace(0.0, 2.0 * np.pi, n_mecs, endpoint=False)
    r = 0.3 * area_m
    c = 0.5 * area_m
    return tuple((float(c + r * np.cos(a)), float(c + r * np.sin(a))) for a in angles)


def random_scenario(n_ues: int, n_mecs: int, *, area_m: float = 50.0,
                    rng_seed: int = 0,
                    mec_positions: Sequence[tuple[float, float]] | None = None,
                    radio: RadioParams = RadioParams(),
                    task: Task = Task(data_bits=8e5, cycles=1e9),
                    weights: Sequence[float] | tuple[float, float] | float = 1.0,
                    cycles_range: tuple[float, float] | None = None,
                    f_local_max: float = 1e9, p_max: float = 1.0,
                    f_mec_max: float = 5e10, kappa: float = 1e-27,
                    v: float = 3.0) -> Scenario:
    """Build a scenario with uniformly placed UEs.

    ``weights`` accepts a scalar (every UE), an explicit length-N sequence, or
    a (low, high) pair sampled uniformly from the scenario seed.  With
    ``cycles_range`` set, per-UE task sizes are drawn the same way and the
    template's ``cycles`` is ignored.
    """
    rng = _epoch_rng(rng_seed, 0, namespace=0x5C)
    pos = rng.uniform(0.0, area_m, size=(n_ues, 2))
    if isinstance(weights, (int, float)):
        w = np.full(n_ues, float(weights))
    elif len(tuple(weights)) == 2 and not isinstance(weights, list):
        lo, hi = weights  # type: ignore[misc]
        w = rng.uniform(float(lo), float(hi), size=n_ues)
    else:
        w = np.asarray(list(weights), dtype=float)
        if w.shape[0] != n_ues:
            raise ValueError("explicit weights must have one entry per UE")
    if cycles_range is not None:
        cyc = rng.uniform(float(cycles_range[0]), float(cycles_range[1]),
                          size=n_ues)
        tasks = [replace(task, cycles=float(c)) for c in cyc]
    else:
        tasks = [task] * n_ues
    if mec_positions is None:
        mec_positions = default_mec_positions(n_mecs, area_m)
    ues = tuple(
        UeSpec(position=(float(pos[i, 0]), float(pos[i, 1])), task=tasks[i],
               weight=float(w[i]), f_local_max=f_local_max, p_max=p_max,
               kappa=kappa, v=v)
        for i in range(n_ues)
    )
    mecs = tuple(MecSpec(position=(float(x), float(y)), f_max=f_mec_max)
                 for x, y in mec_positions)
    return Scenario(ues=ues, mecs=mecs, radio=radio, area_m=area_m,
                    rng_seed=rng_seed)


def reweighted(scenario: Scenario, rng: np.random.Generator,
               low: float = 0.5, high: float = 2.0) -> Scenario:
    """Copy of the scenario with freshly drawn UE weights (dynamic workloads)."""
    new_w = rng.uniform(low, high, size=scenario.n_ues)
    ues = tuple(replace(u, weight=float(new_w[i]))
                for i, u in enumerate(scenario.ues))
    return replace(scenario, ues=ues)
