"""Entanglement link model, classical latency, topology and time-bin schedule.

All durations are integer nanoseconds.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ParameterError, TopologyLookupError

FIBER_KM_PER_S = 200_000.0
HOP_LATENCY_NS = 244_000
BASE_LATENCY_NS = 155_000

LAB_P_SUCC = 0.013
LAB_ATTEMPT_NS = 200_000
TABLE_EXPECTED_EPR_NS = 15_260_000


def propagation_ns(distance_km: float) -> float:
    return distance_km / FIBER_KM_PER_S * 1e9


def classical_latency(distance_km: float, hops: int) -> int:
    """One-way classical message latency, rounded to the nearest ns."""
    if distance_km < 0 or hops < 0:
        raise ParameterError("distance and hops must be non-negative")
    return int(round(hops * HOP_LATENCY_NS + BASE_LATENCY_NS + propagation_ns(distance_km)))


@dataclass(frozen=True)
class LinkParams:
    """Heralded link between two nodes with the station at the midpoint.

    ``scale`` multiplies the success probability; it is 1 for the bare
    formula and is set by :func:`calibrated_link` so that distance 0
    reproduces a target lab probability.
    """

    alpha: float = 0.2
    eta_ion: float = 0.5
    eta_fc: float = 0.7
    eta_det: float = 0.9
    eta_penalty: float = 0.2
    t_class_ns: int = 0
    t_prep_ns: int = 200_000
    distance_km: float = 0.0
    hops: int = 0
    scale: float = 1.0

    def __post_init__(self):
        for name in ("eta_ion", "eta_fc", "eta_det", "eta_penalty"):
            v = getattr(self, name)
            if not 0.0 < v <= 1.0:
                raise ParameterError(f"{name} must lie in (0, 1], got {v}")
        if self.alpha < 0 or self.distance_km < 0 or self.hops < 0:
            raise ParameterError("alpha, distance and hops must be non-negative")
        if self.t_class_ns < 0 or self.t_prep_ns <= 0:
            raise ParameterError("t_class must be >= 0 and t_prep > 0")
        if self.scale <= 0:
            raise ParameterError("scale must be positive")


def p_succ(link: LinkParams) -> float:
    eta = link.eta_ion * link.eta_fc * link.eta_det
    p = link.scale * 0.5 * link.eta_penalty * eta * eta
    p *= 10.0 ** (-(link.alpha / 10.0) * (link.distance_km / 2.0))
    if not 0.0 < p < 1.0:
        raise ParameterError(f"non-physical success probability {p}")
    return p


def t_cycle(link: LinkParams) -> int:
    return link.t_class_ns + link.t_prep_ns


def expected_epr_time(link: LinkParams) -> float:
    return t_cycle(link) / p_succ(link)


def calibrated_link(
    distance_km: float = 0.0,
    hops: int = 0,
    target_p0: float = LAB_P_SUCC,
    base: LinkParams | None = None,
) -> LinkParams:
    """Link at ``distance_km`` whose distance-0 probability equals ``target_p0``.

    ``t_class`` is the one-way propagation delay to the midpoint station.
    """
    base = base or LinkParams()
    bare = p_succ(replace(base, distance_km=0.0, scale=1.0))
    return replace(
        base,
        distance_km=distance_km,
        hops=hops,
        scale=target_p0 / bare,
        t_class_ns=int(round(propagation_ns(distance_km / 2.0))),
    )


@dataclass(frozen=True)
class EprSample:
    success: bool
    elapsed_ns: int
    attempts: int


def sample_epr_raw(p: float, cycle_ns: int, remaining_ns: float | None, rng: np.random.Generator) -> EprSample:
    if remaining_ns is not None and remaining_ns < 0:
        raise ParameterError("remaining time must be non-negative")
    k = int(rng.geometric(p))
    if remaining_ns is None or k * cycle_ns <= remaining_ns:
        return EprSample(True, k * cycle_ns, k)
    fit = int(remaining_ns // cycle_ns)
    return EprSample(False, fit * cycle_ns, fit)


def sample_epr(link: LinkParams, remaining_ns: float | None, rng: np.random.Generator) -> EprSample:
    """Attempts of ``t_cycle`` each until success or the bin runs out.

    ``remaining_ns=None`` means an unbounded bin.
    """
    return sample_epr_raw(p_succ(link), t_cycle(link), remaining_ns, rng)


# Network schedule -----------------------------------------------------------


@dataclass(frozen=True)
class NetworkSchedule:
    bin_length: int
    pattern: tuple[str, ...]
    epoch_permutation_seed: int | None = None

    def __post_init__(self):
        if self.bin_length <= 0:
            raise ParameterError("bin_length must be positive")
        if not self.pattern:
            raise ParameterError("pattern must be non-empty")
        object.__setattr__(self, "pattern", tuple(self.pattern))

    @property
    def cycle_length(self) -> int:
        return self.bin_length * len(self.pattern)

    def bin_index(self, t: int) -> int:
        return t // self.bin_length

    def owner(self, t: int) -> str:
        return self.pattern[(t // self.bin_length) % len(self.pattern)]

    def bin_end(self, t: int) -> int:
        return (t // self.bin_length + 1) * self.bin_length

    def next_bin_start(self, t: int) -> int:
        return self.bin_end(t)

    def owned_bins(self, app: str, t0: int, t1: int) -> list[tuple[int, int]]:
        """Owned ``[start, end)`` intervals intersecting ``[t0, t1)``."""
        out = []
        i = t0 // self.bin_length
        while i * self.bin_length < t1:
            if self.pattern[i % len(self.pattern)] == app:
                out.append((i * self.bin_length, (i + 1) * self.bin_length))
            i += 1
        return out


def build_schedule(
    app_ids: Sequence[str],
    bin_multiple: float,
    expected_epr_time_ns: float,
    rng: np.random.Generator | int | None = None,
) -> NetworkSchedule:
    """Random permutation of ``app_ids``, one bin each, repeating."""
    apps = list(dict.fromkeys(app_ids))
    if not apps:
        raise ParameterError("at least one application is required")
    if bin_multiple <= 0:
        raise ParameterError("bin_multiple must be positive")
    seed = rng if isinstance(rng, (int, np.integer)) else None
    gen = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    order = [apps[i] for i in gen.permutation(len(apps))]
    return NetworkSchedule(int(round(bin_multiple * expected_epr_time_ns)), tuple(order), seed)


# Topology -------------------------------------------------------------------


@dataclass(frozen=True)
class TopologyEntry:
    server: str
    client: str
    distance_km: float
    hops: int

    def __post_init__(self):
        if self.distance_km < 0 or self.hops < 0:
            raise ParameterError("distance and hops must be non-negative")
        if self.distance_km == 0 and self.hops != 0:
            raise ParameterError("zero distance requires zero hops")


_SURF = [
    ("Delft 1", 0.0, 0),
    ("Delft 2", 2.2, 0),
    ("Rotterdam 1", 16.8, 1),
    ("Den Haag 2", 19.8, 0),
    ("Den Haag 1", 26.3, 1),
    ("Leiden 1", 30.6, 0),
    ("Rotterdam 2", 33.1, 0),
    ("Rotterdam 3", 40.2, 1),
    ("Leiden 2", 47.9, 2),
    ("Leiden 3", 55.2, 3),
]

SURF_TOPOLOGY: tuple[TopologyEntry, ...] = tuple(
    TopologyEntry("Delft 1", c, d, h) for c, d, h in _SURF
)


def topology_lookup(server: str, client: str, table: Iterable[TopologyEntry] | None = None) -> TopologyEntry:
    for e in SURF_TOPOLOGY if table is None else table:
        if e.server == server and e.client == client:
            return e
    raise TopologyLookupError(f"no topology entry for ({server!r}, {client!r})")


def load_topology_csv(path: str | Path) -> tuple[TopologyEntry, ...]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return tuple(
        TopologyEntry(r["server"].strip(), r["client"].strip(), float(r["distance_km"]), int(r["hops"]))
        for r in rows
    )


def save_topology_csv(entries: Iterable[TopologyEntry], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["server", "client", "distance_km", "hops"])
        for e in entries:
            w.writerow([e.server, e.client, e.distance_km, e.hops])
