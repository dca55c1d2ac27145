"""Bivalent partitions, trajectory labeling, and neighborhood sample spaces.

States get two-letter labels through a partition; orbits become symbol
strings advanced by the shift; balls of nearby initial conditions become
sample spaces of trajectory labels whose counting ratios play the role of
outcome probabilities.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .dynamics import FlowSystem, Trajectory, integrate, integrate_ensemble, local_stability

__all__ = [
    "Partition",
    "SymbolString",
    "SampleSpace",
    "OutcomeProbabilities",
    "lorenz_lobe_partition",
    "label_state",
    "label_trajectory",
    "shift",
    "neighborhood_sample_space",
    "outcome_probabilities",
    "intertwining_profile",
    "write_sample_space_csv",
    "write_sample_space_summary",
]

SYMBOLS = ("A", "B")


@dataclass(frozen=True)
class Partition:
    """Total, deterministic two-way classification of state space."""

    classifier: Callable[[np.ndarray], str]
    boundary_rule: str
    description: str


def lorenz_lobe_partition() -> Partition:
    """Classical Lorenz wing partition: sign of the x coordinate.

    A is the negative-x wing, B the positive-x wing; the boundary plane
    x = 0 is assigned to B.
    """
    return Partition(
        classifier=lambda x: "A" if x[0] < 0 else "B",
        boundary_rule="x0 == 0 labels B",
        description="sign of the x coordinate; left wing A, right wing B",
    )


@dataclass(frozen=True)
class SymbolString:
    """Finite sequence over {A, B} with a radix marker."""

    symbols: tuple[str, ...]
    radix_offset: int = 0

    def __post_init__(self):
        if len(self.symbols) == 0:
            raise ValueError("symbols must be non-empty")
        if any(s not in SYMBOLS for s in self.symbols):
            raise ValueError("symbols must be 'A' or 'B'")
        if not 0 <= self.radix_offset <= len(self.symbols):
            raise ValueError("radix_offset out of range")

    def __len__(self) -> int:
        return len(self.symbols)

    def __str__(self) -> str:
        return "." + "".join(self.symbols)


@dataclass(frozen=True)
class OutcomeProbabilities:
    p_A: float
    p_B: float


@dataclass(frozen=True)
class SampleSpace:
    """Trajectory labels collected from a ball of initial conditions.

    ``labels[i]`` belongs to the trajectory started at ``initial_points[i]``;
    trials whose integration blew up (or failed the stability filter, in
    that labeling mode) are excluded and only counted in ``n_excluded``.
    """

    base_point: tuple[float, ...]
    radius: float
    horizon: float
    labels: tuple[str, ...]
    seed: int
    n_excluded: int = 0
    initial_points: np.ndarray = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if len(self.labels) == 0:
            raise ValueError("labels must be non-empty")
        if self.radius < 0:
            raise ValueError("radius must be non-negative")

    @property
    def n_traj(self) -> int:
        return len(self.labels) + self.n_excluded


def label_state(partition: Partition, x) -> str:
    """Partition label of a single state; boundary ties follow the documented rule."""
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("state must be finite")
    label = partition.classifier(x)
    if label not in SYMBOLS:
        raise ValueError(f"classifier returned {label!r}, expected 'A' or 'B'")
    return label


def label_trajectory(partition: Partition, traj: Trajectory, stride: int = 1) -> SymbolString:
    """Symbol string of the orbit sampled every ``stride`` steps, point 0 first."""
    if stride < 1:
        raise ValueError("stride must be a positive integer")
    if len(traj.points) == 0:
        raise ValueError("trajectory is empty")
    labels = tuple(label_state(partition, p) for p in traj.points[::stride])
    return SymbolString(labels, radix_offset=0)


def shift(s: SymbolString) -> SymbolString:
    """Advance the radix point one place: drop the leading symbol."""
    if len(s) < 2:
        raise ValueError("cannot shift a single-symbol string")
    return SymbolString(s.symbols[1:], radix_offset=s.radix_offset)


def _sample_ball(rng, center: np.ndarray, radius: float, n: int) -> np.ndarray:
    """Uniform points in the n-ball: Gaussian direction times radius*u**(1/dim)."""
    dim = len(center)
    if radius == 0.0:
        return np.tile(center, (n, 1))
    g = rng.standard_normal((n, dim))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    r = radius * rng.random(n) ** (1.0 / dim)
    return center + r[:, None] * g


def neighborhood_sample_space(
    system: FlowSystem,
    partition: Partition,
    p,
    radius: float,
    n_traj: int,
    horizon: float,
    seed: int,
    dt: float | None = None,
    label_mode: str = "endpoint",
    stability_window: int = 50,
) -> SampleSpace:
    """Labels of trajectories launched from a ball of given radius around p.

    The default labeling reads the partition at the horizon endpoint.  The
    ``stable_endpoint`` mode additionally requires the leading finite-time
    expansion rate over the final ``stability_window`` steps to be negative
    (a quasi-stable arrival); trials failing the filter are excluded.
    """
    p = np.asarray(p, dtype=float)
    if p.shape != (system.dim,):
        raise ValueError(f"p must have shape ({system.dim},)")
    if radius < 0:
        raise ValueError("radius must be non-negative")
    if n_traj < 1:
        raise ValueError("n_traj must be at least 1")
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    if label_mode not in ("endpoint", "stable_endpoint"):
        raise ValueError("label_mode must be 'endpoint' or 'stable_endpoint'")
    dt = system.default_dt if dt is None else dt
    n_steps = max(1, round(horizon / dt))

    rng = np.random.default_rng(seed)
    x0s = _sample_ball(rng, p, radius, n_traj)

    if label_mode == "endpoint":
        endpoints, ok = integrate_ensemble(system, x0s, dt, n_steps)
        labels = tuple(label_state(partition, e) for e in endpoints[ok])
        kept = x0s[ok]
    else:
        if stability_window > n_steps:
            raise ValueError("stability_window exceeds the horizon in steps")
        labels_list, kept_rows = [], []
        for x0 in x0s:
            try:
                traj = integrate(system, x0, dt, n_steps)
            except Exception:
                continue
            rate = local_stability(system, traj, stability_window)[-1]
            if rate < 0:
                labels_list.append(label_state(partition, traj.points[-1]))
                kept_rows.append(x0)
        labels = tuple(labels_list)
        kept = np.array(kept_rows) if kept_rows else np.empty((0, system.dim))

    if len(labels) == 0:
        raise ValueError("every trial was excluded; no labels to report")
    return SampleSpace(
        base_point=tuple(float(v) for v in p),
        radius=float(radius),
        horizon=float(horizon),
        labels=labels,
        seed=int(seed),
        n_excluded=n_traj - len(labels),
        initial_points=kept,
    )


def outcome_probabilities(space: SampleSpace) -> OutcomeProbabilities:
    """Counting ratios of the two labels; p_A + p_B is exactly 1."""
    n = len(space.labels)
    if n == 0:
        raise ValueError("sample space is empty")
    p_a = space.labels.count("A") / n
    return OutcomeProbabilities(p_A=p_a, p_B=1.0 - p_a)


def intertwining_profile(
    system: FlowSystem,
    partition: Partition,
    p,
    radii,
    n_traj: int,
    horizon: float,
    seed: int,
    dt: float | None = None,
) -> np.ndarray:
    """Minority label fraction at each radius of a shrinking neighborhood.

    Interior points collapse toward 0 as the ball shrinks; points on the
    basin boundary keep a mixed population down to arbitrarily small radii.
    """
    radii = np.asarray(radii, dtype=float)
    if radii.ndim != 1 or len(radii) == 0:
        raise ValueError("radii must be a non-empty sequence")
    if np.any(radii <= 0) or np.any(np.diff(radii) >= 0):
        raise ValueError("radii must be positive and strictly descending")
    if n_traj < 1000:
        raise ValueError("need at least 1000 trials per radius")
    minorities = np.empty(len(radii))
    for k, radius in enumerate(radii):
        sub_seed = int(np.random.SeedSequence(entropy=[int(seed), k]).generate_state(1, np.uint64)[0])
        space = neighborhood_sample_space(
            system, partition, p, float(radius), n_traj, horizon, sub_seed, dt=dt
        )
        probs = outcome_probabilities(space)
        minorities[k] = min(probs.p_A, probs.p_B)
    return minorities


def write_sample_space_csv(space: SampleSpace, path) -> None:
    """Per-trial detail: trial index, label, initial coordinates."""
    dim = space.initial_points.shape[1]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["trial", "label"] + [f"x{i}" for i in range(dim)])
        for i, (label, x0) in enumerate(zip(space.labels, space.initial_points)):
            writer.writerow([i, label] + [repr(float(v)) for v in x0])


def write_sample_space_summary(space: SampleSpace, path) -> None:
    probs = outcome_probabilities(space)
    record = {
        "p_A": probs.p_A,
        "p_B": probs.p_B,
        "radius": space.radius,
        "horizon": space.horizon,
        "n_traj": space.n_traj,
        "seed": space.seed,
    }
    with open(path, "w") as fh:
        json.dump(record, fh, indent=2, sort_keys=True)
        fh.write("\n")
