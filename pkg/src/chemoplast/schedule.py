"""Load schedules: step times and the fraction of the peak traction applied."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PEAK_TIME = 1.2
FINAL_TIME = 2.2
PEAK_TRACTION = 133e6


@dataclass(frozen=True)
class LoadSchedule:
    """Strictly increasing step times with load scales in ``[0, 1]``."""

    times: tuple[float, ...]
    scales: tuple[float, ...]

    def __post_init__(self) -> None:
        t = np.asarray(self.times, dtype=float)
        s = np.asarray(self.scales, dtype=float)
        if t.shape != s.shape or t.ndim != 1:
            raise ValueError("times and scales must be 1-D sequences of equal length")
        if t.size and (np.any(np.diff(t) <= 0) or t[0] <= 0):
            raise ValueError("step times must be positive and strictly increasing")
        if np.any((s < 0) | (s > 1)) or not np.isfinite(s).all():
            raise ValueError("load scales must lie in [0, 1]")
        object.__setattr__(self, "times", tuple(float(v) for v in t))
        object.__setattr__(self, "scales", tuple(float(v) for v in s))

    def __len__(self) -> int:
        return len(self.times)

    def steps(self):
        return list(zip(self.times, self.scales))

    def scale_at(self, t: float) -> float:
        """Piecewise-linear scale with ``scale(0) = 0``."""
        return float(np.interp(t, (0.0,) + self.times, (0.0,) + self.scales))

    @property
    def peak_index(self) -> int:
        return int(np.argmax(self.scales))

    def to_dict(self) -> dict:
        return {"times": list(self.times), "scales": list(self.scales)}

    @classmethod
    def from_dict(cls, data: dict) -> "LoadSchedule":
        return cls(tuple(data["times"]), tuple(data["scales"]))


def ramp_scale(t: float) -> float:
    """Linear ramp to the peak at 1.2 s, then linear release to zero at 2.2 s."""
    if t <= PEAK_TIME:
        return t / PEAK_TIME
    return max(0.0, 1.0 - (t - PEAK_TIME) / (FINAL_TIME - PEAK_TIME))


def default_load_schedule() -> LoadSchedule:
    """Benchmark program in 26 steps.

    One large first increment to 0.44 s, 15 equal increments to the peak at 1.2 s,
    three 0.2 s unloading increments, then a 0.1 s and six 0.05 s increments that
    resolve the release to zero load at 2.2 s.
    """
    load = np.concatenate([[0.44], np.linspace(0.44, PEAK_TIME, 16)[1:]])
    unload = np.array([1.4, 1.6, 1.8, 1.9, 1.95, 2.0, 2.05, 2.1, 2.15, 2.2])
    times = np.concatenate([load, unload])
    times[15] = PEAK_TIME
    return LoadSchedule(tuple(times), tuple(ramp_scale(t) for t in times))
