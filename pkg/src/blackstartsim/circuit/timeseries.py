"""Sampled-waveform buffer: named channels with units over a shared time axis."""

from dataclasses import dataclass, field

import numpy as np


@dataclass
class TimeSeries:
    names: list            # channel names, names[0] == "time"
    units: list            # unit per channel
    data: np.ndarray       # (n_samples, n_channels)

    def __post_init__(self):
        if len(self.names) != len(self.units) or self.data.shape[1] != len(self.names):
            raise ValueError("channel names/units/data width mismatch")
        self._index = {n: i for i, n in enumerate(self.names)}

    @property
    def time(self) -> np.ndarray:
        return self.data[:, 0]

    def __contains__(self, name):
        return name in self._index

    def channel(self, name: str) -> np.ndarray:
        return self.data[:, self._index[name]]

    def unit(self, name: str) -> str:
        return self.units[self._index[name]]

    def channels_like(self, prefix: str):
        return [n for n in self.names if n.startswith(prefix)]

    def phases(self, base: str) -> np.ndarray:
        """(n, 3) matrix of the _a/_b/_c channels of a 3-phase quantity."""
        return np.column_stack([self.channel(f"{base}_{p}") for p in "abc"])

    def between(self, t0: float, t1: float) -> np.ndarray:
        """Row mask for t0 <= time < t1."""
        return (self.time >= t0) & (self.time < t1)

    def write_csv(self, path, fmt="%.10g"):
        header = ",".join(
            f"{n}[{u}]" if u else n for n, u in zip(self.names, self.units)
        )
        with open(path, "w") as fh:
            fh.write(header + "\n")
            np.savetxt(fh, self.data, fmt=fmt, delimiter=",")

    @classmethod
    def read_csv(cls, path) -> "TimeSeries":
        with open(path) as fh:
            header = fh.readline().strip()
            data = np.loadtxt(fh, delimiter=",", ndmin=2)
        names, units = [], []
        for col in header.split(","):
            if col.endswith("]") and "[" in col:
                name, unit = col[:-1].rsplit("[", 1)
            else:
                name, unit = col, ""
            names.append(name)
            units.append(unit)
        return cls(names, units, data)
