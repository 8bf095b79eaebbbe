"""Collections of SSA runs: streaming statistics, optional retained traces
and event logs, and a documented binary file format for analysis handoff.

File layout (little-endian): magic ``OTCLKENS``, u32 version, u64 header
length, JSON header (species order, observable definitions, grid spec,
n_runs, base seed, config echo, light schedule, serialized model text,
payload flags), then payload arrays in fixed order: per-column mean and sd
(float64, time x (species+observables)), event counts (int64), absorbed
flags (uint8), retained count traces (int32/int64, runs x time x species),
and per-run event logs (u64 length, float64 times, int16 reaction indices;
negative indices mark light toggles, which leave the state unchanged).
"""

from __future__ import annotations

import json
import struct

import numpy as np

from . import light as lt
from .errors import EnsembleFormatError
from .modelfile import parse_network, serialize_network
from .trace import Trace, fmt

MAGIC = b"OTCLKENS"
VERSION = 1


class Ensemble:
    """Results of n independent runs on a common recording grid."""

    def __init__(self, network, schedule, config, grid, n_runs, base_seed,
                 mean, sd, event_counts, absorbed, traces=None, events=None):
        self.network = network
        self.schedule = schedule
        self.config = config  # plain dict echo of the SsaConfig
        self.grid = np.asarray(grid)
        self.n_runs = int(n_runs)
        self.base_seed = int(base_seed)
        self.species = network.species_names
        self.obs_names = tuple(network.observables)
        self.columns = self.species + self.obs_names
        self.mean = mean  # (T, S+K)
        self.sd = sd
        self.event_counts = event_counts
        self.absorbed = absorbed
        self.traces = traces  # (n, T, S) integer counts or None
        self.events = events  # list of (times, rids) or None

    # -- streaming statistics --------------------------------------------------

    def column_index(self, name):
        try:
            return self.columns.index(name)
        except ValueError:
            raise KeyError(f"{name!r} is neither a species nor an observable") from None

    def column_mean(self, name):
        return self.mean[:, self.column_index(name)]

    def column_sd(self, name):
        return self.sd[:, self.column_index(name)]

    def cv(self, name, mu_floor=1e-9):
        """Coefficient of variation sigma/mu per grid point.

        Returns (cv, valid): cv is NaN and valid False where mu < mu_floor.
        """
        mu = self.column_mean(name)
        sigma = self.column_sd(name)
        valid = mu >= mu_floor
        cv = np.full_like(mu, np.nan)
        np.divide(sigma, mu, out=cv, where=valid)
        return cv, valid

    def mean_trace(self):
        """Per-grid-point ensemble mean of the species columns, as a Trace."""
        return Trace(times=self.grid, states=self.mean[:, :len(self.species)],
                     species=self.species, observables=dict(self.network.observables))

    def run_trace(self, i):
        if self.traces is None:
            raise ValueError("ensemble was built without retained traces")
        return Trace(times=self.grid, states=self.traces[i].astype(np.int64),
                     species=self.species,
                     observables=dict(self.network.observables))

    def observable_values(self, name):
        """(n_runs, T) matrix of one observable over retained traces."""
        if self.traces is None:
            raise ValueError("ensemble was built without retained traces")
        v = self.network.series_vector(name)
        return self.traces.astype(np.float64) @ v

    # -- CSV -------------------------------------------------------------------

    def stats_to_csv(self, path_or_buf):
        import csv

        close = False
        f = path_or_buf
        if isinstance(path_or_buf, (str, bytes)) or hasattr(path_or_buf, "__fspath__"):
            f = open(path_or_buf, "w", newline="")
            close = True
        try:
            w = csv.writer(f)
            header = ["time_h"]
            for name in self.columns:
                header += [f"{name}_mean", f"{name}_sd"]
            w.writerow(header)
            for k in range(len(self.grid)):
                row = [fmt(self.grid[k])]
                for c in range(len(self.columns)):
                    row += [fmt(self.mean[k, c]), fmt(self.sd[k, c])]
                w.writerow(row)
        finally:
            if close:
                f.close()

    # -- binary round-trip -------------------------------------------------

    def save(self, path):
        header = {
            "species": list(self.species),
            "observables": {k: [[c, s] for c, s in v]
                            for k, v in self.network.observables.items()},
            "grid": {"t_end": float(self.grid[-1]), "n": int(len(self.grid) - 1)},
            "n_runs": self.n_runs,
            "base_seed": self.base_seed,
            "config": self.config,
            "schedule": lt.to_json(self.schedule),
            "model_text": serialize_network(self.network),
            "has_traces": self.traces is not None,
            "has_events": self.events is not None,
            "trace_dtype": (str(self.traces.dtype) if self.traces is not None
                            else "int32"),
        }
        blob = json.dumps(header, sort_keys=True).encode("utf-8")
        with open(path, "wb") as f:
            f.write(MAGIC)
            f.write(struct.pack("<I", VERSION))
            f.write(struct.pack("<Q", len(blob)))
            f.write(blob)
            f.write(np.ascontiguousarray(self.mean, dtype=np.float64).tobytes())
            f.write(np.ascontiguousarray(self.sd, dtype=np.float64).tobytes())
            f.write(np.ascontiguousarray(self.event_counts, dtype=np.int64).tobytes())
            f.write(np.ascontiguousarray(self.absorbed, dtype=np.uint8).tobytes())
            if self.traces is not None:
                f.write(np.ascontiguousarray(self.traces).tobytes())
            if self.events is not None:
                for times, rids in self.events:
                    f.write(struct.pack("<Q", len(times)))
                    f.write(np.ascontiguousarray(times, dtype=np.float64).tobytes())
                    f.write(np.ascontiguousarray(rids, dtype=np.int16).tobytes())

    @classmethod
    def load(cls, path):
        with open(path, "rb") as f:
            data = f.read()
        if data[:8] != MAGIC:
            raise EnsembleFormatError(f"{path}: not an otclock ensemble file")
        (version,) = struct.unpack_from("<I", data, 8)
        if version != VERSION:
            raise EnsembleFormatError(
                f"{path}: format version {version} unsupported (expected {VERSION})")
        (hlen,) = struct.unpack_from("<Q", data, 12)
        off = 20
        header = json.loads(data[off:off + hlen].decode("utf-8"))
        off += hlen

        network = parse_network(header["model_text"], validate_rates=False)
        grid = np.linspace(0.0, header["grid"]["t_end"], header["grid"]["n"] + 1)
        T = len(grid)
        S = len(header["species"])
        K = len(header["observables"])
        n = header["n_runs"]

        def take(dtype, shape):
            nonlocal off
            arr = np.frombuffer(data, dtype=dtype, count=int(np.prod(shape)),
                                offset=off).reshape(shape)
            off += arr.nbytes
            return arr.copy()

        mean = take(np.float64, (T, S + K))
        sd = take(np.float64, (T, S + K))
        event_counts = take(np.int64, (n,))
        absorbed = take(np.uint8, (n,)).astype(bool)
        traces = None
        if header["has_traces"]:
            traces = take(np.dtype(header["trace_dtype"]), (n, T, S))
        events = None
        if header["has_events"]:
            events = []
            for _ in range(n):
                (m,) = struct.unpack_from("<Q", data, off)
                off += 8
                times = take(np.float64, (m,))
                rids = take(np.int16, (m,))
                events.append((times, rids))
        return cls(network, lt.from_json(header["schedule"]), header["config"],
                   grid, n, header["base_seed"], mean, sd, event_counts,
                   absorbed, traces, events)
