"""Trajectory simulation of the continuous-time network chain.

Event rates are read straight from the cached regime blocks of
`generator`, so simulated dynamics and the assembled generator cannot
drift apart.  Clocks use a counter-based 64-bit PRNG (Philox) with
exponential inversion for event times, making trajectories reproducible
bit for bit from (model, seed, horizon, initial).

Saturated runs pin a subset of queues at an interior level and count
virtual arrivals and departures, realizing the induced-chain law
without unbounded counters.

Finite-horizon simulation cannot distinguish transience from slow
positive recurrence; everything here is corroborative evidence, not a
decision procedure.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import stats

from .errors import EmptySubset, InsufficientData
from .generator import SUBSET_ALL, regime_signature, uniformize
from .service_disciplines import NetworkModel

SAMPLE_CAP = 4096
EMPTY_TIMES_CAP = 100_000
PIN_LEVEL = 3
RATE_TOL = 1e-14


class _TransitionCache:
    """Per-signature competing-clock tables derived from the generator
    blocks: cumulative rates, displacements and background targets."""

    def __init__(self, kernel):
        self.kernel = kernel
        self._tables = {}

    def get(self, sig):
        hit = self._tables.get(sig)
        if hit is None:
            hit = self._build(sig)
            self._tables[sig] = hit
        return hit

    def _build(self, sig):
        S0 = self.kernel.S0
        rates = [[] for _ in range(S0)]
        moves = [[] for _ in range(S0)]
        diag = np.zeros(S0)
        for z, B in self.kernel.q_blocks(sig).items():
            B = np.asarray(B)
            if z == (0, 0, 0, 0):
                diag = -np.diag(B)
            rr, cc = np.nonzero(B > RATE_TOL)
            for j, j2 in zip(rr.tolist(), cc.tolist()):
                if z == (0, 0, 0, 0) and j == j2:
                    continue
                rates[j].append(B[j, j2])
                moves[j].append((z, j2))
        cums = [np.cumsum(np.array(r)) if r else np.zeros(0) for r in rates]
        return cums, moves, diag


class Trajectory:
    __slots__ = (
        "seed", "horizon", "sample_times", "sample_states", "sample_background",
        "sample_departures", "empty_return_times", "empty_times_truncated",
        "final_state", "n_events", "departures", "arrivals", "saturated",
    )

    def __init__(self, **kw):
        for name in self.__slots__:
            setattr(self, name, kw.pop(name))
        if kw:
            raise TypeError(f"unexpected trajectory fields {sorted(kw)}")

    def sample_rows(self):
        """Rows (t, x1, x2, x3, x4) for CSV export."""
        for t, x in zip(self.sample_times, self.sample_states):
            yield (float(t), int(x[0]), int(x[1]), int(x[2]), int(x[3]))

    def summary(self):
        span = self.horizon if self.horizon > 0 else 1.0
        return {
            "seed": self.seed,
            "horizon": self.horizon,
            "events": self.n_events,
            "samples": int(len(self.sample_times)),
            "finalState": {
                "x": [int(v) for v in self.final_state[0]],
                "background": int(self.final_state[1]),
            },
            "departures": [int(v) for v in self.departures],
            "arrivals": [int(v) for v in self.arrivals],
            "departureRates": [v / span for v in self.departures],
            "emptyReturns": len(self.empty_return_times),
            "emptyReturnsTruncated": self.empty_times_truncated,
            "saturated": sorted(self.saturated) if self.saturated else None,
        }


def _run(model, horizon, seed, initial, pinned):
    if horizon <= 0:
        raise InsufficientData("horizon must be positive to collect samples")
    kernel = uniformize(model)
    cache = _TransitionCache(kernel)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))

    if initial is None:
        x0 = tuple(PIN_LEVEL if i in pinned else 0 for i in range(1, 5))
        j0 = 0
    else:
        x0, j0 = initial
        x0 = tuple(int(v) for v in x0)
        if any(v < 0 for v in x0):
            raise ValueError("initial queue lengths must be nonnegative")
        j0 = int(j0)
    # virtual levels move freely on pinned coordinates; the regime is
    # always read from the clamped vector
    x = list(x0)
    j = j0

    def clamped():
        return tuple(PIN_LEVEL if (i + 1) in pinned else x[i] for i in range(4))

    times = [0.0]
    states = [tuple(x)]
    backgrounds = [j]
    dep_samples = [(0, 0, 0, 0)]
    departures = [0, 0, 0, 0]
    arrivals = [0, 0, 0, 0]
    empty_times = []
    truncated = False
    stride = 1
    since_sample = 0
    t = 0.0
    n_events = 0

    while True:
        sig = regime_signature(clamped())
        cums, moves, _ = cache.get(sig)
        cum = cums[j]
        if cum.size == 0 or cum[-1] <= 0.0:
            t = horizon
            break
        total = cum[-1]
        u = rng.random()
        t_next = t + (-math.log(1.0 - u) / total)
        if t_next >= horizon:
            t = horizon
            break
        t = t_next
        pick = int(np.searchsorted(cum, rng.random() * total, side="right"))
        if pick >= len(moves[j]):
            pick = len(moves[j]) - 1
        z, j2 = moves[j][pick]
        for i in range(4):
            if z[i] > 0:
                arrivals[i] += 1
            elif z[i] < 0:
                departures[i] += 1
            x[i] += z[i]
        j = j2
        n_events += 1
        if not pinned and x[0] == 0 and x[1] == 0 and x[2] == 0 and x[3] == 0 \
                and any(z):
            if len(empty_times) < EMPTY_TIMES_CAP:
                empty_times.append(t)
            else:
                truncated = True
        since_sample += 1
        if since_sample >= stride:
            since_sample = 0
            times.append(t)
            states.append(tuple(x))
            backgrounds.append(j)
            dep_samples.append(tuple(departures))
            if len(times) >= SAMPLE_CAP:
                times = times[::2]
                states = states[::2]
                backgrounds = backgrounds[::2]
                dep_samples = dep_samples[::2]
                stride *= 2

    times.append(t)
    states.append(tuple(x))
    backgrounds.append(j)
    dep_samples.append(tuple(departures))
    return Trajectory(
        seed=int(seed),
        horizon=float(horizon),
        sample_times=np.array(times),
        sample_states=np.array(states, dtype=np.int64),
        sample_background=np.array(backgrounds, dtype=np.int64),
        sample_departures=np.array(dep_samples, dtype=np.int64),
        empty_return_times=empty_times,
        empty_times_truncated=truncated,
        final_state=(tuple(x), j),
        n_events=n_events,
        departures=list(departures),
        arrivals=list(arrivals),
        saturated=frozenset(pinned) if pinned else None,
    )


def simulate(model: NetworkModel, horizon, seed, initial=None) -> Trajectory:
    """Exact trajectory of the network chain up to the horizon."""
    return _run(model, horizon, seed, initial, frozenset())


def simulate_saturated(model: NetworkModel, A, horizon, seed) -> Trajectory:
    """Trajectory with the queues in A pinned in the interior regime.

    Pinned coordinates report virtual levels (start plus net flow), so
    their sample slopes estimate the face drift directly."""
    A = frozenset(int(i) for i in A)
    if not A:
        raise EmptySubset("the saturated subset must be nonempty")
    if not A <= SUBSET_ALL:
        raise EmptySubset(f"subset {sorted(A)} is not within {{1,2,3,4}}")
    return _run(model, horizon, seed, None, A)


class DriftEstimate:
    __slots__ = ("slopes", "slope_half_widths", "departure_rates",
                 "departure_rate_half_widths", "regime", "n_samples", "window")

    def __init__(self, **kw):
        for name in self.__slots__:
            setattr(self, name, kw.pop(name))
        if kw:
            raise TypeError(f"unexpected estimate fields {sorted(kw)}")

    def to_json_dict(self):
        return {
            "slopes": list(self.slopes),
            "slopeHalfWidths": list(self.slope_half_widths),
            "departureRates": list(self.departure_rates),
            "departureRateHalfWidths": list(self.departure_rate_half_widths),
            "regime": sorted(self.regime) if self.regime else None,
            "samples": self.n_samples,
            "window": list(self.window),
        }


def _batch_ci(values):
    values = np.asarray(values, float)
    n = len(values)
    half = stats.t.ppf(0.975, n - 1) * values.std(ddof=1) / math.sqrt(n)
    # invariant floor: half-widths are strictly positive even for
    # constant batches
    return float(max(half, np.finfo(float).tiny))


def estimate_drift(traj: Trajectory, burn_in=0.2, batches=20) -> DriftEstimate:
    """Least-squares queue-length slopes after burn-in, with batch-means
    confidence half-widths, plus windowed departure rates."""
    if not 0.0 <= burn_in < 1.0:
        raise ValueError("burn-in must be a fraction in [0, 1)")
    t = traj.sample_times
    keep = t >= burn_in * traj.horizon
    t = t[keep]
    X = traj.sample_states[keep]
    D = traj.sample_departures[keep]
    n = len(t)
    if n < 100:
        raise InsufficientData(
            f"{n} sample points after burn-in; at least 100 required"
        )
    if t[-1] <= t[0]:
        raise InsufficientData("sample window has zero width")
    slopes = [float(np.polyfit(t, X[:, i], 1)[0]) for i in range(4)]
    span = t[-1] - t[0]
    dep_rates = [float((D[-1, i] - D[0, i]) / span) for i in range(4)]
    edges = np.linspace(0, n, batches + 1, dtype=int)
    slope_batches = [[] for _ in range(4)]
    rate_batches = [[] for _ in range(4)]
    for b in range(batches):
        lo, hi = edges[b], edges[b + 1]
        if hi - lo < 2 or t[hi - 1] <= t[lo]:
            continue
        tb, xb, db = t[lo:hi], X[lo:hi], D[lo:hi]
        for i in range(4):
            slope_batches[i].append(np.polyfit(tb, xb[:, i], 1)[0])
            rate_batches[i].append((db[-1, i] - db[0, i]) / (tb[-1] - tb[0]))
    if any(len(b) < 2 for b in slope_batches):
        raise InsufficientData("too few usable batches for confidence intervals")
    return DriftEstimate(
        slopes=slopes,
        slope_half_widths=[_batch_ci(b) for b in slope_batches],
        departure_rates=dep_rates,
        departure_rate_half_widths=[_batch_ci(b) for b in rate_batches],
        regime=traj.saturated,
        n_samples=n,
        window=(float(t[0]), float(t[-1])),
    )


def replication_seeds(seed, replications):
    """Independent child seeds, derived deterministically."""
    ss = np.random.SeedSequence(seed)
    return [int(child.generate_state(1, np.uint64)[0]) for child in
            ss.spawn(replications)]
