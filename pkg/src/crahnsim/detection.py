"""Disaster detection pipeline: sensors -> cluster heads -> sink -> context
records -> MLP detector polled every 10 s, plus the false-negative-rate /
response-time experiment.

Synthetic disaster signal: a sensor at distance d from an epicenter of
intensity I reads I * exp(-d / 200 m) + N(0, 0.1) while the event is active;
quiet background is noise only.
"""

import csv
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .kernel import Kernel
from .mlp import DISASTER_HAPPENED, Mlp, TrainConfig, train
from .mobility import Area, NodeState

POLL_PERIOD_S = 10.0
SIGNAL_DECAY_M = 200.0
NOISE_SIGMA = 0.1
FEATURES_PER_CLUSTER = 3  # mean, max, count
DEFAULT_EVENT_DURATION_S = 30.0
PROCESSING_DELAY_PER_CLUSTER_S = 0.020  # kappa


@dataclass
class SensorReading:
    sensor_id: int
    time: float
    magnitude: float


@dataclass
class ClusterReport:
    cluster_id: int
    window_start: float
    window_end: float
    mean: float
    max: float
    count: int


@dataclass
class DisasterEvent:
    time: float
    epicenter: tuple[float, float]
    intensity: float
    duration_s: float = DEFAULT_EVENT_DURATION_S


def aggregate_cluster(cluster_id: int, readings: list[SensorReading],
                      window_start: float, window_end: float) -> Optional[ClusterReport]:
    """Mean/max/count over the window; an empty window yields no report."""
    if window_end <= window_start:
        raise ValueError("window_end must exceed window_start")
    if not readings:
        return None
    mags = [r.magnitude for r in readings]
    return ClusterReport(cluster_id=cluster_id, window_start=window_start,
                         window_end=window_end, mean=float(np.mean(mags)),
                         max=float(np.max(mags)), count=len(mags))


def sink_collect(reports: list[ClusterReport], cluster_count: int) -> np.ndarray:
    """Fixed-order concatenation of (mean, max, count) blocks; silent clusters zero."""
    vec = np.zeros(FEATURES_PER_CLUSTER * cluster_count)
    seen = set()
    for rep in reports:
        if not 0 <= rep.cluster_id < cluster_count:
            raise ValueError(f"cluster id {rep.cluster_id} out of range")
        if rep.cluster_id in seen:
            raise ValueError(f"duplicate report for cluster {rep.cluster_id} in one window")
        seen.add(rep.cluster_id)
        base = FEATURES_PER_CLUSTER * rep.cluster_id
        vec[base:base + 3] = (rep.mean, rep.max, rep.count)
    return vec


def detect(record: np.ndarray, model: Mlp) -> int:
    return model.classify_binary(record)


# -- deployment ---------------------------------------------------------------

@dataclass
class Deployment:
    sensors: list[NodeState]
    heads: list[NodeState]
    membership: np.ndarray  # sensor index -> cluster id

    @property
    def cluster_count(self) -> int:
        return len(self.heads)


def deploy(sensor_count: int, cluster_count: int, area: Area,
           rng: np.random.Generator) -> Deployment:
    sensors = [NodeState(id=i, x=rng.uniform(0, area.width), y=rng.uniform(0, area.height),
                         role="sensor") for i in range(sensor_count)]
    heads = [NodeState(id=sensor_count + c, x=rng.uniform(0, area.width),
                       y=rng.uniform(0, area.height), role="cluster-head")
             for c in range(cluster_count)]
    membership = np.array([
        int(np.argmin([s.distance_to(h) for h in heads])) for s in sensors])
    return Deployment(sensors=sensors, heads=heads, membership=membership)


# -- synthetic signal ---------------------------------------------------------

def sensor_magnitudes(dep: Deployment, t: float, events: list[DisasterEvent],
                      noise_rng: np.random.Generator) -> np.ndarray:
    mags = noise_rng.normal(0.0, NOISE_SIGMA, len(dep.sensors))
    for ev in events:
        if ev.time <= t < ev.time + ev.duration_s:
            ex, ey = ev.epicenter
            for i, s in enumerate(dep.sensors):
                d = math.hypot(s.x - ex, s.y - ey)
                mags[i] += ev.intensity * math.exp(-d / SIGNAL_DECAY_M)
    return mags


def context_record(dep: Deployment, t: float, events: list[DisasterEvent],
                   noise_rng: np.random.Generator,
                   samples_per_window: int = 5) -> np.ndarray:
    """One detector input: per-cluster (mean, max, count) over the 10 s window
    ending at t, from `samples_per_window` sampling instants per sensor."""
    times = [t - POLL_PERIOD_S + (i + 1) * POLL_PERIOD_S / samples_per_window
             for i in range(samples_per_window)]
    per_cluster: dict[int, list[float]] = {}
    for ts in times:
        mags = sensor_magnitudes(dep, ts, events, noise_rng)
        for i, m in enumerate(mags):
            per_cluster.setdefault(int(dep.membership[i]), []).append(float(m))
    reports = []
    for cid, vals in sorted(per_cluster.items()):
        reports.append(ClusterReport(cid, t - POLL_PERIOD_S, t, float(np.mean(vals)),
                                     float(np.max(vals)), len(vals)))
    return sink_collect(reports, dep.cluster_count)


# -- detector training --------------------------------------------------------

def make_training_set(dep: Deployment, rng: np.random.Generator, area: Area,
                      intensity: float, positives: int = 500, negatives: int = 500):
    xs, ys = [], []
    for _ in range(positives):
        ev = DisasterEvent(time=0.0,
                           epicenter=(rng.uniform(0, area.width), rng.uniform(0, area.height)),
                           intensity=rng.uniform(0.5 * intensity, 1.25 * intensity))
        xs.append(context_record(dep, POLL_PERIOD_S, [ev], rng))
        ys.append([1.0])
    for _ in range(negatives):
        xs.append(context_record(dep, POLL_PERIOD_S, [], rng))
        ys.append([0.0])
    return np.array(xs), np.array(ys)


def train_detector(dep: Deployment, rng_init: np.random.Generator,
                   x: np.ndarray, y: np.ndarray,
                   hidden_units: int = 8, epochs: int = 300,
                   learning_rate: float = 0.5, seed: int = 0) -> tuple[Mlp, dict]:
    model = Mlp.init([x.shape[1], hidden_units, 1], rng_init, output_activation="sigmoid")
    n = x.shape[0]
    split = int(0.8 * n)
    order = np.random.Generator(np.random.PCG64(seed)).permutation(n)
    tr, va = order[:split], order[split:]
    cfg = TrainConfig(learning_rate=learning_rate, epochs=epochs, seed=seed)
    losses = train(model, (x[tr], y[tr]), cfg)
    val_pred = np.array([model.classify_binary(row) == DISASTER_HAPPENED for row in x[va]])
    val_acc = float(np.mean(val_pred == (y[va][:, 0] > 0.5)))
    return model, {"final_loss": losses[-1], "val_accuracy": val_acc}


# -- disaster traces ----------------------------------------------------------

def synthesize_trace(rng: np.random.Generator, area: Area, count: int,
                     intensity: float, horizon_s: float,
                     min_gap_s: float = 60.0) -> list[DisasterEvent]:
    lo, hi = 20.0, horizon_s - DEFAULT_EVENT_DURATION_S - 10.0
    times = sorted(rng.uniform(lo, hi, count))
    # enforce spacing so events don't overlap in the polling windows
    for i in range(1, len(times)):
        times[i] = max(times[i], times[i - 1] + min_gap_s)
    return [DisasterEvent(time=float(t),
                          epicenter=(float(rng.uniform(0, area.width)),
                                     float(rng.uniform(0, area.height))),
                          intensity=float(intensity))
            for t in times if t <= hi]


def load_trace_csv(path) -> list[DisasterEvent]:
    """CSV import: header time_s,epicenter_x_m,epicenter_y_m,intensity."""
    events = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        expected = {"time_s", "epicenter_x_m", "epicenter_y_m", "intensity"}
        if reader.fieldnames is None or set(reader.fieldnames) != expected:
            raise ValueError(f"trace CSV must have header {sorted(expected)}")
        for row in reader:
            events.append(DisasterEvent(time=float(row["time_s"]),
                                        epicenter=(float(row["epicenter_x_m"]),
                                                   float(row["epicenter_y_m"])),
                                        intensity=float(row["intensity"])))
    times = [e.time for e in events]
    if any(b <= a for a, b in zip(times, times[1:])):
        raise ValueError("trace event times must be strictly increasing")
    return events


# -- simulation and experiment ------------------------------------------------

@dataclass
class DetectionRunResult:
    injected: int
    missed: int
    poll_codes: list[tuple[float, int]]
    response_times: list[float]  # per detected event, incl. processing delay

    @property
    def false_negative_rate_pct(self) -> Optional[float]:
        if self.injected == 0:
            return None
        return 100.0 * self.missed / self.injected


def run_detection_replication(kernel: Kernel, dep: Deployment, model: Mlp,
                              events: list[DisasterEvent],
                              sim_time_s: float) -> DetectionRunResult:
    """Poll the detector every 10 s through the kernel and score the trace."""
    noise_rng = kernel.stream("sensor-noise")
    poll_codes: list[tuple[float, int]] = []

    def poll():
        t = kernel.now
        if t <= 0:
            code = 102  # no window yet
        else:
            code = detect(context_record(dep, t, events, noise_rng), model)
        poll_codes.append((t, code))

    t = 0.0
    while t <= sim_time_s:
        kernel.schedule(t, poll, target="detector", kind="poll")
        t += POLL_PERIOD_S
    kernel.run_until(sim_time_s)

    kappa = PROCESSING_DELAY_PER_CLUSTER_S * dep.cluster_count
    missed = 0
    responses = []
    for ev in events:
        window_end = ev.time + ev.duration_s + POLL_PERIOD_S
        hit = next((pt for pt, code in poll_codes
                    if ev.time <= pt <= window_end and code == DISASTER_HAPPENED), None)
        if hit is None:
            missed += 1
        else:
            responses.append(hit - ev.time + kappa)
    return DetectionRunResult(injected=len(events), missed=missed,
                              poll_codes=poll_codes, response_times=responses)
