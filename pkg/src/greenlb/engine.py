"""Deterministic discrete-event loop driving the cluster under a policy.

Arrivals form a Poisson process; each arrival snapshots every server, asks
the policy for a target (taking zero simulated time), and hands the request
over.  Events are dispatched in (time, kind, sequence) order, where the kind
rank settles server-internal transitions before a simultaneous arrival.

Two independent RNG substreams are derived from the run seed, one for
arrival times and one for policy randomness, so switching the tie-resolution
mode never perturbs the workload.
"""

from __future__ import annotations

import csv
import heapq
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np

from .cluster import Cluster, PowerModel, Request
from .events import EventKind
from .policy import (
    EvaluationError,
    NdResolution,
    PolicyExpr,
    PowerState,
    ServerSnapshot,
    UndefinedDesignParamError,
    compile_policy,
    parse_policy,
    select_server,
)

if TYPE_CHECKING:
    from .metrics import RunResult

__all__ = [
    "SimulationError",
    "StopCriterion",
    "SimConfig",
    "SimulationRecord",
    "generate_interarrival",
    "simulate",
    "run",
]


class SimulationError(RuntimeError):
    """A run could not produce a result (bad config or a policy failure)."""


@dataclass(slots=True)
class StopCriterion:
    """When to stop injecting arrivals.

    ``max_requests`` caps the number of injected arrivals; ``max_virtual_time``
    stops injection once the next arrival would land past that time and fixes
    the metrics horizon.  Either may be set; in-flight requests are always
    drained so every injected request completes.
    """

    max_requests: int | None = None
    max_virtual_time: float | None = None

    def validate(self) -> None:
        if self.max_requests is None and self.max_virtual_time is None:
            raise ValueError("stop criterion needs max_requests or max_virtual_time")
        if self.max_requests is not None and self.max_requests < 0:
            raise ValueError("max_requests must be >= 0")
        if self.max_virtual_time is not None and not self.max_virtual_time > 0:
            raise ValueError("max_virtual_time must be positive")
        if self.max_requests == 0 and self.max_virtual_time is None:
            raise ValueError("max_requests 0 needs max_virtual_time to define the horizon")


@dataclass(slots=True)
class SimConfig:
    """Everything one run needs; same config + seed reproduces bit-identical results."""

    num_servers: int = 4
    arrival_rate: float = 1.0
    service_time: float = 1.0
    power: PowerModel = field(default_factory=PowerModel)
    policy: PolicyExpr = field(default_factory=lambda: parse_policy("-queueSize"))
    nd: NdResolution = NdResolution.RANDOM_FRACTION
    design_params: dict = field(default_factory=dict)
    stop: StopCriterion = field(default_factory=lambda: StopCriterion(max_requests=1500))
    warmup: float = 500.0
    seed: int = 1
    initial_state: PowerState = PowerState.SLEEP
    num_batches: int = 20

    def validate(self) -> None:
        if self.num_servers < 1:
            raise ValueError("num_servers must be >= 1")
        if not self.arrival_rate > 0:
            raise ValueError("arrival_rate must be positive")
        if not self.service_time > 0:
            raise ValueError("service_time must be positive")
        if self.warmup < 0:
            raise ValueError("warmup must be non-negative")
        if self.num_batches < 2:
            raise ValueError("num_batches must be >= 2")
        if self.initial_state not in (PowerState.SLEEP, PowerState.ON):
            raise ValueError("initial_state must be sleep or on")
        self.power.validate()
        self.stop.validate()


@dataclass(slots=True)
class SimulationRecord:
    """Raw outcome of one run, before metric aggregation."""

    config: SimConfig
    requests: list  # all injected requests, arrival order, all completed
    timelines: list  # per server: [(enter_time, PowerState)]
    horizon: float  # end of the metrics window
    assignment_counts: list


def generate_interarrival(rng, rate: float = 1.0) -> float:
    """Draw an exponential interarrival gap by inverting the CDF.

    Returns -ln(1-u)/rate with u ~ U[0,1); u = 0 is redrawn so gaps are
    strictly positive and arrival times stay unique.
    """
    if not rate > 0:
        raise ValueError("rate must be positive")
    u = rng.random()
    while u == 0.0:
        u = rng.random()
    return -math.log1p(-u) / rate


def simulate(config: SimConfig, trace_path: str | Path | None = None) -> SimulationRecord:
    """Run the event loop to the stop criterion; optionally export a CSV trace."""
    config.validate()
    arrival_ss, policy_ss = np.random.SeedSequence(config.seed).spawn(2)
    arrival_rng = np.random.default_rng(arrival_ss)
    policy_rng = np.random.default_rng(policy_ss)

    cluster = Cluster(config.num_servers, config.power, config.service_time,
                      config.initial_state)
    evaluator = compile_policy(config.policy)
    n = config.num_servers
    power, design_params = config.power, config.design_params

    heap: list[tuple] = []
    seq = 0

    def push(kind: EventKind, time: float, server: int = -1, token: int = 0) -> None:
        nonlocal seq
        heapq.heappush(heap, (time, int(kind), seq, server, token))
        seq += 1

    def push_all(scheduled) -> None:
        for sch in scheduled:
            push(sch.kind, sch.time, sch.server, sch.token)

    def snapshots() -> list[ServerSnapshot]:
        return [
            ServerSnapshot(
                id=s.id,
                num_servers=n,
                queue_size=s.queue_size,
                power_state=s.power_state,
                power_on=power.p_on,
                power_sleep=power.p_sleep,
                power_suspend=power.p_suspend,
                power_wakeup=power.p_wakeup,
                time_wakeup=power.t_wakeup,
                time_suspend=power.t_suspend,
                timeout_time=power.timeout,
                design_params=design_params,
            )
            for s in cluster.servers
        ]

    max_req = config.stop.max_requests
    max_vt = config.stop.max_virtual_time

    def can_inject(index: int, t: float) -> bool:
        return (max_req is None or index < max_req) and (max_vt is None or t <= max_vt)

    push_all(cluster.start(0.0))
    arrival_pending = False
    t0 = generate_interarrival(arrival_rng, config.arrival_rate)
    if can_inject(0, t0):
        push(EventKind.ARRIVAL, t0)
        arrival_pending = True

    requests: list[Request] = []
    counts = [0] * n
    completed = 0
    clock = 0.0

    trace_file = open(trace_path, "w", newline="") if trace_path is not None else None
    trace = csv.writer(trace_file) if trace_file is not None else None
    if trace is not None:
        trace.writerow(["time", "server", "event", "power_state", "queue_size"])

    def trace_row(time: float, server_id: int, event: str) -> None:
        if trace is not None:
            s = cluster.servers[server_id]
            trace.writerow([repr(time), server_id, event, s.power_state.value, s.queue_size])

    try:
        while heap:
            # max_requests-only runs end at the last completion; leftover
            # timer events would only move servers towards sleep.
            if max_vt is None and not arrival_pending and completed == len(requests):
                break
            time, prio, _, sid, token = heapq.heappop(heap)
            clock = time
            kind = EventKind(prio)
            if kind is EventKind.ARRIVAL:
                arrival_pending = False
                index = len(requests)
                req = Request(arrival_time=time, index=index)
                try:
                    target = select_server(config.policy, snapshots(), config.nd,
                                           policy_rng, evaluator)
                except (EvaluationError, UndefinedDesignParamError) as exc:
                    raise SimulationError(
                        f"policy evaluation failed for request {index}: {exc}"
                    ) from exc
                requests.append(req)
                counts[target] += 1
                push_all(cluster.on_request_assigned(target, req, time))
                trace_row(time, target, "arrival")
                t_next = time + generate_interarrival(arrival_rng, config.arrival_rate)
                if can_inject(index + 1, t_next):
                    push(EventKind.ARRIVAL, t_next)
                    arrival_pending = True
            elif kind is EventKind.SERVICE_COMPLETE:
                push_all(cluster.on_service_complete(sid, time))
                completed += 1
                trace_row(time, sid, "service_complete")
            elif kind is EventKind.TIMEOUT:
                if token != cluster.servers[sid].timeout_token:
                    continue  # cancelled by an arrival or a service start
                push_all(cluster.on_timeout(sid, time, token))
                trace_row(time, sid, "timeout")
            elif kind is EventKind.SUSPEND_DONE:
                push_all(cluster.on_suspend_done(sid, time))
                trace_row(time, sid, "suspend_done")
            else:
                push_all(cluster.on_wakeup_done(sid, time))
                trace_row(time, sid, "wakeup_done")
    finally:
        if trace_file is not None:
            trace_file.close()

    horizon = max_vt if max_vt is not None else clock
    return SimulationRecord(
        config=config,
        requests=requests,
        timelines=cluster.timelines(),
        horizon=horizon,
        assignment_counts=counts,
    )


def run(config: SimConfig, trace_path: str | Path | None = None) -> "RunResult":
    """Simulate and summarize: the one-call entry point for a single run."""
    from .metrics import summarize

    return summarize(simulate(config, trace_path=trace_path))
