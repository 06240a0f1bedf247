"""One full simulation run, summarized.

Four power-managed servers, Poisson arrivals at 1 request/s, deterministic
1 s service, and the threshold policy with q = 5: a sleeping server is only
woken once every running server has at least five requests in its queue.
"""

import json

from greenlb import NdResolution, SimConfig, StopCriterion, parse_policy, run

config = SimConfig(
    num_servers=4,
    arrival_rate=1.0,
    service_time=1.0,
    policy=parse_policy('-queueSize - dspace("q") * (1 - stateOn)'),
    design_params={"q": 5.0},
    nd=NdResolution.RANDOM_FRACTION,
    stop=StopCriterion(max_requests=1500),
    warmup=500.0,
    seed=42,
)

result = run(config)
print(json.dumps(result.to_dict(), indent=2))

print()
print(f"average latency : {result.avg_latency_s:.3f} s "
      f"(+- {result.latency_ci_halfwidth:.3f} at 95%)")
print(f"average power   : {result.avg_power_per_server_w:.1f} W/server, "
      f"{result.total_power_w:.1f} W total "
      f"(+- {result.power_ci_halfwidth:.2f} W/server at 95%)")
print(f"assignments     : {result.per_server_assignment_count}")
for i, fracs in enumerate(result.per_state_time_fraction):
    shares = ", ".join(f"{state} {frac:.1%}" for state, frac in fracs.items())
    print(f"server {i} time  : {shares}")
print()
print("same config + seed always reproduces these numbers bit for bit")
