"""The power-state lifecycle of a single server, event by event.

A server serves only while on.  When its queue drains it idles for a
timeout window, suspends (a fixed, non-abortable transition), and sleeps
until the next request arrives, which triggers a fixed-length wakeup.
This script replays a tiny hand-built trace and prints the resulting
state timeline and per-request latencies.
"""

from greenlb import PowerModel, replay_oracle

power = PowerModel()  # 200 W awake states, 14 W asleep, 10 s transitions, 10 s timeout
print("power model:", power)
print()

# One server; three requests with telling gaps:
#  - 2.0   arrives while asleep           -> pays the 10 s wakeup
#  - 14.5  arrives inside the idle window -> served immediately
#  - 30.0  arrives mid-suspend            -> waits for suspend + wakeup
arrivals = [2.0, 14.5, 30.0]
result = replay_oracle(arrivals, [0, 0, 0], num_servers=1, power=power,
                       service_time=1.0, horizon=80.0)

print("timeline of server 0:")
timeline = result.timelines[0]
for i, (start, state) in enumerate(timeline):
    end = timeline[i + 1][0] if i + 1 < len(timeline) else result.horizon
    watts = power.power_in(state)
    print(f"  {start:7.2f} .. {end:7.2f}  {state.value:<8} {watts:6.1f} W")

print()
for arrival, latency in zip(arrivals, result.latencies):
    print(f"request at t={arrival:5.1f} -> latency {latency:5.2f} s")

window = result.horizon
avg_w = result.power_integral_j / window
print()
print(f"energy over [0, {window:.0f} s] = {result.power_integral_j:.0f} J, "
      f"average {avg_w:.1f} W")
print("sleep floor is 14 W; every wakeup/suspend excursion costs 200 W for its duration")
