"""A tour of the policy expression language.

Policies are tiny arithmetic expressions evaluated once per server for each
incoming request; the request goes to the server with the highest value.
This script parses a few policies, inspects their syntax trees, and walks
through the classic evaluation tables: shortest-queue balancing, threshold
consolidation, and the two tie-resolution modes.
"""

import numpy as np

from greenlb import (
    NdResolution,
    PowerState,
    ServerSnapshot,
    evaluate,
    parse_policy,
    pretty_print,
    select_server,
)
from greenlb.policy import format_ast


def cluster(queues, on_flags=None, params=None):
    n = len(queues)
    on_flags = on_flags or [True] * n
    return [
        ServerSnapshot(id=i, num_servers=n, queue_size=queues[i],
                       power_state=PowerState.ON if on_flags[i] else PowerState.SLEEP,
                       design_params=params or {})
        for i in range(n)
    ]


print("=" * 70)
print("1. Parsing")
print("=" * 70)
policy = parse_policy('-queueSize - dspace("q") * (1 - stateOn)')
print("canonical form:", pretty_print(policy))
print(format_ast(policy))

print()
print("=" * 70)
print("2. Shortest-queue balancing (argmax of -queueSize)")
print("=" * 70)
shortest = parse_policy("-queueSize")
queues = [0, 0, 0, 0]
rng = np.random.default_rng(7)
for request in range(1, 8):
    snaps = cluster(queues)
    values = [evaluate(shortest, s, rng) for s in snaps]
    pick = select_server(shortest, snaps, NdResolution.RANDOM_FRACTION, rng)
    print(f"request #{request}: values={values} -> server {pick}")
    queues[pick] += 1
print("final queue sizes:", queues, "(evenly spread)")

print()
print("=" * 70)
print("3. Threshold consolidation: switch a server on only at queue size 5")
print("=" * 70)
threshold = parse_policy('-queueSize - dspace("q") * (1 - stateOn)')
queues = [0, 0, 0, 0]
awake = [False, False, False, False]
for request in range(1, 9):
    snaps = cluster(queues, awake, params={"q": 5.0})
    values = [evaluate(threshold, s, rng) for s in snaps]
    pick = select_server(threshold, snaps, NdResolution.FIXED_ORDER, rng,)
    print(f"request #{request}: values={values} -> server {pick}")
    queues[pick] += 1
    awake[pick] = True  # illustrative: the server switches on for the table
print("only", sum(awake), "of 4 servers were ever switched on")

print()
print("=" * 70)
print("4. Tie resolution")
print("=" * 70)
zero = parse_policy("0")
snaps = cluster([0, 0, 0, 0])
picks = [select_server(zero, snaps, NdResolution.RANDOM_FRACTION,
                       np.random.default_rng(s)) for s in range(8)]
print("random fractions spread ties:      ", picks)
picks = [select_server(zero, snaps, NdResolution.FIXED_ORDER, None)
         for _ in range(8)]
print("fixed order always takes highest id:", picks)
