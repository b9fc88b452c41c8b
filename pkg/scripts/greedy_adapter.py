#!/usr/bin/env python3
"""Reference external optimizer speaking the adapter wire protocol.

Reads one JSON request per line on stdin and answers one JSON response
per line on stdout (see docs/adapter_protocol.md).  The policy is a
feedback-aware greedy sweep: keep the best vector seen, advance one
dimension at a time through its options, and fall back to the first
option everywhere on the first call.  It exists as a working example of
the protocol, not as a strong optimizer.

Usage:
    mapforge optimize --strategy external \
        --adapter-url "python3 scripts/greedy_adapter.py" ...
"""

import json
import sys


def choose(request):
    domains = request["domains"]
    history = request["history"]
    best = request.get("best_so_far")
    if not history:
        return [0] * len(domains)
    base = best["choices"] if best and best.get("choices") else [0] * len(domains)
    # Sweep: iteration k perturbs dimension k % n to its next option.
    k = request["iteration"] % len(domains)
    vector = list(base)
    vector[k] = (vector[k] + 1) % len(domains[k]["options"])
    return vector


def main():
    for line in sys.stdin:
        request = json.loads(line)
        response = {"vector": choose(request)}
        print(json.dumps(response), flush=True)


if __name__ == "__main__":
    main()
