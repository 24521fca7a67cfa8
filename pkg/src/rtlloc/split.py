"""IP-disjoint train/val/test splitting."""
from __future__ import annotations

import numpy as np

from .data import TrainingExample


class TooFewIPs(ValueError):
    pass


def ip_disjoint_split(dataset: list[TrainingExample],
                      ratios: tuple[float, float, float] = (0.7, 0.15, 0.15),
                      seed: int = 36):
    """Partition whole IPs (never instances) into train/val/test.

    Greedy pair-count balancing toward the requested ratios: IPs are taken
    largest-first (seeded shuffle breaks count ties) and each goes to the
    split with the largest remaining pair deficit.
    """
    ips: dict[str, int] = {}
    for ex in dataset:
        ips[ex.ip_name] = ips.get(ex.ip_name, 0) + len(ex.positives)
    if len(ips) < 3:
        raise TooFewIPs(f"need at least 3 IPs for a disjoint split, got {len(ips)}")
    total = sum(ips.values())
    targets = [r / sum(ratios) * total for r in ratios]

    rng = np.random.default_rng(seed)
    names = sorted(ips)
    order = [names[i] for i in rng.permutation(len(names))]
    order.sort(key=lambda n: -ips[n])  # stable: shuffle breaks ties only

    assigned: list[list[str]] = [[], [], []]
    filled = [0.0, 0.0, 0.0]
    for name in order:
        deficits = [targets[i] - filled[i] for i in range(3)]
        best = max(range(3), key=lambda i: deficits[i])
        assigned[best].append(name)
        filled[best] += ips[name]

    sets = [set(a) for a in assigned]
    splits = tuple([ex for ex in dataset if ex.ip_name in s] for s in sets)
    return splits
