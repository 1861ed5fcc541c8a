"""The two source/cost configurations used in the simulation study."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..model import GroupDist, ProblemInstance, SourceSpec

# 5 groups (A..E), 10 sources. The fourth entry of the last row is taken as
# 0.5, the only value that makes the row a distribution.
SETTING_ONE_DISTS = (
    (1.0, 0.0, 0.0, 0.0, 0.0),
    (0.05, 0.15, 0.15, 0.15, 0.5),
    (0.05, 0.2, 0.3, 0.35, 0.1),
    (0.05, 0.3, 0.55, 0.1, 0.0),
    (0.05, 0.25, 0.15, 0.0, 0.55),
    (0.05, 0.05, 0.4, 0.45, 0.05),
    (0.05, 0.15, 0.6, 0.05, 0.15),
    (0.05, 0.05, 0.05, 0.4, 0.45),
    (0.05, 0.3, 0.3, 0.05, 0.3),
    (0.0, 0.5, 0.0, 0.5, 0.0),
)
SETTING_ONE_COSTS = (0.02, 3, 4, 3, 0.1, 2.4, 1.6, 2, 2, 1)

SETTING_TWO_BASE = (
    0.0057, 0.0307, 0.0625, 0.0938, 0.1547, 0.0392, 0.0380, 0.1256, 0.0347, 0.0825,
    0.0370, 0.0154, 0.0379, 0.0410, 0.0268, 0.0824, 0.0010, 0.0313, 0.0295, 0.0303,
)


@dataclass(frozen=True)
class Setting:
    """Sources and costs; the target and budget are supplied per experiment."""

    name: str
    sources: tuple[SourceSpec, ...]

    @property
    def k(self) -> int:
        return self.sources[0].dist.k

    def instance(self, target: GroupDist, budget: float) -> ProblemInstance:
        return ProblemInstance(self.sources, target, budget)


def setting_one() -> Setting:
    sources = tuple(SourceSpec(GroupDist(q), c) for q, c in zip(SETTING_ONE_DISTS, SETTING_ONE_COSTS))
    return Setting("setting1", sources)


def setting_two() -> Setting:
    """20 sources; source m is the base vector shifted left by m - 1 places."""
    base = np.array(SETTING_TWO_BASE)
    n = base.size
    sources = tuple(
        SourceSpec(GroupDist(np.roll(base, -m)), 0.1 + 0.9 * m / (n - 1))
        for m in range(n)
    )
    return Setting("setting2", sources)


SETTINGS = {"setting1": setting_one, "setting2": setting_two}


def get_setting(name: str) -> Setting:
    try:
        return SETTINGS[name]()
    except KeyError:
        raise ValueError(f"unknown setting {name!r}; choose from {sorted(SETTINGS)}") from None
