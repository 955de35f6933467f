"""The comparison method matrix: activeness levels, utility variant, and
path-utility aggregation per named method."""

from __future__ import annotations

from dataclasses import dataclass

from scoutsim import utility


@dataclass(frozen=True)
class MethodConfig:
    name: str
    level1: bool
    level2: bool
    level3: bool
    utility_variant: str
    aggregation: str
    duration_scale: float = 1.0

    def utility_mode(self, params):
        return utility.UtilityMode(
            variant=self.utility_variant, kappa1=params.kappa1,
            p_thr=params.p_thr, d_l=params.d_l, d_h=params.d_h)

    def aggregation_mode(self, params):
        return utility.AggregationMode(kind=self.aggregation, rho=params.rho)


def _m(name, levels, variant=utility.U1, agg=utility.WEIGHTED_AVERAGE, scale=1.0):
    return MethodConfig(name=name, level1=1 in levels, level2=2 in levels,
                        level3=3 in levels, utility_variant=variant,
                        aggregation=agg, duration_scale=scale)


METHODS = {m.name: m for m in [
    _m("A", (1, 2, 3)),
    _m("A_L", (1, 2, 3), scale=1.25),
    _m("A_S", (1, 2, 3), agg=utility.WEIGHTED_SUM),
    _m("A_1", (1,)),
    _m("OL_0", (), agg=utility.GOAL_ONLY),
    _m("OL_1", (1,), agg=utility.GOAL_ONLY),
    _m("OL_1_3", (1, 3), agg=utility.GOAL_ONLY),
    _m("OL_2", (2,), agg=utility.GOAL_ONLY),
    _m("OL_2_3", (2, 3), agg=utility.GOAL_ONLY),
    _m("INTER_0", (), agg=utility.INTERPOLATED),
    _m("A_O", (1, 2, 3), variant=utility.U2),
    _m("A_DW_O", (1, 2, 3), variant=utility.U3),
]}


def get_method(name: str) -> MethodConfig:
    try:
        return METHODS[name]
    except KeyError:
        raise KeyError(f"unknown method {name!r}; choose from {sorted(METHODS)}") from None
