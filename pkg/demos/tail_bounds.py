"""Print the three analytic tail bounds next to a Monte Carlo tail of max xi."""

from youngfbm.mc import ExperimentSpec, dominance_report

spec = ExperimentSpec("driver-max", 0.5, 8, 20_000, 7, (2.5, 3.0, 4.0), bound={"m": 2})
for kind in ("slepian", "fernique"):
    print(kind)
    print(dominance_report(spec, kind).to_csv())
