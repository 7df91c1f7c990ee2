"""Curvature tracking with three integral gains on a +10% mismatched plant.

Prints the L2 tracking error of each gain over two reference periods.

    python3 demos/curvature_trend.py
"""
from softcc.config import build_scenarios, preset
from softcc.simulation import l2_error, run_scenario


def main():
    for label, sc in build_scenarios(preset("curvature-tracking")):
        ts = run_scenario(sc)
        err = l2_error(ts.q[:-1] - ts.extras["qref"][:-1], dt=ts.period)
        print(f"{label:10s} L2 error {err:.4f} rad")


if __name__ == "__main__":
    main()
