"""Floating-base arm holding its tip while the base rocks +-15 deg.

A 1 N push on the base between 10 s and 11 s shows the recovery.

    python3 demos/hierarchy.py
"""
import numpy as np

from softcc.config import build_scenarios, preset
from softcc.simulation import run_scenario


def main():
    (_, sc), = build_scenarios(preset("hierarchy-demo"))
    ts = run_scenario(sc)
    err = ts.extras["err_tip_position"].ravel()
    for t0 in np.arange(0.0, ts.t[-1], 2.0):
        w = ts.window(t0, t0 + 2.0)
        print(f"{t0:5.1f}-{t0 + 2:4.1f} s  max tip error {err[w].max() * 1e3:6.2f} mm  "
              f"base angle {np.rad2deg(ts.q[w, 2]).min():6.1f} .. {np.rad2deg(ts.q[w, 2]).max():5.1f} deg")
    print(f"worst |J B^-1 N| {ts.extras['annihilation'].max():.1e}")


if __name__ == "__main__":
    main()
