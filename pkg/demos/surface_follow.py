"""Approach a vertical wall, then slide along it to a target.

Writes the tip path to surface_tip_path.csv and prints the phase log.

    python3 demos/surface_follow.py
"""
import numpy as np

from softcc.config import build_scenarios, preset
from softcc.simulation import run_scenario


def main(out="surface_tip_path.csv"):
    (_, sc), = build_scenarios(preset("surface-follow"))
    ts = run_scenario(sc)
    print(f"contact onset {ts.events['contact_onset']:.3f} s, max penetration {ts.max_penetration * 1e3:.2f} mm")
    for t, a, b in ts.events["phase_switches"]:
        print(f"  {t:6.3f} s  {a} -> {b}")
    print(f"final tangential error {ts.extras['tangential_error'][-1, 0]:.4f} m")
    np.savetxt(out, np.column_stack([ts.t, ts.tip, ts.contact]), delimiter=",",
               header="t,tip_x,tip_y,contact", comments="")


if __name__ == "__main__":
    main()
