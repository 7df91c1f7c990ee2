"""Fit stiffness, damping and actuator gains to simulated step responses.

    python3 demos/identification.py [noise_rad]
"""
import sys

from softcc.identification import PAPER_PARAMS, identify, synthesize_step_data


def main(noise=1e-3):
    data = synthesize_step_data(PAPER_PARAMS, noise=noise, seed=0)
    est = identify(data)
    print(f"k      true {PAPER_PARAMS.k:.4f}  fit {est.k:.4f}")
    print(f"d      true {PAPER_PARAMS.d:.4f}  fit {est.d:.4f}")
    for i, (a0, a1, g0, g1) in enumerate(zip(PAPER_PARAMS.alpha, est.alpha, PAPER_PARAMS.gamma, est.gamma)):
        print(f"seg {i}  alpha {a0:.2e} -> {a1:.2e}   gamma {g0:.2f} -> {g1:.2f}")


if __name__ == "__main__":
    main(float(sys.argv[1]) if len(sys.argv) > 1 else 1e-3)
