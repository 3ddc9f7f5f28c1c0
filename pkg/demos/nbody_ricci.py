"""Reduced Ricci curvature of the planar three-body problem.

Compares the pipeline value with the reduced jet computed from scratch, and
with the closed form in both signs of its U/I term (see the README).

    python3 demos/nbody_ricci.py
"""
import numpy as np

from lagfocal.integral_reduction import brute_force_reduced_report, ricci_curvature
from lagfocal.models import make_nbody_planar, nbody_reduced_ricci_closed_form, random_nbody_state


def main():
    model, g = make_nbody_planar(3)
    rng = np.random.default_rng(0)
    print("  original    reduced     direct      -U/I form    +U/I form")
    for _ in range(5):
        st = random_nbody_state(3, rng)
        rep = ricci_curvature(model, st.phase, g)
        direct, _ = brute_force_reduced_report(model, g, st.phase)
        print(f"{rep.original:10.5f}  {rep.reduced:10.5f}  {direct.ricci:10.5f}  "
              f"{nbody_reduced_ricci_closed_form(st):10.5f}  {nbody_reduced_ricci_closed_form(st, True):10.5f}")


if __name__ == "__main__":
    main()
