"""Two sanity checks with known answers: oscillator and round sphere.

Every focal time of the unit oscillator is a multiple of pi, with multiplicity
equal to the number of equal frequencies.  On the unit sphere a unit-speed
geodesic first meets a focal point at the antipode, t = pi, and the Ricci
curvature along it is 1.

    python3 demos/oscillator_and_sphere.py
"""
import numpy as np

from lagfocal.focal_scan import focal_times
from lagfocal.integral_reduction import ricci_curvature
from lagfocal.models import make_oscillator, make_sphere_geodesic, sphere_great_circle_state


def main():
    for freqs in ([1.0, 1.0], [1.0, 2.0], [1.0, np.sqrt(2.0)]):
        recs = focal_times(make_oscillator(2, freqs), np.array([0.3, -0.1, 1.0, 0.4]), window=(0.0, 7.0))
        label = ", ".join(f"{w:.4g}" for w in freqs)
        print(f"oscillator ({label}): " + ", ".join(f"{r.time:.8f} (x{r.multiplicity})" for r in recs))

    sphere = make_sphere_geodesic()
    for speed in (1.0, 2.0):
        z0 = sphere_great_circle_state(0.5, speed)
        first = focal_times(sphere, z0, window=(0.0, 4.0 / speed))[0].time
        print(f"sphere speed {speed}: first focal time {first:.10f}, pi/speed {np.pi / speed:.10f}, "
              f"Ricci {ricci_curvature(sphere, z0).original:.10f}")


if __name__ == "__main__":
    main()
