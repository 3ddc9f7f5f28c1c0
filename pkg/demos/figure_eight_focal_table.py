"""Focal times along three periods of the figure-eight choreography.

Reducing the planar three-body flow by angular momentum can only add focal
times, at most one between consecutive original ones.  This script prints the
interleaved table in units of the period.  It takes about ten seconds.

    python3 demos/figure_eight_focal_table.py
"""
from lagfocal.focal_scan import alternation_report, focal_scan
from lagfocal.models import figure_eight_orbit, make_nbody_planar


def main():
    z0, T = figure_eight_orbit(check=True)
    model, g = make_nbody_planar(3)
    rep = alternation_report(focal_scan(model, z0, (0.0, 3 * T), g))
    print(f"period T = {T:.10f}")
    print(" k   reduced t/T   original t/T")
    for k in range(max(len(rep.reduced_times), len(rep.original_times))):
        red = f"{rep.reduced_times[k] / T:12.6f}" if k < len(rep.reduced_times) else " " * 12
        orig = f"{rep.original_times[k] / T:12.6f}" if k < len(rep.original_times) else ""
        print(f"{k + 1:2d}  {red}   {orig}")
    print(f"counts {len(rep.reduced_times)} vs {len(rep.original_times)}, "
          f"inequality {rep.inequality_ok}, alternating {rep.alternating_ok}")


if __name__ == "__main__":
    main()
