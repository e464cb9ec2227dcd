"""Regenerate the bundled stature-for-age chart fixture.

The fixture follows the CDC stature-for-age file layout (Sex, Agemos, L, M, S
columns, comma separated) but contains synthetic values: a smooth monotone
median curve obtained by integrating a growth-velocity model (declining
childhood velocity plus a pubertal spurt, tapering to zero at maturity).
Real CDC files can be substituted anywhere a chart path is accepted.
"""
import pathlib

import numpy as np

OUT = pathlib.Path(__file__).resolve().parents[1] / "src" / "fingergrowth" / "data" / "stature_chart.csv"


def velocity(t, base, decay, peak, t_peak, width, t_end):
    v = base * np.exp(-decay * (t - 2.0)) + peak * np.exp(-0.5 * ((t - t_peak) / width) ** 2)
    return v / (1.0 + np.exp((t - t_end) / 0.45))


def median_curve(ages_months, start_cm, adult_cm, peak, t_peak, width, t_end):
    t = ages_months / 12.0
    grid = np.linspace(2.0, 22.0, 4001)
    # calibrate the base velocity coefficient so the curve reaches adult_cm
    lo, hi = 0.1, 20.0
    for _ in range(80):
        base = 0.5 * (lo + hi)
        v = velocity(grid, base, 0.02, peak, t_peak, width, t_end)
        total = start_cm + np.trapezoid(v, grid)
        if total < adult_cm:
            lo = base
        else:
            hi = base
    v = velocity(grid, base, 0.02, peak, t_peak, width, t_end)
    cum = start_cm + np.concatenate([[0.0], np.cumsum(0.5 * (v[1:] + v[:-1]) * np.diff(grid))])
    med = np.interp(t, grid, cum)
    med = np.maximum.accumulate(np.round(med, 5))  # keep monotone after rounding
    return med


def main():
    ages = np.arange(24.5, 240.5 + 0.5, 1.0)
    male = median_curve(ages, start_cm=87.1, adult_cm=176.8, peak=4.6, t_peak=13.5, width=1.1, t_end=17.0)
    female = median_curve(ages, start_cm=85.7, adult_cm=163.3, peak=4.3, t_peak=11.5, width=1.1, t_end=15.0)
    lines = ["Sex,Agemos,L,M,S"]
    for sex_code, med in ((1, male), (2, female)):
        for a, m in zip(ages, med):
            lines.append(f"{sex_code},{a},1,{m:.5f},0.04000")
    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text("\n".join(lines) + "\n")
    print(f"wrote {OUT} ({len(lines) - 1} rows)")
    print(f"male:   {male[0]:.1f} -> {male[-1]:.1f} cm")
    print(f"female: {female[0]:.1f} -> {female[-1]:.1f} cm")


if __name__ == "__main__":
    main()
