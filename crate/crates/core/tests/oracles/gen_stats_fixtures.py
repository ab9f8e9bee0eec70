"""Independent high-precision oracle for the statistics fixtures.

Computes Welch t statistics, Welch-Satterthwaite dof, upper-tail p values,
Pearson r and its two-sided p value, and Student-t CDF reference points with
mpmath at 50 significant digits. Output is frozen into stats_fixtures.json and
student_t_cdf.json; rerun only to regenerate.
"""
import json
import random
from pathlib import Path

import mpmath as mp

mp.mp.dps = 50
OUT = Path(__file__).resolve().parent.parent / "fixtures"


def mean(xs):
    return mp.fsum(xs) / len(xs)


def var(xs):
    m = mean(xs)
    return mp.fsum((x - m) ** 2 for x in xs) / (len(xs) - 1)


def t_sf(t, dof):
    # P(T > t) via the regularized incomplete beta function
    x = dof / (dof + t * t)
    tail = mp.betainc(dof / 2, mp.mpf(1) / 2, 0, x, regularized=True) / 2
    return tail if t >= 0 else 1 - tail


def welch(a, b):
    a = [mp.mpf(x) for x in a]
    b = [mp.mpf(x) for x in b]
    va, vb = var(a) / len(a), var(b) / len(b)
    t = (mean(a) - mean(b)) / mp.sqrt(va + vb)
    dof = (va + vb) ** 2 / (va**2 / (len(a) - 1) + vb**2 / (len(b) - 1))
    return t, dof, t_sf(t, dof)


def pearson(x, y):
    x = [mp.mpf(v) for v in x]
    y = [mp.mpf(v) for v in y]
    mx, my = mean(x), mean(y)
    sxy = mp.fsum((a - mx) * (b - my) for a, b in zip(x, y))
    sxx = mp.fsum((a - mx) ** 2 for a in x)
    syy = mp.fsum((b - my) ** 2 for b in y)
    r = sxy / mp.sqrt(sxx * syy)
    n = len(x)
    t = r * mp.sqrt((n - 2) / (1 - r * r))
    p = 2 * t_sf(abs(t), n - 2)
    return r, p


def main():
    rng = random.Random(20240611)
    datasets = []
    for k in range(20):
        na = rng.randint(3, 40)
        nb = rng.randint(3, 40)
        shift = rng.uniform(-3, 3)
        sa = rng.uniform(0.5, 4)
        sb = rng.uniform(0.5, 4)
        a = [round(rng.gauss(50 + shift, sa), 6) for _ in range(na)]
        b = [round(rng.gauss(50, sb), 6) for _ in range(nb)]
        n = rng.randint(3, 40)
        slope = rng.uniform(-2, 2)
        x = [round(rng.uniform(0, 100), 6) for _ in range(n)]
        y = [round(slope * xi + rng.gauss(0, 40), 6) for xi in x]
        t, dof, p = welch(a, b)
        r, rp = pearson(x, y)
        datasets.append(
            {
                "name": f"fixture_{k:02}",
                "a": a,
                "b": b,
                "welch_t": float(t),
                "welch_dof": float(dof),
                "welch_p_greater": float(p),
                "x": x,
                "y": y,
                "pearson_r": float(r),
                "pearson_p": float(rp),
            }
        )
    # hand example from the operation contract
    t, dof, p = welch([2, 4, 6], [1, 2, 3])
    r, rp = pearson([1, 2, 3], [1, 2, 4])
    datasets.append(
        {
            "name": "hand_example",
            "a": [2, 4, 6],
            "b": [1, 2, 3],
            "welch_t": float(t),
            "welch_dof": float(dof),
            "welch_p_greater": float(p),
            "x": [1, 2, 3],
            "y": [1, 2, 4],
            "pearson_r": float(r),
            "pearson_p": float(rp),
        }
    )
    (OUT / "stats_fixtures.json").write_text(json.dumps(datasets, indent=1) + "\n")

    cdf = []
    for dof in [1, 2, 5, 10, 30, 100]:
        for i in range(-40, 41):
            t = mp.mpf(i) / 4
            cdf.append({"t": float(t), "dof": dof, "cdf": float(1 - t_sf(t, dof))})
    (OUT / "student_t_cdf.json").write_text(json.dumps(cdf) + "\n")


if __name__ == "__main__":
    main()
