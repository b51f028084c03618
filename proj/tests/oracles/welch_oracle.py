"""Independent high-precision oracle for Welch's two-sided t-test.

Computes t, Welch-Satterthwaite df and the two-sided p-value by adaptive
quadrature of the Student-t density (mpmath, 50 digits). The frozen values in
tests/test_metrics.cpp and the acceptance suite were produced by this script.
"""
import mpmath as mp

mp.mp.dps = 50


def welch(a, b):
    a = [mp.mpf(x) for x in a]
    b = [mp.mpf(x) for x in b]
    na, nb = len(a), len(b)
    ma, mb = sum(a) / na, sum(b) / nb
    va = sum((x - ma) ** 2 for x in a) / (na - 1)
    vb = sum((x - mb) ** 2 for x in b) / (nb - 1)
    se2 = va / na + vb / nb
    t = (ma - mb) / mp.sqrt(se2)
    df = se2 ** 2 / ((va / na) ** 2 / (na - 1) + (vb / nb) ** 2 / (nb - 1))
    pdf = lambda x: mp.gamma((df + 1) / 2) / (mp.sqrt(df * mp.pi) * mp.gamma(df / 2)) * (1 + x * x / df) ** (-(df + 1) / 2)
    tail = mp.quad(pdf, [abs(t), abs(t) + 10, mp.inf])
    return t, df, 2 * tail


CASES = {
    "shifted_by_one": ([1, 2, 3, 4, 5], [2, 3, 4, 5, 6]),
    "unequal_variance": ([1.2, 3.4, 2.2, 5.9, 4.4, 3.3], [7.1, 6.5, 8.8, 5.0]),
    "well_separated": ([10, 11, 12, 13], [0, 0.5, 1, 0.2, 0.3]),
    "small_effect": ([0.1, -0.3, 0.25, 0.05, -0.1, 0.2, 0.0], [0.15, 0.3, -0.05, 0.4, 0.1]),
}

if __name__ == "__main__":
    for name, (a, b) in CASES.items():
        t, df, p = welch(a, b)
        print(f"{name}: t={mp.nstr(t, 17)} df={mp.nstr(df, 17)} p={mp.nstr(p, 17)}")
