"""Independent high-precision oracle for the constants frozen in the tests.

Run with ``python3 tests/oracles/derive_values.py``; needs ``mpmath``. Nothing
here imports the package under test.
"""

import mpmath as mp

mp.mp.dps = 50
TWO_PI = 2 * mp.pi


def cfr(gains, delays, w):
    return mp.fsum(a * mp.exp(-1j * w * t) for a, t in zip(gains, delays))


def default_scenario():
    taps = (0, 43, 70, 101, 131, 163, 197, 232)
    toa = mp.mpf("10.1e-9")
    delays = [toa + mp.mpf(k) / mp.mpf("3e9") for k in taps]
    powers = [mp.mpf(8)] + [mp.mpf("0.7") ** i for i in range(len(taps) - 1)]
    return [mp.sqrt(p) for p in powers], delays


def main():
    print("two-path CFR, gains (1, 0.5), delays (10 ns, 25 ns):")
    for f in ("1e8", "3.7e8", "1.234e9"):
        v = cfr([1, mp.mpf("0.5")], [mp.mpf("10e-9"), mp.mpf("25e-9")], TWO_PI * mp.mpf(f))
        print(f"  f={f}: {complex(v)!r}")

    gains, delays = default_scenario()
    T = mp.mpf(64) / mp.mpf("200e6")
    w0, wt = TWO_PI * mp.mpf("4e9"), TWO_PI / T
    print("default scenario, 4 GHz band, N=64, T=320 ns:")
    for n in (0, 1, 31, 63):
        print(f"  n={n}: {complex(cfr(gains, delays, w0 + n * wt))!r}")

    N, T = 128, mp.mpf("640e-9")
    wt = TWO_PI / T
    print("single-path single-band bound (sigma^2=1, |a|=1, N=128, T=640 ns):",
          repr(float(6 / (N * (N ** 2 - 1) * wt ** 2))))
    freqs = [TWO_PI * mp.mpf(fc) + n * wt for fc in ("4e9", "6e9") for n in range(N)]
    mean = mp.fsum(freqs) / len(freqs)
    spread = mp.fsum((w - mean) ** 2 for w in freqs)
    print("single-path two-band bound (4 and 6 GHz):", repr(float(1 / (2 * spread))))

    # Concentrated Fisher information of the default scenario, sigma^2 = 1.
    K = len(delays)
    B = mp.matrix(len(freqs), K)
    D = mp.matrix(len(freqs), K)
    for m, w in enumerate(freqs):
        for k, t in enumerate(delays):
            B[m, k] = mp.exp(-1j * w * t)
            D[m, k] = -1j * w * B[m, k]
    BH = B.transpose_conj()
    proj = mp.eye(len(freqs)) - B * mp.inverse(BH * B) * BH
    inner = D.transpose_conj() * proj * D
    F = mp.matrix(K, K)
    for i in range(K):
        for j in range(K):
            F[i, j] = 2 * mp.re(inner[i, j] * gains[j] * gains[i])
    bound = mp.inverse(F)
    print("default scenario two-band bound diagonal (sigma^2=1):")
    print("  ", [float(bound[k, k]) for k in range(K)])
    print("true cycle count of path 1 over 2 GHz:",
          int(mp.nint(mp.mpf("2e9") * delays[0])))


if __name__ == "__main__":
    main()
