"""Independent reimplementation of the seeded streams, used to freeze golden
values in the C++ tests (ground truth bits, share targets, profess targets)."""

M64 = (1 << 64) - 1


class MT19937_64:
    def __init__(self, seed):
        self.mt = [0] * 312
        self.mt[0] = seed & M64
        for i in range(1, 312):
            self.mt[i] = (6364136223846793005 * (self.mt[i - 1] ^ (self.mt[i - 1] >> 62)) + i) & M64
        self.idx = 312

    def _twist(self):
        upper, lower = 0xFFFFFFFF80000000, 0x7FFFFFFF
        for i in range(312):
            x = (self.mt[i] & upper) | (self.mt[(i + 1) % 312] & lower)
            xa = x >> 1
            if x & 1:
                xa ^= 0xB5026F5AA96619E9
            self.mt[i] = self.mt[(i + 156) % 312] ^ xa
        self.idx = 0

    def next(self):
        if self.idx >= 312:
            self._twist()
        y = self.mt[self.idx]
        self.idx += 1
        y ^= (y >> 29) & 0x5555555555555555
        y ^= (y << 17) & 0x71D67FFFEDA60000
        y ^= (y << 37) & 0xFFF7EEE000000000
        y ^= y >> 43
        return y & M64


def splitmix64(x):
    x = (x + 0x9E3779B97F4A7C15) & M64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & M64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & M64
    return x ^ (x >> 31)


def derive_seed(root, tags):
    h = splitmix64(root)
    for t in tags:
        h = splitmix64(h ^ splitmix64((t + 0x632BE59BD9B4E019) & M64))
    return h


def below(rng, bound):
    # Rejection to an exact multiple of the bound (independent of the
    # multiply-shift fast path, but consumes the stream the same way).
    x = rng.next()
    m = x * bound
    low = m & M64
    if low < bound:
        threshold = ((1 << 64) - bound) % bound
        while low < threshold:
            x = rng.next()
            m = x * bound
            low = m & M64
    return m >> 64


TRUTH = 0x74727468
PROC = 0x70726F63

if __name__ == "__main__":
    e = MT19937_64(5489)
    for _ in range(9999):
        e.next()
    print("mt19937_64 10000th:", e.next())

    for seed in (1, 2, 42):
        r = MT19937_64(derive_seed(seed, [TRUTH]))
        print("truth seed", seed, "t=8:", [r.next() >> 63 for _ in range(8)])

    r = MT19937_64(12345)
    print("share n=16 seed 12345:", [below(r, 16) + 1 for _ in range(10)])

    r = MT19937_64(2024)
    draws = 4 * 8  # ell = 2, ceil(log2 256) = 8
    print("profess n=256 ell=2 seed 2024:", sorted({below(r, 256) + 1 for _ in range(draws)}))

    print("derive_seed(7,[1,2]):", derive_seed(7, [1, 2]))

    r = MT19937_64(99)
    print("unit seed 99 (first 3, as 53-bit ints):", [r.next() >> 11 for _ in range(3)])
