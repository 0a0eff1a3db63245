"""Portable 64-bit linear congruential generator.

Codebooks and fold assignments must be reproducible across platforms and
implementations, so every seeded choice in the toolkit goes through this
generator instead of numpy's bit generators.

    state <- (6364136223846793005 * state + 1442695040888963407) mod 2**64

Uniform reals take the top 53 bits of the new state.
"""

MULTIPLIER = 6364136223846793005
INCREMENT = 1442695040888963407
_MASK = (1 << 64) - 1


class Lcg64:
    def __init__(self, seed=0):
        self.state = int(seed) & _MASK

    def next_u64(self):
        self.state = (MULTIPLIER * self.state + INCREMENT) & _MASK
        return self.state

    def uniform(self):
        """Real in [0, 1) with 53 bits of resolution."""
        return (self.next_u64() >> 11) * (1.0 / 9007199254740992.0)

    def randbelow(self, n):
        if n <= 0:
            raise ValueError("n must be positive")
        return min(int(self.uniform() * n), n - 1)

    def shuffle(self, items):
        """Fisher-Yates shuffle in place, walking from the end."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randbelow(i + 1)
            items[i], items[j] = items[j], items[i]
        return items
