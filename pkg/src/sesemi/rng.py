"""Counter-based random streams.

Every source of randomness (initialization, dropout masks, augmentation,
batch sampling) draws from its own :class:`RngStream`.  Streams are split by
purpose name, so consuming draws in one stream never shifts another.
"""

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def _derive_key(seed, purpose):
    digest = hashlib.blake2b(
        f"{seed & _MASK64}:{purpose}".encode(), digest_size=8
    ).digest()
    return int.from_bytes(digest, "little")


class RngStream:
    """A Philox stream identified by ``(seed, counter)``.

    Philox is a counter-based generator with a platform-independent output
    sequence, so replaying a seed reproduces every draw bit-exactly.
    """

    def __init__(self, seed, counter=0):
        self.seed = int(seed) & _MASK64
        self._gen = np.random.Generator(
            np.random.Philox(key=self.seed, counter=int(counter))
        )

    @property
    def counter(self):
        state = self._gen.bit_generator.state["state"]["counter"]
        return int(sum(int(c) << (64 * i) for i, c in enumerate(state)))

    def split(self, purpose):
        """Independent child stream keyed by ``purpose``."""
        return RngStream(_derive_key(self.seed, purpose))

    def random(self, shape=None):
        return self._gen.random(shape)

    def normal(self, loc=0.0, scale=1.0, size=None):
        return self._gen.normal(loc, scale, size)

    def integers(self, low, high=None, size=None):
        return self._gen.integers(low, high, size=size)

    def permutation(self, n):
        return self._gen.permutation(n)

    def __repr__(self):
        return f"RngStream(seed={self.seed}, counter={self.counter})"
