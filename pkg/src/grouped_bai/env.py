"""Seeded reward environment.

Every arm-attribute pair owns an independent Philox stream spawned from the
run seed, and the n-th pull of a pair always returns the n-th value of its
stream. Draws are buffered in chunks; numpy fills arrays element by element,
so the emitted sequence does not depend on the chunk sizes.
"""

from __future__ import annotations

import numpy as np

from .instance import BERNOULLI, ProblemInstance

_FIRST_CHUNK = 256
_MAX_CHUNK = 1 << 15


def parse_seed(text: str | int) -> int:
    """Accept an int or a decimal/hex (``0x``-prefixed) string."""
    if isinstance(text, int):
        seed = text
    else:
        s = str(text).strip().lower()
        seed = int(s, 16) if s.startswith("0x") else int(s, 10)
    if not 0 <= seed < 2**64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return seed


class Environment:
    """Stochastic rewards for one run of one policy.

    The buffers are exposed (``buf``, ``pos``, ``filled``) so compiled policy
    loops can consume rewards without a Python call per pull; they must call
    :meth:`refill` for an arm whose buffer is exhausted.
    """

    def __init__(self, instance: ProblemInstance, seed: int):
        self.instance = instance
        self.seed = parse_seed(seed)
        n, m = instance.n_arms, instance.n_attrs
        children = np.random.SeedSequence(self.seed).spawn(n * m)
        self._gens = [np.random.Generator(np.random.Philox(c)) for c in children]
        self.buf = np.zeros((n, m, _MAX_CHUNK), dtype=np.float64)
        self.pos = np.zeros((n, m), dtype=np.int64)
        self.filled = np.zeros((n, m), dtype=np.int64)
        self._chunk = np.full((n, m), _FIRST_CHUNK, dtype=np.int64)
        self._base = np.zeros((n, m), dtype=np.int64)

    @property
    def consumed(self) -> np.ndarray:
        """Rewards emitted so far, per pair."""
        return self._base + self.pos

    @property
    def emitted(self) -> int:
        return int(self.consumed.sum())

    @property
    def n_arms(self) -> int:
        return self.instance.n_arms

    @property
    def n_attrs(self) -> int:
        return self.instance.n_attrs

    def _draw(self, arm: int, attr: int, size: int) -> np.ndarray:
        gen = self._gens[arm * self.n_attrs + attr]
        mu = float(self.instance.means[arm, attr])
        if self.instance.reward_family == BERNOULLI:
            return (gen.random(size) < mu).astype(np.float64)
        if mu <= 0.0 or mu >= 1.0:
            return np.full(size, mu)
        k = self.instance.kappa
        return gen.beta(mu * k, (1.0 - mu) * k, size)

    def _refill_pair(self, arm: int, attr: int) -> None:
        p, f = self.pos[arm, attr], self.filled[arm, attr]
        left = f - p
        row = self.buf[arm, attr]
        self._base[arm, attr] += p
        row[:left] = row[p:f]
        size = int(min(self._chunk[arm, attr], _MAX_CHUNK - left))
        row[left : left + size] = self._draw(arm, attr, size)
        self.pos[arm, attr] = 0
        self.filled[arm, attr] = left + size
        self._chunk[arm, attr] = min(2 * self._chunk[arm, attr], _MAX_CHUNK)

    def refill(self, arm: int) -> None:
        for j in range(self.n_attrs):
            self._refill_pair(arm, j)

    def sample(self, arm: int, attr: int) -> float:
        """One reward X_ij for arm ``arm``, attribute ``attr`` (0-based)."""
        if not (0 <= arm < self.n_arms and 0 <= attr < self.n_attrs):
            raise IndexError(f"pair ({arm}, {attr}) out of range")
        if self.pos[arm, attr] >= self.filled[arm, attr]:
            self._refill_pair(arm, attr)
        p = self.pos[arm, attr]
        self.pos[arm, attr] = p + 1
        return float(self.buf[arm, attr, p])

    def pull_arm(self, arm: int) -> np.ndarray:
        """Rewards for every attribute of ``arm``."""
        return np.array([self.sample(arm, j) for j in range(self.n_attrs)])
