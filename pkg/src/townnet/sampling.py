"""Sampling primitives: seeded streams, rounding, size and count draws.

Everything that touches randomness goes through rng_stream / derive_seed so
that any phase of the pipeline can be reproduced in isolation and the
realization loop can be reordered or parallelized without changing results.

Rounding convention: half away from zero, i.e. round(x) = sign(x) * floor(|x| + 0.5).
This differs from numpy's banker's rounding and is applied consistently to
sizes, capacities, connection counts, and ring displacements.
"""
from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(master_seed: int, *tags) -> int:
    """Derive an independent 64-bit seed from a master seed and string tags."""
    blob = "|".join([str(master_seed), *map(str, tags)]).encode()
    return int.from_bytes(hashlib.sha256(blob).digest()[:8], "little")


def rng_stream(seed: int, index: int) -> np.random.Generator:
    """Generator number `index` of the family rooted at `seed`.

    Streams with different indices are statistically independent, and the
    stream for a given (seed, index) never depends on which other indices
    were instantiated.
    """
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(index,))
    return np.random.Generator(np.random.PCG64(ss))


def round_half_away(x):
    """Round half away from zero; works on scalars and arrays, returns floats."""
    x = np.asarray(x)
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def sample_skew_normal(rng: np.random.Generator, alpha: float, xi: float,
                       omega: float, size: int) -> np.ndarray:
    """Skew-normal draws via the bivariate representation.

    With delta = alpha / sqrt(1 + alpha^2) and U0, V iid standard normal,
    Z = delta*|U0| + sqrt(1 - delta^2)*V is standard skew-normal with shape
    alpha; the result is xi + omega*Z.
    """
    delta = alpha / np.sqrt(1.0 + alpha * alpha)
    u0 = rng.standard_normal(size)
    v = rng.standard_normal(size)
    z = delta * np.abs(u0) + np.sqrt(1.0 - delta * delta) * v
    return xi + omega * z


def sample_count(rng: np.random.Generator, mu: float, sigma: float,
                 size: int, floor: int) -> np.ndarray:
    """Integer counts: Normal(mu, sigma), rounded half away, clamped >= floor.

    floor=1 for household sizes and container capacities (an empty container
    is meaningless), floor=0 for star connection counts (a vertex may have
    no contacts in a layer).
    """
    draws = rng.normal(mu, sigma, size)
    return np.maximum(round_half_away(draws), floor).astype(np.int64)


def displace(pos, d, n: int) -> np.ndarray:
    """Ring position(s) reached from `pos` by real-valued displacement `d`.

    round(pos + d) mod n with the mathematical modulus, so results are
    always in [0, n).
    """
    return round_half_away(np.asarray(pos) + d).astype(np.int64) % n
