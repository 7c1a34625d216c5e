import numpy as np


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """
    Build a numpy Generator for one deterministic random stream.

    Args:
        seed (int): Master seed of the run.
        stream (int): Extra entropy words (realization index, sweep number, site).

    Returns:
        np.random.Generator: A PCG64 generator seeded from (seed, *stream).
    """
    if seed < 0 or any(word < 0 for word in stream):
        raise ValueError('Seeds and stream words must be non-negative integers.')
    if stream:
        return np.random.default_rng([int(seed), *(int(word) for word in stream)])
    return np.random.default_rng(int(seed))


def uniform_complex(rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
    """
    Draw complex entries whose real and imaginary parts are uniform on [-1, 1].

    The real block is drawn before the imaginary block, so the result depends only on the generator state and shape.
    """
    real = rng.uniform(-1.0, 1.0, size=shape)
    imag = rng.uniform(-1.0, 1.0, size=shape)
    return real + 1j * imag


def uniform_couplings(rng: np.random.Generator, low: float, high: float, count: int) -> np.ndarray:
    """
    Draw independent couplings uniform on [low, high]; a degenerate interval returns the constant exactly.
    """
    if high == low:
        return np.full(count, float(low))
    return rng.uniform(low, high, size=count)
