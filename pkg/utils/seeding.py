import numpy as np

# 64-битный корневой seed, как в конфиге экспериментов
MAX_SEED = 2**64 - 1


def make_rng(seed) -> np.random.Generator:
    """Генератор из int seed или SeedSequence."""
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.PCG64(seed))
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def spawn_sequences(root_seed: int, n: int) -> list[np.random.SeedSequence]:
    # i-й запуск всегда получает i-го потомка: не зависит от числа воркеров
    return np.random.SeedSequence(root_seed).spawn(n)


def spawn_rngs(root_seed: int, n: int) -> list[np.random.Generator]:
    return [make_rng(s) for s in spawn_sequences(root_seed, n)]
