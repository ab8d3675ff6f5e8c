"""
Streams - Counter-based random streams per replica
"""
import numpy as np


def replica_seed(master_seed: int, replica: int) -> int:
    """64-bit seed of one replica, derived from (master seed, replica index)"""
    seq = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(replica),))
    return int(seq.generate_state(1, dtype=np.uint64)[0])


def replica_rng(master_seed: int, replica: int) -> np.random.Generator:
    """Philox generator for one replica"""
    return seeded_rng(replica_seed(master_seed, replica))


def seeded_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))


def clock_rng(rng: np.random.Generator) -> np.random.Generator:
    """Independent stream for event clocks; leaves `rng` untouched"""
    return np.random.Generator(rng.bit_generator.jumped())
