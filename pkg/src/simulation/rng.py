"""Per-agent, per-day random streams derived from the scenario seed."""
import hashlib

import numpy as np

from src.protocol.canonical import canonicalize


def stream_seed(seed, agent, day):
    """64-bit seed of the stream for ``agent`` on ``day``."""
    digest = hashlib.sha256(canonicalize(["principia-rng", int(seed), agent, int(day)])).digest()
    return int.from_bytes(digest[:8], "big")


def split_rng(seed, agent, day):
    """
    Independent generator for one agent on one day.

    Streams depend only on (seed, agent, day), so adding or removing other
    agents never changes an agent's draws.

    Args:
        seed: Scenario seed
        agent: PersonId, or any canonical value naming the stream
        day: Simulated day

    Returns:
        numpy.random.Generator
    """
    return np.random.default_rng(stream_seed(seed, agent, day))
