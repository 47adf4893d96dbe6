"""Counter-based random streams for parallel replications.

Every consumer of randomness gets its own named substream derived from
(master_seed, rep, stream id), so replications can run in any order or in
parallel and still reproduce bit-identical results. Philox is counter
based, which makes the derived streams statistically independent.
"""
from __future__ import annotations

import numpy as np

# Stream ids. Policies add their position in the policy list on top of
# POLICY so two policies in one replication never share a stream.
THETA = 0
BIAS_DIR = 1
OFFLINE = 2
ONLINE_CTX = 3
ONLINE_NOISE = 4
POLICY = 5
DELTA_MC = 6
FIT_MULTISTART = 7
_POLICY_STRIDE = 64


def stream(master_seed: int, rep: int, stream_id: int, variant: int = 0) -> np.random.Generator:
    """Independent generator for one (replication, purpose) pair."""
    ss = np.random.SeedSequence(entropy=int(master_seed),
                                spawn_key=(int(rep), int(stream_id), int(variant)))
    return np.random.Generator(np.random.Philox(ss))


def policy_stream(master_seed: int, rep: int, policy_index: int, variant: int = 0) -> np.random.Generator:
    """Stream for the policy at a given position in the experiment's policy list."""
    return stream(master_seed, rep, POLICY + _POLICY_STRIDE * (policy_index + 1), variant)
