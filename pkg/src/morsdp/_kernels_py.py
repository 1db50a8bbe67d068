"""Pure numpy implementation of the Bellman backup kernels.

Layer structure (shared with the compiled core): augmented state ``i`` owns
pairs ``state_ptr[i]:state_ptr[i+1]`` (ascending action index), pair ``p``
plays ``pair_action[p]`` and owns successors ``succ_ptr[p]:succ_ptr[p+1]``,
which point into the next layer through ``succ_idx`` with ``succ_prob``.
Value arrays are 2-D: one column per seed.
"""
import numpy as np


def _segment_sum(weighted, ptr):
    # left-to-right within each segment so results match the compiled loop bit for bit
    n = len(ptr) - 1
    out = np.zeros((n,) + weighted.shape[1:])
    starts = ptr[:-1]
    lengths = np.diff(ptr)
    for k in range(int(lengths.max()) if n else 0):
        live = np.nonzero(lengths > k)[0]
        out[live] = out[live] + weighted[starts[live] + k]
    return out


def pair_values(succ_ptr, succ_idx, succ_prob, v_next):
    """Expected next-layer value of every (state, action) pair."""
    weighted = succ_prob[:, None] * v_next[succ_idx]
    return _segment_sum(weighted, succ_ptr)


def backup_min(state_ptr, pair_action, succ_ptr, succ_idx, succ_prob, v_next, threads=1):
    q = pair_values(succ_ptr, succ_idx, succ_prob, v_next)
    starts = state_ptr[:-1]
    best = np.minimum.reduceat(q, starts, axis=0)
    owner = np.repeat(np.arange(len(starts)), np.diff(state_ptr))
    hit = q == best[owner]
    cand = np.where(hit, np.arange(q.shape[0])[:, None], q.shape[0])
    first = np.minimum.reduceat(cand, starts, axis=0)
    return best, pair_action[first]


def backup_fixed(state_ptr, pair_action, succ_ptr, succ_idx, succ_prob, v_next, actions, threads=1):
    q = pair_values(succ_ptr, succ_idx, succ_prob, v_next)
    owner = np.repeat(np.arange(len(state_ptr) - 1), np.diff(state_ptr))
    chosen = pair_action == actions[owner]
    found = np.zeros(len(state_ptr) - 1, dtype=np.int64)
    np.add.at(found, owner[chosen], 1)
    if np.any(found != 1):
        bad = int(np.nonzero(found != 1)[0][0])
        raise LookupError(f"action {int(actions[bad])} is not feasible in layer state {bad}")
    return q[chosen]
