"""A tour of the memory algebra with matrices small enough to read.

Run with:  python3 demos/memory_tour.py
"""

import numpy as np

from memseg import (LongTermMemory, WorkingMemory, affinity, append_frame,
                    consolidate, potentiate, readout, record_usage)

np.set_printoptions(precision=3, suppress=True)

# --- affinity: queries attend over memory keys ------------------------------
# Three 2-channel memory columns and two queries. Each query scores every
# key by negative squared distance; a softmax per query turns the scores
# into a probability column.
keys = np.array([[0.0, 1.0, 4.0],
                 [0.0, 0.0, 0.0]])
queries = np.array([[0.0, 4.0],
                    [0.0, 0.0]])
w = affinity(keys, queries)
print("affinity (rows = memory entries, cols = queries):")
print(w)
print("column sums:", w.sum(axis=0))  # always exactly 1

# --- readout: weighted average of stored values ------------------------------
# Values live in a separate matrix with the same column order as the keys.
# A readout column is a convex combination of value columns, so it can
# never leave their componentwise hull.
values = np.array([[10.0, 20.0, 30.0]])
f = readout(values, w)
print("\nreadout per query:", f.ravel())

# --- usage: reads leave a trail ----------------------------------------------
# Each read distributes exactly +1 usage across the entries it touched.
# Consolidation later uses this trail to decide what survives.
bank = WorkingMemory(t_min=2, t_max=3, r=1)
append_frame(bank, keys, values, frame_index=0)
record_usage(bank, w)
print("\nusage after one read:", bank.frames[0].usage,
      f"(total {bank.frames[0].usage.sum():.1f})")

# --- consolidation: bounded memory under a budget ----------------------------
# Fill a tiny bank to its cap (t_max=3 frame groups). Appending with a
# long-term store attached consolidates: frame 0 (the annotation) and the
# most recent group survive; the middle frame's most-used columns become
# prototypes in long-term memory.
bank = WorkingMemory(t_min=2, t_max=3, r=1)
ltm = LongTermMemory(capacity=64, num_prototypes=2)
rng = np.random.default_rng(0)
for i in range(3):
    k = rng.normal(size=(2, 4))
    v = rng.normal(size=(1, 4))
    moved = append_frame(bank, k, v, frame_index=i, ltm=ltm)
# mark column 2 of the middle frame as the one the reads kept touching
bank.frames[1].usage[:] = [0.0, 0.1, 5.0, 0.2]
moved = consolidate(bank, ltm)
print(f"\nconsolidated: {moved} prototypes moved, "
      f"{bank.frame_count} frame groups kept "
      f"(frames {[g.frame_index for g in bank.frames]})")
print("long-term origins (frame, cell):")
print(ltm.origin[:ltm.entry_count])
print("prototype usage snapshot:", ltm.usage[:ltm.entry_count])

# --- potentiation: prototypes re-read what is being forgotten ----------------
# A prototype's stored value is not a copy: it is re-estimated by letting
# the prototype's key attend over *all* candidate columns, so information
# from evicted neighbours is folded in before they disappear.
cand_keys = np.array([[0.0, 1.0, 4.0]])
cand_vals = np.array([[10.0, 20.0, 30.0]])
proto_key = np.array([[0.0]])
blended = potentiate(cand_keys, cand_vals, proto_key)
print("\npotentiated value for a prototype at key 0.0:", blended.ravel())
print("(dominated by the value at distance 0, pulled slightly toward "
      "the value at distance 1)")
