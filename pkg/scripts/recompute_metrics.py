#!/usr/bin/env python3
"""Independent brute-force recomputation of return/smoothness/energy from a
stored trajectory file.

Deliberately self-contained: parses the binary format and computes every
metric with plain loops, without importing the tert library, so it can serve
as an oracle for the library's own implementations.

Usage: recompute_metrics.py FILE.traj  -> CSV on stdout
       (traj_index,return,smoothness,energy)
"""

import math
import struct
import sys
import zlib


def parse(path):
    with open(path, "rb") as f:
        blob = f.read()
    if blob[:4] != b"TERT":
        raise SystemExit("bad magic")
    version, flags, obs_dim, act_dim, _priv_dim, count = struct.unpack_from(
        "<HHIIII", blob, 4)
    if version != 1:
        raise SystemExit("unsupported version")
    if zlib.crc32(blob[:-4]) & 0xFFFFFFFF != struct.unpack_from("<I", blob, len(blob) - 4)[0]:
        raise SystemExit("CRC mismatch")
    with_torques = bool(flags & 2)
    cols = obs_dim + 2 * act_dim + 1 + (act_dim if with_torques else 0)
    record_len = cols * 4 + 1
    offset = 24
    trajectories = []
    for _ in range(count):
        n, _kind, _difficulty = struct.unpack_from("<IBf", blob, offset)
        offset += 9 + 16
        steps = []
        for _ in range(n):
            values = struct.unpack_from(f"<{cols}f", blob, offset)
            done = blob[offset + cols * 4]
            offset += record_len
            steps.append((values, done))
        trajectories.append((steps, obs_dim, act_dim, with_torques))
    return trajectories


def metrics(traj):
    steps, obs_dim, act_dim, with_torques = traj
    total_reward = 0.0
    for values, _done in steps:
        total_reward += values[obs_dim + 2 * act_dim]

    smooth_sum, smooth_count = 0.0, 0
    for t in range(1, len(steps)):
        prev = steps[t - 1][0][obs_dim:obs_dim + act_dim]
        cur = steps[t][0][obs_dim:obs_dim + act_dim]
        sq = 0.0
        for j in range(act_dim):
            sq += (cur[j] - prev[j]) ** 2
        smooth_sum += math.sqrt(sq)
        smooth_count += 1
    smoothness = smooth_sum / smooth_count if smooth_count else float("nan")

    energy = float("nan")
    if with_torques:
        power_sum = 0.0
        for values, _done in steps:
            for j in range(act_dim):
                tau = values[obs_dim + 2 * act_dim + 1 + j]
                qd = values[10 + j]  # joint velocities in the observation layout
                power_sum += abs(tau * qd)
        energy = power_sum / len(steps)
    return total_reward, smoothness, energy


def main(argv):
    if len(argv) != 2:
        raise SystemExit(__doc__)
    print("traj_index,return,smoothness,energy")
    for i, traj in enumerate(parse(argv[1])):
        ret, smooth, eng = metrics(traj)
        print(f"{i},{ret:.17g},{smooth:.17g},{eng:.17g}")


if __name__ == "__main__":
    main(sys.argv)
