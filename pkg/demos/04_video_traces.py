"""Synthetic rate-distortion traces, dependencies and the playback deadline.

Run: python demos/04_video_traces.py
"""
import numpy as np

from afost.media import StreamConfig, decodable, generate_trace, importance_order, utility

cfg = StreamConfig(bitrate=203_000, fps=30, gop_size=32, startup_delay=2.0)
trace = generate_trace(cfg, n_gops=1, rng=np.random.default_rng(0))

print("id type bytes  dD(incl. dependents)  deps")
for p in trace[:9]:
    print(f"{p.packet_id:2d}  {p.frame_type}  {p.delta_r:5d}  {p.delta_d:10.0f}          {p.deps}")

print("\nGOP bytes:", sum(p.delta_r for p in trace), "target", cfg.bitrate * cfg.gop_duration / 8)
full = {p.packet_id: 0.0 for p in trace}
print("utility with everything on time:", round(utility(full, trace)))

# Losing the first P frame takes every frame that leans on it down too.
lost_p = {i: t for i, t in full.items() if i != 4}
print("frames decodable without frame 4:", len(decodable(lost_p, trace)), "of", len(trace))

order = importance_order(trace)
print("most important first:", [f"{p.frame_type}{p.packet_id}" for p in order[:8]])
