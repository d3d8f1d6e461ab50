"""Choosing which packets to send under a throughput cap.

Run: python demos/05_lagrangian_scheduler.py
"""
import numpy as np

from afost.media import StreamConfig, generate_trace, utility
from afost.optimizer import LagrangeState, schedule_flow

cfg = StreamConfig()
trace = generate_trace(cfg, 1, np.random.default_rng(2))
total_bps = sum(p.delta_r for p in trace) * 8 / cfg.gop_duration
full = utility([p.packet_id for p in trace], trace)

print("cap / stream rate | packets | share of utility | lambda | iterations")
state = LagrangeState()
for frac in (1.2, 0.9, 0.6, 0.3, 0.1):
    d, state = schedule_flow(trace, frac * total_bps, state, cfg.gop_duration)
    u = utility(d.selected_packets, trace)
    print(f"{frac:17.1f} | {len(d.selected_packets):7d} | {u / full:16.2f} | "
          f"{d.lam:6.3f} | {d.iterations}")
