"""A small AFOST vs COOP sweep through the whole pipeline.

Run: python demos/06_end_to_end_sweep.py  (about a minute on one core)
"""
from dataclasses import replace

from afost.config import ExperimentConfig
from afost.fec import FecConfig
from afost.harness import run_experiment
from afost.media import StreamConfig

base = ExperimentConfig(scheduler="Opt", n_senders=2, n_relays=1, snr_db_range=(5, 10, 15, 20, 25),
                        fec=FecConfig(19, 10), n_trials=3, n_gops=4, n_rate_samples=200,
                        stream=StreamConfig(startup_delay=2.0))

for mode in ("AFOST", "COOP"):
    res = run_experiment(replace(base, phy_mode=mode))
    print(mode)
    for row in res.rows():
        print(f"  {row['snr_db']:4.0f} dB  utility {row['utility_mean']:8.0f} "
              f"+/- {row['utility_ci95']:6.0f}  BER {row['ber']:.4f}  "
              f"goodput {row['goodput_bps'] / 1e3:6.1f} kbit/s  slots/segment "
              f"{row['slots_per_packet']:.2f}")
