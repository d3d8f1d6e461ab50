"""End-to-end experiments: trace, schedule, FEC, PHY, decode, deadline, utility.

Every random quantity is drawn from a stream keyed on ``(base_seed, trial,
purpose, index)``. In particular the channel of communication phase ``k``
in trial ``t`` depends only on ``(base_seed, t, k)``, so runs that differ
only in PHY mode, scheduler or FEC see the same fading and can be compared
trial by trial. Noise streams are keyed on the SNR value rather than its
position in the sweep, so adding sweep points leaves the others unchanged.

Timing: a TDMA slot lasts ``slot_duration_s`` and carries one FEC segment.
An AFOST phase is N slots and moves one segment per sender; COOP gives each
sender two slots per round (own slot plus relay slot); DIR one slot per
sender per round. Senders skip segments that could no longer arrive before
their frame's deadline.
"""

import csv
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Sequence

import numpy as np
from scipy import stats

from . import fec as fec_mod
from .baseline import coop_af_rate, dir_rate, mrc_detect_batch
from .channel import PowerConfig, default_relay_order, draw_realization
from .config import ExperimentConfig
from .media import MediaPacket, generate_trace, split_gops, utility, decodable
from .optimizer import (LagrangeState, schedule_afost, schedule_coop, schedule_flow,
                        schedule_presentation)
from .phy import QPSK_POINTS, _cnoise, estimate_rate, osic_detect_batch

log = logging.getLogger(__name__)

CSV_FIELDS = ["snr_db", "mode", "scheduler", "utility_mean", "utility_ci95", "ber",
              "goodput_bps", "slots_per_packet"]

# purpose tags for seed streams
_CHANNEL, _TRACE, _PAYLOAD, _NOISE, _RATE, _CSI = range(6)
_CHUNK = 256


def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in key)))


def ci95(samples) -> float:
    """Half-width of the Student-t 95% confidence interval of the mean."""
    x = np.asarray(samples, dtype=float)
    if x.size < 2:
        return 0.0
    sd = x.std(ddof=1)
    if sd == 0:
        return 0.0
    return float(stats.t.ppf(0.975, x.size - 1) * sd / np.sqrt(x.size))


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    snr_db: np.ndarray
    per_snr_utility: np.ndarray
    per_snr_utility_ci95: np.ndarray
    trial_utility: np.ndarray          # (snr points, trials)
    per_snr_ser: np.ndarray
    per_snr_ber: np.ndarray
    per_snr_goodput: np.ndarray        # on-time decodable application bits/s
    slots_per_packet: np.ndarray
    total_slots: np.ndarray
    used_slots: np.ndarray
    idle_slots: np.ndarray
    segments_sent: np.ndarray
    rate_caps: List[dict] = field(default_factory=list)

    @property
    def mode(self):
        return self.config.phy_mode

    def rows(self) -> List[dict]:
        return [dict(snr_db=float(s), mode=self.config.phy_mode,
                     scheduler=self.config.scheduler,
                     utility_mean=float(self.per_snr_utility[i]),
                     utility_ci95=float(self.per_snr_utility_ci95[i]),
                     ber=float(self.per_snr_ber[i]),
                     goodput_bps=float(self.per_snr_goodput[i]),
                     slots_per_packet=float(self.slots_per_packet[i]))
                for i, s in enumerate(self.snr_db)]


# -- rate caps ----------------------------------------------------------------

def _phase_layout(cfg: ExperimentConfig, modes: Sequence[str]):
    """Slots per phase and, per flow, the slot offsets its segments end at."""
    n = cfg.n_senders
    if cfg.phy_mode == "AFOST":
        return n, [[n]] * n
    if cfg.phy_mode == "DIR":
        return n, [[i + 1] for i in range(n)]
    return 2 * n, [[2 * i + 1, 2 * i + 2] if modes[i] == "DIR" else [2 * i + 2]
                   for i in range(n)]


def _snr_key(snr_db: float) -> int:
    """Seed key for an SNR point, so adding sweep points leaves the others unchanged."""
    return int(round(snr_db * 1000)) + 1_000_000


def link_caps(cfg: ExperimentConfig, snr_db: float) -> dict:
    """Per-flow throughput caps (bits/s of coded segments) at one SNR point.

    The PHY estimate (average rate times bandwidth times slot share) is
    capped by what the slot structure can physically carry.
    """
    n, m = cfg.n_senders, cfg.n_relays
    s2 = cfg.noise_variance if cfg.noise_variance > 0 else 1e-9
    p = s2 * 10 ** (snr_db / 10)
    rng = _rng(cfg.base_seed, _RATE, _snr_key(snr_db))
    reals = [draw_realization(n, m, n, s2, rng) for _ in range(cfg.n_rate_samples)]
    seg_bits = cfg.fec.segment_bytes * 8
    tau = cfg.slot_duration_s
    w = cfg.bandwidth_hz
    out = {"snr_db": snr_db}
    if cfg.phy_mode == "AFOST":
        order = default_relay_order(n, m, cfg.single_relay)
        phy = [estimate_rate(reals, p, k, k, cfg.n_rate_samples, w, order).throughput
               for k in range(n)]
        link = seg_bits / (n * tau)
        out.update(phy_bps=phy, link_bps=link, modes=["AFOST"] * n,
                   cap_bps=[min(t, link) for t in phy])
        return out
    t_dir = [np.mean([dir_rate(r.h_sender_dest[k, k], p, s2).avg_rate for r in reals]) * w / n
             for k in range(n)]
    dir_link = seg_bits / (n * tau)
    if cfg.phy_mode == "DIR":
        out.update(phy_bps=t_dir, link_bps=dir_link, modes=["DIR"] * n,
                   cap_bps=[min(t, dir_link) for t in t_dir])
        return out
    pc = PowerConfig(p, np.ones(m))
    t_coop = [np.mean([coop_af_rate(r, pc, k, k % m, k).avg_rate for r in reals]) * w / n
              for k in range(n)]
    coop_link = seg_bits / (2 * n * tau)
    dir_cap = [min(t, dir_link) for t in t_dir]
    coop_cap = [min(t, coop_link) for t in t_coop]
    if cfg.coop_mode_selection:
        modes = ["DIR" if d > c else "COOP" for d, c in zip(dir_cap, coop_cap)]
    else:
        modes = ["COOP"] * n
    out.update(phy_bps=t_coop, dir_bps=t_dir, link_bps=coop_link, modes=modes,
               dir_cap_bps=dir_cap, coop_cap_bps=coop_cap,
               cap_bps=[d if md == "DIR" else c for md, d, c in zip(modes, dir_cap, coop_cap)])
    return out


# -- scheduling ----------------------------------------------------------------

def coding_efficiency(trace: Sequence[MediaPacket], fec: fec_mod.FecConfig) -> float:
    """Media bytes per coded byte on the air for this trace."""
    coded = sum(fec_mod.coded_segment_count(p.delta_r, fec) for p in trace)
    return sum(p.delta_r for p in trace) / (coded * fec.segment_bytes)


def schedule_trace(cfg: ExperimentConfig, traces: Sequence[Sequence[MediaPacket]],
                   caps: dict) -> List[List[int]]:
    """Packet ids each flow transmits, in transmission order."""
    window = cfg.stream.gop_duration
    per_flow_gops = [split_gops(t, cfg.stream.gop_size) for t in traces]
    n = len(traces)
    if cfg.scheduler == "NoOpt":
        return [[pid for g in gops for pid in schedule_presentation(g, window).selected_packets]
                for gops in per_flow_gops]
    eff = [coding_efficiency(t, cfg.fec) for t in traces]
    states = [LagrangeState() for _ in range(n)]
    order: List[List[int]] = [[] for _ in range(n)]
    n_windows = max(len(g) for g in per_flow_gops)
    for j in range(n_windows):
        window_pk = [g[j] if j < len(g) else [] for g in per_flow_gops]
        if cfg.reset_lambda:
            states = [LagrangeState() for _ in range(n)]
        if cfg.phy_mode == "AFOST":
            media_caps = [c * e for c, e in zip(caps["cap_bps"], eff)]
            decisions, states = schedule_afost(window_pk, media_caps, states, window)
        elif cfg.phy_mode == "COOP":
            dir_r = ([c * e for c, e in zip(caps["dir_cap_bps"], eff)]
                     if cfg.coop_mode_selection else None)
            coop_r = [c * e for c, e in zip(caps["coop_cap_bps"], eff)]
            _, decisions, states = schedule_coop(window_pk, dir_r, coop_r, states, n, window)
        else:
            decisions = []
            new_states = []
            for pk, c, e, st in zip(window_pk, caps["cap_bps"], eff, states):
                d, s = schedule_flow(pk, c * e, st, window, "DIR")
                decisions.append(d)
                new_states.append(s)
            states = new_states
        for k, d in enumerate(decisions):
            order[k].extend(d.selected_packets)
    return order


# -- one trial -----------------------------------------------------------------

@dataclass
class _Segment:
    packet_id: int
    block: int
    pos: int
    data: np.ndarray  # bytes
    symbols: np.ndarray


@dataclass
class _TrialOutcome:
    trial: int
    utility: np.ndarray
    sym_err: np.ndarray
    sym_total: np.ndarray
    bit_err: np.ndarray
    bit_total: np.ndarray
    delivered_bits: np.ndarray
    busy_time: np.ndarray
    total_slots: np.ndarray
    used_slots: np.ndarray
    segments: np.ndarray
    log_rows: list


class _ChannelStore:
    """Lazily drawn per-phase realizations for one trial."""

    def __init__(self, cfg: ExperimentConfig, trial: int):
        self.cfg = cfg
        self.trial = trial
        n, m = cfg.n_senders, cfg.n_relays
        self.h_sr = np.zeros((0, n, m), complex)
        self.h_sd = np.zeros((0, n, n), complex)
        self.h_rd = np.zeros((0, m, n), complex)

    def ensure(self, k: int):
        have = self.h_sd.shape[0]
        if k <= have:
            return
        c = self.cfg
        reals = [draw_realization(c.n_senders, c.n_relays, c.n_senders, c.noise_variance,
                                  _rng(c.base_seed, self.trial, _CHANNEL, i))
                 for i in range(have, k)]
        self.h_sr = np.concatenate([self.h_sr, [r.h_sender_relay for r in reals]])
        self.h_sd = np.concatenate([self.h_sd, [r.h_sender_dest for r in reals]])
        self.h_rd = np.concatenate([self.h_rd, [r.h_relay_dest for r in reals]])


def _segments_for(cfg, packet_ids, payloads):
    segs = []
    for pid in packet_ids:
        for b, block in enumerate(fec_mod.split_payload(payloads[pid], cfg.fec)):
            coded = fec_mod.encode_block(block, cfg.fec)
            sym = _symbols(coded)
            segs.extend(_Segment(pid, b, i, coded[i], sym[i]) for i in range(coded.shape[0]))
    return segs


def _assign(cfg, queues, deadlines, layout):
    """Map each flow's segment queue onto phases; returns per-flow (phase, slot_end, seg)."""
    phase_len, offsets = layout
    tau = cfg.slot_duration_s
    sent = []
    for n, q in enumerate(queues):
        out = []
        i = 0
        k = 0
        while i < len(q):
            for off in offsets[n]:
                t = (k * phase_len + off) * tau
                if cfg.drop_expired:
                    while i < len(q) and deadlines[n][q[i].packet_id] < t:
                        i += 1
                if i >= len(q):
                    break
                out.append((k, off, q[i], t))
                i += 1
            k += 1
        sent.append(out)
    return sent


def _symbols(data_rows: np.ndarray) -> np.ndarray:
    bits = np.unpackbits(data_rows, axis=-1)
    idx = 2 * bits[..., 0::2] + bits[..., 1::2]
    return QPSK_POINTS[idx]


def _noise(rng, shape, var):
    return _cnoise(rng, shape, var)


def _phy_afost(cfg, store, sent, p, rng, csi_rng):
    """Simulate AFOST phases; returns per flow list of (ok, est_symbols)."""
    n = cfg.n_senders
    s2 = cfg.noise_variance
    n_phases = max((s[-1][0] + 1 for s in sent if s), default=0)
    store.ensure(n_phases)
    order = np.asarray(default_relay_order(n, cfg.n_relays, cfg.single_relay), dtype=int)
    used_relays = sorted(set(order.tolist()))
    L = cfg.segment_symbols
    slot_of = [dict() for _ in range(n)]  # phase -> index in sent[n]
    for k_flow, s in enumerate(sent):
        for j, (k, _, _, _) in enumerate(s):
            slot_of[k_flow][k] = j
    results = [[None] * len(s) for s in sent]
    for c0 in range(0, n_phases, _CHUNK):
        ks = np.arange(c0, min(n_phases, c0 + _CHUNK))
        b = ks.size
        x = np.zeros((b, n, L), complex)
        active = np.zeros((b, n), bool)
        for fl in range(n):
            for bi, k in enumerate(ks):
                j = slot_of[fl].get(int(k))
                if j is not None:
                    x[bi, fl] = sent[fl][j][2].symbols
                    active[bi, fl] = True
        h_sr, h_sd, h_rd = store.h_sr[ks], store.h_sd[ks], store.h_rd[ks]
        gam = np.abs(h_sr) ** 2 * active[:, :, None]
        g = np.sqrt(p / (p * gam.sum(axis=1) + s2))  # (b, M)
        y_relay = {r: np.sqrt(p) * np.einsum("bn,bnl->bl", h_sr[:, :, r], x)
                   + _noise(rng, (b, L), s2) for r in used_relays}
        if cfg.csi_error_variance > 0:
            e = np.sqrt(cfg.csi_error_variance / 2)
            est_sr = h_sr + e * (csi_rng.standard_normal(h_sr.shape) + 1j * csi_rng.standard_normal(h_sr.shape))
            est_sd = h_sd + e * (csi_rng.standard_normal(h_sd.shape) + 1j * csi_rng.standard_normal(h_sd.shape))
            est_rd = h_rd + e * (csi_rng.standard_normal(h_rd.shape) + 1j * csi_rng.standard_normal(h_rd.shape))
        else:
            est_sr, est_sd, est_rd = h_sr, h_sd, h_rd
        for dest in range(n):
            sel = active[:, dest]
            if not sel.any():
                continue
            rows = [np.sqrt(p) * np.einsum("bn,bnl->bl", h_sd[sel, :, dest], x[sel])
                    + _noise(rng, (sel.sum(), L), s2)]
            a_rows = [np.sqrt(p) * est_sd[sel, :, dest]]
            nv = [np.full(sel.sum(), s2)]
            for r in order:
                rows.append(h_rd[sel, r, dest][:, None] * g[sel, r][:, None] * y_relay[r][sel]
                            + _noise(rng, (sel.sum(), L), s2))
                a_rows.append(np.sqrt(p) * g[sel, r][:, None] * est_sr[sel, :, r]
                              * est_rd[sel, r, dest][:, None])
                nv.append(s2 * (1 + g[sel, r] ** 2 * np.abs(est_rd[sel, r, dest]) ** 2))
            y = np.stack(rows, axis=1)
            a = np.stack(a_rows, axis=1)
            noise = np.stack(nv, axis=1)
            targets = np.full(sel.sum(), dest)
            est, _, _, failed = osic_detect_batch(a, noise, y, active[sel], targets=targets)
            mine = est[:, dest]
            for bi, k in enumerate(ks[sel]):
                j = slot_of[dest][int(k)]
                results[dest][j] = (not failed[bi], mine[bi])
    return results


def _phy_orthogonal(cfg, store, sent, p, rng, modes):
    """COOP / DIR transmissions, one sender at a time."""
    n, m = cfg.n_senders, cfg.n_relays
    s2 = cfg.noise_variance
    n_phases = max((s[-1][0] + 1 for s in sent if s), default=0)
    store.ensure(n_phases)
    L = cfg.segment_symbols
    results = [[None] * len(s) for s in sent]
    for fl in range(n):
        entries = sent[fl]
        relay = fl % m if m else 0
        use_relay = cfg.phy_mode == "COOP" and modes[fl] == "COOP"
        for c0 in range(0, len(entries), _CHUNK):
            chunk = entries[c0:c0 + _CHUNK]
            ks = np.array([e[0] for e in chunk])
            x = np.stack([e[2].symbols for e in chunk])
            b = len(chunk)
            h_d = store.h_sd[ks, fl, fl]
            y_d = np.sqrt(p) * h_d[:, None] * x + _noise(rng, (b, L), s2)
            if use_relay:
                h_sr = store.h_sr[ks, fl, relay]
                h_rd = store.h_rd[ks, relay, fl]
                g = np.sqrt(p / (p * np.abs(h_sr) ** 2 + s2))
                y_relay = np.sqrt(p) * h_sr[:, None] * x + _noise(rng, (b, L), s2)
                y_r = (h_rd * g)[:, None] * y_relay + _noise(rng, (b, L), s2)
                est, _ = mrc_detect_batch(h_d, h_sr, h_rd, p, s2, y_d, y_r)
            else:
                zeros = np.zeros(b, complex)
                est, _ = mrc_detect_batch(h_d, zeros, zeros, p, s2, y_d, np.zeros_like(y_d),
                                          use_relay=False)
            for i in range(b):
                results[fl][c0 + i] = (True, est[i])
    return results


def trial_traces(cfg: ExperimentConfig, trial: int) -> List[List[MediaPacket]]:
    """The packet trace of every flow in one trial."""
    return [generate_trace(cfg.stream, cfg.n_gops, _rng(cfg.base_seed, trial, _TRACE, fl), fl)
            for fl in range(cfg.n_senders)]


def trial_channels(cfg: ExperimentConfig, trial: int, n_phases: int):
    """Per-phase gains (h_sr, h_sd, h_rd) of one trial; independent of the PHY mode."""
    store = _ChannelStore(cfg, trial)
    store.ensure(n_phases)
    return store.h_sr, store.h_sd, store.h_rd


def _run_trial(cfg: ExperimentConfig, trial: int, caps_list: List[dict],
               want_log: bool = False) -> _TrialOutcome:
    n = cfg.n_senders
    traces = trial_traces(cfg, trial)
    payloads = []
    for fl, tr in enumerate(traces):
        prng = _rng(cfg.base_seed, trial, _PAYLOAD, fl)
        payloads.append({p.packet_id: prng.integers(0, 256, p.delta_r, dtype=np.uint8).tobytes()
                         for p in tr})
    deadlines = [{p.packet_id: p.deadline for p in tr} for tr in traces]
    store = _ChannelStore(cfg, trial)
    s = len(cfg.snr_db_range)
    out = _TrialOutcome(trial, *(np.zeros(s) for _ in range(10)), log_rows=[])
    noprog_order = None
    for si, snr in enumerate(cfg.snr_db_range):
        caps = caps_list[si]
        p = (cfg.noise_variance if cfg.noise_variance > 0 else 1e-9) * 10 ** (snr / 10)
        if cfg.scheduler == "NoOpt":
            if noprog_order is None:
                noprog_order = schedule_trace(cfg, traces, caps)
            order = noprog_order
        else:
            order = schedule_trace(cfg, traces, caps)
        queues = [_segments_for(cfg, order[fl], payloads[fl]) for fl in range(n)]
        layout = _phase_layout(cfg, caps["modes"])
        sent = _assign(cfg, queues, deadlines, layout)
        rng = _rng(cfg.base_seed, trial, _NOISE, _snr_key(snr))
        if cfg.phy_mode == "AFOST":
            phy = _phy_afost(cfg, store, sent, p, rng, _rng(cfg.base_seed, trial, _CSI, _snr_key(snr)))
        else:
            phy = _phy_orthogonal(cfg, store, sent, p, rng, caps["modes"])
        n_phases = max((x[-1][0] + 1 for x in sent if x), default=0)
        phase_len = layout[0]
        total_slots = n_phases * phase_len
        per_seg = 2 if cfg.phy_mode == "COOP" else 1
        used = sum(per_seg if (cfg.phy_mode != "COOP" or caps["modes"][fl] == "COOP") else 1
                   for fl in range(n) for _ in sent[fl])
        n_segs = sum(len(x) for x in sent)
        util = 0.0
        delivered_bits = 0.0
        sym_err = bit_err = 0
        for fl in range(n):
            if sent[fl]:
                est = np.stack([r[1] for r in phy[fl]])
                ref = np.stack([e[2].symbols for e in sent[fl]])
                wrong_re = est.real != ref.real
                wrong_im = est.imag != ref.imag
                sym_err += int(np.count_nonzero(wrong_re | wrong_im))
                bit_err += int(np.count_nonzero(wrong_re) + np.count_nonzero(wrong_im))
                # a segment survives only if detection ran and every symbol is right
                seg_ok = np.array([r[0] for r in phy[fl]]) & ~(wrong_re | wrong_im).any(axis=1)
            else:
                seg_ok = np.zeros(0, bool)
            arrivals = _decode_flow(cfg, traces[fl], payloads[fl], sent[fl], seg_ok)
            util += utility(arrivals, traces[fl])
            good = decodable(arrivals, traces[fl])
            delivered_bits += 8.0 * sum(pk.delta_r for pk in traces[fl] if pk.packet_id in good)
            if want_log:
                for pk in traces[fl]:
                    out.log_rows.append((snr, trial, fl, pk.packet_id,
                                         arrivals.get(pk.packet_id, float("nan")),
                                         pk.deadline, int(pk.packet_id in good)))
        busy = total_slots * cfg.slot_duration_s
        out.utility[si] = util
        out.sym_err[si] = sym_err
        out.sym_total[si] = n_segs * cfg.segment_symbols
        out.bit_err[si] = bit_err
        out.bit_total[si] = n_segs * cfg.segment_symbols * 2
        out.delivered_bits[si] = delivered_bits
        out.busy_time[si] = busy
        out.total_slots[si] = total_slots
        out.used_slots[si] = used
        out.segments[si] = n_segs
    return out


def _decode_flow(cfg, trace, payloads, sent, seg_ok) -> Dict[int, float]:
    """FEC-decode every frame; returns packet id -> time the frame became decodable.

    Segments with ``seg_ok`` False fail their integrity check and are erasures.
    """
    got: Dict[tuple, list] = {}
    for (k, off, seg, t), ok in zip(sent, seg_ok):
        if not ok:
            continue
        got.setdefault((seg.packet_id, seg.block), []).append((t, seg.pos, seg.data))
    arrivals: Dict[int, float] = {}
    for pk in trace:
        blocks = fec_mod.split_payload(payloads[pk.packet_id], cfg.fec) if cfg.verify_payload else None
        n_seg = max(1, -(-pk.delta_r // cfg.fec.segment_bytes))
        n_blocks = -(-n_seg // cfg.fec.k_data)
        done = 0.0
        for b in range(n_blocks):
            m = min(cfg.fec.k_data, n_seg - b * cfg.fec.k_data)
            rx = got.get((pk.packet_id, b), [])
            if len(rx) < m:
                done = None
                break
            rx.sort(key=lambda r: r[0])
            done = max(done, rx[m - 1][0])
            if cfg.verify_payload:
                slots = [None] * (m + cfg.fec.parity_count(m))
                for _, pos, data in rx:
                    slots[pos] = data
                rec = fec_mod.decode_block(slots, m, cfg.fec)
                if not np.array_equal(rec, blocks[b]):
                    raise RuntimeError(f"FEC recovered wrong payload for packet {pk.packet_id}")
        if done is not None:
            arrivals[pk.packet_id] = done
    return arrivals


def _trial_worker(args):
    cfg, trial, caps, want_log = args
    return _run_trial(cfg, trial, caps, want_log)


# -- public API ----------------------------------------------------------------

def run_experiment(cfg: ExperimentConfig, trial_log=None) -> ExperimentResult:
    """Monte Carlo sweep over ``cfg.snr_db_range`` with ``cfg.n_trials`` trials.

    ``trial_log`` optionally names a CSV file receiving one row per packet:
    snr_db, trial, flow_id, packet_id, arrival_s, deadline_s, decoded.
    """
    cfg.validate()
    caps = [link_caps(cfg, snr) for snr in cfg.snr_db_range]
    want_log = trial_log is not None
    jobs = [(cfg, t, caps, want_log) for t in range(cfg.n_trials)]
    if cfg.n_workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.n_workers) as ex:
            outcomes = list(ex.map(_trial_worker, jobs))
    else:
        outcomes = [_trial_worker(j) for j in jobs]
    outcomes.sort(key=lambda o: o.trial)
    log.info("finished %d trials of %s", len(outcomes), cfg.name)
    stack = {f: np.stack([getattr(o, f) for o in outcomes], axis=1)
             for f in ("utility", "sym_err", "sym_total", "bit_err", "bit_total",
                       "delivered_bits", "busy_time", "total_slots", "used_slots", "segments")}
    with np.errstate(divide="ignore", invalid="ignore"):
        goodput = np.where(stack["busy_time"] > 0, stack["delivered_bits"] / stack["busy_time"], 0.0)
        ser = stack["sym_err"].sum(1) / stack["sym_total"].sum(1)
        ber = stack["bit_err"].sum(1) / stack["bit_total"].sum(1)
        spp = stack["total_slots"].sum(1) / stack["segments"].sum(1)
    if trial_log is not None:
        with open(trial_log, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["snr_db", "trial", "flow_id", "packet_id", "arrival_s", "deadline_s",
                        "decoded"])
            for o in outcomes:
                for row in o.log_rows:
                    w.writerow([repr(float(row[0])), row[1], row[2], row[3], repr(float(row[4])),
                                repr(float(row[5])), row[6]])
    util = stack["utility"]
    return ExperimentResult(
        config=cfg,
        snr_db=np.asarray(cfg.snr_db_range),
        per_snr_utility=util.mean(axis=1),
        per_snr_utility_ci95=np.array([ci95(u) for u in util]),
        trial_utility=util,
        per_snr_ser=np.nan_to_num(ser),
        per_snr_ber=np.nan_to_num(ber),
        per_snr_goodput=goodput.mean(axis=1),
        slots_per_packet=np.nan_to_num(spp),
        total_slots=stack["total_slots"].sum(1),
        used_slots=stack["used_slots"].sum(1),
        idle_slots=stack["total_slots"].sum(1) - stack["used_slots"].sum(1),
        segments_sent=stack["segments"].sum(1),
        rate_caps=caps,
    )


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    return repr(float(v))


def sweep_to_csv(result: ExperimentResult, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_FIELDS)
        for row in result.rows():
            w.writerow([_fmt(row[k]) for k in CSV_FIELDS])


def read_sweep_csv(path) -> List[dict]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != CSV_FIELDS:
            raise ValueError(f"unexpected header {reader.fieldnames}")
        return [{k: (v if k in ("mode", "scheduler") else float(v)) for k, v in row.items()}
                for row in reader]


@dataclass
class ComparisonRow:
    label: str
    snr_db: float
    utility_mean: float
    utility_ci95: float
    delta_mean: float
    delta_ci95: float


def compare_modes(cfgs: Sequence[ExperimentConfig]) -> List[ComparisonRow]:
    """Run configs on common random numbers; deltas are paired against ``cfgs[0]``."""
    if not cfgs:
        raise ValueError("no configurations given")
    ref = cfgs[0]
    for c in cfgs[1:]:
        if (c.snr_db_range != ref.snr_db_range or c.n_trials != ref.n_trials
                or c.base_seed != ref.base_seed):
            raise ValueError("configs must share SNR sweep, trial count and base seed")
    results = [run_experiment(c) for c in cfgs]
    base = results[0].trial_utility
    rows = []
    for c, res in zip(cfgs, results):
        diff = res.trial_utility - base
        for i, snr in enumerate(res.snr_db):
            rows.append(ComparisonRow(c.name, float(snr), float(res.per_snr_utility[i]),
                                      float(res.per_snr_utility_ci95[i]),
                                      float(diff[i].mean()), ci95(diff[i])))
    return rows


def comparison_to_csv(rows: Sequence[ComparisonRow], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["label", "snr_db", "utility_mean", "utility_ci95", "delta_mean", "delta_ci95"])
        for r in rows:
            w.writerow([r.label, _fmt(r.snr_db), _fmt(r.utility_mean), _fmt(r.utility_ci95),
                        _fmt(r.delta_mean), _fmt(r.delta_ci95)])
