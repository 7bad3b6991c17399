"""
Monte Carlo BER and complexity experiments.

Every frame draws its randomness from ``default_rng([seed, frame_index])``
in a fixed order (channel, bits, noise), so results do not depend on the
worker count and all schemes and Es/N0 points see the same channels, bits
and unit noise vectors.
"""

from __future__ import annotations

import configparser
import csv
import dataclasses
import io
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .channel import (
    ChannelProfile,
    DoublySelectiveChannel,
    apply_td_channel,
    fd_channel_band,
    get_profile,
    matrix_occupancy,
    sample_channel,
    td_channel_band,
)
from .equalizers.banded import full_band_limits
from .equalizers.stage1 import stage1_banded_lmmse
from .equalizers.stage2 import (
    EqualizerOptions,
    fd_maps,
    local_windows,
    run_stage2,
    stage1_only_equalize,
    td_two_stage_equalize,
    two_stage_equalize,
)
from .qam import bits_per_symbol, constellation, qam_indices
from .transforms import DaftParams, daft, dft_unitary, idaft
from .waveform import FrameConfig, PulseConfig

__all__ = [
    "SCHEMES",
    "SystemConfig",
    "ChannelConfig",
    "EqualizerConfig",
    "SweepConfig",
    "SimConfig",
    "TrialRecord",
    "FrameOutcome",
    "load_config",
    "config_to_dict",
    "simulate_frame",
    "run_point",
    "run_sweep",
    "CSV_COLUMNS",
    "emit_results",
    "read_results",
    "ResultWriter",
    "emit_matrix_occupancy",
]

SCHEMES = ("fd-two-stage", "td-two-stage", "banded-lmmse-only", "full-lmmse", "ofdm-fd")


@dataclass(frozen=True)
class SystemConfig:
    """Frame and pulse parameters. ``c1 = None`` means ``1/N``."""

    N: int = 512
    bandwidth_hz: float = 7.68e6
    c1: Optional[float] = None
    c2: float = 0.0
    L_cpp: Optional[int] = None
    rolloff: float = 0.1
    trunc_threshold: float = 1e-3
    gamma: int = 4
    causal: bool = False

    def __post_init__(self):
        if self.N <= 0 or self.N % 2:
            raise ValueError("N must be a positive even integer")
        if self.bandwidth_hz <= 0:
            raise ValueError("bandwidth must be positive")

    @property
    def T_f(self) -> float:
        return self.N / self.bandwidth_hz

    @property
    def c1_value(self) -> float:
        return 1.0 / self.N if self.c1 is None else float(self.c1)

    def frame(self, ofdm: bool = False) -> FrameConfig:
        c1, c2 = (0.0, 0.0) if ofdm else (self.c1_value, self.c2)
        return FrameConfig(self.N, self.bandwidth_hz, c1, c2, self.L_cpp)

    def pulse(self) -> PulseConfig:
        return PulseConfig(self.rolloff, 1.0 / self.bandwidth_hz, self.trunc_threshold, self.causal)


@dataclass(frozen=True)
class ChannelConfig:
    """Channel statistics. ``v_max`` is in m/s; inline taps override ``profile``."""

    profile: str = "EVA"
    fc: float = 6e9
    v_max: float = 500 / 3.6
    delays_ns: Optional[tuple] = None
    powers_db: Optional[tuple] = None

    def resolve(self) -> ChannelProfile:
        if self.delays_ns is not None or self.powers_db is not None:
            if self.delays_ns is None or self.powers_db is None:
                raise ValueError("inline taps need both delays_ns and powers_db")
            return ChannelProfile(
                self.profile or "inline", tuple(1e-9 * np.asarray(self.delays_ns, float)), tuple(self.powers_db)
            )
        return get_profile(self.profile)


@dataclass(frozen=True)
class EqualizerConfig:
    """Equalizer choice. ``beta`` is used by the frequency-domain schemes, ``alpha`` by td-two-stage."""

    scheme: str = "fd-two-stage"
    beta: int = 7
    alpha: int = 7
    i_max: int = 15
    halt_threshold: Optional[float] = None
    fallback_threshold: float = 0.1
    fallback_enabled: bool = True
    order: int = 4
    window_source: str = "full"
    full_stage2: bool = False

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")
        for name in ("beta", "alpha"):
            v = getattr(self, name)
            if v < 1 or v % 2 == 0:
                raise ValueError(f"{name} must be a positive odd integer, got {v}")

    @property
    def bandwidth(self) -> int:
        return self.alpha if self.scheme == "td-two-stage" else self.beta

    def options(self) -> EqualizerOptions:
        return EqualizerOptions.from_bandwidth(
            self.bandwidth,
            i_max=self.i_max,
            halt_threshold=self.halt_threshold,
            fallback_threshold=self.fallback_threshold,
            fallback_enabled=self.fallback_enabled,
            order=self.order,
            window_source=self.window_source,
        )


@dataclass(frozen=True)
class SweepConfig:
    esn0_db: tuple = (25.0,)
    max_frames: int = 1000
    target_bit_errors: int = 100
    workers: int = 1
    chunk_frames: int = 64
    record_timing: bool = False

    def __post_init__(self):
        if len(self.esn0_db) == 0:
            raise ValueError("esn0_db must not be empty")
        if self.max_frames < 1 or self.workers < 1 or self.chunk_frames < 1:
            raise ValueError("max_frames, workers and chunk_frames must be positive")


@dataclass(frozen=True)
class SimConfig:
    system: SystemConfig = field(default_factory=SystemConfig)
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    equalizer: EqualizerConfig = field(default_factory=EqualizerConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    seed: int = 0

    def __post_init__(self):
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    def replace(self, **sections) -> "SimConfig":
        """Copy with fields of sub-configs replaced, e.g. ``replace(equalizer={"beta": 3})``."""
        kw = {}
        for name, val in sections.items():
            if isinstance(val, dict):
                kw[name] = dataclasses.replace(getattr(self, name), **val)
            else:
                kw[name] = val
        return dataclasses.replace(self, **kw)


def config_to_dict(cfg: SimConfig) -> dict:
    return dataclasses.asdict(cfg)


def _parse_c1(text: str, N: int) -> Optional[float]:
    t = text.replace(" ", "")
    if t.lower() in ("", "none"):
        return None
    if "/" in t:
        num, den = t.split("/")
        num_v = N if num.upper() == "N" else float(num)
        den_v = N if den.upper() == "N" else float(den)
        return float(num_v) / float(den_v)
    return float(t)


def _opt_float(text: str) -> Optional[float]:
    return None if text.strip().lower() in ("", "none") else float(text)


def _floats(text: str) -> tuple:
    return tuple(float(v) for v in text.replace(",", " ").split())


_CONFIG_KEYS = {
    "system": {"n", "bandwidth_hz", "t_f", "c1", "c2", "l_cpp", "rolloff", "trunc_threshold", "gamma", "causal"},
    "channel": {"profile", "fc", "v_max", "v_max_kmh", "delays_ns", "powers_db"},
    "equalizer": {
        "scheme", "beta", "alpha", "i_max", "halt_threshold", "fallback_threshold",
        "fallback_enabled", "order", "window_source", "full_stage2",
    },
    "sweep": {"esn0_db", "max_frames", "target_bit_errors", "workers", "chunk_frames", "record_timing"},
    "run": {"seed"},
}


def load_config(path) -> SimConfig:
    """Read a :class:`SimConfig` from an INI file.

    Sections are ``[system]``, ``[channel]``, ``[equalizer]``, ``[sweep]``
    and ``[run]`` (``seed``). Missing keys keep their defaults and unknown
    keys are rejected. ``v_max`` is in m/s, ``v_max_kmh`` in km/h. ``c1`` may
    be written as ``1/N``. ``T_f`` (seconds), if present, must agree with
    ``N / bandwidth_hz``.
    """
    cp = configparser.ConfigParser()
    with open(Path(path)) as fh:
        cp.read_file(fh)
    known = {"system", "channel", "equalizer", "sweep", "run"}
    unknown = set(cp.sections()) - known
    if unknown:
        raise ValueError(f"unknown config sections: {sorted(unknown)}")
    for name in cp.sections():
        extra = set(cp[name]) - _CONFIG_KEYS[name]
        if extra:
            raise ValueError(f"unknown keys in [{name}]: {sorted(extra)}")

    def sec(name):
        return cp[name] if cp.has_section(name) else {}

    s = sec("system")
    d = SystemConfig()
    N = int(s.get("N", d.N))
    B = float(s.get("bandwidth_hz", d.bandwidth_hz))
    if "T_f" in s:
        T_f = float(s["T_f"])
        if abs(B * T_f - N) > 1e-6 * N:
            raise ValueError(f"N = {N} does not equal B * T_f = {B * T_f}")
    system = SystemConfig(
        N=N,
        bandwidth_hz=B,
        c1=_parse_c1(s.get("c1", "none"), N),
        c2=float(s.get("c2", d.c2)),
        L_cpp=None if s.get("L_cpp", "none").lower() == "none" else int(s["L_cpp"]),
        rolloff=float(s.get("rolloff", d.rolloff)),
        trunc_threshold=float(s.get("trunc_threshold", d.trunc_threshold)),
        gamma=int(s.get("gamma", d.gamma)),
        causal=str(s.get("causal", d.causal)).lower() in ("1", "true", "yes", "on"),
    )

    c = sec("channel")
    dc = ChannelConfig()
    channel = ChannelConfig(
        profile=c.get("profile", dc.profile),
        fc=float(c.get("fc", dc.fc)),
        v_max=float(c["v_max_kmh"]) / 3.6 if "v_max_kmh" in c else float(c.get("v_max", dc.v_max)),
        delays_ns=_floats(c["delays_ns"]) if "delays_ns" in c else None,
        powers_db=_floats(c["powers_db"]) if "powers_db" in c else None,
    )
    channel.resolve()

    e = sec("equalizer")
    de = EqualizerConfig()

    def flag(key, default):
        return str(e.get(key, default)).lower() in ("1", "true", "yes", "on")

    equalizer = EqualizerConfig(
        scheme=e.get("scheme", de.scheme),
        beta=int(e.get("beta", de.beta)),
        alpha=int(e.get("alpha", de.alpha)),
        i_max=int(e.get("i_max", de.i_max)),
        halt_threshold=_opt_float(e.get("halt_threshold", "none")),
        fallback_threshold=float(e.get("fallback_threshold", de.fallback_threshold)),
        fallback_enabled=flag("fallback_enabled", de.fallback_enabled),
        order=int(e.get("order", de.order)),
        window_source=e.get("window_source", de.window_source),
        full_stage2=flag("full_stage2", de.full_stage2),
    )

    w = sec("sweep")
    dw = SweepConfig()
    sweep = SweepConfig(
        esn0_db=_floats(w["esn0_db"]) if "esn0_db" in w else dw.esn0_db,
        max_frames=int(w.get("max_frames", dw.max_frames)),
        target_bit_errors=int(w.get("target_bit_errors", dw.target_bit_errors)),
        workers=int(w.get("workers", dw.workers)),
        chunk_frames=int(w.get("chunk_frames", dw.chunk_frames)),
        record_timing=str(w.get("record_timing", dw.record_timing)).lower() in ("1", "true", "yes", "on"),
    )
    seed = int(sec("run").get("seed", 0))
    return SimConfig(system, channel, equalizer, sweep, seed)


@dataclass(frozen=True)
class FrameOutcome:
    bit_errors: int
    cm: Fraction
    iter_soft: int
    iter_hard: int


def _full_lmmse(ch: DoublySelectiveChannel, fcfg, pc, r_td, sigma2, eq: EqualizerConfig, p: DaftParams):
    N = fcfg.N
    lm = int(np.ceil(ch.l_max - 1e-12))
    lo, hi = (pc.D + lm, 0) if pc.causal else (pc.D // 2 + lm, pc.D // 2)
    if lo + hi + 1 >= N:
        lo, hi = full_band_limits(N)
    Ht = td_channel_band(ch, fcfg, pc, lo, hi)
    opts = eq.options()
    if not eq.full_stage2:
        st1 = stage1_banded_lmmse(Ht, r_td, sigma2, err_var="none")
        idx = np.argmin(np.abs(daft(st1.s_hat, p)[:, None] - constellation(eq.order)[None, :]) ** 2, axis=1)
        return idx, st1.cm_count, 0, 0
    st1 = stage1_banded_lmmse(Ht, r_td, sigma2, err_var="trace")
    st1 = dataclasses.replace(st1, s_hat=dft_unitary(st1.s_hat), factor=None)
    Hf = fd_channel_band(ch, fcfg, pc, _window_reach(opts))
    res = run_stage2(st1, local_windows(Hf, opts.half_bw), dft_unitary(r_td), sigma2, opts, *fd_maps(p))
    return res.x_hard, res.cm_total, res.iterations_soft, res.iterations_hard


def _window_reach(opts: EqualizerOptions) -> int:
    # full windows span rows n +- b and columns n +- 2b, so they only touch
    # diagonals within 3b of the main one
    return 3 * opts.half_bw if opts.window_source == "full" else opts.half_bw


def simulate_frame(cfg: SimConfig, esn0_db: float, frame_index: int) -> FrameOutcome:
    """Simulate one frame and return its bit errors and equalizer cost."""
    sysc, eq = cfg.system, cfg.equalizer
    ofdm = eq.scheme == "ofdm-fd"
    fcfg = sysc.frame(ofdm=ofdm)
    pc = sysc.pulse()
    p = fcfg.daft
    N = fcfg.N
    m = bits_per_symbol(eq.order)
    rng = np.random.default_rng([int(cfg.seed), int(frame_index)])
    ch = sample_channel(cfg.channel.resolve(), cfg.channel.fc, cfg.channel.v_max, rng, fcfg)
    bits = rng.integers(0, 2, N * m, dtype=np.int64)
    unit_noise = (rng.standard_normal(N) + 1j * rng.standard_normal(N)) / np.sqrt(2)
    sigma2 = 10.0 ** (-esn0_db / 10.0)

    tx_idx = qam_indices(bits, eq.order)
    x = constellation(eq.order)[tx_idx]
    s = idaft(x, p)
    # the prefix covers the channel memory, so after its removal the
    # received block is the cyclic model H s + w
    r_td = apply_td_channel(ch, s, fcfg, pc) + np.sqrt(sigma2) * unit_noise

    opts = eq.options()
    if eq.scheme in ("fd-two-stage", "ofdm-fd", "banded-lmmse-only"):
        r_fd = dft_unitary(r_td)
        reach = opts.half_bw if eq.scheme == "banded-lmmse-only" else _window_reach(opts)
        Hf = fd_channel_band(ch, fcfg, pc, reach)
        if eq.scheme == "banded-lmmse-only":
            res = stage1_only_equalize(Hf, r_fd, sigma2, p, opts)
        else:
            res = two_stage_equalize(Hf, r_fd, sigma2, p, opts)
        out = (res.x_hard, res.cm_total, res.iterations_soft, res.iterations_hard)
    elif eq.scheme == "td-two-stage":
        reach = _window_reach(opts)
        Ht = td_channel_band(ch, fcfg, pc, reach, reach)
        res = td_two_stage_equalize(Ht, r_td, sigma2, p, opts)
        out = (res.x_hard, res.cm_total, res.iterations_soft, res.iterations_hard)
    else:
        out = _full_lmmse(ch, fcfg, pc, r_td, sigma2, eq, p)

    idx, cm, i_soft, i_hard = out
    diff = np.asarray(idx, dtype=np.int64) ^ tx_idx
    errors = int(sum(int(np.count_nonzero((diff >> b) & 1)) for b in range(m)))
    return FrameOutcome(errors, Fraction(cm), int(i_soft), int(i_hard))


@dataclass(frozen=True)
class TrialRecord:
    """Aggregated result of one Es/N0 point.

    ``err_sq_sum`` is the sum over frames of the squared per-frame bit error
    count, which gives the frame-level Monte Carlo standard error.
    """

    esn0_db: float
    frames: int
    bit_errors: int
    ber: float
    mean_cm: float
    mean_iter_soft: float
    mean_iter_hard: float
    wall_time_s: float
    seed: int
    scheme: str
    beta_or_alpha: int
    err_sq_sum: int = 0
    bits_per_frame: int = 0

    def ber_std_error(self) -> float:
        """Standard error of ``ber`` from the spread of per-frame error counts."""
        if self.frames < 2 or self.bits_per_frame == 0:
            return float("nan")
        n = self.frames
        mean = self.bit_errors / n
        var = max(self.err_sq_sum / n - mean**2, 0.0) * n / (n - 1)
        return float(np.sqrt(var / n) / self.bits_per_frame)


def _chunk_worker(args):
    cfg, esn0_db, start, stop = args
    return [simulate_frame(cfg, esn0_db, k) for k in range(start, stop)]


def _frame_stream(cfg: SimConfig, esn0_db: float, pool) -> Iterable[FrameOutcome]:
    sw = cfg.sweep
    chunk = sw.chunk_frames
    starts = range(0, sw.max_frames, chunk)
    if pool is None:
        for k in range(sw.max_frames):
            yield simulate_frame(cfg, esn0_db, k)
        return
    # bounded look-ahead keeps the stop rule cheap while workers stay busy
    pending = []
    it = iter(starts)
    for _ in range(2 * sw.workers):
        s0 = next(it, None)
        if s0 is None:
            break
        pending.append(pool.submit(_chunk_worker, (cfg, esn0_db, s0, min(s0 + chunk, sw.max_frames))))
    while pending:
        fut = pending.pop(0)
        s0 = next(it, None)
        if s0 is not None:
            pending.append(pool.submit(_chunk_worker, (cfg, esn0_db, s0, min(s0 + chunk, sw.max_frames))))
        try:
            for outcome in fut.result():
                yield outcome
        except GeneratorExit:
            for f in pending:
                f.cancel()
            raise


def run_point(cfg: SimConfig, esn0_db: float, pool=None) -> TrialRecord:
    """Simulate frames at one Es/N0 until ``target_bit_errors`` or ``max_frames``.

    Frames are consumed in index order, so the stopping frame and every
    count are the same for any worker count.
    """
    t0 = time.perf_counter()
    sw = cfg.sweep
    N = cfg.system.N
    bpf = N * bits_per_symbol(cfg.equalizer.order)
    frames = errors = err_sq = n_soft = n_hard = 0
    cm = Fraction(0)
    stream = _frame_stream(cfg, esn0_db, pool)
    for outcome in stream:
        frames += 1
        errors += outcome.bit_errors
        err_sq += outcome.bit_errors**2
        cm += outcome.cm
        n_soft += outcome.iter_soft
        n_hard += outcome.iter_hard
        if errors >= sw.target_bit_errors or frames >= sw.max_frames:
            break
    if hasattr(stream, "close"):
        stream.close()
    wall = time.perf_counter() - t0 if sw.record_timing else 0.0
    return TrialRecord(
        esn0_db=float(esn0_db),
        frames=frames,
        bit_errors=errors,
        ber=errors / (frames * bpf),
        mean_cm=float(cm / frames),
        mean_iter_soft=n_soft / frames,
        mean_iter_hard=n_hard / frames,
        wall_time_s=wall,
        seed=int(cfg.seed),
        scheme=cfg.equalizer.scheme,
        beta_or_alpha=cfg.equalizer.bandwidth,
        err_sq_sum=err_sq,
        bits_per_frame=bpf,
    )


def run_sweep(cfg: SimConfig, on_record: Optional[Callable[[TrialRecord], None]] = None) -> list[TrialRecord]:
    """Run every Es/N0 point of ``cfg.sweep``; ``on_record`` sees each record as it completes."""
    records = []
    pool = ProcessPoolExecutor(cfg.sweep.workers) if cfg.sweep.workers > 1 else None
    try:
        for esn0 in cfg.sweep.esn0_db:
            rec = run_point(cfg, esn0, pool)
            records.append(rec)
            if on_record is not None:
                on_record(rec)
    finally:
        if pool is not None:
            pool.shutdown(cancel_futures=True)
    return records


CSV_COLUMNS = (
    "esn0_db",
    "frames",
    "bit_errors",
    "ber",
    "mean_cm",
    "mean_iter_soft",
    "mean_iter_hard",
    "wall_time_s",
    "seed",
    "scheme",
    "beta_or_alpha",
    "err_sq_sum",
    "bits_per_frame",
)
_INT_COLS = {"frames", "bit_errors", "seed", "beta_or_alpha", "err_sq_sum", "bits_per_frame"}


def _row(rec: TrialRecord) -> list[str]:
    out = []
    for col in CSV_COLUMNS:
        v = getattr(rec, col)
        out.append(repr(float(v)) if isinstance(v, float) else str(v))
    return out


def _record_from(d: dict) -> TrialRecord:
    kw = {}
    for col in CSV_COLUMNS:
        if col not in d:
            continue
        v = d[col]
        if col == "scheme":
            kw[col] = str(v)
        elif col in _INT_COLS:
            kw[col] = int(v)
        else:
            kw[col] = float(v)
    return TrialRecord(**kw)


class ResultWriter:
    """Incremental result sink.

    CSV rows are appended as records arrive (the header is written only to a
    new or empty file). JSON output is rewritten in full after each record
    through a temporary file, so a reader never sees a partial document.
    """

    def __init__(self, path, fmt: str = "csv", config: Optional[SimConfig] = None):
        if fmt not in ("csv", "json"):
            raise ValueError(f"unknown format {fmt!r}")
        self.path = Path(path)
        self.fmt = fmt
        self.config = config
        self.records: list[TrialRecord] = []
        if fmt == "csv" and (not self.path.exists() or self.path.stat().st_size == 0):
            with open(self.path, "w", newline="") as fh:
                csv.writer(fh, lineterminator="\n").writerow(CSV_COLUMNS)
        elif fmt == "json":
            self._write_json()

    def write(self, rec: TrialRecord) -> None:
        self.records.append(rec)
        if self.fmt == "csv":
            with open(self.path, "a", newline="") as fh:
                csv.writer(fh, lineterminator="\n").writerow(_row(rec))
        else:
            self._write_json()

    def _write_json(self):
        doc = {
            "config": None if self.config is None else config_to_dict(self.config),
            "records": [dataclasses.asdict(r) for r in self.records],
        }
        tmp = self.path.with_name(self.path.name + ".tmp")
        with open(tmp, "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
        os.replace(tmp, self.path)


def emit_results(records: Sequence[TrialRecord], path, fmt: str = "csv", config: Optional[SimConfig] = None) -> None:
    """Write ``records`` to a new file at ``path``."""
    p = Path(path)
    if p.exists():
        p.unlink()
    w = ResultWriter(p, fmt, config)
    for r in records:
        w.write(r)


def read_results(path) -> list[TrialRecord]:
    """Parse a CSV or JSON file produced by :func:`emit_results`."""
    p = Path(path)
    text = p.read_text()
    if text.lstrip().startswith("{"):
        return [_record_from(d) for d in json.loads(text)["records"]]
    return [_record_from(row) for row in csv.DictReader(io.StringIO(text))]


def emit_matrix_occupancy(M, threshold_db: float, path) -> int:
    """Write ``i,j,magnitude_db`` triplets above ``threshold_db``; returns the count."""
    trip = matrix_occupancy(M, threshold_db)
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("i", "j", "magnitude_db"))
        for i, j, mag in trip:
            w.writerow((int(i), int(j), repr(float(mag))))
    return len(trip)
