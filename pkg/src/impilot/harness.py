"""Monte Carlo experiment engine.

A run sweeps per-bit SNR points for one receiver scheme, simulating frames of
sequentially-dependent blocks (the channel estimate of block k seeds the
detection of block k+1).  Results are a pure function of (config, seed): the
per-frame random stream is derived from the master seed and the frame's grid
coordinates, batches have a fixed size, and tallies merge in frame order, so
splitting frames across workers cannot change a single output byte.
"""

import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from functools import partial

import numpy as np

from .channel import FADING_MODES, evolve, initial_state, propagate_block
from .constellation import (
    Constellation,
    build_data_alphabet,
    build_pilot_alphabet,
    map_bits_array,
    scaled,
)
from .im_codec import BlockGeometry, assemble_block, se_conventional, se_proposed
from .impairments import RxImpairments, TxImpairments
from .rx_classical import detect_symbols, ls_estimate, mmse_estimate
from .rx_turbo import DNP_MODES, turbo_receive

__all__ = [
    "SCHEMES",
    "SystemConfig",
    "PointResult",
    "ExperimentResult",
    "CSV_HEADER",
    "count_bit_errors",
    "run_experiment",
    "run_gamma_sweep",
    "run_iteration_histogram",
    "write_csv",
    "GAMMA_GRID_DEFAULT",
]

SCHEMES = (
    "proposed_turbo",
    "classical_ls",
    "classical_mmse",
    "lower_bound_perfect_pattern",
)

GAMMA_GRID_DEFAULT = (0.5, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 8.0, 10.0)

CSV_HEADER = (
    "snr_db,gamma,scheme,ber_index,ber_symbol,ber_overall,mse,"
    "iter1,iter2,iter3,iter4,trials,seed,config_hash"
)

_MMSE_PRIOR_RIDGE = 1e-6


@dataclass(frozen=True)
class SystemConfig:
    """Every scalar knob of one experiment."""

    geometry: BlockGeometry = BlockGeometry()
    data_order: int = 4
    pilot_order: int = 4
    gamma: float = 4.0
    amplitude_imbalance: float = 0.2
    phase_imbalance_deg: float = 2.0
    phase_step_std_deg: float = 5.0
    distortion_level_db: float = -16.0
    fading_mode: str = "fast_block_phase"
    path_gain: float = 1.0
    ebn0_db: tuple = (0.0, 2.0, 4.0, 6.0, 8.0, 10.0, 12.0, 14.0, 16.0)
    trials: int = 100
    min_bit_errors: int = 100
    batch_frames: int = 25
    scheme: str = "proposed_turbo"
    max_iterations: int = 4
    use_stopping_rule: bool = True
    dnp_mode: str = "prior"
    normalize_block_power: bool = False
    master_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "ebn0_db", tuple(float(v) for v in self.ebn0_db))
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if self.fading_mode not in FADING_MODES:
            raise ValueError(
                f"fading_mode must be one of {FADING_MODES}, got {self.fading_mode!r}"
            )
        if self.dnp_mode not in DNP_MODES:
            raise ValueError(f"dnp_mode must be one of {DNP_MODES}, got {self.dnp_mode!r}")
        for name in ("data_order", "pilot_order"):
            order = getattr(self, name)
            if order < 2 or order & (order - 1):
                raise ValueError(f"{name} must be a power of two >= 2, got {order}")
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")
        if self.path_gain <= 0:
            raise ValueError("path_gain must be positive")
        if not self.ebn0_db:
            raise ValueError("ebn0_db grid must not be empty")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.batch_frames < 1:
            raise ValueError("batch_frames must be >= 1")
        if self.min_bit_errors < 0:
            raise ValueError("min_bit_errors must be >= 0")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["ebn0_db"] = list(self.ebn0_db)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "SystemConfig":
        data = dict(data)
        geo_data = data.pop("geometry", None)
        known = {f.name for f in fields(cls)} - {"geometry"}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        kwargs = dict(data)
        if geo_data is not None:
            geo_known = {f.name for f in fields(BlockGeometry)}
            geo_unknown = set(geo_data) - geo_known
            if geo_unknown:
                raise ValueError(f"unknown geometry keys: {sorted(geo_unknown)}")
            kwargs["geometry"] = BlockGeometry(**geo_data)
        return cls(**kwargs)

    def config_hash(self) -> str:
        payload = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(payload).hexdigest()[:12]

    # Derived runtime pieces -------------------------------------------------

    def tx_impairments(self) -> TxImpairments:
        return TxImpairments(
            amplitude_imbalance=self.amplitude_imbalance,
            phase_imbalance=math.radians(self.phase_imbalance_deg),
            phase_step_std=math.radians(self.phase_step_std_deg),
        )

    @property
    def distortion_level(self) -> float:
        return 10.0 ** (self.distortion_level_db / 10.0)

    def alphabets(self) -> tuple[Constellation, Constellation]:
        data = build_data_alphabet(self.data_order)
        pilot = build_pilot_alphabet(self.pilot_order, self.gamma, data)
        if self.normalize_block_power:
            g = self.geometry
            power = (
                g.pilots_per_block * pilot.average_power
                + g.data_per_block * data.average_power
            ) / g.block_length
            data = scaled(data, 1.0 / power)
            pilot = scaled(pilot, 1.0 / power)
        return data, pilot

    def spectral_efficiency(self, scheme: str | None = None) -> float:
        scheme = scheme or self.scheme
        g = self.geometry
        if scheme in ("classical_ls", "classical_mmse"):
            return se_conventional(g.block_length, g.preamble_length, self.data_order)
        return se_proposed(g.subblock_length, g.pilots_per_subblock, self.data_order)

    def transmit_power(self, scheme: str | None = None) -> float:
        scheme = scheme or self.scheme
        if scheme in ("classical_ls", "classical_mmse"):
            return 1.0
        data, pilot = self.alphabets()
        g = self.geometry
        return (
            g.pilots_per_block * pilot.average_power
            + g.data_per_block * data.average_power
        ) / g.block_length

    def noise_variance_for(self, ebn0_db: float, scheme: str | None = None) -> float:
        """Thermal noise variance realizing the requested per-bit SNR, with
        average received power path_gain^2 * (1 + imbalance^2) * P_t."""
        tx = self.tx_impairments()
        received = (
            self.path_gain**2
            * (abs(tx.direct_coeff) ** 2 + abs(tx.image_coeff) ** 2)
            * self.transmit_power(scheme)
        )
        return received / (self.spectral_efficiency(scheme) * 10.0 ** (ebn0_db / 10.0))


@dataclass
class FrameTally:
    """Additive per-frame scoring sums."""

    index_bit_errors: int = 0
    index_bits: int = 0
    symbol_bit_errors: int = 0
    symbol_bits: int = 0
    mse_num: float = 0.0
    mse_den: float = 0.0
    pattern_errors: int = 0
    subblocks: int = 0
    blocks: int = 0
    fallbacks: int = 0
    iteration_counts: tuple = ()

    @property
    def bit_errors(self) -> int:
        return self.index_bit_errors + self.symbol_bit_errors


def count_bit_errors(sent, received) -> int:
    """Positional bit error count between equal-length 0/1 arrays."""
    sent = np.asarray(sent).reshape(-1)
    received = np.asarray(received).reshape(-1)
    if sent.size != received.size:
        raise ValueError("bit arrays differ in length")
    return int(np.count_nonzero(sent != received))


def _draw_pilot_values(rng, points: np.ndarray, count: int) -> np.ndarray:
    """Equiprobable pilot draws, redrawn (rarely) until the values span both
    conjugation axes so the block's [p, conj(p)] matrix keeps rank two."""
    while True:
        values = points[rng.integers(0, points.size, count)]
        a = float(np.sum(np.abs(values) ** 2))
        if a - abs(np.sum(values**2)) > 1e-9 * a:
            return values


def _unit_preamble(length: int) -> np.ndarray:
    """Known unit-power preamble cycling the axes; rank two for length >= 2."""
    return np.exp(1j * np.pi / 2.0 * np.arange(length))


def _mmse_prior(config: SystemConfig) -> np.ndarray:
    """Analytic channel covariance for uniform-phase unit-amplitude fading
    with known imbalance coefficients, ridged to stay invertible."""
    tx = config.tx_impairments()
    coeffs = config.path_gain * np.array([tx.direct_coeff, tx.image_coeff])
    prior = np.outer(coeffs, coeffs.conj())
    ridge = _MMSE_PRIOR_RIDGE * float(np.trace(prior).real)
    return prior + ridge * np.eye(2)


def _simulate_frame(
    config: SystemConfig, ebn0_db: float, point_index: int, trial_index: int
) -> FrameTally:
    rng = np.random.default_rng(
        np.random.SeedSequence(
            entropy=config.master_seed, spawn_key=(point_index, trial_index)
        )
    )
    if config.scheme in ("classical_ls", "classical_mmse"):
        return _classical_frame(config, ebn0_db, rng)
    return _flexible_frame(config, ebn0_db, rng)


def _flexible_frame(config: SystemConfig, ebn0_db: float, rng) -> FrameTally:
    g = config.geometry
    tx = config.tx_impairments()
    rx = RxImpairments(
        distortion_level=config.distortion_level,
        noise_variance=config.noise_variance_for(ebn0_db),
    )
    data_const, pilot_const = config.alphabets()
    transmit_power = config.transmit_power()
    genie_pattern = config.scheme == "lower_bound_perfect_pattern"

    bits_per_sub = g.index_bits_per_subblock
    n_index_bits = g.index_bits_per_block
    n_symbol_bits = g.data_per_block * data_const.bits_per_symbol

    tally = FrameTally(iteration_counts=())
    iteration_counts = np.zeros(config.max_iterations, dtype=np.int64)

    state = initial_state(tx, rng, config.path_gain)
    preamble = _unit_preamble(g.init_preamble_length)
    y_pre = propagate_block(preamble, state, tx, rx, rng)
    h_prior = ls_estimate(preamble, y_pre)

    for _ in range(g.blocks_per_frame):
        state = evolve(state, config.fading_mode, tx, rng)
        index_bits = rng.integers(0, 2, n_index_bits).astype(np.uint8)
        symbol_bits = rng.integers(0, 2, n_symbol_bits).astype(np.uint8)
        pilots = _draw_pilot_values(rng, pilot_const.points, g.pilots_per_block)
        block = assemble_block(index_bits, symbol_bits, pilots, g, data_const)
        y = propagate_block(block.symbols, state, tx, rx, rng)
        h_true = state.equivalent(tx)

        if genie_pattern:
            positions = block.pattern.absolute_positions(g)
            h_hat = ls_estimate(pilots, y[positions])
            mask = np.zeros(g.block_length, dtype=bool)
            mask[positions] = True
            _, rx_symbol_bits = detect_symbols(y[~mask], h_hat, data_const)
            tally.symbol_bit_errors += count_bit_errors(symbol_bits, rx_symbol_bits)
        else:
            result = turbo_receive(
                y,
                h_prior,
                g,
                data_const,
                pilot_const,
                pilots,
                rx,
                transmit_power,
                max_iterations=config.max_iterations,
                use_stopping=config.use_stopping_rule,
                dnp_mode=config.dnp_mode,
            )
            h_hat = result.channel_estimate
            h_prior = h_hat
            iteration_counts[result.iterations - 1] += 1
            tally.fallbacks += result.ls_fallbacks
            tally.symbol_bit_errors += count_bit_errors(
                symbol_bits, result.symbol_bits
            )
            truth = index_bits.reshape(g.subblocks, bits_per_sub)
            guess = result.index_bits.reshape(g.subblocks, bits_per_sub)
            per_sub = (truth != guess).sum(axis=1)
            per_sub[result.unmapped] = bits_per_sub
            tally.index_bit_errors += int(per_sub.sum())
            tally.pattern_errors += sum(
                detected != true
                for detected, true in zip(
                    result.pattern.per_subblock, block.pattern.per_subblock
                )
            )

        tally.index_bits += n_index_bits
        tally.symbol_bits += n_symbol_bits
        tally.subblocks += g.subblocks
        tally.blocks += 1
        diff = h_hat - h_true
        tally.mse_num += float(np.sum(np.abs(diff) ** 2))
        tally.mse_den += float(np.sum(np.abs(h_true) ** 2))

    tally.iteration_counts = tuple(int(c) for c in iteration_counts)
    return tally


def _classical_frame(config: SystemConfig, ebn0_db: float, rng) -> FrameTally:
    g = config.geometry
    tx = config.tx_impairments()
    rx = RxImpairments(
        distortion_level=config.distortion_level,
        noise_variance=config.noise_variance_for(ebn0_db),
    )
    const = build_data_alphabet(config.data_order)
    preamble = _unit_preamble(g.preamble_length)
    n_data = g.block_length - g.preamble_length
    n_bits = n_data * const.bits_per_symbol
    use_mmse = config.scheme == "classical_mmse"
    if use_mmse:
        prior = _mmse_prior(config)
        received_power = (
            config.path_gain**2
            * (abs(tx.direct_coeff) ** 2 + abs(tx.image_coeff) ** 2)
        )
        dnp = config.distortion_level * received_power + rx.noise_variance

    tally = FrameTally(iteration_counts=())
    state = initial_state(tx, rng, config.path_gain)

    for _ in range(g.blocks_per_frame):
        state = evolve(state, config.fading_mode, tx, rng)
        bits = rng.integers(0, 2, n_bits).astype(np.uint8)
        symbols = np.concatenate([preamble, map_bits_array(bits, const)])
        y = propagate_block(symbols, state, tx, rx, rng)
        if use_mmse:
            h_hat = mmse_estimate(preamble, y[: g.preamble_length], dnp, prior)
        else:
            h_hat = ls_estimate(preamble, y[: g.preamble_length])
        _, rx_bits = detect_symbols(y[g.preamble_length :], h_hat, const)
        tally.symbol_bit_errors += count_bit_errors(bits, rx_bits)
        tally.symbol_bits += n_bits
        tally.blocks += 1
        h_true = state.equivalent(tx)
        tally.mse_num += float(np.sum(np.abs(h_hat - h_true) ** 2))
        tally.mse_den += float(np.sum(np.abs(h_true) ** 2))

    tally.iteration_counts = ()
    return tally


@dataclass
class PointResult:
    """Aggregated scores for one SNR grid point."""

    ebn0_db: float
    gamma: float
    scheme: str
    frames: int
    blocks: int
    index_bit_errors: int
    index_bits: int
    symbol_bit_errors: int
    symbol_bits: int
    mse_num: float
    mse_den: float
    pattern_errors: int
    subblocks: int
    fallbacks: int
    iteration_counts: tuple

    @property
    def ber_index(self) -> float:
        return self.index_bit_errors / self.index_bits if self.index_bits else math.nan

    @property
    def ber_symbol(self) -> float:
        return self.symbol_bit_errors / self.symbol_bits if self.symbol_bits else math.nan

    @property
    def ber_overall(self) -> float:
        total = self.index_bits + self.symbol_bits
        return (self.index_bit_errors + self.symbol_bit_errors) / total if total else math.nan

    @property
    def mse(self) -> float:
        return self.mse_num / self.mse_den if self.mse_den else math.nan

    @property
    def pattern_error_rate(self) -> float:
        return self.pattern_errors / self.subblocks if self.subblocks else math.nan

    @property
    def iteration_proportions(self) -> tuple:
        if not self.blocks or not self.iteration_counts:
            return tuple()
        return tuple(c / self.blocks for c in self.iteration_counts)


@dataclass
class ExperimentResult:
    """One scheme swept over the SNR grid, plus the config that produced it."""

    config: SystemConfig
    points: list = field(default_factory=list)

    def csv_rows(self) -> list:
        seed = self.config.master_seed
        chash = self.config.config_hash()
        rows = []
        for p in self.points:
            props = list(p.iteration_proportions)
            cells = [props[i] if i < len(props) else 0.0 for i in range(3)]
            cells.append(sum(props[3:]) if len(props) > 3 else 0.0)
            rows.append(
                ",".join(
                    [
                        _fmt(p.ebn0_db),
                        _fmt(p.gamma),
                        p.scheme,
                        _fmt(p.ber_index),
                        _fmt(p.ber_symbol),
                        _fmt(p.ber_overall),
                        _fmt(p.mse),
                        *(_fmt(c) for c in cells),
                        str(p.frames),
                        str(seed),
                        chash,
                    ]
                )
            )
        return rows


def _fmt(value: float) -> str:
    if isinstance(value, float) and math.isnan(value):
        return "nan"
    return f"{value:.9g}"


def _merge_point(
    config: SystemConfig, ebn0_db: float, tallies: list
) -> PointResult:
    counts = np.zeros(config.max_iterations, dtype=np.int64)
    merged = FrameTally()
    for t in tallies:
        merged.index_bit_errors += t.index_bit_errors
        merged.index_bits += t.index_bits
        merged.symbol_bit_errors += t.symbol_bit_errors
        merged.symbol_bits += t.symbol_bits
        merged.mse_num += t.mse_num
        merged.mse_den += t.mse_den
        merged.pattern_errors += t.pattern_errors
        merged.subblocks += t.subblocks
        merged.blocks += t.blocks
        merged.fallbacks += t.fallbacks
        if t.iteration_counts:
            counts += np.asarray(t.iteration_counts, dtype=np.int64)
    return PointResult(
        ebn0_db=ebn0_db,
        gamma=config.gamma,
        scheme=config.scheme,
        frames=len(tallies),
        blocks=merged.blocks,
        index_bit_errors=merged.index_bit_errors,
        index_bits=merged.index_bits,
        symbol_bit_errors=merged.symbol_bit_errors,
        symbol_bits=merged.symbol_bits,
        mse_num=merged.mse_num,
        mse_den=merged.mse_den,
        pattern_errors=merged.pattern_errors,
        subblocks=merged.subblocks,
        fallbacks=merged.fallbacks,
        iteration_counts=tuple(int(c) for c in counts)
        if config.scheme == "proposed_turbo"
        else (),
    )


def run_experiment(config: SystemConfig, workers: int = 1) -> ExperimentResult:
    """Sweep the SNR grid for one scheme.

    Each point runs frames in fixed-size batches until the configured frame
    cap or a minimum number of accumulated bit errors is reached, whichever
    comes first.  Given the same (config, seed) the output is bit-identical
    for any worker count.
    """
    result = ExperimentResult(config=config)
    pool = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for point_index, ebn0_db in enumerate(config.ebn0_db):
            tallies: list = []
            frames_done = 0
            while frames_done < config.trials:
                batch = min(config.batch_frames, config.trials - frames_done)
                runner = partial(_simulate_frame, config, ebn0_db, point_index)
                indices = range(frames_done, frames_done + batch)
                if pool is not None:
                    tallies.extend(pool.map(runner, indices))
                else:
                    tallies.extend(runner(i) for i in indices)
                frames_done += batch
                errors = sum(t.bit_errors for t in tallies)
                if config.min_bit_errors and errors >= config.min_bit_errors:
                    break
            result.points.append(_merge_point(config, ebn0_db, tallies))
    finally:
        if pool is not None:
            pool.shutdown()
    return result


def run_gamma_sweep(
    config: SystemConfig, gamma_grid=GAMMA_GRID_DEFAULT, workers: int = 1
) -> list:
    """One experiment per pilot power ratio; the shared master seed pairs the
    random draws across ratios for low-variance comparisons."""
    if not gamma_grid:
        raise ValueError("gamma grid must not be empty")
    return [
        run_experiment(replace(config, gamma=float(gamma)), workers=workers)
        for gamma in gamma_grid
    ]


def run_iteration_histogram(config: SystemConfig, workers: int = 1) -> ExperimentResult:
    """Iteration-count statistics: stopping rule on, budget of four passes."""
    cfg = replace(
        config, scheme="proposed_turbo", use_stopping_rule=True, max_iterations=4
    )
    return run_experiment(cfg, workers=workers)


def write_csv(results, path) -> None:
    """Write one or more experiment results to a CSV file."""
    if isinstance(results, ExperimentResult):
        results = [results]
    lines = [CSV_HEADER]
    for res in results:
        lines.extend(res.csv_rows())
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("\n".join(lines) + "\n")
