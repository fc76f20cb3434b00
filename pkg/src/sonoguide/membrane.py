"""Damped modal bank emulating a struck 2D circular membrane.

The mode ladder follows the circular-membrane frequency structure: each
mode sits at the fundamental times a ratio of Bessel-function zeros. Each
strike adds energy to exponentially decaying per-mode envelopes; rendering
sums amplitude * exp(-sigma*t) * cos(2*pi*f*t + phase) per sample, with
envelopes anchored to absolute sample positions so output is bit-stable
across block-size choices.
"""

from __future__ import annotations

import logging
import wave
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import jn_zeros

from .sonmap import MembraneControl

logger = logging.getLogger(__name__)

DEFAULT_MODE_COUNT = 8
DEFAULT_MAX_M = 3
DEFAULT_SAMPLE_RATE = 48_000
SIGMA_FREQ_UNIT_HZ = 1000.0  # damping law evaluates frequency in kHz


@dataclass(frozen=True)
class Mode:
    """One vibrational mode: (m, n) indices, frequency, decay, strike weight."""

    m: int
    n: int
    frequency: float
    sigma: float
    weight: float
    phase: float = 0.0

    def __post_init__(self):
        if self.frequency <= 0:
            raise ValueError("mode frequency must be positive")
        if self.sigma < 0:
            raise ValueError("mode decay rate cannot be negative")


def bessel_zero_ladder(count: int, max_m: int = DEFAULT_MAX_M) -> list[tuple[int, int, float]]:
    """First ``count`` zeros j_{m,n} with m <= max_m, ascending."""
    if count < 1:
        raise ValueError("need at least one mode")
    zeros = []
    for m in range(max_m + 1):
        for n, z in enumerate(jn_zeros(m, count), start=1):
            zeros.append((float(z), m, n))
    zeros.sort()
    return [(m, n, z) for z, m, n in zeros[:count]]


def modal_frequencies(f0: float, mode_count: int, max_m: int = DEFAULT_MAX_M) -> list[tuple[int, int, float]]:
    """Mode frequencies f0 * j_{m,n} / j_{0,1}; the first entry is f0 itself."""
    if f0 <= 0:
        raise ValueError("fundamental must be positive")
    ladder = bessel_zero_ladder(mode_count, max_m=max_m)
    j01 = ladder[0][2]
    return [(m, n, f0 * z / j01) for m, n, z in ladder]


def damping_sigma(beta: float, alpha: float, frequency_hz: float, p: float = 1.0) -> float:
    """Per-mode decay rate: constant loss plus frequency-dependent loss.

    The frequency enters in kHz so the loss coefficients stay in a usable
    range across the audible band.
    """
    if beta < 0 or alpha < 0:
        raise ValueError("loss coefficients cannot be negative")
    return beta + alpha * (frequency_hz / SIGMA_FREQ_UNIT_HZ) ** p


class ModalVoice:
    """Stateful modal bank rendering mono float blocks at a fixed rate."""

    def __init__(
        self,
        modes: list[Mode],
        sample_rate: int = DEFAULT_SAMPLE_RATE,
        master_gain: float = 0.2,
        limiter: bool = True,
    ):
        if not modes:
            raise ValueError("a voice needs at least one mode")
        nyquist = sample_rate / 2.0
        kept = [m for m in modes if m.frequency < nyquist]
        for m in modes:
            if m.frequency >= nyquist:
                logger.warning(
                    "dropping mode (%d,%d) at %.1f Hz: at or above Nyquist (%.1f Hz)",
                    m.m, m.n, m.frequency, nyquist,
                )
        if not kept:
            raise ValueError("all modes at or above Nyquist")
        self.sample_rate = int(sample_rate)
        self.master_gain = float(master_gain)
        self.limiter = bool(limiter)
        self.modes = kept
        self._freq = np.array([m.frequency for m in kept])
        self._sigma = np.array([m.sigma for m in kept])
        self._weight = np.array([m.weight for m in kept])
        self._phase = np.array([m.phase for m in kept])
        self._amp = np.zeros(len(kept))
        self._anchor = np.zeros(len(kept), dtype=np.int64)
        self._pos = 0
        self._requested_count = len(modes)
        self._control: MembraneControl | None = None

    # -- construction from a control -----------------------------------------

    @classmethod
    def from_control(
        cls,
        control: MembraneControl,
        sample_rate: int = DEFAULT_SAMPLE_RATE,
        mode_count: int = DEFAULT_MODE_COUNT,
        master_gain: float = 0.2,
        limiter: bool = True,
        sigma_exponent: float = 1.0,
    ) -> "ModalVoice":
        modes = _modes_for_control(control, mode_count, sigma_exponent)
        voice = cls(modes, sample_rate=sample_rate, master_gain=master_gain, limiter=limiter)
        voice._requested_count = mode_count
        voice._sigma_exponent = sigma_exponent
        voice._control = control
        return voice

    # -- state queries ---------------------------------------------------------

    @property
    def position(self) -> int:
        return self._pos

    @property
    def control(self) -> MembraneControl | None:
        return self._control

    def envelope_amplitudes(self) -> np.ndarray:
        """Current per-mode envelope values (decayed to the present sample)."""
        dt = (self._pos - self._anchor) / self.sample_rate
        return self._amp * np.exp(-self._sigma * dt)

    # -- operations -------------------------------------------------------------

    def excite(self, force: float) -> "ModalVoice":
        """Add a strike: every mode's envelope gains force * weight."""
        if force < 0:
            raise ValueError("excitation force cannot be negative")
        if force == 0:
            return self
        self._settle()
        self._amp += force * self._weight
        return self

    def apply_control(self, control: MembraneControl) -> "ModalVoice":
        """Retune frequencies and decay rates; envelopes carry over by rank."""
        if self._control is not None and control == self._control:
            return self
        self._settle()
        carried = self._amp
        exponent = getattr(self, "_sigma_exponent", 1.0)
        modes = _modes_for_control(control, self._requested_count, exponent)
        nyquist = self.sample_rate / 2.0
        kept = [m for m in modes if m.frequency < nyquist]
        for m in modes:
            if m.frequency >= nyquist:
                logger.warning(
                    "dropping mode (%d,%d) at %.1f Hz: at or above Nyquist (%.1f Hz)",
                    m.m, m.n, m.frequency, nyquist,
                )
        if not kept:
            raise ValueError("all modes at or above Nyquist")
        self.modes = kept
        self._freq = np.array([m.frequency for m in kept])
        self._sigma = np.array([m.sigma for m in kept])
        self._weight = np.array([m.weight for m in kept])
        self._phase = np.array([m.phase for m in kept])
        amp = np.zeros(len(kept))
        shared = min(len(carried), len(kept))
        amp[:shared] = carried[:shared]
        self._amp = amp
        self._anchor = np.full(len(kept), self._pos, dtype=np.int64)
        self._control = control
        return self

    def render_block(self, n_samples: int) -> np.ndarray:
        """Render the next ``n_samples``; advances the voice's sample clock."""
        idx = self._pos + np.arange(n_samples, dtype=np.int64)
        rel = (idx[None, :] - self._anchor[:, None]) / self.sample_rate
        env = self._amp[:, None] * np.exp(-self._sigma[:, None] * rel)
        cycles = idx[None, :] * (self._freq[:, None] / self.sample_rate)
        block = (env * np.cos(2.0 * np.pi * (cycles % 1.0) + self._phase[:, None])).sum(axis=0)
        block *= self.master_gain
        if self.limiter:
            block = np.tanh(block)
        self._pos += int(n_samples)
        return block

    def _settle(self) -> None:
        """Fold decay since each anchor into the amplitudes; re-anchor at now."""
        dt = (self._pos - self._anchor) / self.sample_rate
        self._amp = self._amp * np.exp(-self._sigma * dt)
        self._anchor[:] = self._pos


def _modes_for_control(control: MembraneControl, mode_count: int, sigma_exponent: float) -> list[Mode]:
    freqs = modal_frequencies(control.f0, mode_count)
    return [
        Mode(
            m=m,
            n=n,
            frequency=f,
            sigma=damping_sigma(control.beta, control.alpha, f, p=sigma_exponent),
            weight=1.0 / rank,
        )
        for rank, (m, n, f) in enumerate(freqs, start=1)
    ]


# Spec-shaped functional wrappers around the voice methods.

def excite(voice: ModalVoice, force: float) -> ModalVoice:
    return voice.excite(force)


def apply_control(voice: ModalVoice, control: MembraneControl) -> ModalVoice:
    return voice.apply_control(control)


def render_block(voice: ModalVoice, n_samples: int) -> tuple[np.ndarray, ModalVoice]:
    return voice.render_block(n_samples), voice


# ---------------------------------------------------------------------------
# PCM helpers
# ---------------------------------------------------------------------------

def pcm16(samples: np.ndarray) -> np.ndarray:
    """Float [-1, 1] to little-endian int16, round-half-away from zero."""
    clipped = np.clip(np.asarray(samples, dtype=np.float64), -1.0, 1.0)
    return np.round(clipped * 32767.0).astype("<i2")


def write_wav(path, samples: np.ndarray, sample_rate: int = DEFAULT_SAMPLE_RATE) -> None:
    """Mono 16-bit PCM RIFF file."""
    data = pcm16(samples).tobytes()
    with wave.open(str(Path(path)), "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(sample_rate)
        w.writeframes(data)


def read_wav(path) -> tuple[np.ndarray, int]:
    with wave.open(str(Path(path)), "rb") as w:
        rate = w.getframerate()
        raw = w.readframes(w.getnframes())
    return np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32767.0, rate
