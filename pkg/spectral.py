"""Fourier transforms, per-frequency mutual energy and the neuron SNR check.

Convention: the forward transform is unnormalized and the inverse carries 1/N,
so for real signals sum_k X(k) Y*(k) == N * sum_t x(t) y(t).
"""
import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

from errors import DegenerateDecompositionError, RejectedInputError

logger = logging.getLogger(__name__)

UNNORMALIZED = "unnormalized"
UNITARY = "unitary"

# bias modes of a neuron
ZERO_BIAS = "zero"
NEGATIVE_BIAS = "negative_bias"
BIAS_AS_FEATURE = "bias_as_feature"
POSITIVE_BIAS = "positive_bias"  # outside the theorem's premise

IMAG_TOLERANCE = 1e-9


@dataclass
class Spectrum:
    coefficients: np.ndarray
    normalization: str = UNNORMALIZED

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.coefficients.shape

    @property
    def energies(self) -> np.ndarray:
        """Per-frequency energy |C|^2."""
        return np.abs(self.coefficients) ** 2


# --- VALIDATION ---

def _real_signal(x, ndim: int) -> np.ndarray:
    try:
        arr = np.asarray(x, dtype=np.float64)
    except ValueError:
        raise RejectedInputError("signal must be a rectangular array of reals") from None
    if arr.ndim != ndim:
        raise RejectedInputError(f"expected a {ndim}-D signal, got shape {arr.shape}")
    if arr.size == 0:
        raise RejectedInputError("signal is empty")
    if not np.all(np.isfinite(arr)):
        raise RejectedInputError("signal contains non-finite values")
    return arr


def _real_part(values: np.ndarray, scale: float) -> np.ndarray:
    residue = np.max(np.abs(values.imag)) if values.size else 0.0
    if residue > IMAG_TOLERANCE * max(1.0, scale):
        raise RejectedInputError(f"inverse transform is not real (imaginary residue {residue:.3e})")
    return values.real.copy()


# --- TRANSFORMS ---

def naive_dft(x) -> np.ndarray:
    """Reference O(N^2) transform: X(k) = sum_t x(t) exp(-j 2 pi t k / N)."""
    x = _real_signal(x, 1)
    n = x.size
    t = np.arange(n)
    kernel = np.exp(-2j * np.pi * np.outer(t, t) / n)
    return kernel @ x


def dft_1d(x) -> Spectrum:
    return Spectrum(np.fft.fft(_real_signal(x, 1)))


def idft_1d(spectrum: Spectrum) -> np.ndarray:
    coefficients = np.asarray(spectrum.coefficients)
    if coefficients.ndim != 1 or coefficients.size == 0:
        raise RejectedInputError("expected a non-empty 1-D spectrum")
    values = np.fft.ifft(coefficients)
    return _real_part(values, float(np.max(np.abs(coefficients))))


def dft_2d(s_t) -> Spectrum:
    """Transforms along x (axis 0) for every y, then along y (axis 1)."""
    s_t = _real_signal(s_t, 2)
    inner = np.fft.fft(s_t, axis=0)
    return Spectrum(np.fft.fft(inner, axis=1))


def idft_2d(spectrum: Spectrum) -> np.ndarray:
    coefficients = np.asarray(spectrum.coefficients)
    if coefficients.ndim != 2 or coefficients.size == 0:
        raise RejectedInputError("expected a non-empty 2-D spectrum")
    values = np.fft.ifft(np.fft.ifft(coefficients, axis=1), axis=0)
    return _real_part(values, float(np.max(np.abs(coefficients))))


def conjugate_partner(index: Tuple[int, ...], shape: Tuple[int, ...]) -> Tuple[int, ...]:
    """Frequency whose coefficient is the conjugate of ``index`` for a real signal."""
    return tuple((-i) % n for i, n in zip(index, shape))


# --- MUTUAL ENERGY ---

@dataclass
class EnergyDecomposition:
    per_frequency_mutual: np.ndarray
    per_frequency_x: np.ndarray
    per_frequency_y: np.ndarray
    length: int = 0

    def __post_init__(self):
        self.per_frequency_mutual = np.asarray(self.per_frequency_mutual, dtype=np.float64)
        self.per_frequency_x = np.asarray(self.per_frequency_x, dtype=np.float64)
        self.per_frequency_y = np.asarray(self.per_frequency_y, dtype=np.float64)
        if not self.length:
            self.length = self.per_frequency_mutual.size

    @property
    def feature_set(self) -> np.ndarray:
        return np.flatnonzero(self.per_frequency_mutual > 0)

    @property
    def noise_set(self) -> np.ndarray:
        return np.flatnonzero(self.per_frequency_mutual < 0)

    @property
    def self_energies(self) -> Tuple[float, float]:
        return float(self.per_frequency_x.sum()), float(self.per_frequency_y.sum())

    @property
    def mutual_total(self) -> float:
        return float(self.per_frequency_mutual.sum())


def mutual_energy(x, y) -> EnergyDecomposition:
    """Per-frequency mutual energy Re(X(k) Y*(k)) and self energies |X(k)|^2, |Y(k)|^2."""
    x = _real_signal(x, 1)
    y = _real_signal(y, 1)
    if x.size != y.size:
        raise RejectedInputError(f"signal lengths differ: {x.size} vs {y.size}")
    X = np.fft.fft(x)
    Y = np.fft.fft(y)
    product = X * np.conj(Y)
    # imaginary parts cancel pairwise across (k, N-k)
    scale = max(1.0, float(np.sum(np.abs(product))))
    if not abs(product.imag.sum()) < IMAG_TOLERANCE * scale:
        raise RejectedInputError("cross spectrum is not conjugate symmetric; signals must be finite and real")
    return EnergyDecomposition(
        per_frequency_mutual=product.real,
        per_frequency_x=np.abs(X) ** 2,
        per_frequency_y=np.abs(Y) ** 2,
        length=x.size,
    )


# --- SNR ---

@dataclass
class SnrReport:
    snr_original: float
    snr_compound: float
    bias_mode: str
    activated: bool


def bias_mode_of(bias: float, bias_as_feature: bool = False) -> str:
    if bias_as_feature:
        return BIAS_AS_FEATURE
    if bias == 0:
        return ZERO_BIAS
    return NEGATIVE_BIAS if bias < 0 else POSITIVE_BIAS


def snr(decomp: EnergyDecomposition, bias: float = 0.0, bias_as_feature: bool = False) -> SnrReport:
    """Feature-to-noise energy ratios before and after the signals are compounded.

    With ``bias_as_feature`` the decomposition is expected to be of the
    bias-augmented pair, so ``bias`` is already inside the mutual energy.
    """
    f, n = decomp.feature_set, decomp.noise_set
    ex, ey, exy = decomp.per_frequency_x, decomp.per_frequency_y, decomp.per_frequency_mutual

    original_noise = float(np.sum(ex[n] + ey[n]))
    compound_noise = float(np.sum(ex[n] + ey[n] + 2.0 * exy[n]))
    if original_noise == 0.0 or compound_noise == 0.0:
        raise DegenerateDecompositionError(
            f"noise energy is zero ({n.size} noise frequencies); SNR is undefined"
        )
    original_signal = float(np.sum(ex[f] + ey[f]))
    compound_signal = float(np.sum(ex[f] + ey[f] + 2.0 * exy[f]))

    pre_activation = decomp.mutual_total / decomp.length
    if not bias_as_feature:
        pre_activation += bias
    return SnrReport(
        snr_original=original_signal / original_noise,
        snr_compound=compound_signal / compound_noise,
        bias_mode=bias_mode_of(bias, bias_as_feature),
        activated=pre_activation > 0,
    )


def neuron_decomposition(x, w, bias: float = 0.0, bias_as_feature: bool = False) -> EnergyDecomposition:
    """Decomposes a neuron's input and weights, folding the bias in as a unit feature if asked."""
    x = np.asarray(x, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    if bias_as_feature:
        x = np.append(x, 1.0)
        w = np.append(w, bias)
    return mutual_energy(x, w)


# --- THEOREM CHECK ---

PASS = "pass"
FAIL = "fail"
DEGENERATE = "degenerate"
INACTIVE = "inactive"


def energy_bound_holds(decomp: EnergyDecomposition, rtol: float = 1e-12) -> bool:
    """sqrt(E_x E_y) >= |E_xy| (Cauchy-Schwarz on the total energies)."""
    ex, ey = decomp.self_energies
    return np.sqrt(ex * ey) * (1.0 + rtol) >= abs(decomp.mutual_total)


def check_theorem_pair(x, w, bias: float = 0.0, bias_as_feature: bool = False) -> str:
    """Classifies one neuron: compound SNR beats original SNR, or why it was not checked."""
    decomp = neuron_decomposition(x, w, bias, bias_as_feature)
    try:
        report = snr(decomp, 0.0 if bias_as_feature else bias, bias_as_feature)
    except DegenerateDecompositionError:
        return DEGENERATE
    if not report.activated or report.bias_mode == POSITIVE_BIAS:
        return INACTIVE
    return PASS if report.snr_compound > report.snr_original else FAIL


@dataclass
class TheoremReport:
    trials: int
    passed: int = 0
    failed: int = 0
    skipped_degenerate: int = 0
    skipped_inactive: int = 0
    bound_violations: int = 0
    witness: Optional[dict] = None
    by_mode: dict = field(default_factory=dict)

    @property
    def checked(self) -> int:
        return self.passed + self.failed

    @property
    def ok(self) -> bool:
        return self.failed == 0 and self.bound_violations == 0


def trial_setting(trial: int, dims: Sequence[int], bias_modes: Sequence[str]) -> Tuple[int, str]:
    """Bias mode cycles fastest, the signal length advances once per full mode cycle."""
    return dims[(trial // len(bias_modes)) % len(dims)], bias_modes[trial % len(bias_modes)]


def verify_theorem1(
    trials: int,
    seed: int,
    dims: Sequence[int] = (8, 16, 32),
    bias_modes: Sequence[str] = (ZERO_BIAS, NEGATIVE_BIAS, BIAS_AS_FEATURE),
) -> TheoremReport:
    """Monte-Carlo check that activation raises the feature-to-noise ratio.

    Trials cover every pairing of ``dims`` and ``bias_modes``; pairs that are not
    activated or have no noise frequencies are counted as skipped.
    """
    if trials < 1:
        raise RejectedInputError("at least one trial is required")
    rng = np.random.default_rng(seed)
    report = TheoremReport(trials=trials)

    for trial in range(trials):
        dim, mode = trial_setting(trial, dims, bias_modes)
        x = rng.normal(size=dim)
        w = rng.normal(size=dim)
        if mode == ZERO_BIAS:
            bias = 0.0
        elif mode == NEGATIVE_BIAS:
            bias = -abs(rng.normal())
        else:
            bias = float(rng.normal())
        as_feature = mode == BIAS_AS_FEATURE

        if not energy_bound_holds(neuron_decomposition(x, w, bias, as_feature)):
            report.bound_violations += 1
        outcome = check_theorem_pair(x, w, bias, as_feature)
        counts = report.by_mode.setdefault(mode, {PASS: 0, FAIL: 0, DEGENERATE: 0, INACTIVE: 0})
        counts[outcome] += 1
        if outcome == PASS:
            report.passed += 1
        elif outcome == FAIL:
            report.failed += 1
            if report.witness is None:
                report.witness = {"x": x.tolist(), "w": w.tolist(), "bias": bias, "mode": mode}
        elif outcome == DEGENERATE:
            report.skipped_degenerate += 1
        else:
            report.skipped_inactive += 1

    logger.info(
        "theorem check: %d passed, %d failed, %d degenerate, %d inactive",
        report.passed, report.failed, report.skipped_degenerate, report.skipped_inactive,
    )
    return report
