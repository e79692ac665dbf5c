"""Deletion / insertion games in the time (feature) domain and the frequency domain.

A time-domain deletion sets features to the baseline and can add spectral
energy the sample never had. A frequency-domain deletion removes Fourier
coefficients of the sample, conjugate pairs together, so it only ever removes
energy.
"""
import logging
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.integrate import trapezoid

from errors import RejectedInputError
from freqx import AttributionMap
from nn_core import DenseNet, class_probabilities
from spectral import conjugate_partner, dft_1d, dft_2d, idft_1d, idft_2d

logger = logging.getLogger(__name__)

# --- CONFIGURATION ---
DELETE_MOST = "delete_most_important"
DELETE_LEAST = "delete_least_important"
INSERT_MOST = "insert_most_important"
MODES = (DELETE_MOST, DELETE_LEAST, INSERT_MOST)

TIME = "time"
FREQUENCY = "frequency"

CLASS_PROBABILITY = "class_probability"
FLIP_RATE = "prediction_flip_rate"

BASELINE = 0.0
DEFAULT_SCHEDULE = tuple(np.round(np.linspace(0.0, 1.0, 11), 10))
MAGNITUDE_DECIMALS = 9


def _check_mode(mode: str):
    if mode not in MODES:
        raise RejectedInputError(f"unknown game mode {mode!r}")


def _check_fraction(fraction: float):
    if not 0.0 <= fraction <= 1.0:
        raise RejectedInputError(f"fraction {fraction} is outside [0, 1]")


def _count_for(fraction: float, total: int) -> int:
    return int(np.floor(fraction * total + 1e-9))


# --- TIME DOMAIN ---

def time_domain_delete(x, attribution: AttributionMap, fraction: float, mode: str, baseline: float = BASELINE):
    """Sets floor(fraction * d) features to the baseline, chosen from the attribution ranking.

    ``INSERT_MOST`` starts from an all-baseline vector and restores the top
    features instead.
    """
    _check_mode(mode)
    _check_fraction(fraction)
    x = np.asarray(x, dtype=np.float64)
    k = _count_for(fraction, x.size)
    ranking = np.asarray(attribution.ranking)
    if mode == DELETE_MOST:
        out = x.copy()
        out[ranking[:k]] = baseline
    elif mode == DELETE_LEAST:
        out = x.copy()
        out[ranking[::-1][:k]] = baseline
    else:
        out = np.full_like(x, baseline)
        out[ranking[:k]] = x[ranking[:k]]
    return out


# --- FREQUENCY DOMAIN ---

@dataclass
class FrequencyRanking:
    scores_freq: np.ndarray
    order: np.ndarray  # flat frequency indices
    groups: List[Tuple[int, ...]]  # conjugate pairs (or self-conjugate singletons), in rank order

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.scores_freq.shape


def freq_rank(attribution_map) -> FrequencyRanking:
    """Ranks the frequencies of an attribution map by descending spectral magnitude."""
    scores = np.asarray(attribution_map, dtype=np.float64)
    if scores.ndim == 1:
        spectrum = dft_1d(scores)
    elif scores.ndim == 2:
        spectrum = dft_2d(scores)
    else:
        raise RejectedInputError("attribution map must be 1-D or 2-D")
    coefficients = spectrum.coefficients
    shape = coefficients.shape
    magnitude = np.abs(coefficients).ravel()
    # round away transform noise so exact ties fall back to index order
    scale = magnitude.max() if magnitude.max() > 0 else 1.0
    key = np.round(magnitude / scale, MAGNITUDE_DECIMALS)

    seen = set()
    groups = []
    for flat in range(magnitude.size):
        if flat in seen:
            continue
        partner = int(np.ravel_multi_index(conjugate_partner(np.unravel_index(flat, shape), shape), shape))
        group = tuple(sorted({flat, partner}))
        seen.update(group)
        groups.append(group)
    strength = np.array([key[list(g)].max() for g in groups])
    ranked = [groups[i] for i in np.argsort(-strength, kind="stable")]
    order = np.array([i for g in ranked for i in g], dtype=np.int64)
    return FrequencyRanking(scores_freq=coefficients, order=order, groups=ranked)


def _selected_frequencies(ranking: FrequencyRanking, count: int, from_bottom: bool) -> np.ndarray:
    groups = ranking.groups[::-1] if from_bottom else ranking.groups
    chosen = []
    for group in groups:
        if len(chosen) >= count:
            break
        chosen.extend(group)
    return np.array(chosen, dtype=np.int64)


def freq_delete(x, ranking: FrequencyRanking, count_or_fraction, mode: str):
    """Zeroes ranked frequency coefficients of ``x`` and transforms back.

    An ``int`` counts frequencies, a ``float`` is a fraction of all of them.
    Conjugate partners are always removed together, so the selection can
    exceed the count by one.
    """
    _check_mode(mode)
    x = np.asarray(x, dtype=np.float64)
    if x.shape != ranking.shape:
        raise RejectedInputError(f"signal shape {x.shape} does not match ranking shape {ranking.shape}")
    total = x.size
    if isinstance(count_or_fraction, (int, np.integer)):
        count = int(count_or_fraction)
        if not 0 <= count <= total:
            raise RejectedInputError(f"frequency count {count} is outside [0, {total}]")
    else:
        _check_fraction(float(count_or_fraction))
        count = _count_for(float(count_or_fraction), total)

    spectrum = dft_1d(x) if x.ndim == 1 else dft_2d(x)
    flat = spectrum.coefficients.ravel().copy()
    selected = _selected_frequencies(ranking, count, from_bottom=(mode == DELETE_LEAST))
    if mode == INSERT_MOST:
        kept = np.zeros_like(flat)
        kept[selected] = flat[selected]
        flat = kept
    else:
        flat[selected] = 0.0
    spectrum.coefficients = flat.reshape(x.shape)
    return idft_1d(spectrum) if x.ndim == 1 else idft_2d(spectrum)


def introduced_frequencies(x, x_perturbed, rtol: float = 1e-9) -> np.ndarray:
    """Frequencies whose energy is larger after the perturbation than before."""
    x = np.asarray(x, dtype=np.float64)
    before = (dft_1d(x) if x.ndim == 1 else dft_2d(x)).energies
    after_signal = np.asarray(x_perturbed, dtype=np.float64)
    after = (dft_1d(after_signal) if x.ndim == 1 else dft_2d(after_signal)).energies
    tolerance = rtol * max(1.0, float(before.max()))
    return np.flatnonzero((after - before).ravel() > tolerance)


# --- GAMES ---

@dataclass
class DeletionCurve:
    fractions: np.ndarray
    mean_prob: np.ndarray
    flip_rate: np.ndarray
    mode: str
    domain: str

    def outputs(self, response: str = CLASS_PROBABILITY) -> np.ndarray:
        if response == CLASS_PROBABILITY:
            return self.mean_prob
        if response == FLIP_RATE:
            return self.flip_rate
        raise RejectedInputError(f"unknown response {response!r}")

    def auc(self, response: str = CLASS_PROBABILITY) -> float:
        """Trapezoidal area under the curve."""
        return float(trapezoid(self.outputs(response), self.fractions))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {"fraction": self.fractions, "mean_prob": self.mean_prob, "flip_rate": self.flip_rate}
        )


def _check_schedule(fractions) -> np.ndarray:
    fractions = np.asarray(fractions, dtype=np.float64)
    if fractions.ndim != 1 or fractions.size == 0 or fractions[0] != 0.0:
        raise RejectedInputError("fraction schedule must start at 0")
    if np.any(np.diff(fractions) <= 0):
        raise RejectedInputError("fraction schedule must be strictly increasing")
    if fractions[-1] > 1.0:
        raise RejectedInputError("fractions must not exceed 1")
    return fractions


def run_game(
    net: DenseNet,
    samples,
    attributions: Sequence[AttributionMap],
    fractions=DEFAULT_SCHEDULE,
    mode: str = DELETE_MOST,
    domain: str = TIME,
    baseline: float = BASELINE,
) -> DeletionCurve:
    """Perturbs every sample at each fraction and averages the model's response.

    Responses are the probability of the originally predicted class and the
    share of predictions that changed.
    """
    _check_mode(mode)
    fractions = _check_schedule(fractions)
    X = np.atleast_2d(np.asarray(samples, dtype=np.float64))
    if len(attributions) != X.shape[0]:
        raise RejectedInputError(f"{len(attributions)} attributions for {X.shape[0]} samples")
    if domain not in (TIME, FREQUENCY):
        raise RejectedInputError(f"unknown game domain {domain!r}")

    clean = class_probabilities(net, X)
    original = np.argmax(clean, axis=1)
    rows = np.arange(X.shape[0])
    rankings = [freq_rank(a.scores) for a in attributions] if domain == FREQUENCY else None

    mean_prob, flip_rate = [], []
    for fraction in fractions:
        if domain == TIME:
            perturbed = np.stack(
                [time_domain_delete(x, a, fraction, mode, baseline) for x, a in zip(X, attributions)]
            )
        else:
            perturbed = np.stack([freq_delete(x, r, float(fraction), mode) for x, r in zip(X, rankings)])
        probs = class_probabilities(net, perturbed)
        mean_prob.append(float(np.mean(probs[rows, original])))
        flip_rate.append(float(np.mean(np.argmax(probs, axis=1) != original)))

    logger.debug("%s/%s game over %d samples done", domain, mode, X.shape[0])
    return DeletionCurve(
        fractions=fractions,
        mean_prob=np.array(mean_prob),
        flip_rate=np.array(flip_rate),
        mode=mode,
        domain=domain,
    )


def random_attributions(n: int, d: int, seed: int) -> List[AttributionMap]:
    """Seeded random rankings, the null baseline for every game."""
    rng = np.random.default_rng(seed)
    return [AttributionMap(rng.random(d)) for _ in range(n)]
