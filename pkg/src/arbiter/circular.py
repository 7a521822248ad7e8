"""Von Mises distributions on the circle and mixture modality detection.

The directional density f(x | mu, kappa) = exp(kappa*cos(x-mu)) / (2*pi*I0(kappa))
uses a locally computed modified Bessel function I0: power series below the
crossover, asymptotic expansion above it. Mixtures are built from sub-policy
action directions weighted by goal scores; a decision point is a mixture
whose peak density stays below the unimodality threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

KAPPA_MIN = 0.5
KAPPA_SCALE = 8.0
KAPPA_MAX = 700.0
# Calibrated so that a narrow dominant component (score >~ 0.65) clears the
# bar while two balanced, well-separated components (each contributing about
# half a lone peak) stay below it.
PEAK_THRESHOLD = 0.6
MODALITY_SAMPLES = 360

_SERIES_CROSSOVER = 15.0
_TWO_PI = 2.0 * math.pi


def bessel_i0_scaled(x: float) -> float:
    """exp(-x) * I0(x) for x >= 0, relative error below 1e-10."""
    if x < 0:
        raise ValueError("argument must be non-negative")
    if x < _SERIES_CROSSOVER:
        # I0(x) = sum_k (x/2)^(2k) / (k!)^2
        quarter_sq = 0.25 * x * x
        term = 1.0
        total = 1.0
        k = 0
        while term > 1e-17 * total:
            k += 1
            term *= quarter_sq / (k * k)
            total += term
        return total * math.exp(-x)
    # Asymptotic: I0(x) ~ e^x / sqrt(2 pi x) * sum_k a_k / x^k
    total = 1.0
    term = 1.0
    for k in range(1, 40):
        next_term = term * (2 * k - 1) ** 2 / (8.0 * k * x)
        if next_term >= term:
            break
        term = next_term
        total += term
        if term < 1e-17 * total:
            break
    return total / math.sqrt(_TWO_PI * x)


def bessel_i0(x: float) -> float:
    """Modified Bessel function of the first kind, order zero."""
    return bessel_i0_scaled(x) * math.exp(x)


def vm_pdf(x, mu: float, kappa: float):
    """Von Mises density at angle(s) x. Accepts scalars or arrays for x."""
    if not 0.0 <= kappa <= KAPPA_MAX:
        raise ValueError(f"kappa must lie in [0, {KAPPA_MAX}]")
    x = np.asarray(x, dtype=float)
    # exp(kappa*(cos(d)-1)) / (2 pi e^-kappa I0(kappa)) avoids overflow.
    values = np.exp(kappa * (np.cos(x - mu) - 1.0)) / (_TWO_PI * bessel_i0_scaled(kappa))
    if values.ndim == 0:
        return float(values)
    return values


@dataclass(frozen=True)
class VonMisesComponent:
    mode: float
    kappa: float
    weight: float


@dataclass(frozen=True)
class VonMisesMixture:
    components: tuple[VonMisesComponent, ...]
    degenerate: bool = False  # every source action had zero magnitude


@dataclass(frozen=True)
class Modality:
    multimodal: bool
    peak_density: float

    @property
    def label(self) -> str:
        return "multimodal" if self.multimodal else "unimodal"


def build_fvmm(
    actions: np.ndarray,
    weights: np.ndarray,
    kappa_min: float = KAPPA_MIN,
    kappa_scale: float = KAPPA_SCALE,
) -> VonMisesMixture:
    """Mixture over action directions: component g has mode atan2(action_g),
    concentration kappa_min + kappa_scale * weight_g, and weight weight_g.

    Zero-magnitude actions contribute an uninformative component at kappa_min.
    """
    actions = np.asarray(actions, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if actions.ndim != 2 or actions.shape[1] != 2 or len(actions) != len(weights):
        raise ValueError("need one 2D action per weight")
    if len(weights) < 1:
        raise ValueError("mixture needs at least one component")

    components = []
    moving = 0
    for action, weight in zip(actions, weights):
        magnitude = float(np.linalg.norm(action))
        if magnitude > 1e-12:
            mode = math.atan2(action[1], action[0])
            kappa = kappa_min + kappa_scale * float(weight)
            moving += 1
        else:
            mode = 0.0
            kappa = kappa_min
        components.append(VonMisesComponent(mode=mode, kappa=kappa, weight=float(weight)))
    return VonMisesMixture(components=tuple(components), degenerate=moving == 0)


def fvmm_pdf(mixture: VonMisesMixture, x):
    """Mixture density: the score-weighted sum of the component densities."""
    x = np.asarray(x, dtype=float)
    total = np.zeros_like(x, dtype=float)
    for component in mixture.components:
        total = total + component.weight * vm_pdf(x, component.mode, component.kappa)
    if total.ndim == 0:
        return float(total)
    return total


def classify_modality(
    mixture: VonMisesMixture,
    n_samples: int = MODALITY_SAMPLES,
    peak_threshold: float = PEAK_THRESHOLD,
) -> Modality:
    """Unimodal iff the maximum density over a uniform angle grid exceeds the
    threshold: a narrow dominant peak clears it, dispersed mass does not.
    """
    if n_samples < 64:
        raise ValueError("n_samples must be at least 64")
    grid = np.linspace(-math.pi, math.pi, n_samples, endpoint=False)
    peak = float(np.max(fvmm_pdf(mixture, grid)))
    return Modality(multimodal=not peak > peak_threshold, peak_density=peak)


def count_modes_oracle(mixture: VonMisesMixture, grid_resolution: int = 2048) -> int:
    """Strict local maxima of the mixture density on a circular grid, keeping
    only peaks with prominence of at least 1% of the global maximum.
    """
    if grid_resolution < 1024:
        raise ValueError("grid_resolution must be at least 1024")
    grid = np.linspace(-math.pi, math.pi, grid_resolution, endpoint=False)
    density = fvmm_pdf(mixture, grid)
    n = grid_resolution
    global_max = float(np.max(density))
    global_min = float(np.min(density))

    count = 0
    for i in range(n):
        here = density[i]
        if not (here > density[i - 1] and here > density[(i + 1) % n]):
            continue
        saddles = []
        for direction in (-1, 1):
            lowest = here
            j = i
            found_higher = False
            for _ in range(n - 1):
                j = (j + direction) % n
                if density[j] > here:
                    found_higher = True
                    break
                lowest = min(lowest, density[j])
            saddles.append(lowest if found_higher else global_min)
        if here - max(saddles) >= 0.01 * global_max:
            count += 1
    return count
