"""Forward convolutive prediction of reverberant speaker images.

Per frequency, a causal complex FIR filter is fit by weighted least
squares so that the filtered direct-path estimate matches a target
spectrogram (the mixture, or a partially cleaned mixture).  Applying
the filter to the direct-path estimate yields a physically-constrained
reverberant image: the filter can only redistribute the direct-path
signal over current and past frames, so the output obeys the linear
room-filtering relation instead of being a free re-estimate.

Two drivers are provided: :func:`fcp_separate` fits every speaker
independently against the mixture, and :func:`fcp_essu_separate`
processes speakers in descending energy order, subtracting the images
already estimated for stronger speakers from each weaker speaker's
target before fitting.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from cxfilter.stft import FILTER_STFT, ComplexSpectrogram, StftConfig, _check_same_grid


@dataclass(frozen=True)
class FcpConfig:
    """Filter-estimation knobs.

    ``epsilon`` floors the per-unit weight denominators at a fraction of
    the loudest time-frequency unit of the target; ``diag_load_delta``
    adds trace-scaled diagonal loading before the Hermitian solve so
    silent frequencies yield a zero filter instead of a singular system.
    """

    taps: int = 40
    epsilon: float = 1e-3
    diag_load_delta: float = 1e-6
    stft: StftConfig = field(default_factory=lambda: FILTER_STFT)
    per_freq_floor: bool = False

    def __post_init__(self):
        if self.taps < 1:
            raise ValueError("taps must be >= 1")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.diag_load_delta < 0:
            raise ValueError("diag_load_delta must be non-negative")


@dataclass(eq=False)
class FilterSet:
    """Per-(speaker, frequency) complex FIR filters, shape (C, F, taps)."""

    filters: np.ndarray

    def __post_init__(self):
        self.filters = np.asarray(self.filters, dtype=np.complex128)
        if self.filters.ndim != 3:
            raise ValueError("FilterSet array must be (speakers, bins, taps)")
        if not np.isfinite(self.filters).all():
            raise ValueError("FilterSet contains non-finite values")

    @property
    def num_speakers(self) -> int:
        return self.filters.shape[0]

    @property
    def taps(self) -> int:
        return self.filters.shape[2]


def _tap_stack(data: np.ndarray, taps: int) -> np.ndarray:
    """Causal tap view: out[t, f, k] = data[t-k, f], zero for t-k < 0."""
    frames, bins = data.shape
    padded = np.concatenate(
        [np.zeros((taps - 1, bins), dtype=data.dtype), data], axis=0
    )
    windows = sliding_window_view(padded, taps, axis=0)  # (T, F, taps)
    return windows[..., ::-1]


def _weights(target: np.ndarray, config: FcpConfig) -> np.ndarray:
    """Per-unit weight denominators: eps * max(|target|^2) + |target|^2."""
    power = np.abs(target) ** 2
    if config.per_freq_floor:
        floor = config.epsilon * power.max(axis=0, keepdims=True)
    else:
        floor = config.epsilon * power.max()
    w = floor + power
    # A weight of zero only happens where the floored target region is
    # entirely silent; unit weight there keeps the solve finite and the
    # zero cross vector already forces a zero filter.
    return np.where(w > 0.0, w, 1.0)


def estimate_fcp_filter(
    target: ComplexSpectrogram,
    s_hat: ComplexSpectrogram,
    config: FcpConfig,
) -> np.ndarray:
    """Fit one speaker's per-frequency causal filter by weighted LS.

    For each frequency ``f`` the returned row ``g[f]`` minimizes

        sum_t |target(t,f) - g(f)^H stack(s_hat)(t,f)|^2 / w(t,f)

    where the stack gathers the current and ``taps-1`` past frames of
    ``s_hat`` and ``w`` is the floored magnitude-square of the target.
    The normal equations are solved per frequency with a Hermitian
    positive-definite factorization after trace-scaled diagonal
    loading.  Frequencies where ``s_hat`` is identically zero yield a
    zero filter row rather than an error.

    Returns
    -------
    numpy.ndarray
        Complex filter array of shape ``(bins, taps)``.
    """
    _check_same_grid(target, s_hat, "estimate_fcp_filter")
    taps = config.taps
    z = target.data
    w = _weights(z, config)

    stack = _tap_stack(s_hat.data, taps)  # (T, F, A)
    regress = np.moveaxis(stack, 1, 0)  # (F, T, A)
    weighted = regress / w.T[:, :, None]  # (F, T, A)

    # R[f] = sum_t stack stack^H / w ; p[f] = sum_t stack conj(target) / w
    gram = np.matmul(weighted.transpose(0, 2, 1), regress.conj())
    cross = np.matmul(weighted.transpose(0, 2, 1), z.T.conj()[:, :, None])[:, :, 0]
    gram = 0.5 * (gram + gram.conj().transpose(0, 2, 1))

    bins = z.shape[1]
    filters = np.zeros((bins, taps), dtype=np.complex128)
    trace = np.einsum("fkk->f", gram).real
    load = config.diag_load_delta * trace / taps
    eye = np.eye(taps)
    for f in range(bins):
        if trace[f] <= 0.0:
            continue  # silent frequency: zero filter
        system = gram[f] + load[f] * eye
        try:
            filters[f] = cho_solve(cho_factor(system), cross[f])
        except LinAlgError:
            filters[f] = np.linalg.lstsq(system, cross[f], rcond=None)[0]
    return filters


def apply_filter(
    filters: np.ndarray, s_hat: ComplexSpectrogram
) -> ComplexSpectrogram:
    """Convolve the per-frequency filters with the stacked direct estimate.

    ``out(t,f) = g(f)^H [s_hat(t,f), s_hat(t-1,f), ...]`` with causal
    zero-prefix taps, i.e. a per-frequency FIR along the frame axis.
    """
    filters = np.asarray(filters)
    if filters.ndim != 2 or filters.shape[0] != s_hat.bins:
        raise ValueError(
            f"filters shape {filters.shape} does not match "
            f"({s_hat.bins}, taps)"
        )
    stack = _tap_stack(s_hat.data, filters.shape[1])
    out = np.einsum("tfa,fa->tf", stack, filters.conj())
    return ComplexSpectrogram(out, s_hat.config)


def fcp_separate(
    mixture_spec: ComplexSpectrogram,
    s_hats: list,
    config: FcpConfig,
    return_filters: bool = False,
):
    """Independent per-speaker FCP against the mixture.

    Every speaker's filter is estimated with the mixture as target and
    applied to that speaker's direct-path estimate; speakers do not
    interact, so the outputs are invariant to their ordering.
    """
    if len(s_hats) == 0:
        raise ValueError("fcp_separate needs at least one speaker estimate")
    images, filters = [], []
    for s_hat in s_hats:
        g = estimate_fcp_filter(mixture_spec, s_hat, config)
        filters.append(g)
        images.append(apply_filter(g, s_hat))
    if return_filters:
        return images, FilterSet(np.stack(filters))
    return images


def energy_sort(s_hats: list) -> list:
    """Speaker indices in descending order of direct-estimate energy.

    Energy is the squared Frobenius norm of each spectrogram; ties are
    broken by ascending speaker index.
    """
    if len(s_hats) == 0:
        raise ValueError("energy_sort needs at least one speaker estimate")
    energies = np.array([np.sum(np.abs(s.data) ** 2) for s in s_hats])
    return list(np.argsort(-energies, kind="stable"))


def fcp_essu_separate(
    mixture_spec: ComplexSpectrogram,
    s_hats: list,
    config: FcpConfig,
    return_filters: bool = False,
):
    """FCP with energy-sorted source update.

    Speakers are processed in descending energy order.  Each speaker's
    target is the mixture minus the images already estimated for the
    other speakers (unprocessed speakers contribute zero), and the
    weight denominators are recomputed from that per-speaker target.
    Removing the stronger sources first keeps their energy from biasing
    the filter fits of the weaker ones; for a single speaker this
    reduces exactly to :func:`fcp_separate`.
    """
    if len(s_hats) == 0:
        raise ValueError("fcp_essu_separate needs at least one speaker estimate")
    for s_hat in s_hats:
        _check_same_grid(mixture_spec, s_hat, "fcp_essu_separate")

    count = len(s_hats)
    images = [
        ComplexSpectrogram(np.zeros_like(mixture_spec.data), mixture_spec.config)
        for _ in range(count)
    ]
    filters = [None] * count
    for c in energy_sort(s_hats):
        residual = mixture_spec.data.copy()
        for other in range(count):
            if other != c:
                residual -= images[other].data
        target = ComplexSpectrogram(residual, mixture_spec.config)
        g = estimate_fcp_filter(target, s_hats[c], config)
        filters[c] = g
        images[c] = apply_filter(g, s_hats[c])
    if return_filters:
        return images, FilterSet(np.stack(filters))
    return images
