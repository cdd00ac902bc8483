import json
import logging
import math
from typing import List, Optional, Tuple

import numpy as np
from scipy.ndimage import gaussian_filter1d
from scipy.special import logsumexp

from ..dsp.spatial_cues import phase_residual, phat_itd, wrap_phase
from ..errors import ShapeMismatchError, SignalError, UnwritablePathError
from ..models.audio_models import (
    ComplexSpectrogram,
    MleParams,
    MleResult,
    PhaseResidualTensor,
    Posteriors,
    TauGrid,
    TfMask,
)
from ..models.report_models import DereverbOptions, MleMode

logger = logging.getLogger(__name__)

INITIAL_DP_MASS = 0.5
INIT_SPREAD_SAMPLES = 1.0
SIGMA2_FLOOR = 1e-4
EMPTY_CELL = 1e-12


def init_params(histogram: np.ndarray, grid: TauGrid, freqs_hz: np.ndarray, sample_rate: int) -> MleParams:
    """
    Starting point from the PHAT histogram.

    psi is the histogram smoothed by a 1-sample Gaussian over tau (edge
    normalized) scaled to total 0.5; the DP variance per bin is the phase
    of a 1-sample delay at that frequency.
    """
    histogram = np.asarray(histogram, dtype=float)
    if histogram.shape != (len(grid),) or histogram.sum() <= 0.0:
        raise SignalError(f"PHAT histogram over {len(grid)} delays is empty or misshaped")

    step = grid.candidates[1] - grid.candidates[0] if len(grid) > 1 else 1.0
    sigma_bins = INIT_SPREAD_SAMPLES / step
    smoothed = gaussian_filter1d(histogram, sigma_bins, mode="constant")
    coverage = gaussian_filter1d(np.ones_like(histogram), sigma_bins, mode="constant")
    psi = smoothed / coverage
    psi = INITIAL_DP_MASS * psi / psi.sum()

    phase_step = 2.0 * math.pi * np.asarray(freqs_hz, dtype=float) * INIT_SPREAD_SAMPLES / sample_rate
    sigma2 = np.maximum(phase_step ** 2, SIGMA2_FLOOR)
    return MleParams(
        xi=np.zeros((len(grid), len(freqs_hz))),
        sigma2=np.tile(sigma2, (len(grid), 1)),
        psi=psi,
        grid=grid,
    )


def _log_components(residuals: np.ndarray, params: MleParams) -> Tuple[np.ndarray, float]:
    sigma2 = np.maximum(params.sigma2, SIGMA2_FLOOR)[:, :, None]
    deviation = wrap_phase(residuals - params.xi[:, :, None])
    with np.errstate(divide="ignore"):
        log_psi = np.log(params.psi)[:, None, None]
        log_garbage = math.log(params.garbage_mass) if params.garbage_mass > 0.0 else -math.inf
    log_dp = log_psi - 0.5 * np.log(2.0 * math.pi * sigma2) - deviation ** 2 / (2.0 * sigma2)
    return log_dp, log_garbage + math.log(params.garbage_density)


def e_step(residuals: PhaseResidualTensor, params: MleParams) -> Tuple[Posteriors, float]:
    """Responsibilities normalized jointly over all delays and the garbage source per TF bin"""
    if residuals.residuals.shape[:2] != params.xi.shape:
        raise ShapeMismatchError(
            f"Residuals {residuals.residuals.shape} do not match parameters {params.xi.shape}"
        )
    log_dp, log_garbage = _log_components(residuals.residuals, params)
    garbage_plane = np.full((1,) + log_dp.shape[1:], log_garbage)
    total = logsumexp(np.concatenate([log_dp, garbage_plane], axis=0), axis=0)
    nu = np.exp(log_dp - total[None])
    mu = np.exp(log_garbage - total)
    return Posteriors(nu=nu, mu=mu), float(np.sum(total))


def m_step(residuals: PhaseResidualTensor, posteriors: Posteriors,
           previous: Optional[MleParams] = None) -> MleParams:
    """
    Responsibility-weighted circular update of every (tau, f) cell.

    The mean moves by the weighted average angular deviation from the
    previous mean (circular mean when there is none); the variance is the
    weighted mean squared deviation from the new mean. Cells without
    responsibility keep their previous values and are flagged.
    """
    r = residuals.residuals
    nu = posteriors.nu
    weight = nu.sum(axis=2)
    held = weight <= EMPTY_CELL
    safe_weight = np.where(held, 1.0, weight)

    if previous is None:
        xi = np.angle(np.sum(nu * np.exp(1j * r), axis=2))
        old_xi, old_sigma2 = np.zeros_like(xi), np.full_like(xi, SIGMA2_FLOOR)
    else:
        old_xi, old_sigma2 = previous.xi, previous.sigma2
        shift = np.sum(nu * wrap_phase(r - old_xi[:, :, None]), axis=2) / safe_weight
        xi = wrap_phase(old_xi + shift)

    sigma2 = np.sum(nu * wrap_phase(r - xi[:, :, None]) ** 2, axis=2) / safe_weight
    sigma2 = np.maximum(sigma2, SIGMA2_FLOOR)
    xi = np.where(held, old_xi, xi)
    sigma2 = np.where(held, old_sigma2, sigma2)

    psi = nu.mean(axis=(1, 2))
    if np.any(held):
        logger.debug(f"{int(held.sum())} (tau, f) cells without responsibility held")
    return MleParams(xi=xi, sigma2=sigma2, psi=psi, grid=residuals.grid, held_cells=held)


def fit_mle(residuals: PhaseResidualTensor, params: MleParams, mode: MleMode = MleMode.EM,
            max_iterations: int = 16, tolerance: float = 1e-4) -> MleResult:
    """EM until the relative log-likelihood change drops below tolerance"""
    posteriors, log_likelihood = e_step(residuals, params)
    trace = [log_likelihood]
    if mode == MleMode.EM:
        for _ in range(max_iterations - 1):
            params = m_step(residuals, posteriors, params)
            posteriors, log_likelihood = e_step(residuals, params)
            trace.append(log_likelihood)
            if abs(trace[-1] - trace[-2]) < tolerance * abs(trace[-2]):
                break

    direct = np.clip(posteriors.nu.sum(axis=0), 0.0, 1.0)
    reverb = np.clip(posteriors.mu, 0.0, 1.0)
    return MleResult(direct_mask=TfMask(direct), reverb_mask=TfMask(reverb),
                     params=params, likelihood_trace=trace)


def run_mle(left: ComplexSpectrogram, right: ComplexSpectrogram, grid: TauGrid,
            options: Optional[DereverbOptions] = None) -> MleResult:
    options = options or DereverbOptions()
    _, histogram = phat_itd(left, right, grid, magnitude_weighted=options.magnitude_weighted_phat)
    residuals = phase_residual(left, right, grid)
    params = init_params(histogram, grid, left.frequencies, left.sample_rate)
    return fit_mle(residuals, params, options.mle_mode, options.max_iterations, options.tolerance)


def dump_mle_trace(path: str, params: MleParams, trace: List[float]) -> None:
    """Likelihood trace and final mixing weights as JSON"""
    payload = {
        "likelihood_trace": [float(v) for v in trace],
        "iterations": len(trace),
        "tau_grid": list(params.grid.candidates),
        "psi": [float(v) for v in params.psi],
        "garbage_mass": params.garbage_mass,
        "held_cells": int(np.sum(params.held_cells)) if params.held_cells is not None else 0,
    }
    try:
        with open(path, "w") as handle:
            json.dump(payload, handle, indent=2)
    except OSError as e:
        raise UnwritablePathError(f"Cannot write MLE trace {path}: {e}")


class IpdMaskAgent:
    """
    IPD Mask Agent - garbage-source clustering of interaural phase

    Responsibilities:
    - Initialize delay weights from PHAT
    - Run EM over the phase residuals of every candidate delay
    - Return the direct-path and reverberation masks
    """

    def __init__(self, grid: Optional[TauGrid] = None, options: Optional[DereverbOptions] = None):
        self.grid = grid or TauGrid.default()
        self.options = options or DereverbOptions()
        self.name = "IPD Mask Agent"

    def mask_for(self, left: ComplexSpectrogram, right: ComplexSpectrogram,
                 trace_path: Optional[str] = None) -> MleResult:
        try:
            result = run_mle(left, right, self.grid, self.options)
        except Exception as e:
            logger.error(f"Error estimating IPD mask: {str(e)}")
            raise
        logger.info(f"IPD clustering finished after {len(result.likelihood_trace)} E-steps - "
                    f"direct-path mass {float(np.sum(result.params.psi)):.3f}")
        if trace_path:
            dump_mle_trace(trace_path, result.params, result.likelihood_trace)
        return result
