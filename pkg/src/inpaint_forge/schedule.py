"""Diffusion noise schedule: beta/alpha tables, forward kernel, reverse step.

Tables are indexed by timestep t in [1, T]; index 0 holds the convention
alpha_bar[0] = 1 so the reverse-step coefficients are well defined at t = 1.
All tables are computed and stored in float64.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

BETA_START = 1e-4
BETA_END = 0.02
DEFAULT_T = 1000


class ScheduleError(ValueError):
    pass


@dataclass(frozen=True)
class NoiseSchedule:
    T: int
    beta: np.ndarray = field(repr=False)  # (T+1,), beta[0] unused
    alpha: np.ndarray = field(repr=False)
    alpha_bar: np.ndarray = field(repr=False)  # alpha_bar[0] = 1
    sigma2: np.ndarray = field(repr=False)  # sigma2[1] = 0 by convention

    @property
    def beta_start(self):
        return float(self.beta[1])

    @property
    def beta_end(self):
        return float(self.beta[self.T])

    def check_t(self, t: int):
        if not 1 <= t <= self.T:
            raise ScheduleError(f"timestep {t} outside [1, {self.T}]")


def build_schedule(T: int = DEFAULT_T, beta_start=BETA_START, beta_end=BETA_END) -> NoiseSchedule:
    """Linear beta schedule from beta_start to beta_end over T steps."""
    if T < 2:
        raise ScheduleError(f"need T >= 2, got {T}")
    t = np.arange(T + 1, dtype=np.float64)
    beta = beta_start + (t - 1.0) / (T - 1.0) * (beta_end - beta_start)
    beta[0] = np.nan
    alpha = 1.0 - beta
    alpha_bar = np.empty(T + 1)
    alpha_bar[0] = 1.0
    alpha_bar[1:] = np.cumprod(alpha[1:])
    sigma2 = np.empty(T + 1)
    sigma2[0] = np.nan
    sigma2[1] = 0.0  # final reverse step is deterministic
    sigma2[2:] = (1.0 - alpha_bar[1:T]) / (1.0 - alpha_bar[2:]) * beta[2:]
    for a in (beta, alpha, alpha_bar, sigma2):
        a.setflags(write=False)
    return NoiseSchedule(T=T, beta=beta, alpha=alpha, alpha_bar=alpha_bar, sigma2=sigma2)


def forward_diffuse(sched: NoiseSchedule, x0, t: int, eps):
    """x_t = sqrt(alpha_bar_t) * x0 + sqrt(1 - alpha_bar_t) * eps.

    Works elementwise on numpy arrays or torch tensors of matching shape.
    """
    sched.check_t(t)
    if x0.shape != eps.shape:
        raise ScheduleError(f"shape mismatch: x0 {x0.shape} vs eps {eps.shape}")
    ab = float(sched.alpha_bar[t])
    return math.sqrt(ab) * x0 + math.sqrt(1.0 - ab) * eps


def posterior_coefficients(sched: NoiseSchedule, t: int):
    """(coef_x0, coef_xt, sigma) of the reverse-step Gaussian at step t."""
    sched.check_t(t)
    ab_t = float(sched.alpha_bar[t])
    ab_prev = float(sched.alpha_bar[t - 1])
    beta_t = float(sched.beta[t])
    alpha_t = float(sched.alpha[t])
    coef_x0 = math.sqrt(ab_prev) * beta_t / (1.0 - ab_t)
    coef_xt = math.sqrt(alpha_t) * (1.0 - ab_prev) / (1.0 - ab_t)
    sigma = math.sqrt(float(sched.sigma2[t]))
    return coef_x0, coef_xt, sigma


def posterior_step(sched: NoiseSchedule, x_t, x0_hat, t: int, noise):
    """One reverse step: posterior mean of x_{t-1} given (x_t, x0_hat) plus noise.

    At t = 1 the noise coefficient is exactly 0, so the output is the mean.
    """
    if x_t.shape != x0_hat.shape or x_t.shape != noise.shape:
        raise ScheduleError("x_t, x0_hat and noise must share a shape")
    coef_x0, coef_xt, sigma = posterior_coefficients(sched, t)
    mu = coef_x0 * x0_hat + coef_xt * x_t
    if sigma == 0.0:
        return mu
    return mu + sigma * noise
