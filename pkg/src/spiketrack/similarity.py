"""Response maps between an exemplar spike stream and a search spike stream.

All estimators correlate spike *magnitudes*, not binary indicators, so a
stream coded with threshold 0.5 carries half the potential per spike.

- ``pse``: correlate the time-summed potentials.
- ``tse``: sum of per-step correlations (coincident spikes only).
- ``wtse``: each search step ``t`` also responds to exemplar steps
  ``m`` with ``|t - m| <= tau``, weighted ``1 / (2|t - m| + 1)``; steps
  outside ``1..T`` contribute nothing.
- ``hse``: ``pse / T**2 + wtse * w_tau + bias``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .engine import SpikeTensor
from .errors import DimensionError, UsageError
from .tensor import xcorr_valid

MODES = ("PSE", "TSE", "WTSE", "HSE")
TEMPORAL_WEIGHTS = ("literal", "odd")


@dataclass(frozen=True)
class HseConfig:
    T: int = 20
    tau: int = 1
    bias: float = 0.0
    mode: str = "HSE"
    # "literal": 1 / (2T * max(2 tau, 1)); "odd": 1 / (2T * (2 tau + 1))
    temporal_weight: str = "literal"

    def __post_init__(self):
        if int(self.T) != self.T or self.T < 1:
            raise UsageError(f"T must be an integer >= 1, got {self.T}")
        if int(self.tau) != self.tau or self.tau < 0:
            raise UsageError(f"tau must be an integer >= 0, got {self.tau}")
        if self.mode not in MODES:
            raise UsageError(f"unknown similarity mode {self.mode!r}; valid: {', '.join(MODES)}")
        if self.temporal_weight not in TEMPORAL_WEIGHTS:
            raise UsageError(f"temporal_weight must be one of {TEMPORAL_WEIGHTS}, got {self.temporal_weight!r}")


@dataclass(frozen=True, eq=False)
class ResponseMap:
    values: np.ndarray
    mode: str

    def peak(self) -> tuple[int, int]:
        return argmax2d(self.values)


def argmax2d(values: np.ndarray) -> tuple[int, int]:
    """Row-major argmax: ties go to the smallest row, then column."""
    r, c = np.unravel_index(int(np.argmax(values)), values.shape)
    return int(r), int(c)


def _mags(train) -> np.ndarray:
    return train.magnitudes if isinstance(train, SpikeTensor) else np.asarray(train, dtype=np.float64)


def _check_pair(z: np.ndarray, x: np.ndarray):
    if z.ndim != 4 or x.ndim != 4:
        raise DimensionError(f"spike trains must be (T, C, H, W), got {z.shape} and {x.shape}")
    if z.shape[0] != x.shape[0]:
        raise UsageError(f"trains have different lengths: T={z.shape[0]} vs T={x.shape[0]}")
    if z.shape[1] != x.shape[1]:
        raise DimensionError(f"channel mismatch: exemplar {z.shape[1:]} vs search {x.shape[1:]}")
    if z.shape[2] > x.shape[2] or z.shape[3] > x.shape[3]:
        raise DimensionError(f"exemplar {z.shape[1:]} larger than search {x.shape[1:]}")


def _flat(a: np.ndarray) -> np.ndarray:
    return a.reshape((a.shape[0] * a.shape[1],) + a.shape[2:])


def pse(z_train, x_train) -> np.ndarray:
    z, x = _mags(z_train), _mags(x_train)
    _check_pair(z, x)
    return xcorr_valid(z.sum(axis=0), x.sum(axis=0))


def tse(z_train, x_train) -> np.ndarray:
    z, x = _mags(z_train), _mags(x_train)
    _check_pair(z, x)
    # Flattening (time, channel) into one axis turns the sum over t into one correlation.
    return xcorr_valid(_flat(z), _flat(x))


def temporal_smooth(z: np.ndarray, tau: int) -> np.ndarray:
    """``out[t] = sum_{|d| <= tau} z[t + d] / (2|d| + 1)``; zero outside ``0..T-1``."""
    T = z.shape[0]
    out = z / 1.0
    for d in range(1, tau + 1):
        if d >= T:
            break
        w = 1.0 / (2 * d + 1)
        out[:-d] += z[d:] * w
        out[d:] += z[:-d] * w
    return out


def wtse(z_train, x_train, tau: int = 1) -> np.ndarray:
    if int(tau) != tau or tau < 0:
        raise UsageError(f"tau must be an integer >= 0, got {tau}")
    z, x = _mags(z_train), _mags(x_train)
    _check_pair(z, x)
    return xcorr_valid(_flat(temporal_smooth(z, int(tau))), _flat(x))


def temporal_weight(T: int, tau: int, rule: str = "literal") -> float:
    if rule == "literal":
        return 1.0 / (2 * T * max(2 * tau, 1))
    if rule == "odd":
        return 1.0 / (2 * T * (2 * tau + 1))
    raise UsageError(f"unknown temporal weight rule {rule!r}")


def hse(z_train, x_train, cfg: HseConfig = HseConfig()) -> np.ndarray:
    z, x = _mags(z_train), _mags(x_train)
    _check_pair(z, x)
    T = z.shape[0]
    return pse(z, x) / T**2 + temporal_weight(T, cfg.tau, cfg.temporal_weight) * wtse(z, x, cfg.tau) + cfg.bias


def response(z_train, x_train, cfg: HseConfig = HseConfig()) -> ResponseMap:
    """Dispatch on ``cfg.mode``. Non-hybrid modes return the raw map plus bias."""
    if cfg.mode == "HSE":
        values = hse(z_train, x_train, cfg)
    elif cfg.mode == "PSE":
        values = pse(z_train, x_train) + cfg.bias
    elif cfg.mode == "TSE":
        values = tse(z_train, x_train) + cfg.bias
    else:
        values = wtse(z_train, x_train, cfg.tau) + cfg.bias
    return ResponseMap(values, cfg.mode)


def correlation_ops(z_train, x_train, cfg: HseConfig = HseConfig()) -> int:
    """Multiply-accumulates of the estimator, counted per exemplar event.

    Each nonzero exemplar entry taking part in one correlation term costs
    one op per response-map cell.
    """
    z, x = _mags(z_train), _mags(x_train)
    _check_pair(z, x)
    T = z.shape[0]
    cells = (x.shape[2] - z.shape[2] + 1) * (x.shape[3] - z.shape[3] + 1)
    nnz_t = np.array([np.count_nonzero(z[t]) for t in range(T)])
    pse_ops = np.count_nonzero(z.sum(axis=0)) * cells
    tau = cfg.tau if cfg.mode in ("WTSE", "HSE") else 0
    partners = np.array([min(T - 1, m + tau) - max(0, m - tau) + 1 for m in range(T)])
    temporal_ops = int((nnz_t * partners).sum()) * cells
    if cfg.mode == "PSE":
        return int(pse_ops)
    if cfg.mode in ("TSE", "WTSE"):
        return temporal_ops
    return int(pse_ops) + temporal_ops
