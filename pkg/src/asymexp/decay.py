"""Power-law (optionally log-corrected) decay fits over shells.

Model: |value(r)| ~ C r^(-p) (ln r)^q with q in {0, 1}.  Both q are fitted by
least squares in log space and the smaller residual wins.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DegenerateFit

UNDERFLOW = 1e-300


@dataclass(frozen=True)
class DecaySpec:
    """Predicted rate min{n, zeta} - 2, log-corrected exactly at zeta = n."""

    zeta: float
    n: int
    predicted_exponent: float = field(init=False)
    log_flag: bool = field(init=False)

    def __post_init__(self):
        if not self.zeta > 2:
            raise ValueError("zeta must exceed 2")
        object.__setattr__(self, "predicted_exponent", min(self.n, self.zeta) - 2.0)
        object.__setattr__(self, "log_flag", abs(self.zeta - self.n) < 1e-9)


@dataclass(frozen=True)
class DecayReport:
    p_hat: Optional[float]
    q_hat: Optional[int]
    r_range: tuple
    rss: Optional[float]
    samples: tuple
    rss_by_q: dict = field(default_factory=dict)
    p_by_q: dict = field(default_factory=dict)
    amplitude: Optional[float] = None
    offset_value: Optional[float] = None
    used_abs: bool = False
    below_floor: bool = False
    floor: Optional[float] = None

    def to_dict(self):
        return {
            "p_hat": self.p_hat,
            "q_hat": self.q_hat,
            "r_range": list(self.r_range),
            "rss": self.rss,
            "rss_by_q": {str(k): v for k, v in self.rss_by_q.items()},
            "p_by_q": {str(k): v for k, v in self.p_by_q.items()},
            "amplitude": self.amplitude,
            "offset_value": self.offset_value,
            "used_abs": self.used_abs,
            "below_floor": self.below_floor,
            "floor": self.floor,
        }


def _linfit(x, y):
    X = np.column_stack([np.ones_like(x), x])
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    return coef, float(resid @ resid)


def fit_decay(r, values, allow_log: bool = True, offset: bool = False,
              floor: Optional[float] = None, min_shells: int = 8,
              min_decades: float = 1.5) -> DecayReport:
    """Fit the decay exponent of ``values`` sampled at radii ``r``.

    With ``offset=True`` the samples are treated as w_inf + C r^-p (ln r)^q
    with an unknown constant w_inf; successive differences on the geometric
    grid cancel it (they keep the exponent of a pure power exactly) and the
    constant is recovered afterwards from the fitted decaying part.

    With ``floor`` given (a scalar or one value per shell), shells at or
    below it are discarded; if fewer than half survive, the report is
    flagged ``below_floor`` and carries no fit.
    Without ``floor``, underflow on more than half the shells raises
    :class:`DegenerateFit`.
    """
    r = np.asarray(r, dtype=float)
    v = np.asarray(values, dtype=float)
    if r.shape != v.shape or r.ndim != 1:
        raise ValueError("r and values must be 1-D arrays of equal length")
    order = np.argsort(r)
    r, v = r[order], v[order]
    if len(r) < min_shells:
        raise ValueError(f"need at least {min_shells} shells, got {len(r)}")
    if r[0] <= 0 or math.log10(r[-1] / r[0]) < min_decades - 1e-12:
        raise ValueError(f"shells must span at least {min_decades} decades")
    samples = tuple(zip(r.tolist(), v.tolist()))

    rr, vv = r, v
    if offset:
        ratio = r[1:] / r[:-1]
        if np.max(np.abs(ratio / ratio[0] - 1)) > 1e-9:
            raise ValueError("offset fits need geometrically spaced shells")
        rr, vv = r[:-1], v[:-1] - v[1:]

    mag = np.abs(vv)
    used_abs = bool(np.any(vv > 0) and np.any(vv < 0))
    if floor is None:
        if np.count_nonzero(mag < UNDERFLOW) > len(mag) / 2:
            raise DegenerateFit("values underflow on more than half the shells")
        keep = mag >= UNDERFLOW
    else:
        # a per-shell floor (array) follows the samples through the sort
        fl = np.broadcast_to(np.asarray(floor, dtype=float), r.shape)[order]
        if offset:
            fl = np.maximum(fl[:-1], fl[1:])
        floor = float(np.max(fl))
        keep = mag > fl
        if np.count_nonzero(keep) < max(3, (len(mag) + 1) // 2):
            return DecayReport(None, None, (float(r[0]), float(r[-1])), None, samples,
                               used_abs=used_abs, below_floor=True, floor=floor)
    rr, mag, vv = rr[keep], mag[keep], vv[keep]

    lr, lv = np.log(rr), np.log(mag)
    fits = {}
    coef0, rss0 = _linfit(lr, lv)
    fits[0] = (coef0, rss0)
    if allow_log and np.all(rr > 1.0):
        coef1, rss1 = _linfit(lr, lv - np.log(lr))
        fits[1] = (coef1, rss1)
    q = min(fits, key=lambda k: (fits[k][1], k))
    coef, rss = fits[q]
    p_hat = -float(coef[1])
    amp = float(np.exp(coef[0])) * float(np.sign(np.median(vv)) or 1.0)

    w_inf = None
    if offset:
        # differences scale a pure power by (1 - ratio^-p); undo that to
        # recover the amplitude of the decaying part, then the constant.
        ratio = r[1] / r[0]
        amp = amp / (1.0 - ratio ** (-p_hat)) if p_hat > 0 else amp
        decaying = amp * r ** (-p_hat) * (np.log(r) ** q if q else 1.0)
        w_inf = float(np.mean(v - decaying))

    return DecayReport(
        p_hat=p_hat,
        q_hat=q,
        r_range=(float(r[0]), float(r[-1])),
        rss=rss,
        samples=samples,
        rss_by_q={k: fits[k][1] for k in fits},
        p_by_q={k: -float(fits[k][0][1]) for k in fits},
        amplitude=amp,
        offset_value=w_inf,
        used_abs=used_abs,
        floor=floor,
    )
