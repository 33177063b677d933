"""Classical comparison models: HPP, Hawkes, RPP and self-correcting processes."""

from __future__ import annotations

import math

import numpy as np
from scipy.special import ndtr

from . import kernels as K
from .autodiff import inverse_softplus, sigmoid, softplus
from .events import EventSequence
from .kernels import KernelSpec
from .models import (
    _ROW_CHUNK, ModelError, NllResult, PointProcessModel, _context, _HawkesFamily, _initial_raw,
    _intervals, excitation_terms, register,
)

# RPP intensity is zero before a mark's first event; logs are floored here.
INTENSITY_FLOOR = 1e-10
_SQRT_2PI = math.sqrt(2.0 * math.pi)


@register
class HawkesModel(_HawkesFamily):
    """Static multivariate Hawkes process lambda_m(t) = mu_m + sum_j g(t - t_j)."""

    model_type = "hawkes"

    @classmethod
    def init(cls, num_marks: int, kernel="exp", mu=0.1, alpha=None, beta=1.0, full_beta=False,
             power_exponent: float = 2.0):
        spec = kernel if isinstance(kernel, KernelSpec) else KernelSpec.parse(kernel, power_exponent)
        return cls(*_initial_raw(num_marks, spec, mu, alpha, beta, full_beta), spec)

    @classmethod
    def from_values(cls, mu, A, beta, kernel="exp"):
        """Build from constrained values."""
        return cls(inverse_softplus(np.asarray(mu, float)), inverse_softplus(np.asarray(A, float)),
                   inverse_softplus(np.asarray(beta, float)), kernel)

    def parameters(self):
        return self._base_params()

    def _transform(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return np.tile(t, (self.num_marks, 1)), np.ones((self.num_marks, len(t)))

    def _max_rate(self, m, a, b):
        return 1.0

    def intensities(self, t, hist_times, hist_marks):
        hist_times = np.asarray(hist_times, dtype=float)
        hist_marks = np.asarray(hist_marks, dtype=np.int64)
        mu, A, beta = self.mu, self.A, self.beta
        out = mu.copy()
        j0 = int(np.searchsorted(hist_times, t - self._lag_cutoff(), side="left"))
        delta = t - hist_times[j0:]
        src = hist_marks[j0:]
        for m in range(self.num_marks):
            be = beta[m, src] if beta.ndim == 2 else beta[m]
            out[m] += float(np.sum(K.value(self.kernel, A[m, src], be, delta)))
        return out

    def _lag_cutoff(self) -> float:
        """Lag beyond which every kernel's remaining mass is negligible."""
        return K.negligible_lag(self.kernel, self.A, self.beta if self.beta.ndim == 2 else self.beta[:, None])

    def batch_terms(self, seq, batch, include_tail, grad):
        times, marks, n_hist = _context(seq)
        tp = np.concatenate([times, [seq.start, seq.horizon]])
        F, f = self._transform(tp)
        loglam, comp, adj = excitation_terms(self.kernel, self.mu, self.A, self.beta, times, marks, n_hist,
                                             seq.start, seq.horizon, F, f, batch, include_tail, grad)
        if not grad:
            return loglam, comp, None
        return loglam, comp, {
            "mu_raw": adj["mu"] * sigmoid(self.mu_raw),
            "A_raw": adj["A"] * sigmoid(self.A_raw),
            "beta_raw": adj["beta"] * sigmoid(self.beta_raw),
        }

    def nll(self, seq: EventSequence) -> NllResult:
        """Direct evaluation: summed log-intensities and one compensator over the whole window."""
        times, marks, n_hist = _context(seq)
        mu, A, beta = self.mu, self.A, self.beta
        full = beta.ndim == 2
        loglam = np.empty(len(seq))
        scored = np.arange(n_hist, len(times))
        cutoff = self._lag_cutoff()
        for c0 in range(0, len(scored), _ROW_CHUNK):
            rows = scored[c0:c0 + _ROW_CHUNK]
            width = int(rows.max())
            first = int(np.searchsorted(times, times[rows[0]] - cutoff, side="left"))
            cols = np.arange(min(first, width), width)
            mask = cols[None, :] < rows[:, None]
            src = marks[cols]
            tgt = marks[rows]
            delta = np.maximum(times[rows][:, None] - times[cols][None, :], 0.0) * mask
            be = beta[tgt[:, None], src[None, :]] if full else beta[tgt][:, None]
            g = K.value(self.kernel, A[tgt[:, None], src[None, :]], be, delta) * mask
            lam = mu[tgt] + g.sum(axis=1)
            if np.any(~(lam > 0)):
                raise ModelError("non-positive intensity")
            loglam[c0:c0 + len(rows)] = np.log(lam)
        comp = float(mu.sum() * (seq.horizon - seq.start))
        if len(times):
            lo = np.maximum(seq.start - times, 0.0)
            hi = seq.horizon - times
            for m in range(self.num_marks):
                be = beta[m, marks] if full else beta[m]
                comp += float(np.sum(K.interval_integral(self.kernel, A[m, marks], be, lo, hi)))
        total = float(-loglam.sum() + comp)
        return NllResult(total, len(seq), loglam, comp)

    @classmethod
    def from_dict(cls, d):
        p = d["params"]
        model = cls(p["mu_raw"], p["A_raw"], p["beta_raw"], KernelSpec.from_dict(d["meta"]["kernel"]))
        model.meta = {k: v for k, v in d["meta"].items() if k not in ("M", "kernel")}
        return model


class _CountingModel(PointProcessModel):
    """Models whose intensity depends on t and the own-mark count N^m(t) only."""

    def _rates(self, t, m, N):
        """(log lambda, {param: d log lambda}) for arrays of equal length."""
        raise NotImplementedError

    def _integrals(self, a, b, m, N):
        """(integral over (a, b], {param: d integral}) with constant counts N."""
        raise NotImplementedError

    def batch_terms(self, seq, batch, include_tail, grad):
        times, marks, n_hist = _context(seq)
        M = self.num_marks
        batch = np.asarray(batch, dtype=np.int64)
        onehot = np.zeros((len(times) + 1, M))
        onehot[np.arange(1, len(times) + 1), marks] = 1.0
        before = np.cumsum(onehot, axis=0)  # before[k, m] = #{j < k : m_j = m}
        bm = marks[batch]
        loglam, dlog = self._rates(times[batch], bm, before[batch, bm])
        tp = np.concatenate([times, [seq.start, seq.horizon]])
        lo, hi, nsrc = _intervals(times, n_hist, seq.start, batch, include_tail)
        R = len(lo)
        a = np.repeat(tp[lo], M)
        b = np.repeat(tp[hi], M)
        mm = np.tile(np.arange(M), R)
        N = before[nsrc].reshape(-1)
        vals, dint = self._integrals(a, b, mm, N)
        comp = vals.reshape(R, M)
        if not grad:
            return loglam, comp, None
        grads = {}
        for name, arr in self.parameters().items():
            g = -np.bincount(bm, weights=dlog[name], minlength=M) + np.bincount(mm, weights=dint[name], minlength=M)
            grads[name] = g * self._raw_jacobian(name)
        return loglam, comp, grads

    def _raw_jacobian(self, name):
        return 1.0

    def _counts_at(self, times, marks, t):
        keep = np.asarray(times) < t
        return np.bincount(np.asarray(marks, dtype=np.int64)[keep], minlength=self.num_marks).astype(float)

    def intensities(self, t, hist_times, hist_marks):
        N = self._counts_at(hist_times, hist_marks, t)
        m = np.arange(self.num_marks)
        loglam, _ = self._rates(np.full(self.num_marks, float(t)), m, N)
        return np.exp(loglam)

    def predict_counts_from(self, times, marks, boundaries):
        times = np.asarray(times, dtype=float)
        marks = np.asarray(marks, dtype=np.int64)
        M = self.num_marks
        S = len(boundaries) - 1
        onehot = np.zeros((len(times) + 1, M))
        onehot[np.arange(1, len(times) + 1), marks] = 1.0
        before = np.cumsum(onehot, axis=0)
        nsrc = np.searchsorted(times, boundaries[:-1], side="right")
        a = np.repeat(boundaries[:-1], M)
        b = np.repeat(boundaries[1:], M)
        vals, _ = self._integrals(a, b, np.tile(np.arange(M), S), before[nsrc].reshape(-1))
        return vals.reshape(S, M)

    def nll(self, seq):
        res = super().nll(seq)
        floored = getattr(self, "_last_floored", 0)
        if floored:
            res.notes["floored_events"] = floored
        return res

    def _meta(self):
        return {"M": self.num_marks, **self.meta}

    @classmethod
    def from_dict(cls, d):
        model = cls(**{k: np.asarray(v, dtype=float) for k, v in d["params"].items()})
        model.meta = {k: v for k, v in d["meta"].items() if k != "M"}
        return model


@register
class HppModel(_CountingModel):
    """Homogeneous Poisson process with one constant rate per mark."""

    model_type = "hpp"

    def __init__(self, rate_raw):
        rate_raw = np.array(rate_raw, dtype=float)
        super().__init__(len(rate_raw))
        self.rate_raw = rate_raw

    @classmethod
    def from_rates(cls, rates):
        return cls(inverse_softplus(np.atleast_1d(np.asarray(rates, dtype=float))))

    @property
    def rates(self):
        return softplus(self.rate_raw)

    def parameters(self):
        return {"rate_raw": self.rate_raw}

    def _raw_jacobian(self, name):
        return sigmoid(self.rate_raw)

    def _rates(self, t, m, N):
        r = self.rates[m]
        return np.log(r), {"rate_raw": 1.0 / r}

    def _integrals(self, a, b, m, N):
        d = b - a
        return self.rates[m] * d, {"rate_raw": d}

    def intensity_upper_bound(self, t, t_end, hist_times, hist_marks):
        return float(self.rates.sum())


@register
class SelfCorrectingModel(_CountingModel):
    """lambda_m(t) = exp(alpha_m + beta_m (t - rho_m N^m(t)))."""

    model_type = "selfcorrecting"

    def __init__(self, alpha, beta_raw, rho_raw):
        alpha = np.array(alpha, dtype=float)
        super().__init__(len(alpha))
        self.alpha = alpha
        self.beta_raw = np.array(beta_raw, dtype=float)
        self.rho_raw = np.array(rho_raw, dtype=float)

    @classmethod
    def from_values(cls, alpha, beta, rho):
        return cls(np.atleast_1d(alpha), inverse_softplus(np.atleast_1d(beta)), inverse_softplus(np.atleast_1d(rho)))

    def parameters(self):
        return {"alpha": self.alpha, "beta_raw": self.beta_raw, "rho_raw": self.rho_raw}

    def _raw_jacobian(self, name):
        return {"alpha": 1.0, "beta_raw": sigmoid(self.beta_raw), "rho_raw": sigmoid(self.rho_raw)}[name]

    def _rates(self, t, m, N):
        al, be, rho = self.alpha[m], softplus(self.beta_raw)[m], softplus(self.rho_raw)[m]
        return al + be * (t - rho * N), {"alpha": np.ones_like(t), "beta_raw": t - rho * N, "rho_raw": -be * N}

    def _integrals(self, a, b, m, N):
        al, be, rho = self.alpha[m], softplus(self.beta_raw)[m], softplus(self.rho_raw)[m]
        d = b - a
        # exp(u) (1 - exp(-beta d)) / beta, evaluated from the upper end to avoid overflow
        u = al + be * (b - rho * N)
        eu = np.exp(u)
        E = -np.expm1(-be * d)
        I = eu * E / be
        dbeta = I * (b - rho * N) + eu * d * np.exp(-be * d) / be - I / be
        return I, {"alpha": I, "beta_raw": dbeta, "rho_raw": -be * N * I}

    def intensity_upper_bound(self, t, t_end, hist_times, hist_marks):
        be, rho = softplus(self.beta_raw), softplus(self.rho_raw)
        N = self._counts_at(hist_times, hist_marks, np.inf)
        return float(np.sum(np.exp(self.alpha + be * (t_end - rho * N))))

    def max_lookahead(self):
        # the bound then exceeds the current rate by at most a factor e
        return float(1.0 / np.max(softplus(self.beta_raw)))


@register
class RppModel(_CountingModel):
    """Reinforced Poisson process lambda_m(t) = gamma_m(t) N^m(t) with log-normal relaxation gamma_m."""

    model_type = "rpp"

    def __init__(self, alpha, beta_raw):
        alpha = np.array(alpha, dtype=float)
        super().__init__(len(alpha))
        self.alpha = alpha
        self.beta_raw = np.array(beta_raw, dtype=float)
        self._last_floored = 0

    @classmethod
    def from_values(cls, alpha, beta):
        return cls(np.atleast_1d(alpha), inverse_softplus(np.atleast_1d(beta)))

    def parameters(self):
        return {"alpha": self.alpha, "beta_raw": self.beta_raw}

    def _raw_jacobian(self, name):
        return 1.0 if name == "alpha" else sigmoid(self.beta_raw)

    def relaxation(self, m, t):
        t = np.asarray(t, dtype=float)
        al, be = self.alpha[m], softplus(self.beta_raw)[m]
        with np.errstate(divide="ignore", invalid="ignore"):
            z = (np.log(t) - al) / be
            out = np.exp(-0.5 * z * z) / (_SQRT_2PI * be * t)
        return np.where(t > 0, out, 0.0)

    def intensities(self, t, hist_times, hist_marks):
        """Unfloored rates; the floor applies only inside the log-likelihood."""
        N = self._counts_at(hist_times, hist_marks, t)
        return np.array([N[m] * float(self.relaxation(m, t)) for m in range(self.num_marks)])

    def _rates(self, t, m, N):
        al, be = self.alpha[m], softplus(self.beta_raw)[m]
        with np.errstate(divide="ignore", invalid="ignore"):
            z = (np.log(t) - al) / be
            log_rate = np.log(N) - 0.5 * z * z - np.log(_SQRT_2PI * be * t)
        ok = (N > 0) & (t > 0) & (log_rate > math.log(INTENSITY_FLOOR))
        self._last_floored = int(np.sum(~ok))
        log_rate = np.where(ok, log_rate, math.log(INTENSITY_FLOOR))
        z = np.where(ok, z, 0.0)
        return log_rate, {"alpha": np.where(ok, z / be, 0.0), "beta_raw": np.where(ok, (z * z - 1.0) / be, 0.0)}

    def _integrals(self, a, b, m, N):
        al, be = self.alpha[m], softplus(self.beta_raw)[m]
        with np.errstate(divide="ignore", invalid="ignore"):
            za = np.where(a > 0, (np.log(np.where(a > 0, a, 1.0)) - al) / be, -np.inf)
            zb = np.where(b > 0, (np.log(np.where(b > 0, b, 1.0)) - al) / be, -np.inf)
        # upper-tail form when both ends lie above the median
        upper = za > 0
        mass = np.where(upper, ndtr(-za) - ndtr(-zb), ndtr(zb) - ndtr(za))
        za = np.where(np.isfinite(za), za, -60.0)  # density and z*density vanish at t = 0
        zb = np.where(np.isfinite(zb), zb, -60.0)
        pa = np.exp(-0.5 * za * za) / _SQRT_2PI
        pb = np.exp(-0.5 * zb * zb) / _SQRT_2PI
        zpa, zpb = za * pa, zb * pb
        return N * mass, {"alpha": N * (pa - pb) / be, "beta_raw": N * (zpa - zpb) / be}

    def intensity_upper_bound(self, t, t_end, hist_times, hist_marks):
        N = self._counts_at(hist_times, hist_marks, np.inf)
        be = softplus(self.beta_raw)
        mode = np.exp(self.alpha - be * be)
        peak_t = np.clip(mode, t, t_end)
        peak = np.array([self.relaxation(m, peak_t[m]) for m in range(self.num_marks)])
        return float(np.sum(N * peak))


MODEL_TYPES = ("dhp", "hawkes", "hpp", "rpp", "selfcorrecting")
