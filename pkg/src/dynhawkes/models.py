"""Intensity models sharing one likelihood interface, and the dynamic Hawkes model.

Every model scores an :class:`EventSequence` window [start, horizon]. The
negative log-likelihood is decomposed per scored event i as

    -log lambda_{m_i}(t_i) + sum_m Lambda_m(t_{i-1}, t_i)

with the first interval starting at the window start and one extra tail
interval (t_last, horizon]. Any partition of the scored events into batches
therefore sums exactly to the full NLL, which is what mini-batch training uses.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np

from . import kernels as K
from .autodiff import inverse_softplus, sigmoid, softplus
from .dynamics import ConstantDynamics, Dynamics, MixtureIntegralDynamics, analytic_dynamics, dynamics_from_dict
from .events import EventSequence
from .kernels import KernelFamily, KernelSpec

_ROW_CHUNK = 256
_PAIR_CHUNK = 1 << 20


class ModelError(RuntimeError):
    pass


@dataclass
class NllResult:
    total: float
    num_events: int
    log_intensity: np.ndarray
    compensator: float
    notes: dict = field(default_factory=dict)

    @property
    def per_event(self) -> float:
        return self.total / self.num_events if self.num_events else float("nan")

    def to_dict(self) -> dict:
        return {"total": self.total, "per_event": self.per_event, "num_events": self.num_events,
                "compensator": self.compensator, **self.notes}


def _context(seq: EventSequence):
    """(times, marks, number of history events) for the window's conditioning context."""
    return seq.all_times, seq.all_marks, len(seq.history_times)


def _intervals(times, n_hist: int, start: float, batch, include_tail: bool):
    """Positions of (lower, upper) interval ends and source counts for each batch term.

    Positions index into times extended with [start, end] at K and K+1.
    """
    K_ = len(times)
    batch = np.asarray(batch, dtype=np.int64)
    lo = np.where(batch > n_hist, batch - 1, K_)
    hi = batch.copy()
    nsrc = batch.copy()
    if include_tail:
        lo = np.append(lo, K_ - 1 if K_ > n_hist else K_)
        hi = np.append(hi, K_ + 1)
        nsrc = np.append(nsrc, K_)
    return lo, hi, nsrc


class PointProcessModel:
    """Base class: raw parameter dict, likelihood terms, prediction, checkpoints."""

    model_type = "base"

    def __init__(self, num_marks: int):
        self.num_marks = num_marks
        self.meta: dict = {}

    # -- parameters -----------------------------------------------------------------
    def parameters(self) -> dict:
        """Raw (unconstrained) parameter arrays; mutating them updates the model."""
        raise NotImplementedError

    def copy(self):
        return copy.deepcopy(self)

    def get_flat(self) -> np.ndarray:
        return np.concatenate([np.ravel(v) for v in self.parameters().values()])

    def set_flat(self, vec) -> None:
        pos = 0
        for arr in self.parameters().values():
            n = arr.size
            arr[...] = np.reshape(vec[pos:pos + n], arr.shape)
            pos += n

    # -- intensities ------------------------------------------------------------------
    def intensities(self, t: float, hist_times, hist_marks) -> np.ndarray:
        """lambda_m(t) for every m given events strictly before t."""
        raise NotImplementedError

    def intensity(self, m: int, t: float, hist_times=(), hist_marks=()) -> float:
        hist_times = np.asarray(hist_times, dtype=float)
        hist_marks = np.asarray(hist_marks, dtype=np.int64)
        keep = hist_times < t
        return float(self.intensities(t, hist_times[keep], hist_marks[keep])[m])

    # -- likelihood -------------------------------------------------------------------
    def batch_terms(self, seq: EventSequence, batch, include_tail: bool, grad: bool):
        """(log-intensity array, compensator matrix (R, M), grads or None) for a batch.

        ``batch`` holds indices into ``seq.all_times`` of scored events.
        """
        raise NotImplementedError

    def _scored(self, seq):
        n_hist = len(seq.history_times)
        return np.arange(n_hist, n_hist + len(seq.times))

    def loss_and_grad(self, seq: EventSequence, batch=None, include_tail: bool = True):
        """Summed NLL terms of ``batch`` (default: every scored event) and raw gradients."""
        if batch is None:
            batch = self._scored(seq)
        loglam, comp, grads = self.batch_terms(seq, batch, include_tail, grad=True)
        return float(-loglam.sum() + comp.sum()), grads

    def nll(self, seq: EventSequence) -> NllResult:
        loglam, comp, _ = self.batch_terms(seq, self._scored(seq), True, grad=False)
        total = float(-loglam.sum() + comp.sum())
        return NllResult(total, len(seq), loglam, float(comp.sum()))

    def interval_compensators(self, seq: EventSequence) -> np.ndarray:
        """Per-mark compensator over each scored interval; shape (n + 1, M), tail last."""
        _, comp, _ = self.batch_terms(seq, self._scored(seq), True, grad=False)
        return comp

    def compensator_increment(self, m: int, a: float, b: float, hist_times=(), hist_marks=()) -> float:
        """Integral of lambda_m over (a, b] given history at or before a and no events inside."""
        if a > b:
            raise ValueError(f"interval start {a} exceeds end {b}")
        return float(self.predict_counts_from(np.asarray(hist_times, float), np.asarray(hist_marks, np.int64),
                                              np.array([a, b]))[0, m])

    def predict_counts_from(self, times, marks, boundaries) -> np.ndarray:
        raise NotImplementedError

    def predict_counts(self, seq: EventSequence, boundaries) -> np.ndarray:
        """Expected counts in (t_s, t_{s+1}] conditioned on true events at or before t_s."""
        boundaries = np.asarray(boundaries, dtype=float)
        if len(boundaries) < 2 or np.any(np.diff(boundaries) <= 0):
            raise ValueError("boundaries must be strictly increasing with at least two entries")
        return self.predict_counts_from(seq.all_times, seq.all_marks, boundaries)

    # -- simulation support -------------------------------------------------------------
    def intensity_upper_bound(self, t: float, t_end: float, hist_times, hist_marks) -> float:
        """Bound on sum_m lambda_m over (t, t_end] with no new events."""
        raise NotImplementedError

    def max_lookahead(self) -> float:
        """Longest window over which ``intensity_upper_bound`` stays reasonably tight."""
        return np.inf

    # -- checkpoint -----------------------------------------------------------------------
    def to_dict(self) -> dict:
        return {"model_type": self.model_type, "meta": self._meta(),
                "params": {k: np.asarray(v).tolist() for k, v in self.parameters().items()}}

    def _meta(self) -> dict:
        return {"M": self.num_marks, **self.meta}


# -- Hawkes-family likelihood ---------------------------------------------------------------


def _gather_decay(beta, m, src_marks):
    return beta[m, src_marks] if beta.ndim == 2 else beta[m]


def _scatter(target, m, src_marks, values, M):
    if target.ndim == 2:
        target[m] += np.bincount(src_marks, weights=values, minlength=M)
    else:
        target[m] += values.sum()


def _ragged_pairs(starts, ends):
    """Yield (r0, r1, row ids, column ids) covering columns [starts[r], ends[r]) for rows r0..r1-1.

    Rows are grouped so each chunk holds about ``_PAIR_CHUNK`` pairs; a row is never split.
    """
    lengths = np.maximum(np.asarray(ends) - np.asarray(starts), 0)
    csum = np.cumsum(lengths)
    R = len(lengths)
    r0 = 0
    while r0 < R:
        before = csum[r0 - 1] if r0 else 0
        r1 = min(max(int(np.searchsorted(csum, before + _PAIR_CHUNK, side="right")), r0 + 1), R)
        ln = lengths[r0:r1]
        rid = np.repeat(np.arange(r1 - r0), ln)
        cid = np.arange(int(ln.sum())) - np.repeat(np.cumsum(ln) - ln, ln) + np.repeat(starts[r0:r1], ln)
        yield r0, r1, rid, cid
        r0 = r1


def _first_relevant(F_sources, F_query, cutoff):
    """Index of the first source whose transformed lag to each query is within ``cutoff``."""
    if not np.isfinite(cutoff) or not len(F_sources):
        return np.zeros(np.shape(F_query), dtype=np.int64)
    return np.searchsorted(np.maximum.accumulate(F_sources), np.asarray(F_query) - cutoff, side="left")


def excitation_terms(kernel: KernelSpec, mu, A, beta, times, marks, n_hist, start, end, F, f,
                     batch, include_tail=True, grad=False):
    """Log-intensities and interval compensators for intensities

        lambda_m(t) = mu_m + f_m(t) sum_{j<i} g(alpha_{m,m_j}, beta_m; F_m(t) - F_m(t_j)).

    ``F``/``f`` have shape (M, K + 2) over [event times..., start, end]. With
    ``grad`` the adjoints with respect to mu, A, beta, F and f are returned.
    Source events whose transformed lag exceeds the kernel's negligible lag
    (remaining tail mass below 1e-16 of the total) are skipped.
    """
    M = len(mu)
    Kn = len(times)
    tp = np.concatenate([times, [start, end]])
    batch = np.asarray(batch, dtype=np.int64)
    full = np.ndim(beta) == 2
    loglam = np.empty(len(batch))
    lo, hi, nsrc = _intervals(times, n_hist, start, batch, include_tail)
    comp = np.empty((len(lo), M))
    if grad:
        g_mu, g_A, g_beta = np.zeros(M), np.zeros((M, M)), np.zeros(np.shape(beta))
        g_F, g_f = np.zeros_like(F), np.zeros_like(f)
    batch_marks = marks[batch]
    for m in range(M):
        cutoff = K.negligible_lag(kernel, A[m], beta[m])
        Fm = F[m]
        # log-intensity of batch events with mark m
        sel = np.flatnonzero(batch_marks == m)
        rows_all = batch[sel]
        starts = _first_relevant(Fm[:Kn], Fm[rows_all], cutoff)
        for r0, r1, rid, cid in _ragged_pairs(starts, rows_all):
            rows = rows_all[r0:r1]
            src = marks[cid]
            X = np.maximum(Fm[rows[rid]] - Fm[cid], 0.0)
            al = A[m, src]
            be = beta[m, src] if full else beta[m]
            if grad:
                g, gx, ga, gb = K.value_grad(kernel, al, be, X)
            else:
                g = K.value(kernel, al, be, X)
            S = np.bincount(rid, weights=g, minlength=r1 - r0)
            fr = f[m, rows]
            lam = mu[m] + fr * S
            if np.any(~(lam > 0)):
                raise ModelError(f"non-positive intensity for mark {m}; check parameter constraints")
            loglam[sel[r0:r1]] = np.log(lam)
            if grad:
                w = -1.0 / lam
                g_mu[m] += w.sum()
                np.add.at(g_f[m], rows, w * S)
                coef = (w * fr)[rid]
                GX = coef * gx
                np.add.at(g_F[m], rows, np.bincount(rid, weights=GX, minlength=r1 - r0))
                g_F[m] -= np.bincount(cid, weights=GX, minlength=len(Fm))
                g_A[m] += np.bincount(src, weights=coef * ga, minlength=M)
                _scatter(g_beta, m, src, coef * gb, M)
        # compensator of mark m on every interval of the batch
        comp[:, m] = mu[m] * (tp[hi] - tp[lo])
        if grad:
            g_mu[m] += (tp[hi] - tp[lo]).sum()
        starts = np.minimum(_first_relevant(Fm[:Kn], Fm[lo], cutoff), nsrc)
        for r0, r1, rid, cid in _ragged_pairs(starts, nsrc):
            if not len(cid):
                continue
            r_lo, r_hi = lo[r0:r1][rid], hi[r0:r1][rid]
            src = marks[cid]
            L = np.maximum(Fm[r_lo] - Fm[cid], 0.0)
            U = np.maximum(Fm[r_hi] - Fm[cid], L)
            al = A[m, src]
            be = beta[m, src] if full else beta[m]
            I = K.interval_integral(kernel, al, be, L, U)
            comp[r0:r1, m] += np.bincount(rid, weights=I, minlength=r1 - r0)
            if grad:
                gU = K.value(kernel, al, be, U)
                gL = -K.value(kernel, al, be, L)
                np.add.at(g_F[m], r_hi, gU)
                np.add.at(g_F[m], r_lo, gL)
                g_F[m] -= np.bincount(cid, weights=gU + gL, minlength=len(Fm))
                da, db = K.interval_integral_grad(kernel, al, be, L, U)
                g_A[m] += np.bincount(src, weights=da, minlength=M)
                _scatter(g_beta, m, src, db, M)
    if not grad:
        return loglam, comp, None
    return loglam, comp, {"mu": g_mu, "A": g_A, "beta": g_beta, "F": g_F, "f": g_f}


def _relevant_excitation(kernel, A, beta, m, F_src, F_now, src_marks):
    """(lags, alpha, beta) of sources within the negligible lag of ``F_now``."""
    j0 = int(_first_relevant(F_src, F_now, K.negligible_lag(kernel, A[m], beta[m])))
    x = np.maximum(F_now - F_src[j0:], 0.0)
    src = src_marks[j0:]
    return x, A[m, src], _gather_decay(beta, m, src)


class _HawkesFamily(PointProcessModel):
    """Shared parameters (mu, A, beta) and transformed-time machinery."""

    def __init__(self, mu_raw, A_raw, beta_raw, kernel: KernelSpec):
        mu_raw = np.array(mu_raw, dtype=float)
        super().__init__(len(mu_raw))
        self.mu_raw = mu_raw
        self.A_raw = np.array(A_raw, dtype=float).reshape(self.num_marks, self.num_marks)
        self.beta_raw = np.array(beta_raw, dtype=float)
        if self.beta_raw.shape not in ((self.num_marks,), (self.num_marks, self.num_marks)):
            raise ValueError("beta must have shape (M,) or (M, M)")
        self.kernel = kernel if isinstance(kernel, KernelSpec) else KernelSpec.parse(kernel)

    @property
    def mu(self):
        return softplus(self.mu_raw)

    @property
    def A(self):
        return softplus(self.A_raw)

    @property
    def beta(self):
        return softplus(self.beta_raw)

    def _base_params(self):
        return {"mu_raw": self.mu_raw, "A_raw": self.A_raw, "beta_raw": self.beta_raw}

    def branching_matrix(self, f_max: float = 1.0) -> np.ndarray:
        """Expected direct offspring in m per event in m' (kernel mass is invariant under time change)."""
        beta = self.beta if self.beta.ndim == 2 else np.broadcast_to(self.beta[:, None], (self.num_marks,) * 2)
        return K.total_mass(self.kernel, self.A, beta)

    # hooks implemented by subclasses
    def _transform(self, t):
        """(F, f) with shape (M, len(t))."""
        raise NotImplementedError

    def _max_rate(self, m, a, b) -> float:
        raise NotImplementedError

    def intensities(self, t, hist_times, hist_marks):
        hist_times = np.asarray(hist_times, dtype=float)
        hist_marks = np.asarray(hist_marks, dtype=np.int64)
        mu, A, beta = self.mu, self.A, self.beta
        out = mu.copy()
        if not len(hist_times):
            return out
        F, f = self._transform(np.append(hist_times, t))
        for m in range(self.num_marks):
            x, al, be = _relevant_excitation(self.kernel, A, beta, m, F[m, :-1], F[m, -1], hist_marks)
            out[m] += f[m, -1] * float(np.sum(K.value(self.kernel, al, be, x)))
        return out

    def predict_counts_from(self, times, marks, boundaries):
        times = np.asarray(times, dtype=float)
        marks = np.asarray(marks, dtype=np.int64)
        boundaries = np.asarray(boundaries, dtype=float)
        mu, A, beta = self.mu, self.A, self.beta
        full = beta.ndim == 2
        out = mu[None, :] * np.diff(boundaries)[:, None]
        if not len(times):
            return out
        Fb, _ = self._transform(boundaries)
        Fe, _ = self._transform(times)
        nsrc = np.searchsorted(times, boundaries[:-1], side="right")
        for m in range(self.num_marks):
            cutoff = K.negligible_lag(self.kernel, A[m], beta[m])
            starts = np.minimum(_first_relevant(Fe[m], Fb[m, :-1], cutoff), nsrc)
            for r0, r1, rid, cid in _ragged_pairs(starts, nsrc):
                if not len(cid):
                    continue
                r = np.arange(r0, r1)[rid]
                src = marks[cid]
                L = np.maximum(Fb[m, r] - Fe[m, cid], 0.0)
                U = np.maximum(Fb[m, r + 1] - Fe[m, cid], L)
                be = beta[m, src] if full else beta[m]
                I = K.interval_integral(self.kernel, A[m, src], be, L, U)
                out[r0:r1, m] += np.bincount(rid, weights=I, minlength=r1 - r0)
        return out

    def intensity_upper_bound(self, t, t_end, hist_times, hist_marks):
        """mu plus the excitation at t scaled by the largest f on (t, t_end].

        Excitation only decays as transformed lags grow, except for RAY before
        its peak, where each term is replaced by the kernel maximum.
        """
        hist_times = np.asarray(hist_times, dtype=float)
        hist_marks = np.asarray(hist_marks, dtype=np.int64)
        mu, A, beta = self.mu, self.A, self.beta
        total = float(mu.sum())
        if not len(hist_times):
            return total
        F, _ = self._transform(np.append(hist_times, t))
        for m in range(self.num_marks):
            x, al, be = _relevant_excitation(self.kernel, A, beta, m, F[m, :-1], F[m, -1], hist_marks)
            g = K.value(self.kernel, al, be, x)
            if self.kernel.family is KernelFamily.RAY:
                x_peak, g_peak = K.peak(self.kernel, al, be)
                g = np.where(x <= x_peak, g_peak, g)
            total += self._max_rate(m, t, t_end) * float(g.sum())
        return total

    def _meta(self):
        return {"M": self.num_marks, "kernel": self.kernel.to_dict(), **self.meta}


class DhpModel(_HawkesFamily):
    """Hawkes process whose kernel runs on the transformed clock F_m and is scaled by f_m(t)."""

    model_type = "dhp"

    def __init__(self, mu_raw, A_raw, beta_raw, kernel: KernelSpec, dynamics: Dynamics):
        super().__init__(mu_raw, A_raw, beta_raw, kernel)
        if dynamics.num_marks != self.num_marks:
            raise ValueError("dynamics and model disagree on the number of marks")
        self.dynamics = dynamics
        self.frozen: set = set()

    @classmethod
    def init(cls, num_marks: int, kernel="pwl", num_components: int = 3, num_layers: int = 2,
             hidden: int = 8, t_scale: float = 1.0, seed=0, mu=0.1, alpha=None, beta=1.0,
             full_beta: bool = False, per_dimension: bool = False, power_exponent: float = 2.0):
        spec = kernel if isinstance(kernel, KernelSpec) else KernelSpec.parse(kernel, power_exponent)
        mu_raw, A_raw, beta_raw = _initial_raw(num_marks, spec, mu, alpha, beta, full_beta)
        dyn = MixtureIntegralDynamics.init(num_marks, num_components, num_layers, hidden, t_scale, seed,
                                           per_dimension=per_dimension)
        return cls(mu_raw, A_raw, beta_raw, spec, dyn)

    def parameters(self):
        params = self._base_params()
        params.update(self.dynamics.parameters())
        return {k: v for k, v in params.items() if k not in self.frozen}

    def freeze_dynamics(self):
        self.frozen |= set(self.dynamics.parameters())
        return self

    def _transform(self, t):
        return self.dynamics.evaluate_all(np.atleast_1d(np.asarray(t, dtype=float)))

    def _max_rate(self, m, a, b):
        return self.dynamics.max_derivative(m, a, b)

    def transformed_interval(self, m: int, t: float, t_j: float) -> float:
        if t_j > t:
            raise ValueError(f"source time {t_j} is after query time {t}")
        F, _ = self.dynamics.evaluate(m, np.array([t_j, t]))
        return float(max(F[1] - F[0], 0.0))

    def batch_terms(self, seq, batch, include_tail, grad):
        times, marks, n_hist = _context(seq)
        tp = np.concatenate([times, [seq.start, seq.horizon]])
        mu, A, beta = self.mu, self.A, self.beta
        F, f = self.dynamics.evaluate_all(tp)
        loglam, comp, adj = excitation_terms(self.kernel, mu, A, beta, times, marks, n_hist, seq.start,
                                             seq.horizon, F, f, batch, include_tail, grad)
        if not grad:
            return loglam, comp, None
        grads = {
            "mu_raw": adj["mu"] * sigmoid(self.mu_raw),
            "A_raw": adj["A"] * sigmoid(self.A_raw),
            "beta_raw": adj["beta"] * sigmoid(self.beta_raw),
        }
        if not self.frozen >= set(self.dynamics.parameters()):
            # record the network only where the batch has a non-zero adjoint
            used = np.flatnonzero(np.any(adj["F"] != 0, axis=0) | np.any(adj["f"] != 0, axis=0))
            if len(used):
                _, _, vjp = self.dynamics.values_and_vjp(tp[used])
                grads.update(vjp(adj["F"][:, used], adj["f"][:, used]))
            else:
                grads.update({k: np.zeros_like(v) for k, v in self.dynamics.parameters().items()})
        return loglam, comp, {k: v for k, v in grads.items() if k not in self.frozen}

    def to_dict(self):
        d = super().to_dict()
        params = {k: np.asarray(v).tolist() for k, v in self._base_params().items()}
        params["dynamics"] = self.dynamics.to_dict()
        d["params"] = params
        meta = d["meta"]
        if isinstance(self.dynamics, MixtureIntegralDynamics):
            meta.update(C=self.dynamics.num_components, L=self.dynamics.num_layers, H=self.dynamics.hidden)
        return d

    @classmethod
    def from_dict(cls, d):
        p = d["params"]
        spec = KernelSpec.from_dict(d["meta"]["kernel"])
        dyn = dynamics_from_dict(p["dynamics"], len(p["mu_raw"]))
        model = cls(p["mu_raw"], p["A_raw"], p["beta_raw"], spec, dyn)
        model.meta = {k: v for k, v in d["meta"].items() if k not in ("M", "kernel", "C", "L", "H")}
        if not isinstance(dyn, MixtureIntegralDynamics):
            model.freeze_dynamics()
        return model


def inject_dynamics(model: _HawkesFamily, spec) -> DhpModel:
    """Copy of ``model`` whose f/F are closed-form (constant, linear ramp or piecewise constant)."""
    dyn = spec if isinstance(spec, Dynamics) else analytic_dynamics(spec, model.num_marks)
    out = DhpModel(model.mu_raw.copy(), model.A_raw.copy(), model.beta_raw.copy(), model.kernel, dyn)
    out.meta = dict(model.meta)
    return out


def _initial_raw(M, spec: KernelSpec, mu, alpha, beta, full_beta):
    mu = np.broadcast_to(np.asarray(mu, dtype=float), (M,))
    beta_shape = (M, M) if full_beta else (M,)
    beta = np.broadcast_to(np.asarray(beta, dtype=float), beta_shape)
    if alpha is None:
        # total branching 0.5 split evenly across sources
        mass = 0.5 / M
        b = np.asarray(beta if full_beta else beta[:, None] * np.ones((1, M)))
        if spec.family is KernelFamily.EXP:
            alpha = mass * b
        elif spec.family is KernelFamily.PWL:
            p = spec.power_exponent
            alpha = np.full((M, M), (p * mass) ** (1.0 / (1.0 - p)))
        else:
            alpha = 2.0 * b * mass
    alpha = np.broadcast_to(np.asarray(alpha, dtype=float), (M, M))
    return inverse_softplus(mu), inverse_softplus(alpha), inverse_softplus(beta)


def initial_guess(seq: EventSequence, kernel: KernelSpec):
    """Data-driven starting values: half the empirical rate as background, clustering at the mean gap."""
    M = seq.num_marks
    span = max(seq.horizon - seq.start, 1e-12)
    rate = np.maximum(seq.counts_per_mark() / span, 1e-3)
    overall = max(len(seq) / span, 1e-3)
    kernel = kernel if isinstance(kernel, KernelSpec) else KernelSpec.parse(kernel)
    mass = 0.5 / M
    if kernel.family is KernelFamily.EXP:
        beta = overall
        alpha = mass * beta
    elif kernel.family is KernelFamily.PWL:
        p = kernel.power_exponent
        alpha = (p * mass) ** (1.0 / (1.0 - p))
        beta = alpha * overall
    else:
        beta = 0.5 * overall ** 2
        alpha = 2.0 * beta * mass
    return {"mu": 0.5 * rate, "alpha": alpha, "beta": beta}


# -- checkpoint registry ------------------------------------------------------------------

_REGISTRY: dict = {}


def register(cls):
    _REGISTRY[cls.model_type] = cls
    return cls


register(DhpModel)


def model_from_dict(d: dict) -> PointProcessModel:
    kind = d.get("model_type", "dhp")
    if kind not in _REGISTRY:
        # baselines register themselves on import
        from . import baselines  # noqa: F401
    try:
        cls = _REGISTRY[kind]
    except KeyError:
        raise ValueError(f"unknown model type {kind!r}") from None
    return cls.from_dict(d)


def identity_dhp(model: _HawkesFamily, num_components: int = 3, num_layers: int = 2, hidden: int = 8,
                 t_scale: float = 1.0) -> DhpModel:
    """DHP with the same (mu, A, beta) as ``model`` and frozen identity dynamics (b0 = 1, zero mixture)."""
    dyn = MixtureIntegralDynamics.identity(model.num_marks, num_components, num_layers, hidden, t_scale)
    out = DhpModel(model.mu_raw.copy(), model.A_raw.copy(), model.beta_raw.copy(), model.kernel, dyn)
    return out.freeze_dynamics()


__all__ = [
    "ConstantDynamics", "DhpModel", "ModelError", "NllResult", "PointProcessModel", "excitation_terms",
    "identity_dhp", "initial_guess", "inject_dynamics", "model_from_dict", "register",
]
