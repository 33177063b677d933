"""Latent dynamics: a non-negative rate f_m(t) and its integral F_m(t).

The learned form is a mixture of monotonic networks,

    F_m(t) = sum_c pi_c (Phi_m^c(t) - Phi_m^c(0)) + b0 * t,
    f_m(t) = sum_c pi_c dPhi_m^c/dt + b0,

where every weight matrix, ``pi`` and ``b0`` pass through softplus so that F
is non-decreasing for any raw parameter values. Analytic dynamics (constant,
clipped linear ramp, piecewise constant) are available for simulation studies.
"""

from __future__ import annotations

import math

import numpy as np

from . import autodiff as ad
from .autodiff import Tape, Var, softplus, sigmoid, inverse_softplus

IDENTITY_RAW = float(inverse_softplus(1.0))
# softplus(-1000) underflows to exactly 0.0
ZERO_RAW = -1000.0


class Dynamics:
    """Interface shared by learned and analytic dynamics."""

    num_marks: int

    def evaluate(self, m: int, t):
        """(F_m(t), f_m(t)) as numpy arrays."""
        raise NotImplementedError

    def evaluate_all(self, t):
        """(F, f) of shape (M, len(t))."""
        t = np.asarray(t, dtype=float)
        F = np.empty((self.num_marks, len(t)))
        f = np.empty_like(F)
        for m in range(self.num_marks):
            F[m], f[m] = self.evaluate(m, t)
        return F, f

    def integral_value(self, m: int, t):
        return self.evaluate(m, t)[0]

    def derivative_value(self, m: int, t):
        return self.evaluate(m, t)[1]

    def parameters(self) -> dict:
        return {}

    def values_and_vjp(self, t):
        """(F, f, vjp) where vjp(dF, df) maps output adjoints to parameter gradients."""
        F, f = self.evaluate_all(t)
        return F, f, lambda dF, df: {}

    def max_derivative(self, m: int, a: float, b: float) -> float:
        """An upper bound on f_m over [a, b]."""
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


def _as_array(t):
    return np.atleast_1d(np.asarray(t, dtype=float))


def _unwrap(t, value):
    return float(value[0]) if np.ndim(t) == 0 else value


# -- learned dynamics -------------------------------------------------------------------


class MonotonicNetwork:
    """Scalar-input network with non-negative effective weights.

    Hidden layers use tanh, the last layer softplus; the output is a
    non-negative combination of the last layer's units.
    """

    def __init__(self, weights, biases, out_weights):
        self.weights = [np.asarray(w, dtype=float) for w in weights]
        self.biases = [np.asarray(b, dtype=float) for b in biases]
        self.out_weights = np.asarray(out_weights, dtype=float)

    @classmethod
    def init(cls, rng: np.random.Generator, num_layers: int = 2, hidden: int = 8, scale: float = 0.1):
        weights, biases = [], []
        fan_in = 1
        for _ in range(num_layers):
            weights.append(rng.normal(0.0, scale, size=(hidden, fan_in)))
            biases.append(rng.normal(0.0, scale, size=hidden))
            fan_in = hidden
        return cls(weights, biases, rng.normal(0.0, scale, size=hidden))

    @property
    def num_layers(self) -> int:
        return len(self.weights)

    @property
    def hidden(self) -> int:
        return len(self.out_weights)

    def parameters(self, prefix: str) -> dict:
        params = {}
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            params[f"{prefix}.W{l}"] = w
            params[f"{prefix}.b{l}"] = b
        params[f"{prefix}.B"] = self.out_weights
        return params

    def effective_weights(self):
        return [softplus(w) for w in self.weights], softplus(self.out_weights)

    def forward(self, x, dx: float = 1.0):
        """Phi(x) and dPhi/dt for an input x = x(t) with dx/dt = ``dx``."""
        x = _as_array(x)
        ws, out_w = self.effective_weights()
        h = x[None, :]
        dh = np.full_like(h, dx)
        last = self.num_layers - 1
        for l, (w, b) in enumerate(zip(ws, self.biases)):
            z = w @ h + b[:, None]
            dz = w @ dh
            if l < last:
                h = np.tanh(z)
                dh = (1.0 - h * h) * dz
            else:
                h = softplus(z)
                dh = sigmoid(z) * dz
        return out_w @ h, out_w @ dh

    def record_weights(self, tape: Tape, leaves: dict):
        """Register raw parameters as leaves; return their effective (softplus) nodes.

        ``leaves`` receives the raw leaves keyed by (array name, indices).
        """
        layers = []
        for l, (w_raw, b_raw) in enumerate(zip(self.weights, self.biases)):
            w_eff = [[_leaf(tape, leaves, ("W", l, k, j), w_raw[k, j]).softplus()
                      for j in range(w_raw.shape[1])] for k in range(w_raw.shape[0])]
            bias = [_leaf(tape, leaves, ("b", l, k), b_raw[k]) for k in range(len(b_raw))]
            layers.append((w_eff, bias))
        out_w = [_leaf(tape, leaves, ("B", k), self.out_weights[k]).softplus() for k in range(self.hidden)]
        return layers, out_w

    @staticmethod
    def apply(weights, x: Var, dx: Var):
        """Record Phi(x) and its time derivative given ``record_weights`` output."""
        layers, out_w = weights
        h, dh = [x], [dx]
        last = len(layers) - 1
        for l, (w_eff, bias) in enumerate(layers):
            new_h, new_dh = [], []
            for k in range(len(bias)):
                z = ad.linear_combination(w_eff[k], h, bias[k])
                dz = ad.linear_combination(w_eff[k], dh)
                if l < last:
                    hk = z.tanh()
                    dhk = (1.0 - hk * hk) * dz
                else:
                    hk = z.softplus()
                    dhk = z.sigmoid() * dz
                new_h.append(hk)
                new_dh.append(dhk)
            h, dh = new_h, new_dh
        return ad.linear_combination(out_w, h), ad.linear_combination(out_w, dh)

    def to_dict(self) -> dict:
        return {
            "W": [w.tolist() for w in self.weights],
            "b": [b.tolist() for b in self.biases],
            "B": self.out_weights.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MonotonicNetwork":
        return cls([np.asarray(w, dtype=float).reshape(len(w), -1) for w in d["W"]], d["b"], d["B"])


def _leaf(tape: Tape, leaves: dict, key, raw) -> Var:
    v = tape.var(float(raw))
    leaves[key] = v
    return v


class MixtureIntegralDynamics(Dynamics):
    """Per-dimension mixtures of monotonic networks.

    ``pi_raw`` and ``b0_raw`` are shared across dimensions unless
    ``per_dimension`` is set, in which case each dimension has its own.
    Network inputs are t / ``t_scale``.
    """

    def __init__(self, nets, pi_raw, b0_raw, t_scale: float = 1.0):
        self.nets = [list(row) for row in nets]
        self.pi_raw = np.asarray(pi_raw, dtype=float)
        self.b0_raw = np.asarray(b0_raw, dtype=float)
        if not t_scale > 0:
            raise ValueError("t_scale must be > 0")
        self.t_scale = float(t_scale)
        self.num_marks = len(self.nets)
        self.num_components = len(self.nets[0])
        self.per_dimension = self.pi_raw.ndim == 2
        expected_pi = (self.num_marks, self.num_components) if self.per_dimension else (self.num_components,)
        if self.pi_raw.shape != expected_pi:
            raise ValueError(f"pi_raw has shape {self.pi_raw.shape}, expected {expected_pi}")
        if self.b0_raw.shape != ((self.num_marks,) if self.per_dimension else ()):
            raise ValueError("b0_raw shape does not match the mixture layout")

    @classmethod
    def init(cls, num_marks: int, num_components: int = 3, num_layers: int = 2, hidden: int = 8,
             t_scale: float = 1.0, seed=0, per_dimension: bool = False, scale: float = 0.1):
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        nets = [[MonotonicNetwork.init(rng, num_layers, hidden, scale) for _ in range(num_components)]
                for _ in range(num_marks)]
        pi_shape = (num_marks, num_components) if per_dimension else (num_components,)
        pi_raw = rng.normal(0.0, scale, size=pi_shape)
        b0_raw = np.full(num_marks, IDENTITY_RAW) if per_dimension else np.array(IDENTITY_RAW)
        return cls(nets, pi_raw, b0_raw, t_scale)

    @classmethod
    def identity(cls, num_marks: int, num_components: int = 3, num_layers: int = 2, hidden: int = 8,
                 t_scale: float = 1.0, seed=0):
        """Dynamics with b0 = 1 and every mixture weight exactly zero, so F(t) = t."""
        dyn = cls.init(num_marks, num_components, num_layers, hidden, t_scale, seed)
        dyn.pi_raw[...] = ZERO_RAW
        dyn.b0_raw[...] = IDENTITY_RAW
        return dyn

    @property
    def num_layers(self) -> int:
        return self.nets[0][0].num_layers

    @property
    def hidden(self) -> int:
        return self.nets[0][0].hidden

    def parameters(self) -> dict:
        params = {"dyn.pi": self.pi_raw, "dyn.b0": self.b0_raw}
        for m, row in enumerate(self.nets):
            for c, net in enumerate(row):
                params.update(net.parameters(f"dyn.m{m}.c{c}"))
        return params

    def mixture_weights(self, m: int) -> np.ndarray:
        pi = softplus(self.pi_raw[m] if self.per_dimension else self.pi_raw)
        return np.atleast_1d(pi)

    def base_slope(self, m: int) -> float:
        return float(softplus(float(self.b0_raw[m] if self.per_dimension else self.b0_raw)))

    def evaluate(self, m: int, t):
        ts = _as_array(t)
        pi = self.mixture_weights(m)
        b0 = self.base_slope(m)
        x = np.concatenate([[0.0], ts / self.t_scale])
        F = b0 * ts
        f = np.full_like(ts, b0)
        for c, net in enumerate(self.nets[m]):
            phi, dphi = net.forward(x, 1.0 / self.t_scale)
            F = F + pi[c] * (phi[1:] - phi[0])
            f = f + pi[c] * dphi[1:]
        return _unwrap(t, F), _unwrap(t, f)

    # -- tape-based evaluation ----------------------------------------------------------

    def _build(self, tape: Tape, m: int, t_var: Var, leaves: dict):
        """Record (F_m, f_m) at the (possibly array-valued) time node ``t_var``."""
        pi_src = self.pi_raw[m] if self.per_dimension else self.pi_raw
        pi_key = ("pi", m) if self.per_dimension else ("pi",)
        b0_key = ("b0", m) if self.per_dimension else ("b0",)
        if pi_key not in leaves:
            leaves[pi_key] = [tape.var(float(p)) for p in pi_src]
            leaves[b0_key] = tape.var(float(self.b0_raw[m] if self.per_dimension else self.b0_raw))
        pis = [p.softplus() for p in leaves[pi_key]]
        b0 = leaves[b0_key].softplus()
        inv = 1.0 / self.t_scale
        x = t_var * inv
        dx = tape.const(inv)
        x0 = tape.const(0.0)
        F_terms, f_terms = [], []
        for c, net in enumerate(self.nets[m]):
            weights = net.record_weights(tape, leaves.setdefault(("net", m, c), {}))
            phi, dphi = net.apply(weights, x, dx)
            phi0, _ = net.apply(weights, x0, dx)
            F_terms.append(phi - phi0)
            f_terms.append(dphi)
        F = ad.linear_combination(pis, F_terms) + b0 * t_var
        f = ad.linear_combination(pis, f_terms) + b0
        return F, f

    def integral_value(self, m: int, t):
        tape = Tape()
        t_var = tape.const(_as_array(t))
        F, _ = self._build(tape, m, t_var, {})
        return _unwrap(t, F.value)

    def derivative_value(self, m: int, t):
        """f_m(t) via forward tangents recorded on the tape."""
        tape = Tape()
        t_var = tape.const(_as_array(t))
        _, f = self._build(tape, m, t_var, {})
        return _unwrap(t, f.value)

    def derivative_by_reverse_mode(self, m: int, t: float) -> float:
        """f_m(t) as dF_m/dt with t registered as a tape leaf."""
        tape = Tape()
        t_var = tape.var(float(t))
        F, _ = self._build(tape, m, t_var, {})
        (g,) = tape.gradient(F, [t_var])
        return float(g)

    def values_and_vjp(self, t):
        t = np.asarray(t, dtype=float)
        tape = Tape()
        t_var = tape.const(t)
        leaves: dict = {}
        outs = [self._build(tape, m, t_var, leaves) for m in range(self.num_marks)]
        F = np.stack([np.broadcast_to(o[0].value, t.shape) for o in outs])
        f = np.stack([np.broadcast_to(o[1].value, t.shape) for o in outs])

        def vjp(dF, df):
            terms = []
            for m, (Fm, fm) in enumerate(outs):
                terms.append((Fm * tape.const(dF[m])).sum())
                terms.append((fm * tape.const(df[m])).sum())
            total = terms[0]
            for term in terms[1:]:
                total = total + term
            adj = tape.backward(total)
            return self._collect(tape, leaves, adj)

        return F, f, vjp

    def _collect(self, tape: Tape, leaves: dict, adj: list) -> dict:
        position = {leaf: i for i, leaf in enumerate(tape.leaves)}

        def g(v: Var) -> float:
            return float(adj[position[v.index]])

        grads = {name: np.zeros_like(arr) for name, arr in self.parameters().items()}
        if self.per_dimension:
            for m in range(self.num_marks):
                if ("pi", m) in leaves:
                    grads["dyn.pi"][m] = [g(v) for v in leaves[("pi", m)]]
                    grads["dyn.b0"][m] = g(leaves[("b0", m)])
        else:
            grads["dyn.pi"][:] = [g(v) for v in leaves[("pi",)]]
            grads["dyn.b0"][...] = g(leaves[("b0",)])
        for (tag, *rest), sub in leaves.items():
            if tag != "net":
                continue
            m, c = rest
            prefix = f"dyn.m{m}.c{c}"
            for key, v in sub.items():
                kind = key[0]
                if kind == "W":
                    _, l, k, j = key
                    grads[f"{prefix}.W{l}"][k, j] += g(v)
                elif kind == "b":
                    _, l, k = key
                    grads[f"{prefix}.b{l}"][k] += g(v)
                else:
                    grads[f"{prefix}.B"][key[1]] += g(v)
        return grads

    def max_derivative(self, m: int, a: float, b: float, points: int = 33, safety: float = 1.2) -> float:
        grid = np.linspace(a, b, points)
        return safety * float(np.max(self.evaluate(m, grid)[1]))

    def to_dict(self) -> dict:
        return {
            "type": "mixture",
            "t_scale": self.t_scale,
            "pi_raw": self.pi_raw.tolist(),
            "b0_raw": self.b0_raw.tolist(),
            "networks": [[net.to_dict() for net in row] for row in self.nets],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MixtureIntegralDynamics":
        nets = [[MonotonicNetwork.from_dict(n) for n in row] for row in d["networks"]]
        return cls(nets, d["pi_raw"], d["b0_raw"], d["t_scale"])


# -- analytic dynamics --------------------------------------------------------------------


class ConstantDynamics(Dynamics):
    def __init__(self, num_marks: int, value: float = 1.0):
        if not value >= 0:
            raise ValueError("constant dynamics must be >= 0")
        self.num_marks = num_marks
        self.value = float(value)

    def evaluate(self, m, t):
        ts = _as_array(t)
        return _unwrap(t, self.value * ts), _unwrap(t, np.full_like(ts, self.value))

    def max_derivative(self, m, a, b):
        return self.value

    def to_dict(self):
        return {"type": "constant", "value": self.value, "num_marks": self.num_marks}


class LinearRampDynamics(Dynamics):
    """f(t) = max(0, intercept + slope * t)."""

    def __init__(self, num_marks: int, intercept: float, slope: float):
        self.num_marks = num_marks
        self.intercept = float(intercept)
        self.slope = float(slope)

    def _raw_integral(self, t):
        return self.intercept * t + 0.5 * self.slope * t * t

    def evaluate(self, m, t):
        ts = _as_array(t)
        a, s = self.intercept, self.slope
        f = np.maximum(0.0, a + s * ts)
        if s == 0:
            F = max(a, 0.0) * ts
        else:
            root = -a / s
            if s > 0:
                # zero until the root, then the ramp
                lo = max(root, 0.0)
                F = np.where(ts > lo, self._raw_integral(ts) - self._raw_integral(lo), 0.0)
            else:
                hi = max(root, 0.0)
                F = self._raw_integral(np.minimum(ts, hi))
        return _unwrap(t, F), _unwrap(t, f)

    def max_derivative(self, m, a, b):
        return float(max(0.0, self.intercept + self.slope * a, self.intercept + self.slope * b))

    def to_dict(self):
        return {"type": "linear", "intercept": self.intercept, "slope": self.slope, "num_marks": self.num_marks}


class PiecewiseConstantDynamics(Dynamics):
    """f(t) = values[k] on [breaks[k], breaks[k+1]); breaks[0] = 0 and the last piece extends to infinity."""

    def __init__(self, num_marks: int, breaks, values):
        breaks = np.asarray(breaks, dtype=float)
        values = np.asarray(values, dtype=float)
        if breaks.shape != values.shape or breaks[0] != 0 or np.any(np.diff(breaks) <= 0):
            raise ValueError("breaks must start at 0, increase strictly and match values")
        if np.any(values < 0):
            raise ValueError("piecewise values must be >= 0")
        self.num_marks = num_marks
        self.breaks = breaks
        self.values = values
        self._cum = np.concatenate([[0.0], np.cumsum(values[:-1] * np.diff(breaks))])

    def evaluate(self, m, t):
        ts = _as_array(t)
        k = np.clip(np.searchsorted(self.breaks, ts, side="right") - 1, 0, len(self.breaks) - 1)
        F = self._cum[k] + self.values[k] * (ts - self.breaks[k])
        return _unwrap(t, F), _unwrap(t, self.values[k])

    def max_derivative(self, m, a, b):
        k0 = max(int(np.searchsorted(self.breaks, a, side="right")) - 1, 0)
        k1 = max(int(np.searchsorted(self.breaks, b, side="right")) - 1, 0)
        return float(self.values[k0:k1 + 1].max())

    def to_dict(self):
        return {"type": "piecewise", "breaks": self.breaks.tolist(), "values": self.values.tolist(),
                "num_marks": self.num_marks}


def analytic_dynamics(spec: dict, num_marks: int) -> Dynamics:
    """Build closed-form dynamics from a spec such as ``{"type": "constant", "value": 2}``."""
    kind = spec.get("type")
    if kind == "constant":
        return ConstantDynamics(num_marks, spec.get("value", 1.0))
    if kind == "linear":
        return LinearRampDynamics(num_marks, spec["intercept"], spec["slope"])
    if kind == "piecewise":
        return PiecewiseConstantDynamics(num_marks, spec["breaks"], spec["values"])
    raise ValueError(f"unknown dynamics spec {kind!r}")


def dynamics_from_dict(d: dict, num_marks: int) -> Dynamics:
    if d.get("type") == "mixture":
        return MixtureIntegralDynamics.from_dict(d)
    return analytic_dynamics(d, d.get("num_marks", num_marks))


def export_grid(dyn: Dynamics, m: int, start: float, end: float, points: int):
    """Rows (t, f_m(t), F_m(t)) on a uniform grid."""
    if points < 2:
        raise ValueError("points must be >= 2")
    grid = np.linspace(start, end, points)
    F, f = dyn.evaluate(m, grid)
    return [(float(t), float(a), float(b)) for t, a, b in zip(grid, f, F)]
