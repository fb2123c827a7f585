"""
Streaming moments ⟨Q_m f⟩ of the tick history.

Two sampling measures are tracked:

  - increment moments, Σ_l Q_m(x_l) ω_l Δf_l, for observables known through their
    per-tick increments (volume, price changes);
  - time moments, ∫ ω Q_m f dt, for observables that are functions of time. The tick
    path is held constant between ticks (the last traded value persists), and before
    the first tick it is extended back with the first value, so these integrals are
    evaluated exactly over the full support.

Both are advanced between ticks with the basis shift operator and then
incremented at the new tick. Every volume-like flow (the real volume "V" and the
surrogate volume "A" = Σ|Δp|) gets its own set of flow moments.
"""
import copy
import logging
import math

import numpy as np

logger = logging.getLogger("execflow")

FLOWS = ("V", "A")

# increment moments: I, pI, (t_now - t) I, (V - V^last) dp/dt; time moment: V^last - V
FLOW_VECTORS = ("I", "pI", "tI", "Vdp", "W")

# increment moment of dp/dt and time moment of p
SHARED_VECTORS = ("dp", "p")


class TickOrderError(ValueError):
    pass


class MomentSet:
    """
    The moments of one instrument, updated tick by tick.

    Vectors are read with `vector(name, flow)`; the volume accumulator is kept relative
    to the current tick, so that V^last = 0 and historical V - V^last ≤ 0.
    """

    def __init__(self, basis):
        self.basis = basis
        self.t_now = None
        self.p_last = None
        self.ticks = 0
        self.total = {flow: 0.0 for flow in FLOWS}

        self._names = list(SHARED_VECTORS) + [f"{flow}.{name}" for flow in FLOWS for name in FLOW_VECTORS]
        self._index = {name: i for i, name in enumerate(self._names)}
        self._stack = np.zeros((len(self._names), basis.n_moments))

    def __repr__(self) -> str:
        return f"MomentSet(ticks={self.ticks}, t_now={self.t_now}, p_last={self.p_last})"

    #########################################################################
    # Accessors
    #########################################################################

    def vector(self, name: str, flow: str = None) -> np.ndarray:
        """
        Returns a copy of the moment vector with the given name.

        Args:
            name (str): One of "dp", "p", "one", "age" or, with a flow, one of "I", "pI", "tI", "Vdp", "W".
            flow (str, optional): "V" or "A" for the flow-specific vectors.
        """
        if name == "one":
            return self.basis.unit_moments.copy()
        if name == "age":
            return self.basis.age_moments.copy()

        key = name if flow is None else f"{flow}.{name}"
        if key not in self._index:
            raise KeyError(f"Unknown moment vector '{key}'. Valid names are: {self._names + ['one', 'age']}")
        return self._stack[self._index[key]].copy()

    def vectors(self) -> dict:
        return {name: self._stack[i].copy() for name, i in self._index.items()}

    def snapshot(self) -> "MomentSet":
        return copy.deepcopy(self)

    def _row(self, name: str, flow: str = None) -> np.ndarray:
        key = name if flow is None else f"{flow}.{name}"
        return self._stack[self._index[key]]

    #########################################################################
    # Updates
    #########################################################################

    def advance_to(self, t: float) -> None:
        """
        Moves t_now forward to t without a new observation.
        """
        if self.t_now is None:
            return

        delta = t - self.t_now
        if delta < 0:
            raise TickOrderError(f"Time {t} precedes the current time {self.t_now}.")
        if delta == 0:
            return

        shift = self.basis.shift_operator(delta)
        self._stack = self._stack @ shift.T

        # the held price covers the new interval
        unit = self.basis.unit_moments
        self._row("p")[:] += self.p_last * (unit - shift @ unit)

        # all past increments got older by delta
        for flow in FLOWS:
            self._row("tI", flow)[:] += delta * self._row("I", flow)

        self.t_now = t

    def add_tick(self, t: float, price: float, size: float, da: float = None) -> "MomentSet":
        """
        Adds one tick: advances the moments to t, then adds the tick's increments.

        Args:
            t (float): Tick time in seconds.
            price (float): Execution price.
            size (float): Shares traded.
            da (float, optional): The surrogate-volume increment. Defaults to |price - P^last|.

        Returns:
            MomentSet: self, for chaining.
        """
        if self.t_now is None:
            # the first tick sets the anchors and contributes no increments
            self.t_now = t
            self.p_last = price
            self._row("p")[:] = price * self.basis.unit_moments
            self.ticks = 1
            return self

        self.advance_to(t)

        now = self.basis.now_values
        unit = self.basis.unit_moments
        dp = price - self.p_last
        dp_moments = self._row("dp")

        da = abs(dp) if da is None else da
        for flow, dv in (("V", size), ("A", da)):
            # re-anchor V^last = 0 before this tick's (zero) contribution
            self._row("Vdp", flow)[:] -= dv * dp_moments
            self._row("W", flow)[:] += dv * unit
            self._row("I", flow)[:] += dv * now
            self._row("pI", flow)[:] += price * dv * now
            self.total[flow] += dv

        dp_moments += dp * now

        self.p_last = price
        self.ticks += 1
        return self


def moments_from_scratch(basis, times, prices, sizes) -> dict:
    """
    Recomputes every tracked moment directly from the whole tick history, with t_now
    at the last tick. Names match `MomentSet.vectors()`.
    """
    times = np.asarray(times, dtype=float)
    prices = np.asarray(prices, dtype=float)
    sizes = np.asarray(sizes, dtype=float)
    size = basis.n_moments

    result = {name: np.zeros(size) for name in SHARED_VECTORS}
    result.update({f"{flow}.{name}": np.zeros(size) for flow in FLOWS for name in FLOW_VECTORS})
    if len(times) == 0:
        return result

    ages = times[-1] - times
    weighted = basis.values(basis.x_of_age(ages), size) * basis.weight(ages)[:, None]
    # ∫_{-∞}^{t_l} ω Q_m dt
    cumulative = weighted @ basis.j_matrix

    dp = np.diff(prices, prepend=prices[0])
    flows = {"V": np.where(np.arange(len(times)) == 0, 0.0, sizes), "A": np.abs(dp)}
    intervals = np.diff(cumulative, axis=0)

    result["dp"] = weighted.T @ dp
    result["p"] = prices[0] * cumulative[0] + intervals.T @ prices[:-1]

    for flow, dv in flows.items():
        volume = np.cumsum(dv)
        result[f"{flow}.I"] = weighted.T @ dv
        result[f"{flow}.pI"] = weighted.T @ (prices * dv)
        result[f"{flow}.tI"] = weighted.T @ (ages * dv)
        result[f"{flow}.Vdp"] = weighted.T @ ((volume - volume[-1]) * dp)
        result[f"{flow}.W"] = (volume[-1] - volume[0]) * cumulative[0] + intervals.T @ (volume[-1] - volume[:-1])

    return result


class SecondaryMomentSet:
    """
    Increment moments of a computed observable f (for instance λ^{IH}), treated as
    if it were observed: ⟨Q_m df/dt⟩, ⟨Q_m p df/dt⟩ and ⟨Q_m d(pf)/dt⟩.
    """

    NAMES = ("df", "pdf", "dpf")

    def __init__(self, basis):
        self.basis = basis
        self.t_now = None
        self.f_last = None
        self.p_last = None
        self._stack = np.zeros((3, basis.n_moments))

    def vector(self, name: str) -> np.ndarray:
        return self._stack[self.NAMES.index(name)].copy()

    def add(self, t: float, price: float, f_value: float) -> "SecondaryMomentSet":
        if self.t_now is None:
            self.t_now, self.p_last, self.f_last = t, price, f_value
            return self

        delta = t - self.t_now
        if delta < 0:
            raise TickOrderError(f"Time {t} precedes the current time {self.t_now}.")
        if delta > 0:
            self._stack = self._stack @ self.basis.shift_operator(delta).T
            self.t_now = t

        if _finite(f_value) and _finite(self.f_last):
            df = f_value - self.f_last
            increments = np.array([df, price * df, price * f_value - self.p_last * self.f_last])
            self._stack += np.outer(increments, self.basis.now_values)

        self.f_last = f_value
        self.p_last = price
        return self


class ScalpPrice:
    """
    Cumulative price changes counted only on ticks where λ^{IH} increased.
    """

    def __init__(self):
        self.raw = 0.0
        self.p_last = None
        self.lambda_last = None

    def add(self, price: float, lambda_ih: float) -> float:
        if self.p_last is not None and _finite(lambda_ih) and _finite(self.lambda_last) \
                and lambda_ih - self.lambda_last > 0:
            self.raw += price - self.p_last

        self.p_last = price
        self.lambda_last = lambda_ih
        return self.raw


def _finite(value) -> bool:
    return value is not None and math.isfinite(value)
