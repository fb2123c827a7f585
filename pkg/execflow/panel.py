"""
Several instruments on one time basis.

Every instrument has its own engine, but all of them share the basis and the
clock, and all moments are advanced to the time of every tick of any instrument.
That makes the states of different instruments comparable: their scalar products
and time distances are taken with the same Gram matrix at the same t_now.
"""
import concurrent.futures
import logging
from typing import NamedTuple

import numpy as np

from execflow import utils
from execflow.basis import create_basis
from execflow.indicators import EngineSettings, FlowEngine, IndicatorFrame, lagging_peq
from execflow.operators import gram_operator, matrix_from_moments
from execflow.snapshot import FlowSnapshot
from execflow.spectral import GevKind, max_flow_state, solve_gev
from execflow.ticks import Tick, TickClock, surrogate_stream

logger = logging.getLogger("execflow")

config = utils.read_config_file()

default = {}
default["max_workers"] = config["Panel"].getint("MAX_WORKERS", 1)


class UnknownSymbolError(KeyError):
    pass


class SpikeOrder(NamedTuple):
    by_time: float
    by_spur: float


class AssetPanel:
    """
    A set of instruments processed on a common t_now, with the capital-flow index
    Ĩ = Σ_a p^(a) I^(a).
    """

    def __init__(self, symbols: list, basis=None, settings: EngineSettings = None, max_workers: int = None):
        if not symbols:
            raise ValueError("A panel needs at least one symbol.")
        if len(set(symbols)) != len(symbols):
            raise ValueError(f"Duplicated symbols in {symbols}.")

        self.basis = basis if basis is not None else create_basis()
        self.settings = settings if settings is not None else EngineSettings.from_config()
        self.clock = TickClock()
        self.engines = {symbol: FlowEngine(self.basis, self.settings, symbol, self.clock) for symbol in symbols}

        self.t_now = None
        self.index_moments = np.zeros(self.basis.n_moments)
        self.max_workers = default["max_workers"] if max_workers is None else max_workers
        self._executor = None
        if self.max_workers > 1 and len(symbols) > 1:
            self._executor = concurrent.futures.ThreadPoolExecutor(max_workers=self.max_workers)

        self._current = {}

    def __repr__(self) -> str:
        return f"AssetPanel(symbols={list(self.engines)}, basis={self.basis}, t_now={self.t_now})"

    def close(self) -> None:
        if self._executor is not None:
            self._executor.shutdown(wait=True)
            self._executor = None

    def __enter__(self) -> "AssetPanel":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    @property
    def symbols(self) -> list:
        return list(self.engines)

    def engine(self, symbol: str) -> FlowEngine:
        if symbol not in self.engines:
            raise UnknownSymbolError(f"Unknown symbol '{symbol}'. Known symbols are: {self.symbols}")
        return self.engines[symbol]

    #########################################################################
    # Ticks
    #########################################################################

    def on_tick(self, tick: Tick, da: float = None) -> IndicatorFrame:
        """
        Advances every instrument to the tick time, then adds the tick to its own instrument.
        """
        engine = self.engine(tick.symbol)
        t = self.clock.seconds(tick.t)

        others = [other for symbol, other in self.engines.items() if symbol != tick.symbol]
        if self._executor is not None:
            list(self._executor.map(lambda other: other.advance_to(t), others))
        else:
            for other in others:
                other.advance_to(t)

        frame = engine.on_tick(tick, t, da)
        self._add_index(t, tick, first=engine.moments.ticks == 1)
        self._current.clear()
        return frame

    def process(self, ticks) -> list:
        return [self.on_tick(tick, increment.da) for tick, increment in surrogate_stream(ticks)]

    def _add_index(self, t: float, tick: Tick, first: bool) -> None:
        if self.t_now is not None and t > self.t_now:
            self.index_moments = self.basis.shift_operator(t - self.t_now) @ self.index_moments
        self.t_now = t
        if not first:
            self.index_moments += tick.price * tick.size * self.basis.now_values

    #########################################################################
    # Cross-asset relations
    #########################################################################

    def snapshot(self, symbol: str) -> FlowSnapshot:
        """
        The real-volume snapshot of an instrument at the panel's current time.
        """
        if symbol not in self._current:
            engine = self.engine(symbol)
            if engine.moments.t_now is None:
                raise ValueError(f"No ticks for '{symbol}' yet.")
            self._current[symbol] = FlowSnapshot.from_moments(engine.moments, "V", self.settings.construction)
        return self._current[symbol]

    def _ready(self, symbol: str) -> FlowSnapshot:
        snapshot = self.snapshot(symbol)
        if not snapshot.ready:
            raise ValueError(f"'{symbol}' is not ready ({snapshot.reason}).")
        return snapshot

    def cross_projection(self, a: str, b: str) -> float:
        """
        ⟨ψ^{IH(a)}|ψ^{IH(b)}⟩², with the shared Gram matrix.
        """
        first, second = self._ready(a), self._ready(b)
        overlap = first.psi_ih @ self.basis.gram @ second.psi_ih
        return float(overlap ** 2)

    def spike_order(self, a: str, b: str) -> SpikeOrder:
        """
        How much earlier the spike of b happened than the spike of a, in seconds:
        T^{IH(a)} - T^{IH(b)}, and the same from the since-spike states Spur‖ρ_JIH‖.
        """
        first, second = self._ready(a), self._ready(b)
        age_a = first.rayleigh("tI") / first.rayleigh("I")
        age_b = second.rayleigh("tI") / second.rayleigh("I")
        return SpikeOrder(age_a - age_b, first.t_ih - second.t_ih)

    def index_state(self):
        """
        The maximal flow state of the capital-flow index Ĩ = Σ_a p^(a) I^(a).
        """
        if not any(self.engine(symbol).moments.ticks > 0 for symbol in self.symbols):
            raise ValueError("The panel has no ticks yet.")
        flow = matrix_from_moments(self.basis, self.index_moments, label="Ĩ")
        spectral = solve_gev(flow, gram_operator(self.basis), GevKind.I_VS_1, self.basis.now_values)
        return max_flow_state(spectral)

    def summary(self) -> float:
        """
        Σ_a λ^{IH(a)} (P^last(a) - P^EQ(a)) over the ready instruments, with the lagging P^EQ.
        """
        total = 0.0
        for symbol in self.symbols:
            engine = self.engine(symbol)
            if engine.moments.t_now is None:
                continue
            snapshot = self.snapshot(symbol)
            if not snapshot.ready:
                continue
            _, peq = lagging_peq(snapshot)
            total += snapshot.lambda_ih * (snapshot.p_last - peq)
        return total

    def counters(self) -> dict:
        return {symbol: engine.counters() for symbol, engine in self.engines.items()}
