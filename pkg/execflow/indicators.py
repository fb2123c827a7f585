"""
Per-tick indicators and the engine that produces them.

On every tick the engine updates the moments, then, for both the real volume (pFV)
and the surrogate volume (pFA), solves the execution-flow eigenproblem and evaluates:

  - the regular moving averages P^τ and T^τ;
  - the spike observables P^{IH} and T^{IH} of the maximal flow state;
  - the impact from the future I_0^F = λ^{IH} and dI^F;
  - the lagging equilibrium price, and the advancing ones of the I-, local volume-
    and total-action dynamics;
  - the V/T state, the since-spike volume and time, and, optionally, the
    experimental projector and double-integration prices.
"""
import collections
import logging
import math
from typing import NamedTuple

import numpy as np
import pandas as pd

from execflow import utils
from execflow.basis import create_basis
from execflow.idpdt import IdpdtVariant, VariantNotReady, adjust_i0f, idpdt_matrix
from execflow.moments import FLOWS, MomentSet, ScalpPrice, SecondaryMomentSet
from execflow.projections import didt_projectors, double_integration_pstar, flow_adjusted_pi, split_spur
from execflow.snapshot import FlowSnapshot
from execflow.spectral import localized_state
from execflow.ticks import Tick, TickClock, surrogate_stream

logger = logging.getLogger("execflow")

###########################################################################
# Default parameter values
###########################################################################
config = utils.read_config_file()

default = {}
default["ignore_threshold"] = config["Indicators"].getfloat("IGNORE_THRESHOLD", 0.1)
default["variant"] = config["Approximations"].get("IDPDT_VARIANT", "RightProduct")
default["power_beta"] = config["Approximations"].getfloat("POWER_BETA", 1.0)
default["lambda_floor"] = config["Approximations"].getfloat("LAMBDA_FLOOR", 1e-12)
default["compare_variants"] = config["Approximations"].getboolean("COMPARE_VARIANTS", False)
default["density_construction"] = config["Approximations"].get("DENSITY_CONSTRUCTION", "shift_mixture")
default["experimental"] = config["Experimental"].getboolean("ENABLED", False)

FLOW_PREFIXES = {"V": "pFV", "A": "pFA"}

CORE_FIELDS = ["pv_average", "Tv_average", "totalVolume", "pv_M", "Tv_M", "I.wH_squared", "lambda_IH",
               "I0", "dI_F", "no_info", "PEQV_from_M", "Delta_VD", "PEQ_I", "Delta_I", "Delta_V", "PEQ_V",
               "Delta_T", "PEQ_T", "V_IH", "T_IH", "VT_ratio", "lambda_VT", "VT_I_average", "rho_negative",
               "dlambda_average", "scalp", "ready"]

EXPERIMENTAL_FIELDS = ["P_plus", "P_minus", "PnL_Pi", "dPI_plus", "dPI_minus", "V_extra", "P_star",
                       "I0F_adjusted", "I0F_adjusted_converged"]

COMPARISON_FIELDS = [f"Delta_I.{variant.value}" for variant in IdpdtVariant]

# available before the eigenproblem is ready
NON_DIRECTIONAL_FIELDS = {"pv_average", "Tv_average", "totalVolume", "dlambda_average", "scalp", "ready"}

TICK_COLUMNS = ["t", "P", "size"]


class EngineSettings(NamedTuple):
    variant: IdpdtVariant
    threshold: float
    experimental: bool
    compare: bool
    beta: float
    floor: float
    construction: str

    @classmethod
    def from_config(cls, **overrides) -> "EngineSettings":
        """
        The configured settings, with the given (non-None) values overriding them.
        """
        utils.check_valid_fields(overrides, cls._fields)
        values = {"variant": default["variant"],
                  "threshold": default["ignore_threshold"],
                  "experimental": default["experimental"],
                  "compare": default["compare_variants"],
                  "beta": default["power_beta"],
                  "floor": default["lambda_floor"],
                  "construction": default["density_construction"]}
        values.update({key: value for key, value in overrides.items() if value is not None})
        values["variant"] = IdpdtVariant.from_name(values["variant"])
        return cls(**values)

    def flow_fields(self) -> list:
        fields = list(CORE_FIELDS)
        if self.experimental:
            fields += EXPERIMENTAL_FIELDS
        if self.compare:
            fields += COMPARISON_FIELDS
        return fields

    def columns(self, with_symbol: bool = False) -> list:
        columns = list(TICK_COLUMNS) + (["symbol"] if with_symbol else [])
        for prefix in FLOW_PREFIXES.values():
            columns += [f"{prefix}.{field}" for field in self.flow_fields()]
        return columns


class IndicatorFrame:
    """
    The output record of one tick: the tick itself and the indicators of both flows.
    """

    def __init__(self, t: int, price: float, size: float, symbol: str = None):
        self.t = t
        self.price = price
        self.size = size
        self.symbol = symbol
        self.values = {}

    def __repr__(self) -> str:
        return f"IndicatorFrame(t={self.t}, price={self.price}, ready={self.ready})"

    def set_flow(self, prefix: str, values: dict) -> None:
        for name, value in values.items():
            self.values[f"{prefix}.{name}"] = value

    def get(self, name: str, default_value=None):
        if name == "t":
            return self.t
        if name == "P":
            return self.price
        if name == "size":
            return self.size
        if name == "symbol":
            return self.symbol
        return self.values.get(name, default_value)

    @property
    def ready(self) -> bool:
        return bool(self.values.get(f"{FLOW_PREFIXES['V']}.ready", False))

    def row(self, columns: list, float_format: str = ".12g", na: str = "NA") -> list:
        return [utils.format_number(self.get(column), float_format, na) if column != "symbol" else (self.symbol or na)
                for column in columns]


#########################################################################
# Indicators
#########################################################################

class ImpactFromFuture(NamedTuple):
    i0f: float
    i0: float
    d_i: float
    no_info: bool


def moving_averages(snapshot) -> tuple:
    """
    (P^τ, T^τ) = (⟨pI⟩/⟨I⟩, ⟨(t_now - t)I⟩/⟨I⟩), or (None, None) without volume.
    """
    if not snapshot.i0 > 0:
        return None, None
    return snapshot.vectors["pI"][0] / snapshot.i0, snapshot.vectors["tI"][0] / snapshot.i0


def spike_observables(snapshot) -> tuple:
    """
    (P^{IH}, T^{IH}): the price and the age averaged with the execution flow in ψ^{IH}.
    """
    flow = snapshot.rayleigh("I")
    return snapshot.rayleigh("pI") / flow, snapshot.rayleigh("tI") / flow


def impact_from_future(snapshot, threshold: float = None) -> ImpactFromFuture:
    """
    I_0^F = λ^{IH}, the current flow I_0 = ⟨ψ_0|I|ψ_0⟩ and dI^F = I_0^F - I_0 ≥ 0.
    Directional signals carry no information when ⟨ψ_0|ψ^{IH}⟩² ≥ threshold.
    """
    threshold = default["ignore_threshold"] if threshold is None else threshold
    psi_0 = localized_state(snapshot.basis, snapshot.basis.x0)
    i0 = snapshot.rayleigh("I", psi_0)
    i0f = snapshot.lambda_ih
    return ImpactFromFuture(i0f, i0, i0f - i0, snapshot.max_flow.projection_now >= threshold)


def lagging_peq(snapshot) -> tuple:
    """
    (Δ_VD, P^EQ) with Δ_VD = ⟨ψ^{IH}|(V - V^last) dp/dt|ψ^{IH}⟩ and P^EQ = P^{IH} - Δ_VD/λ^{IH}.
    """
    p_ih, _ = spike_observables(snapshot)
    delta = snapshot.rayleigh("Vdp")
    return delta, p_ih - delta / snapshot.lambda_ih


def advancing_peq(snapshot, idpdt) -> tuple:
    """
    (Δ_I, P^EQ) with Δ_I = 2 Spur‖I dp/dt|ρ_JIH‖ - Spur‖d(pI)/dt|ρ_JIH‖ and P^EQ = P^last - Δ_I/λ^{IH}.
    """
    dpi = snapshot.ddt("pI", snapshot.p_last * snapshot.lambda_ih)
    delta = 2.0 * snapshot.spur(idpdt) - snapshot.spur(dpi)
    return delta, snapshot.p_last - delta / snapshot.lambda_ih


def local_volume_peq(snapshot, idpdt) -> tuple:
    """
    (Δ_V, P^EQ) with Δ_V = 2 Spur‖I dp/dt|ρ_JIH‖ - Spur‖d((V - V^last) dp/dt)/dt|ρ_JIH‖.
    """
    vdp = snapshot.ddt("Vdp", 0.0)
    delta = 2.0 * snapshot.spur(idpdt) - snapshot.spur(vdp)
    return delta, snapshot.p_last - delta / snapshot.lambda_ih


def total_peq(snapshot, delta_i: float, delta_v: float) -> tuple:
    """
    (Δ_T, P^EQ) with Δ_T = Δ_I + Δ_V.
    """
    delta = delta_i + delta_v
    return delta, snapshot.p_last - delta / snapshot.lambda_ih


def flow_fields(snapshot, settings: EngineSettings, failures: collections.Counter = None) -> dict:
    """
    All indicator values of one flow, keyed by field name. Fields that cannot be
    computed are None.
    """
    failures = failures if failures is not None else collections.Counter()
    values = dict.fromkeys(settings.flow_fields())

    values["pv_average"], values["Tv_average"] = moving_averages(snapshot)
    values["ready"] = snapshot.ready
    if not snapshot.ready:
        logger.debug(f"{snapshot.flow}: frame not ready ({snapshot.reason}).")
        return values

    values["pv_M"], values["Tv_M"] = spike_observables(snapshot)
    values["I.wH_squared"] = snapshot.max_flow.projection_now
    impact = impact_from_future(snapshot, settings.threshold)
    values["lambda_IH"] = impact.i0f
    values["I0"] = impact.i0
    values["dI_F"] = impact.d_i
    values["no_info"] = impact.no_info
    values["Delta_VD"], values["PEQV_from_M"] = lagging_peq(snapshot)

    values["V_IH"] = snapshot.v_ih
    values["T_IH"] = snapshot.t_ih
    values["VT_ratio"] = (snapshot.v_ih / snapshot.t_ih) / snapshot.lambda_ih if snapshot.t_ih > 0 else None
    values["lambda_VT"] = snapshot.vt_state.lambda_ih
    rho_vt = snapshot.rho_jvt.rho
    time_vt = float(np.sum(snapshot.matrix("1").entries * rho_vt))
    values["VT_I_average"] = float(np.sum(snapshot.matrix("I").entries * rho_vt)) / time_vt if time_vt > 0 else None
    values["rho_negative"] = snapshot.rho_jih.negative_count()

    adjustment = None
    if settings.experimental or settings.variant == IdpdtVariant.SANDWICH_DT_P_OVER_I:
        adjustment = adjust_i0f(snapshot)

    idpdt = None
    try:
        i0f = adjustment.value if settings.variant == IdpdtVariant.SANDWICH_DT_P_OVER_I else None
        idpdt = idpdt_matrix(settings.variant, snapshot, i0f, settings.beta, settings.floor)
        values["Delta_I"], values["PEQ_I"] = advancing_peq(snapshot, idpdt)
        values["Delta_V"], values["PEQ_V"] = local_volume_peq(snapshot, idpdt)
        values["Delta_T"], values["PEQ_T"] = total_peq(snapshot, values["Delta_I"], values["Delta_V"])
    except VariantNotReady as e:
        failures[settings.variant.value] += 1
        logger.debug(f"{snapshot.flow}: variant {settings.variant.value} not ready: {e}")

    if settings.compare:
        for variant in IdpdtVariant:
            try:
                i0f = adjust_i0f(snapshot).value if variant == IdpdtVariant.SANDWICH_DT_P_OVER_I else None
                matrix = idpdt_matrix(variant, snapshot, i0f, settings.beta, settings.floor)
                values[f"Delta_I.{variant.value}"], _ = advancing_peq(snapshot, matrix)
            except VariantNotReady as e:
                failures[variant.value] += 1
                logger.debug(f"{snapshot.flow}: variant {variant.value} not ready: {e}")

    if settings.experimental:
        values.update(experimental_fields(snapshot, idpdt, adjustment, failures))

    return values


def experimental_fields(snapshot, idpdt, adjustment, failures: collections.Counter) -> dict:
    values = {"I0F_adjusted": adjustment.value, "I0F_adjusted_converged": adjustment.converged}

    pair = didt_projectors(snapshot)
    dpi = snapshot.ddt("pI", snapshot.p_last * snapshot.lambda_ih)
    values["dPI_plus"], values["dPI_minus"] = split_spur(dpi, pair, snapshot.rho_jih_psi)

    try:
        adjusted = flow_adjusted_pi(snapshot)
        values["P_plus"], values["P_minus"], values["PnL_Pi"] = adjusted.p_plus, adjusted.p_minus, adjusted.pnl
    except VariantNotReady as e:
        failures["flow_adjusted_pi"] += 1
        logger.debug(f"{snapshot.flow}: flow-adjusted Π not available: {e}")

    if idpdt is not None:
        double = double_integration_pstar(snapshot, idpdt)
        values["V_extra"], values["P_star"] = double.v_extra, double.p_star

    return values


#########################################################################
# Engine
#########################################################################

class FlowEngine:
    """
    Turns the ticks of one instrument into indicator frames, one frame per tick.
    """

    def __init__(self, basis=None, settings: EngineSettings = None, symbol: str = None, clock: TickClock = None):
        self.basis = basis if basis is not None else create_basis()
        self.settings = settings if settings is not None else EngineSettings.from_config()
        self.symbol = symbol
        self.clock = clock if clock is not None else TickClock()

        self.moments = MomentSet(self.basis)
        self.secondary = {flow: SecondaryMomentSet(self.basis) for flow in FLOWS}
        self.scalp = {flow: ScalpPrice() for flow in FLOWS}
        self.snapshots = {}

        self.frames = 0
        self.not_ready = {flow: 0 for flow in FLOWS}
        self.variant_failures = collections.Counter()

    def __repr__(self) -> str:
        return f"FlowEngine(symbol={self.symbol}, basis={self.basis}, frames={self.frames})"

    def advance_to(self, t_seconds: float) -> None:
        """
        Moves the moments forward without a tick of this instrument.
        """
        self.moments.advance_to(t_seconds)

    def on_tick(self, tick: Tick, t_seconds: float = None, da: float = None) -> IndicatorFrame:
        """
        Adds a tick and returns its indicator frame.

        Args:
            tick (Tick): The transaction.
            t_seconds (float, optional): The tick time in seconds on a clock shared with
                other instruments. Defaults to this engine's own clock.
            da (float, optional): The surrogate-volume increment from `surrogate_stream`.
        """
        t = self.clock.seconds(tick.t) if t_seconds is None else t_seconds
        self.moments.add_tick(t, tick.price, tick.size, da)

        frame = IndicatorFrame(tick.t, tick.price, tick.size, tick.symbol or self.symbol)
        for flow, prefix in FLOW_PREFIXES.items():
            snapshot = FlowSnapshot.from_moments(self.moments, flow, self.settings.construction)
            values = flow_fields(snapshot, self.settings, self.variant_failures)

            lambda_ih = values["lambda_IH"] if snapshot.ready else math.nan
            self.secondary[flow].add(t, tick.price, lambda_ih)
            values["dlambda_average"] = float(self.secondary[flow].vector("df")[0])
            values["scalp"] = self.scalp[flow].add(tick.price, lambda_ih)
            values["totalVolume"] = self.moments.total[flow]

            if not snapshot.ready:
                self.not_ready[flow] += 1
            self.snapshots[flow] = snapshot
            frame.set_flow(prefix, values)

        self.frames += 1
        return frame

    def process(self, ticks) -> pd.DataFrame:
        """
        Runs a whole tick sequence and returns one row per tick.
        """
        frames = [self.on_tick(tick, da=increment.da) for tick, increment in surrogate_stream(ticks)]
        return frames_to_dataframe(frames, self.settings.columns())

    def counters(self) -> dict:
        return {"frames": self.frames,
                "not_ready": dict(self.not_ready),
                "variant_failures": dict(self.variant_failures)}


def frames_to_dataframe(frames: list, columns: list) -> pd.DataFrame:
    """
    Frames as a DataFrame; fields that were not computed are NaN.
    """
    rows = [[frame.get(column) for column in columns] for frame in frames]
    df = pd.DataFrame(rows, columns=columns)
    for column in columns:
        if column != "symbol":
            df[column] = pd.to_numeric(df[column], errors="coerce")
    return df
