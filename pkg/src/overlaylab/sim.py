"""Deterministic fluid simulator for weighted proportionally-fair transport.

Each flow emits fluid at its send rate x_f; the delivered fraction nudges the
rate up by ``gain_norm * w_f`` per unit mass and the lost fraction sheds
``gain_norm * x_f`` per unit mass, giving the multiplicative dynamics

    dx_f/dt = gain_norm * x_f * ((1 - p_f) * w_f - p_f * x_f)

where p_f is the route loss probability.  Links drop the excess fraction of
their offered load, ``p_l = max(0, (y_l - C_l) / y_l)``, and route loss
composes independently across links.  Integration is explicit Euler on a fixed
step; everything is vectorized over flows with a link-by-flow incidence
matrix, and a run is a pure function of its inputs.
"""
from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from .model import Topology, cumulative_utility
from .planner import PlanningProblem
from .weights import TransportConfig

RATE_FLOOR = 0.001
DEFAULT_DT = 0.01
CONVERGENCE_WINDOW = 1.0  # seconds of simulated time
CONVERGENCE_REL = 0.001


@dataclass
class SimEvent:
    """A timed change applied to the running simulation."""

    t: float
    kind: str  # "set-capacity" | "set-sessions" | "install-config"
    payload: dict

    def __post_init__(self):
        if self.kind not in ("set-capacity", "set-sessions", "install-config"):
            raise ValueError(f"unknown event kind {self.kind!r}")


@dataclass
class SimTrace:
    """Sampled time series; one row per (sample time, flow)."""

    times: list[float] = field(default_factory=list)
    rows: list[tuple] = field(default_factory=list)
    converged_at: float | None = None

    CSV_HEADER = (
        "t,flow_id,send_rate_mbps,goodput_mbps,class_id,class_goodput_mbps,utility"
    )

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(self.CSV_HEADER + "\n")
        for row in self.rows:
            t, fid, send, good, cid, cgood, util = row
            buf.write(
                f"{_fmt(t)},{fid},{_fmt(send)},{_fmt(good)},{cid},"
                f"{_fmt(cgood)},{_fmt(util)}\n"
            )
        return buf.getvalue()

    def final_goodputs(self) -> dict[str, float]:
        if not self.times:
            return {}
        t_last = self.times[-1]
        return {r[1]: r[3] for r in self.rows if r[0] == t_last and r[1]}

    def final_send_rates(self) -> dict[str, float]:
        if not self.times:
            return {}
        t_last = self.times[-1]
        return {r[1]: r[2] for r in self.rows if r[0] == t_last and r[1]}

    def final_class_goodputs(self) -> dict[str, float]:
        if not self.times:
            return {}
        t_last = self.times[-1]
        return {r[4]: r[5] for r in self.rows if r[0] == t_last and r[4]}

    def final_utility(self) -> float:
        if not self.times:
            return 0.0
        t_last = self.times[-1]
        for r in self.rows:
            if r[0] == t_last:
                return r[6]
        return 0.0


def _fmt(x: float) -> str:
    """Stable decimal formatting so identical runs emit identical bytes."""
    return f"{x:.9g}"


class Simulator:
    """Fluid network with one controller per flow.

    ``mode`` selects the controller family: ``"weighted"`` uses the installed
    per-flow weights, ``"unit"`` forces every weight to 1, and ``"fixed"``
    pins send rates at their initial values (an open-loop sender whose goodput
    still suffers route loss).
    """

    def __init__(
        self,
        problem: PlanningProblem,
        config: TransportConfig,
        truth: Topology | None = None,
        mode: str = "weighted",
        dt: float = DEFAULT_DT,
        initial_rates: dict[str, float] | None = None,
    ):
        if mode not in ("weighted", "unit", "fixed"):
            raise ValueError(f"unknown mode {mode!r}")
        self.problem = problem
        self.mode = mode
        self.dt = float(dt)
        self.truth = truth if truth is not None else problem.topology
        self.flows = problem.all_flows()
        self.class_of = {}
        for c in problem.classes:
            for f in problem.flows[c.id]:
                self.class_of[f.id] = c
        self.link_ids = [ln.id for ln in self.truth.links]
        self._lidx = {lid: i for i, lid in enumerate(self.link_ids)}
        nf = len(self.flows)
        nl = len(self.link_ids)
        self.incidence = np.zeros((nl, nf))
        for j, f in enumerate(self.flows):
            for lid in f.route:
                self.incidence[self._lidx[lid], j] = 1.0
        self.capacity = np.array(
            [self.truth.link(lid).capacity_mbps for lid in self.link_ids]
        )
        self.t = 0.0
        self.x = np.full(nf, RATE_FLOOR)
        if initial_rates:
            for j, f in enumerate(self.flows):
                if f.id in initial_rates:
                    self.x[j] = max(RATE_FLOOR, initial_rates[f.id])
        self.install_config(config, reset_rates=False)
        self._fixed_rates = self.x.copy()
        self._history: list[np.ndarray] = []

    # -- configuration ----------------------------------------------------

    def install_config(self, config: TransportConfig, reset_rates: bool = True) -> None:
        """Adopt new weights and session counts; optionally restart from the floor."""
        self.config = config
        self.w = np.array([config.weights.get(f.id, 0.0) for f in self.flows])
        self.n = np.array(
            [float(config.sessions.get(f.class_id, 0)) for f in self.flows]
        )
        if self.mode == "unit":
            self.w = np.ones_like(self.w)
        w_max = float(self.w.max()) if self.w.size else 0.0
        self.gain_norm = config.gain / w_max if w_max > 0 else config.gain
        if reset_rates:
            self.x = np.full(len(self.flows), RATE_FLOOR)
            if self.mode == "fixed":
                self._fixed_rates = self.x.copy()
        self._history = []

    def set_capacity(self, lid: str, capacity_mbps: float) -> None:
        if not (capacity_mbps > 0):
            raise ValueError(f"capacity must be > 0, got {capacity_mbps}")
        self.capacity[self._lidx[lid]] = capacity_mbps

    def set_sessions(self, class_id: str, n: int) -> None:
        if n < 0:
            raise ValueError("session count must be >= 0")
        for j, f in enumerate(self.flows):
            if f.class_id == class_id:
                self.n[j] = float(n)

    # -- dynamics ---------------------------------------------------------

    def link_loss(self) -> np.ndarray:
        y = self.incidence @ (self.n * self.x)
        with np.errstate(divide="ignore", invalid="ignore"):
            p = np.where(y > self.capacity, (y - self.capacity) / np.maximum(y, 1e-300), 0.0)
        return p

    def path_success(self) -> np.ndarray:
        p = self.link_loss()
        return np.exp(self.incidence.T @ np.log1p(-np.minimum(p, 1.0 - 1e-12)))

    def step(self) -> None:
        succ = self.path_success()
        loss = 1.0 - succ
        if self.mode == "fixed":
            self.x = self._fixed_rates.copy()
        else:
            dx = self.gain_norm * self.x * (succ * self.w - loss * self.x)
            self.x = np.maximum(RATE_FLOOR, self.x + self.dt * dx)
        self.t += self.dt

    def goodputs(self) -> np.ndarray:
        """Per-session goodput per flow: send rate times route success."""
        return self.x * self.path_success()

    def utility(self) -> float:
        good = self.goodputs()
        per_session: dict[str, float] = {}
        for j, f in enumerate(self.flows):
            per_session[f.class_id] = per_session.get(f.class_id, 0.0) + float(good[j])
        n = {}
        for c in self.problem.classes:
            idxs = [j for j, f in enumerate(self.flows) if f.class_id == c.id]
            n[c.id] = int(round(self.n[idxs[0]])) if idxs else 0
        return cumulative_utility(self.problem.classes, n, per_session)

    # -- runs -------------------------------------------------------------

    def run(
        self,
        duration: float | None = None,
        events: list[SimEvent] | None = None,
        sample_every: float = 1.0,
        stop_on_convergence: bool = False,
        max_time: float = 10_000.0,
    ) -> SimTrace:
        """Advance the simulation, applying events and sampling the trace.

        With ``stop_on_convergence`` the run ends once every send rate has
        changed by less than 0.1% over one simulated second (and all events
        have fired), or at ``max_time``.
        """
        events = sorted(events or [], key=lambda e: e.t)
        trace = SimTrace()
        horizon = self.t + duration if duration is not None else max_time
        ei = 0
        window = max(1, int(round(CONVERGENCE_WINDOW / self.dt)))
        sample_steps = max(1, int(round(sample_every / self.dt)))
        steps = 0
        self._sample(trace)
        ref = self.x.copy()
        while self.t < horizon - 1e-12:
            while ei < len(events) and events[ei].t <= self.t + 1e-12:
                self._apply(events[ei])
                ref = self.x.copy()
                steps = 0
                ei += 1
            self.step()
            steps += 1
            if steps % sample_steps == 0:
                self._sample(trace)
            if steps % window == 0:
                if (
                    stop_on_convergence
                    and ei >= len(events)
                    # Strict: the max-weight flow's loss-free growth is exactly
                    # 0.1%/s (gain_norm * w_max = gain), so <= would fire mid-ramp.
                    and np.all(np.abs(self.x - ref) < CONVERGENCE_REL * np.maximum(ref, RATE_FLOOR))
                ):
                    trace.converged_at = self.t
                    break
                ref = self.x.copy()
        if steps % sample_steps != 0:
            self._sample(trace)
        return trace

    def _apply(self, ev: SimEvent) -> None:
        if ev.kind == "set-capacity":
            self.set_capacity(ev.payload["link"], ev.payload["capacity_mbps"])
        elif ev.kind == "set-sessions":
            self.set_sessions(ev.payload["class"], ev.payload["n"])
        else:
            cfg = ev.payload["config"]
            self.install_config(cfg, reset_rates=ev.payload.get("reset_rates", False))
            if "rates" in ev.payload:
                # Abrupt switch to the new plan's starting rates.
                for j, f in enumerate(self.flows):
                    if f.id in ev.payload["rates"]:
                        self.x[j] = max(RATE_FLOOR, ev.payload["rates"][f.id])
                if self.mode == "fixed":
                    self._fixed_rates = self.x.copy()

    def _sample(self, trace: SimTrace) -> None:
        good = self.goodputs()
        cg: dict[str, float] = {}
        for j, f in enumerate(self.flows):
            cg[f.class_id] = cg.get(f.class_id, 0.0) + float(self.n[j] * good[j])
        util = self.utility()
        t = round(self.t, 9)
        trace.times.append(t)
        for j, f in enumerate(self.flows):
            trace.rows.append(
                (
                    t,
                    f.id,
                    float(self.x[j]),
                    float(good[j]),
                    f.class_id,
                    cg[f.class_id],
                    util,
                )
            )
        # Summary row: aggregate (session-weighted) send rate and goodput.
        total_send = float(np.sum(self.n * self.x))
        total_good = float(np.sum(self.n * good))
        trace.rows.append((t, "", total_send, total_good, "", total_good, util))


def run_to_equilibrium(
    problem: PlanningProblem,
    config: TransportConfig,
    truth: Topology | None = None,
    mode: str = "weighted",
    dt: float = DEFAULT_DT,
    max_time: float = 10_000.0,
    initial_rates: dict[str, float] | None = None,
) -> SimTrace:
    """Convenience wrapper: simulate until send rates settle."""
    sim = Simulator(problem, config, truth=truth, mode=mode, dt=dt,
                    initial_rates=initial_rates)
    return sim.run(stop_on_convergence=True, max_time=max_time)
