"""Fixed-step integration of composite Hamiltonian systems.

Two methods: classic rk4 (any Hamiltonian) and Störmer–Verlet in
kick-drift-kick form, which requires H to split structurally as T(p)+V(q)
after folding.  Step size is constant — no adaptivity — so runs are exactly
reproducible and error thresholds stay meaningful.

Boundary driving models an open system's inputs: a driven coordinate is
clamped to its time function at every stage, and its conjugate momentum is
frozen out of the evolved state.  This is a modeling choice, the simplest
consistent with "someone outside holds this coordinate".

Trajectory CSV contract: header ``t,<coord...>,<monitor...>`` in apex
coordinate order, one row per step, floats with 17 significant digits,
newline-terminated.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

from .errors import DomainError, NonSeparable, UnboundVariable
from .expr import Add, Const, Expr, Neg
from .geometry import PhaseSpace, hamiltonian_vector_field
from .hamsy import OpenHamiltonianSystem

METHODS = ("rk4", "verlet")


@dataclass(frozen=True)
class IntegratorConfig:
    dt: float
    t_end: float
    method: str = "rk4"
    params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r} (use one of {METHODS})")
        if not self.dt > 0.0:
            raise ValueError("dt must be positive")
        if not self.t_end > 0.0:
            raise ValueError("t_end must be positive")
        if self.dt > self.t_end:
            raise ValueError("dt must not exceed t_end")
        object.__setattr__(self, "params", dict(self.params))


@dataclass
class Trajectory:
    coords: tuple[str, ...]
    times: list[float]
    states: list[tuple[float, ...]]
    monitors: dict[str, list[float]]
    params: dict[str, float]
    dt: float

    def binding_at(self, index: int) -> dict[str, float]:
        b = dict(self.params)
        b.update(zip(self.coords, self.states[index]))
        return b


def is_separable(H: Expr, space: PhaseSpace) -> bool:
    """H splits as a sum whose addends touch only q's or only p's."""
    qs = {pair.q for pair in space.pairs}
    ps = {pair.p for pair in space.pairs}
    terms = H.args if isinstance(H, Add) else (H,)
    for term in terms:
        if isinstance(term, Neg):
            term = term.args[0]
        used = term.free_vars()
        if used & qs and used & ps:
            return False
    return True


def simulate(
    system: OpenHamiltonianSystem,
    init: Mapping[str, float],
    cfg: IntegratorConfig,
    boundary: Mapping[str, Callable[[float], float]] | None = None,
    monitors: Mapping[str, Expr] | None = None,
    convention: str = "inverse",
) -> Trajectory:
    """Integrate Hamilton's equations from init for t_end/dt steps.

    init must bind every apex coordinate.  boundary maps coordinate names
    to functions of time; driven coordinates follow their function and
    their conjugate momenta are excluded from the evolved state.  monitors
    are recorded at every step (and drive the CSV's extra columns)."""
    apex = system.apex
    coords = apex.coords
    missing = set(coords) - set(init)
    if missing:
        raise UnboundVariable(sorted(missing)[0])

    boundary = dict(boundary or {})
    for name in boundary:
        if name not in coords:
            raise UnboundVariable(name)
    frozen = {apex.pair_of(name).p if name == apex.pair_of(name).q else apex.pair_of(name).q
              for name in boundary}
    evolved = [c for c in coords if c not in boundary and c not in frozen]

    field_exprs = dict(hamiltonian_vector_field(system.H, apex, convention))
    monitors = dict(monitors or {})
    scope = set(coords) | set(cfg.params)
    for e in list(field_exprs.values()) + list(monitors.values()) + [system.H]:
        unbound = e.free_vars() - scope
        if unbound:
            raise UnboundVariable(sorted(unbound)[0])

    binding: dict[str, float] = dict(cfg.params)
    for c in coords:
        binding[c] = float(init[c])

    def set_driven(t: float):
        for name, fn in boundary.items():
            binding[name] = float(fn(t))

    def derivs(t: float, values: list[float]) -> list[float]:
        for c, v in zip(evolved, values):
            binding[c] = v
        set_driven(t)
        return [field_exprs[c].eval(binding) for c in evolved]

    steps = max(1, int(round(cfg.t_end / cfg.dt)))
    dt = cfg.dt

    if cfg.method == "verlet":
        if not is_separable(system.H, apex):
            raise NonSeparable("Hamiltonian does not split as T(p) + V(q); use rk4")
        ev_q = [c for c in evolved if c == apex.pair_of(c).q]
        ev_p = [c for c in evolved if c == apex.pair_of(c).p]

    times = [0.0]
    set_driven(0.0)
    states = [tuple(binding[c] for c in coords)]
    monitor_log: dict[str, list[float]] = {name: [] for name in monitors}

    def record_monitors(t: float):
        try:
            for name, e in monitors.items():
                monitor_log[name].append(e.eval(binding))
        except DomainError as err:
            raise DomainError(f"{err} at t={t:.17g}") from None

    record_monitors(0.0)

    y = [binding[c] for c in evolved]
    for step in range(steps):
        t = step * dt
        try:
            if cfg.method == "rk4":
                k1 = derivs(t, y)
                k2 = derivs(t + dt / 2.0, [yi + dt / 2.0 * ki for yi, ki in zip(y, k1)])
                k3 = derivs(t + dt / 2.0, [yi + dt / 2.0 * ki for yi, ki in zip(y, k2)])
                k4 = derivs(t + dt, [yi + dt * ki for yi, ki in zip(y, k3)])
                y = [
                    yi + dt / 6.0 * (a + 2.0 * b + 2.0 * c + d)
                    for yi, a, b, c, d in zip(y, k1, k2, k3, k4)
                ]
            else:
                _verlet_step(binding, field_exprs, ev_q, ev_p, boundary, t, dt)
                y = [binding[c] for c in evolved]
        except DomainError as err:
            raise DomainError(f"{err} at t={t:.17g}") from None
        t_next = (step + 1) * dt
        for c, v in zip(evolved, y):
            binding[c] = v
        set_driven(t_next)
        times.append(t_next)
        states.append(tuple(binding[c] for c in coords))
        record_monitors(t_next)

    return Trajectory(coords, times, states, monitor_log, dict(cfg.params), dt)


def _verlet_step(binding, field_exprs, ev_q, ev_p, boundary, t, dt):
    """Kick-drift-kick: a full step that is symmetric under dt -> -dt."""
    for name, fn in boundary.items():
        binding[name] = float(fn(t))
    kicks = [field_exprs[c].eval(binding) for c in ev_p]
    for c, k in zip(ev_p, kicks):
        binding[c] += dt / 2.0 * k
    for name, fn in boundary.items():
        binding[name] = float(fn(t + dt / 2.0))
    drifts = [field_exprs[c].eval(binding) for c in ev_q]
    for c, d in zip(ev_q, drifts):
        binding[c] += dt * d
    for name, fn in boundary.items():
        binding[name] = float(fn(t + dt))
    kicks = [field_exprs[c].eval(binding) for c in ev_p]
    for c, k in zip(ev_p, kicks):
        binding[c] += dt / 2.0 * k


def energy_drift(trajectory: Trajectory, H: Expr) -> float:
    """max_t |H(state_t) - H(state_0)| / (1 + |H(state_0)|)."""
    first = H.eval(trajectory.binding_at(0))
    worst = 0.0
    for i in range(len(trajectory.times)):
        worst = max(worst, abs(H.eval(trajectory.binding_at(i)) - first))
    return worst / (1.0 + abs(first))


def conserved_residual(trajectory: Trajectory, F: Expr) -> float:
    """max_t |F(state_t) - F(state_0)| (absolute deviation)."""
    first = F.eval(trajectory.binding_at(0))
    worst = 0.0
    for i in range(len(trajectory.times)):
        worst = max(worst, abs(F.eval(trajectory.binding_at(i)) - first))
    return worst


def trajectory_csv(trajectory: Trajectory) -> str:
    """The CSV contract: t, coordinates, monitors; 17 significant digits."""
    names = list(trajectory.coords) + list(trajectory.monitors)
    lines = ["t," + ",".join(names)]
    for i, t in enumerate(trajectory.times):
        row = [f"{t:.17g}"]
        row.extend(f"{v:.17g}" for v in trajectory.states[i])
        row.extend(f"{trajectory.monitors[name][i]:.17g}" for name in trajectory.monitors)
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def write_csv(trajectory: Trajectory, path) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(trajectory_csv(trajectory))
