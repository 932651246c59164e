"""City-scale air-transport environment: a fixed vertiport map, a fleet of
battery-constrained aircraft, and a pool of passengers to deliver.

Discrete time, discrete actions. Each step every aircraft picks one of
eight ordinal horizontal moves, ascend, descend, or no-op; horizontal and
vertical motion never mix within a step. Aircraft fly at a fixed cruise
altitude, land only within a tolerance ring around a vertiport, exchange
passengers FIFO while grounded, and recharge while parked. Rewards combine
per-agent service quality with a fleet-wide delivery bonus, and are zeroed
for any agent violating the pairwise separation distance.

Everything is deterministic given (seed, action sequence).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .energy import (
    CRUISE_ALTITUDE_M,
    AircraftSpec,
    BatterySpec,
    EnergyState,
    charge,
    step_energy,
)

_DIAG = 1.0 / math.sqrt(2.0)

#: Unit direction vectors of the eight ordinal horizontal moves.
HORIZONTAL_DIRECTIONS = np.array([
    [1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0],
    [_DIAG, _DIAG], [_DIAG, -_DIAG], [-_DIAG, _DIAG], [-_DIAG, -_DIAG],
])

ACTION_ASCEND = 8
ACTION_DESCEND = 9
ACTION_NOOP = 10
N_ACTIONS = 11

WAITING = "waiting"
ONBOARD = "onboard"
DELIVERED = "delivered"

POMDP = "pomdp"
FOMDP = "fomdp"


class ConfigError(ValueError):
    """World configuration violates an invariant."""


class EpisodeOverError(RuntimeError):
    """step() was called on a finished episode."""


@dataclass(frozen=True)
class Vertiport:
    id: str
    name: str
    x: float
    y: float


#: Five-port layout approximating the Dallas--Fort Worth metro geometry on
#: the default 64 km box (coordinates in meters from the map center).
DEFAULT_VERTIPORTS = (
    Vertiport("A", "DFW Airport", -6000.0, 1500.0),
    Vertiport("B", "Fort Worth", -30000.0, -13500.0),
    Vertiport("C", "Downtown Dallas", 14000.0, -10500.0),
    Vertiport("D", "Love Field", 10000.0, -3500.0),
    Vertiport("E", "Frisco", 12500.0, 26500.0),
)


@dataclass(frozen=True)
class WorldConfig:
    """Environment parameters; defaults reproduce the reference setup."""

    vertiports: tuple = DEFAULT_VERTIPORTS
    half_extent: float = 32000.0        # map is [-half_extent, half_extent]^2
    episode_minutes: float = 60.0
    step_seconds: float = 60.0
    n_uams: int = 10
    n_passengers: int = 20
    obs_range: float = 16000.0          # distances beyond this are masked
    collision_distance: float = 500.0   # minimum pairwise separation
    aircraft: AircraftSpec = AircraftSpec()
    battery: BatterySpec = BatterySpec()

    def __post_init__(self):
        ids = [v.id for v in self.vertiports]
        if len(set(ids)) != len(ids):
            raise ConfigError(f"vertiport ids must be unique, got {ids}")
        for v in self.vertiports:
            if abs(v.x) > self.half_extent or abs(v.y) > self.half_extent:
                raise ConfigError(f"vertiport {v.id} at ({v.x}, {v.y}) lies outside the map box")
        if self.n_uams < 1:
            raise ConfigError("need at least one aircraft")
        if self.n_passengers < 0:
            raise ConfigError("passenger count must be non-negative")
        if self.step_seconds <= 0 or self.episode_minutes <= 0:
            raise ConfigError("time parameters must be positive")

    @property
    def n_vertiports(self) -> int:
        return len(self.vertiports)

    @property
    def n_steps(self) -> int:
        return int(round(self.episode_minutes * 60.0 / self.step_seconds))

    @property
    def landing_tolerance(self) -> float:
        """Half of one full-speed step: the ring in which a descent lands."""
        return self.aircraft.cruise_speed * self.step_seconds / 2.0

    @property
    def obs_dim(self) -> int:
        return 3 + (self.n_uams - 1) + self.n_vertiports + self.aircraft.max_passengers + 1

    @property
    def state_dim(self) -> int:
        return self.n_uams * (self.n_passengers + self.n_vertiports + self.aircraft.max_passengers)

    @property
    def n_actions(self) -> int:
        return N_ACTIONS

    def vertiport_xy(self) -> np.ndarray:
        return np.array([[v.x, v.y] for v in self.vertiports])


@dataclass
class Passenger:
    id: int
    origin: int
    destination: int
    status: str = WAITING
    uam: int = -1
    seat: int = -1
    queue_entry_order: int = 0


@dataclass
class UamState:
    id: int
    position: np.ndarray                # (x, y, z) meters
    seats: np.ndarray                   # passenger id per seat, -1 empty
    energy: EnergyState
    grounded_at: int | None             # vertiport index or None


@dataclass(frozen=True)
class Observation:
    """One agent's partial view; distances it cannot see are -1."""

    position: np.ndarray                # own (x, y, z)
    uam_distances: np.ndarray           # (J-1,) to the other agents, masked
    vertiport_distances: np.ndarray     # (N,), masked
    seat_encoding: np.ndarray           # destination index / N, -1 if empty
    energy_frac: float
    state: np.ndarray | None = None     # full state vector (full-observability mode)

    def vector(self) -> np.ndarray:
        return np.concatenate([
            self.position,
            self.uam_distances,
            self.vertiport_distances,
            self.seat_encoding,
            [self.energy_frac],
        ])


@dataclass(frozen=True)
class WorldState:
    """Ground truth: service/visit indicators and per-seat target distances,
    plus the kinematic fields the reward needs (positions, energy)."""

    serviced: np.ndarray                # (J, Xi) 0/1, monotone within an episode
    visited: np.ndarray                 # (J, N) 0/1, monotone
    seat_distance_m: np.ndarray         # (J, seats) meters to target, -1 empty
    positions: np.ndarray               # (J, 3)
    energy_frac: np.ndarray             # (J,)

    def copy(self) -> "WorldState":
        return WorldState(
            self.serviced.copy(), self.visited.copy(), self.seat_distance_m.copy(),
            self.positions.copy(), self.energy_frac.copy(),
        )


@dataclass(frozen=True)
class RewardBreakdown:
    indiv: np.ndarray                   # (J,) individual terms, collision-gated
    comm: float                         # shared delivery bonus
    per_agent: np.ndarray               # (J,) indiv + comm, what each agent sees
    team: float                         # sum(indiv) + comm, the critic target
    collided: np.ndarray                # (J,) bool


def compute_reward(prev: WorldState, nxt: WorldState, half_extent: float,
                   collision_distance: float) -> RewardBreakdown:
    """Reward for the transition prev -> nxt.

    indiv_j = [all pairwise separations >= threshold] * (services_j +
    visits_j - occupied-seat distance penalty + energy fraction); the
    shared bonus is the fleet's newly delivered passengers divided by J,
    added to every agent. Empty seats contribute nothing to the penalty.
    """
    n_agents = nxt.positions.shape[0]
    diffs = nxt.positions[:, None, :] - nxt.positions[None, :, :]
    dist = np.sqrt((diffs ** 2).sum(axis=-1))
    np.fill_diagonal(dist, np.inf)
    collided = (dist < collision_distance).any(axis=1)

    seat_pen = np.where(nxt.seat_distance_m >= 0, nxt.seat_distance_m, 0.0).sum(axis=1)
    indiv = (
        nxt.serviced.sum(axis=1)
        + nxt.visited.sum(axis=1)
        - seat_pen / (half_extent / 2.0)
        + nxt.energy_frac
    )
    indiv = np.where(collided, 0.0, indiv)

    newly_delivered = (nxt.serviced - prev.serviced).sum()
    comm = float(newly_delivered) / n_agents
    per_agent = indiv + comm
    return RewardBreakdown(indiv=indiv, comm=comm, per_agent=per_agent,
                           team=float(indiv.sum() + comm), collided=collided)


class UamWorld:
    """One episode of the fleet simulation. Single-threaded by design;
    run separate instances for separate seeds."""

    def __init__(self, config: WorldConfig, seed):
        if config.n_vertiports < 2:
            raise ConfigError("need at least two vertiports so origin != destination")
        self.config = config
        self.seed = seed
        rng = np.random.default_rng(seed)
        n, j = config.n_vertiports, config.n_uams
        ports = config.vertiport_xy()

        starts = rng.integers(0, n, size=j)
        self.uams = []
        for i in range(j):
            pos = np.array([ports[starts[i], 0], ports[starts[i], 1], 0.0])
            self.uams.append(UamState(
                id=i, position=pos,
                seats=np.full(config.aircraft.max_passengers, -1, dtype=int),
                energy=EnergyState(config.battery.capacity_kwh),
                grounded_at=int(starts[i]),
            ))

        self.passengers = []
        for pid in range(config.n_passengers):
            origin = int(rng.integers(0, n))
            dest = int(rng.integers(0, n - 1))
            if dest >= origin:
                dest += 1
            self.passengers.append(Passenger(
                id=pid, origin=origin, destination=dest, queue_entry_order=pid,
            ))

        self.serviced = np.zeros((j, config.n_passengers))
        self.visited = np.zeros((j, n))
        # distinct-vertiport bookkeeping for metrics includes the starting
        # pad; the reward-side indicator starts all-zero and only flips once
        # an aircraft spends a step grounded there.
        self.visited_types = np.zeros((j, n), dtype=bool)
        self.visited_types[np.arange(j), starts] = True
        self.landings = np.ones(j, dtype=int)       # initial placement counts
        self.collision_events = np.zeros(j, dtype=int)

        self.t = 0
        self.done = False
        self.trajectory = []                        # one record per step

    # -- state access ------------------------------------------------------

    def snapshot(self) -> WorldState:
        cfg = self.config
        j = cfg.n_uams
        seat_dist = np.full((j, cfg.aircraft.max_passengers), -1.0)
        ports = cfg.vertiport_xy()
        for u in self.uams:
            for lam, pid in enumerate(u.seats):
                if pid >= 0:
                    target = ports[self.passengers[pid].destination]
                    seat_dist[u.id, lam] = float(
                        np.hypot(u.position[0] - target[0], u.position[1] - target[1])
                    )
        return WorldState(
            serviced=self.serviced.copy(),
            visited=self.visited.copy(),
            seat_distance_m=seat_dist,
            positions=np.array([u.position for u in self.uams]),
            energy_frac=np.array([u.energy.kwh / cfg.battery.capacity_kwh for u in self.uams]),
        )

    def state_vector(self) -> np.ndarray:
        """Flat ground-truth vector: serviced, visited, seat distances / map
        half-extent (-1 kept for empty seats)."""
        snap = self.snapshot()
        seat = np.where(
            snap.seat_distance_m >= 0,
            snap.seat_distance_m / self.config.half_extent,
            -1.0,
        )
        return np.concatenate([snap.serviced.ravel(), snap.visited.ravel(), seat.ravel()])

    def observe(self, j: int, mode: str = POMDP) -> Observation:
        cfg = self.config
        if mode not in (POMDP, FOMDP):
            raise ValueError(f"unknown mode {mode!r}")
        me = self.uams[j]
        xy = me.position[:2]
        uam_d = []
        for other in self.uams:
            if other.id == j:
                continue
            uam_d.append(float(np.hypot(*(xy - other.position[:2]))))
        vert_d = [float(np.hypot(*(xy - np.array([v.x, v.y])))) for v in cfg.vertiports]
        uam_d = np.array(uam_d)
        vert_d = np.array(vert_d)
        if mode == POMDP:
            uam_d = np.where(uam_d <= cfg.obs_range, uam_d, -1.0)
            vert_d = np.where(vert_d <= cfg.obs_range, vert_d, -1.0)
        seats = np.full(cfg.aircraft.max_passengers, -1.0)
        for lam, pid in enumerate(me.seats):
            if pid >= 0:
                seats[lam] = self.passengers[pid].destination / cfg.n_vertiports
        return Observation(
            position=me.position.copy(),
            uam_distances=uam_d,
            vertiport_distances=vert_d,
            seat_encoding=seats,
            energy_frac=me.energy.kwh / cfg.battery.capacity_kwh,
            state=self.state_vector() if mode == FOMDP else None,
        )

    def observe_all(self, mode: str = POMDP):
        return [self.observe(j, mode) for j in range(self.config.n_uams)]

    # -- dynamics ------------------------------------------------------------

    def step(self, actions):
        """Advance one step. Returns (state, observations, rewards, done)."""
        if self.done:
            raise EpisodeOverError("episode already finished")
        cfg = self.config
        actions = np.asarray(actions, dtype=int)
        if actions.shape != (cfg.n_uams,):
            raise ValueError(f"expected {cfg.n_uams} actions, got shape {actions.shape}")
        if actions.min() < 0 or actions.max() >= N_ACTIONS:
            raise ValueError("action index out of range")

        prev = self.snapshot()
        events = []
        dt = cfg.step_seconds
        step_len = cfg.aircraft.cruise_speed * dt
        ports = cfg.vertiport_xy()
        applied = actions.copy()

        for u in self.uams:
            act = int(actions[u.id])
            if u.energy.kwh <= 0.0:
                act = ACTION_NOOP          # drained: grounded until recharged
            applied[u.id] = act
            was_grounded = u.grounded_at is not None
            airborne = not was_grounded

            if act < ACTION_ASCEND and airborne:
                target = u.position[:2] + HORIZONTAL_DIRECTIONS[act] * step_len
                clamped = np.clip(target, -cfg.half_extent, cfg.half_extent)
                moved = float(np.hypot(*(clamped - u.position[:2])))
                u.position[:2] = clamped
                u.energy = step_energy(u.energy, moved, False, dt, cfg.aircraft, cfg.battery)
            elif act == ACTION_ASCEND and was_grounded:
                u.position[2] = CRUISE_ALTITUDE_M
                u.grounded_at = None
                u.energy = step_energy(u.energy, 0.0, True, dt, cfg.aircraft, cfg.battery)
            elif act == ACTION_DESCEND and airborne:
                d = np.hypot(ports[:, 0] - u.position[0], ports[:, 1] - u.position[1])
                nearest = int(np.argmin(d))
                u.energy = step_energy(u.energy, 0.0, True, dt, cfg.aircraft, cfg.battery)
                if d[nearest] <= cfg.landing_tolerance:
                    u.position[:2] = ports[nearest]
                    u.position[2] = 0.0
                    u.grounded_at = nearest
                    self.landings[u.id] += 1
                    events.append({"type": "landing", "uam": u.id,
                                   "vertiport": cfg.vertiports[nearest].id})
                else:
                    events.append({"type": "missed_landing", "uam": u.id})
            # any other combination (horizontal while grounded, ascend while
            # airborne, descend while grounded, no-op) leaves the pose alone

            if was_grounded and u.grounded_at is not None:
                u.energy = charge(u.energy, dt, cfg.battery)

        # ground operations after all movement: alight, then board FIFO
        for u in self.uams:
            if u.grounded_at is None:
                continue
            port = u.grounded_at
            for lam, pid in enumerate(u.seats):
                if pid >= 0 and self.passengers[pid].destination == port:
                    p = self.passengers[pid]
                    p.status = DELIVERED
                    p.uam = -1
                    p.seat = -1
                    u.seats[lam] = -1
                    self.serviced[u.id, pid] = 1.0
                    events.append({"type": "delivery", "uam": u.id, "passenger": pid,
                                   "vertiport": cfg.vertiports[port].id})
            waiting = sorted(
                (p for p in self.passengers if p.status == WAITING and p.origin == port),
                key=lambda p: p.queue_entry_order,
            )
            free = [lam for lam, pid in enumerate(u.seats) if pid < 0]
            for p, lam in zip(waiting, free):
                p.status = ONBOARD
                p.uam = u.id
                p.seat = lam
                u.seats[lam] = p.id
                events.append({"type": "boarding", "uam": u.id, "passenger": p.id,
                               "vertiport": cfg.vertiports[port].id})
            self.visited[u.id, port] = 1.0
            self.visited_types[u.id, port] = True

        self.t += 1
        self.done = self.t >= cfg.n_steps

        nxt = self.snapshot()
        reward = compute_reward(prev, nxt, cfg.half_extent, cfg.collision_distance)
        self.collision_events += reward.collided.astype(int)
        if reward.collided.any():
            events.append({"type": "collision",
                           "uams": [int(i) for i in np.where(reward.collided)[0]]})

        self.trajectory.append({
            "t": self.t,
            "positions": [[float(c) for c in u.position] for u in self.uams],
            "actions": [int(a) for a in applied],
            "rewards": [float(r) for r in reward.per_agent],
            "energy_kwh": [float(u.energy.kwh) for u in self.uams],
            "events": events,
        })
        observations = self.observe_all()
        return nxt, observations, reward.per_agent, self.done

    # -- episode summary ----------------------------------------------------

    def waiting_count(self) -> int:
        return sum(1 for p in self.passengers if p.status == WAITING)

    def onboard_count(self) -> int:
        return sum(1 for p in self.passengers if p.status == ONBOARD)

    def delivered_count(self) -> int:
        return sum(1 for p in self.passengers if p.status == DELIVERED)


def new_episode(config: WorldConfig, seed) -> UamWorld:
    """Fresh environment: aircraft at random pads with full batteries,
    passengers with random origin and distinct random destination."""
    return UamWorld(config, seed)


def observation_features(obs: Observation, config: WorldConfig) -> np.ndarray:
    """Observation vector rescaled for a network input.

    Positions map to map-halves / altitude fraction, visible distances to
    multiples of the half-extent; mask sentinels, seat encodings, and the
    energy fraction are already unit-scale and pass through. In
    full-observability mode the (already unit-scale) state vector is
    prepended.
    """
    gamma = config.half_extent
    pos = np.array([
        obs.position[0] / gamma,
        obs.position[1] / gamma,
        obs.position[2] / CRUISE_ALTITUDE_M,
    ])
    uam_d = np.where(obs.uam_distances >= 0, obs.uam_distances / gamma, -1.0)
    vert_d = np.where(obs.vertiport_distances >= 0, obs.vertiport_distances / gamma, -1.0)
    local = np.concatenate([pos, uam_d, vert_d, obs.seat_encoding, [obs.energy_frac]])
    if obs.state is not None:
        return np.concatenate([obs.state, local])
    return local


def feature_dim(config: WorldConfig, mode: str) -> int:
    """Width of the learner input for the given observability mode."""
    if mode == FOMDP:
        return config.state_dim + config.obs_dim
    return config.obs_dim

