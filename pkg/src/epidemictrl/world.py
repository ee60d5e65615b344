"""Population synthesis, geography and per-tick movement.

State is kept in flat numpy arrays (one slot per agent) so that a
100,000-agent world steps in milliseconds; `agent()` and `house()` build
read-only views for inspection and tests.

A day is two 12-hour ticks: even ticks are the home phase, odd ticks the
work/school phase. Agents over 30 are employed and commute to offices,
everyone else is a student and commutes to school. Symptomatic agents stay
home, hospitalized agents stay in a hospital, and during a lockdown only
essential workers and lockdown violators commute.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from .epidemic import Compartment, SYMPTOMATIC_COMPARTMENTS
from .rng import RngStreams

EMPLOYMENT_AGE = 30  # strictly older than this means employed
PEOPLE_PER_HOSPITAL = 25_000


class Role(IntEnum):
    STUDENT = 0
    EMPLOYED = 1


class LocationKind(IntEnum):
    HOUSE = 0
    OFFICE = 1
    SCHOOL = 2
    HOSPITAL = 3


@dataclass
class WorldConfig:
    population_size: int = 100_000
    household_size: int = 4
    office_capacity: int = 50
    school_capacity: int = 200
    hospitals: int | None = None  # defaults to ceil(population / 25,000)
    essential_worker_fraction: float = 0.20
    violator_fraction: float = 0.10
    episode_days: int = 100
    seed: int = 0

    def validate(self) -> None:
        if self.population_size < 1:
            raise ValueError("population_size must be at least 1")
        if self.household_size < 1:
            raise ValueError("household_size must be at least 1")
        if self.office_capacity < 1 or self.school_capacity < 1:
            raise ValueError("office and school capacities must be at least 1")
        if self.hospitals is not None and self.hospitals < 1:
            raise ValueError("hospitals must be at least 1")
        for name in ("essential_worker_fraction", "violator_fraction"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value}")
        if self.episode_days < 1:
            raise ValueError("episode_days must be at least 1")

    @property
    def hospital_count(self) -> int:
        if self.hospitals is not None:
            return self.hospitals
        return max(1, math.ceil(self.population_size / PEOPLE_PER_HOSPITAL))


@dataclass(frozen=True)
class Agent:
    """Read-only view of one agent's slot."""

    id: int
    age: int
    role: Role
    house_id: int
    workplace_loc: int
    hospital_loc: int
    is_essential: bool
    is_violator: bool
    compartment: Compartment
    ticks_remaining: int
    vaccinated: bool
    vaccine_index: int


@dataclass(frozen=True)
class House:
    id: int
    member_ids: tuple[int, ...]
    head_id: int
    savings: float | None
    daily_income: float | None


@dataclass
class WorldState:
    config: WorldConfig
    streams: RngStreams
    tick: int

    age: np.ndarray
    employed: np.ndarray
    house_id: np.ndarray
    workplace_loc: np.ndarray
    hospital_loc: np.ndarray
    is_essential: np.ndarray
    is_violator: np.ndarray

    compartment: np.ndarray
    ticks_remaining: np.ndarray
    vaccinated: np.ndarray
    vaccine_index: np.ndarray
    vax_susceptibility: np.ndarray

    house_head: np.ndarray
    location_of: np.ndarray

    n_houses: int
    n_offices: int
    n_schools: int
    n_hospitals: int

    # set by economy.init_house_ledgers
    savings_cents: np.ndarray | None = None
    income_cents: np.ndarray | None = None
    economy_config: object | None = field(default=None, repr=False)

    @property
    def population(self) -> int:
        return self.config.population_size

    @property
    def n_locations(self) -> int:
        return self.n_houses + self.n_offices + self.n_schools + self.n_hospitals

    @property
    def office_base(self) -> int:
        return self.n_houses

    @property
    def school_base(self) -> int:
        return self.n_houses + self.n_offices

    @property
    def hospital_base(self) -> int:
        return self.n_houses + self.n_offices + self.n_schools

    @property
    def alive(self) -> np.ndarray:
        return self.compartment != Compartment.DECEASED

    def location_kind(self, loc: int) -> LocationKind:
        if not 0 <= loc < self.n_locations:
            raise ValueError(f"location {loc} out of range")
        if loc < self.office_base:
            return LocationKind.HOUSE
        if loc < self.school_base:
            return LocationKind.OFFICE
        if loc < self.hospital_base:
            return LocationKind.SCHOOL
        return LocationKind.HOSPITAL

    def compartment_counts(self) -> np.ndarray:
        return np.bincount(self.compartment, minlength=len(Compartment))

    def house_members(self, house: int) -> np.ndarray:
        size = self.config.household_size
        start = house * size
        return np.arange(start, min(start + size, self.population))

    def occupants_of(self, loc: int) -> np.ndarray:
        return np.flatnonzero(self.location_of == loc)

    def agent(self, i: int) -> Agent:
        return Agent(
            id=i,
            age=int(self.age[i]),
            role=Role.EMPLOYED if self.employed[i] else Role.STUDENT,
            house_id=int(self.house_id[i]),
            workplace_loc=int(self.workplace_loc[i]),
            hospital_loc=int(self.hospital_loc[i]),
            is_essential=bool(self.is_essential[i]),
            is_violator=bool(self.is_violator[i]),
            compartment=Compartment(int(self.compartment[i])),
            ticks_remaining=int(self.ticks_remaining[i]),
            vaccinated=bool(self.vaccinated[i]),
            vaccine_index=int(self.vaccine_index[i]),
        )

    def house(self, h: int) -> House:
        members = tuple(int(i) for i in self.house_members(h))
        savings = income = None
        if self.savings_cents is not None:
            savings = self.savings_cents[h] / 100.0
            income = self.income_cents[h] / 100.0
        return House(
            id=h,
            member_ids=members,
            head_id=int(self.house_head[h]),
            savings=savings,
            daily_income=income,
        )


def synthesize_population(
    config: WorldConfig, streams: RngStreams | None = None
) -> WorldState:
    """Build a fresh world: ages, households, workplaces and flags.

    Agents are grouped into households in index order (the last house may be
    smaller); the oldest member heads each house. Employed agents are packed
    into offices, students into schools, in index order. Everyone starts at
    home with the clock at tick 0.
    """
    config.validate()
    if streams is None:
        streams = RngStreams.from_seed(config.seed)
    rng = streams.population
    n = config.population_size

    age = rng.integers(0, 100, size=n).astype(np.int16)
    employed = age > EMPLOYMENT_AGE

    essential_draw = rng.random(n) < config.essential_worker_fraction
    is_essential = essential_draw & employed  # only employed agents can be essential
    is_violator = rng.random(n) < config.violator_fraction

    hs = config.household_size
    n_houses = math.ceil(n / hs)
    house_id = (np.arange(n) // hs).astype(np.int32)

    # Oldest member heads the house; ties break toward the lower agent id.
    order = np.lexsort((np.arange(n), -age.astype(np.int64), house_id))
    house_head = order[np.arange(n_houses) * hs].astype(np.int32)

    emp_ids = np.flatnonzero(employed)
    stu_ids = np.flatnonzero(~employed)
    n_offices = math.ceil(emp_ids.size / config.office_capacity) if emp_ids.size else 0
    n_schools = math.ceil(stu_ids.size / config.school_capacity) if stu_ids.size else 0
    n_hospitals = config.hospital_count

    office_base = n_houses
    school_base = n_houses + n_offices
    hospital_base = n_houses + n_offices + n_schools

    workplace_loc = np.empty(n, dtype=np.int32)
    workplace_loc[emp_ids] = office_base + np.arange(emp_ids.size) // config.office_capacity
    workplace_loc[stu_ids] = school_base + np.arange(stu_ids.size) // config.school_capacity

    hospital_loc = (hospital_base + np.arange(n) % n_hospitals).astype(np.int32)

    return WorldState(
        config=config,
        streams=streams,
        tick=0,
        age=age,
        employed=employed,
        house_id=house_id,
        workplace_loc=workplace_loc,
        hospital_loc=hospital_loc,
        is_essential=is_essential,
        is_violator=is_violator,
        compartment=np.full(n, Compartment.SUSCEPTIBLE, dtype=np.int8),
        ticks_remaining=np.zeros(n, dtype=np.int32),
        vaccinated=np.zeros(n, dtype=bool),
        vaccine_index=np.zeros(n, dtype=np.int8),
        vax_susceptibility=np.ones(n, dtype=np.float64),
        house_head=house_head,
        location_of=house_id.astype(np.int32).copy(),
        n_houses=n_houses,
        n_offices=n_offices,
        n_schools=n_schools,
        n_hospitals=n_hospitals,
    )


def scheduled_location(agent: Agent, tick: int, lockdown_active: bool) -> int:
    """Where one live agent belongs at the given tick.

    Reference implementation of the movement rules; `scheduled_locations`
    is the vectorized equivalent used by the engine.
    """
    if agent.compartment == Compartment.DECEASED:
        raise ValueError("deceased agents have no scheduled location")
    if agent.compartment == Compartment.HOSPITALIZED:
        return agent.hospital_loc
    if tick % 2 == 0:  # home phase
        return agent.house_id
    if agent.compartment in SYMPTOMATIC_COMPARTMENTS:
        return agent.house_id
    if lockdown_active and not (agent.is_essential or agent.is_violator):
        return agent.house_id
    return agent.workplace_loc


def scheduled_locations(
    world: WorldState, tick: int, lockdown_active: bool
) -> np.ndarray:
    """Vectorized movement: location index per agent, -1 for the deceased."""
    comp = world.compartment
    loc = world.house_id.astype(np.int32, copy=True)  # house location == house id

    if tick % 2 == 1:  # work/school phase
        commutes = (comp != Compartment.INFECTED_MILD) & (
            comp != Compartment.INFECTED_SEVERE
        )
        if lockdown_active:
            commutes &= world.is_essential | world.is_violator
        loc[commutes] = world.workplace_loc[commutes]

    hospitalized = comp == Compartment.HOSPITALIZED
    loc[hospitalized] = world.hospital_loc[hospitalized]
    loc[comp == Compartment.DECEASED] = -1
    return loc


def apply_movement(world: WorldState, lockdown_active: bool = False) -> None:
    """Place every live agent for the current tick."""
    if world.tick >= 2 * world.config.episode_days:
        raise ValueError(
            f"tick {world.tick} past the end of the {world.config.episode_days}-day episode"
        )
    world.location_of = scheduled_locations(world, world.tick, lockdown_active)
