"""Nine-compartment disease state machine.

Agents sit in exactly one compartment. Exposure happens inside shared
locations through an exponential dose-response on the infectious fraction
of co-located occupants; stage progression is driven by per-agent countdown
timers drawn from log-normal stage durations, with age-stratified branch
probabilities.

Branch structure: leaving Exposed an agent turns Asymptomatic with
probability gamma (else PreSymptomatic); Asymptomatic recovers;
PreSymptomatic turns InfectedMild; InfectedMild turns InfectedSevere with
the severe probability (else recovers); InfectedSevere is always
hospitalized; Hospitalized dies with probability sigma / severe_prob so
that sigma is the unconditional death weight among symptomatic cases.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum
from typing import TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:
    from .world import WorldState

TICKS_PER_DAY = 2
TICK_DAYS = 0.5

# Vaccination shifts the disease course: the asymptomatic branch widens by
# 80% (capped at 1) and an infectious vaccinated agent sheds at 80% weight.
VACCINE_GAMMA_BOOST = 1.8
VACCINATED_SOURCE_WEIGHT = 0.8


class Compartment(IntEnum):
    SUSCEPTIBLE = 0
    EXPOSED = 1
    ASYMPTOMATIC = 2
    PRE_SYMPTOMATIC = 3
    INFECTED_MILD = 4
    INFECTED_SEVERE = 5
    HOSPITALIZED = 6
    RECOVERED = 7
    DECEASED = 8


#: Compartments with a sampled dwell time.
TIMED_COMPARTMENTS = (
    Compartment.EXPOSED,
    Compartment.ASYMPTOMATIC,
    Compartment.PRE_SYMPTOMATIC,
    Compartment.INFECTED_MILD,
    Compartment.INFECTED_SEVERE,
    Compartment.HOSPITALIZED,
)

#: Compartments that keep an agent home during work phases.
SYMPTOMATIC_COMPARTMENTS = (Compartment.INFECTED_MILD, Compartment.INFECTED_SEVERE)

DEFAULT_INFECTIOUS = frozenset(
    {
        Compartment.ASYMPTOMATIC,
        Compartment.PRE_SYMPTOMATIC,
        Compartment.INFECTED_MILD,
        Compartment.INFECTED_SEVERE,
    }
)


@dataclass(frozen=True)
class AgeBandRates:
    """Transition factors for one ten-year age band.

    symptomatic_prob is 1 - gamma (the chance an exposure turns
    symptomatic), severe_prob is 1 - delta (mild cases that escalate) and
    sigma is the unconditional death weight among symptomatic cases.
    """

    beta_multiplier: float
    symptomatic_prob: float
    severe_prob: float
    sigma: float

    @property
    def asymptomatic_prob(self) -> float:
        return 1.0 - self.symptomatic_prob

    @property
    def death_given_hospitalized(self) -> float:
        return min(1.0, self.sigma / self.severe_prob)


# One row per decade of age, 0-9 through 90-99.
DEFAULT_AGE_BANDS: tuple[AgeBandRates, ...] = (
    AgeBandRates(0.34, 0.50, 0.00050, 0.00002),
    AgeBandRates(0.67, 0.55, 0.00165, 0.00002),
    AgeBandRates(1.00, 0.60, 0.00720, 0.00010),
    AgeBandRates(1.00, 0.65, 0.02080, 0.00032),
    AgeBandRates(1.00, 0.70, 0.03430, 0.00098),
    AgeBandRates(1.00, 0.75, 0.07650, 0.00265),
    AgeBandRates(1.00, 0.80, 0.13280, 0.00766),
    AgeBandRates(1.24, 0.85, 0.20655, 0.02439),
    AgeBandRates(1.47, 0.90, 0.24570, 0.08292),
    AgeBandRates(1.47, 0.90, 0.24570, 0.16190),
)

# (mean days, sd days) spent in each timed compartment.
DEFAULT_STAGE_DURATIONS: dict[Compartment, tuple[float, float]] = {
    Compartment.EXPOSED: (4.5, 1.5),
    Compartment.ASYMPTOMATIC: (8.0, 2.0),
    Compartment.PRE_SYMPTOMATIC: (1.1, 0.9),
    Compartment.INFECTED_MILD: (8.0, 2.0),
    Compartment.INFECTED_SEVERE: (1.5, 2.0),
    Compartment.HOSPITALIZED: (18.1, 6.3),
}


def lognormal_underlying(mean: float, sd: float) -> tuple[float, float]:
    """Moment-matched (mu, sigma) of the underlying normal for a log-normal
    with the given mean and standard deviation. sd = 0 degenerates to a
    point mass at ``mean``."""
    if mean <= 0:
        raise ValueError(f"log-normal mean must be positive, got {mean}")
    if sd < 0:
        raise ValueError(f"log-normal sd must be nonnegative, got {sd}")
    if sd == 0.0:
        return math.log(mean), 0.0
    var = math.log(1.0 + (sd * sd) / (mean * mean))
    mu = math.log(mean * mean / math.sqrt(mean * mean + sd * sd))
    return mu, math.sqrt(var)


@dataclass
class DiseaseParams:
    """Disease dynamics knobs; defaults follow the published factor tables."""

    beta_base: float = 0.5
    age_bands: tuple[AgeBandRates, ...] = DEFAULT_AGE_BANDS
    stage_durations: dict[Compartment, tuple[float, float]] = field(
        default_factory=lambda: dict(DEFAULT_STAGE_DURATIONS)
    )
    infectious_set: frozenset[Compartment] = DEFAULT_INFECTIOUS

    def __post_init__(self) -> None:
        if self.beta_base < 0:
            raise ValueError("beta_base must be nonnegative")
        if len(self.age_bands) != 10:
            raise ValueError("age_bands must cover ages 0-99 in ten decade bands")
        for comp in TIMED_COMPARTMENTS:
            if comp not in self.stage_durations:
                raise ValueError(f"missing stage duration for {comp.name}")
            mean, sd = self.stage_durations[comp]
            if mean <= 0 or sd < 0:
                raise ValueError(f"bad duration ({mean}, {sd}) for {comp.name}")
        self._rebuild_lookup_tables()

    def _rebuild_lookup_tables(self) -> None:
        self.band_beta_multiplier = np.array(
            [b.beta_multiplier for b in self.age_bands]
        )
        self.band_asymptomatic_prob = np.array(
            [b.asymptomatic_prob for b in self.age_bands]
        )
        self.band_severe_prob = np.array([b.severe_prob for b in self.age_bands])
        self.band_death_given_hospitalized = np.array(
            [b.death_given_hospitalized for b in self.age_bands]
        )
        self.infectious_lut = np.zeros(len(Compartment), dtype=bool)
        self.infectious_lut[[int(c) for c in self.infectious_set]] = True
        self._duration_mu_sigma = {
            comp: lognormal_underlying(*self.stage_durations[comp])
            for comp in TIMED_COMPARTMENTS
        }


def age_band_params(age: int, params: DiseaseParams | None = None) -> AgeBandRates:
    """Return the decade band's rate row for an age in 0-99."""
    if not 0 <= age <= 99:
        raise ValueError(f"age {age} outside 0-99")
    bands = params.age_bands if params is not None else DEFAULT_AGE_BANDS
    return bands[int(age) // 10]


def duration_days(
    compartment: Compartment,
    rng: np.random.Generator,
    size: int | None = None,
    params: DiseaseParams | None = None,
) -> np.ndarray | float:
    """Draw raw log-normal dwell times in days for a timed compartment."""
    if params is None:
        params = _default_params()
    if compartment not in TIMED_COMPARTMENTS:
        raise ValueError(f"{compartment.name} has no dwell time")
    mu, sigma = params._duration_mu_sigma[compartment]
    if sigma == 0.0:
        mean = params.stage_durations[compartment][0]
        return mean if size is None else np.full(size, mean)
    return rng.lognormal(mu, sigma, size=size)


def sample_duration_ticks(
    compartment: Compartment,
    rng: np.random.Generator,
    size: int | None = None,
    params: DiseaseParams | None = None,
) -> np.ndarray | int:
    """Dwell time in 12-hour ticks: 2x the day draw, rounded, at least 1."""
    days = duration_days(compartment, rng, size=size, params=params)
    ticks = np.maximum(np.rint(np.asarray(days) * TICKS_PER_DAY), 1).astype(np.int32)
    return int(ticks) if size is None else ticks


def infection_probability(beta_agent, infectious_weight, occupants):
    """Per-tick infection probability from frequency-dependent mixing.

    p = 1 - exp(-beta_agent * (infectious_weight / occupants) * tick_days).
    Accepts scalars or aligned arrays.
    """
    lam = (
        np.asarray(beta_agent)
        * (np.asarray(infectious_weight) / np.asarray(occupants))
        * TICK_DAYS
    )
    result = -np.expm1(-lam)
    return float(result) if np.ndim(result) == 0 else result


def seed_initial_infections(
    world: "WorldState",
    params: DiseaseParams,
    fraction: float,
    rng: np.random.Generator,
) -> int:
    """Expose a uniformly chosen fraction of the population at day zero."""
    if not 0.0 <= fraction <= 1.0:
        raise ValueError(f"initial infection fraction {fraction} outside [0, 1]")
    count = int(round(fraction * world.population))
    if count == 0:
        return 0
    ids = rng.choice(world.population, size=count, replace=False)
    world.compartment[ids] = Compartment.EXPOSED
    world.ticks_remaining[ids] = sample_duration_ticks(
        Compartment.EXPOSED, rng, size=count, params=params
    )
    return count


def exposure_step(
    world: "WorldState", params: DiseaseParams, rng: np.random.Generator
) -> int:
    """Infect susceptible occupants from their location's infectious load.

    Occupancy must be current for this tick (apply_movement ran first).
    Returns the number of new exposures.
    """
    comp = world.compartment
    loc = world.location_of

    infectious = params.infectious_lut[comp]
    if not infectious.any() or params.beta_base == 0.0:
        return 0

    source_weight = np.where(
        world.vaccinated[infectious], VACCINATED_SOURCE_WEIGHT, 1.0
    )
    weight_by_loc = np.bincount(
        loc[infectious], weights=source_weight, minlength=world.n_locations
    )

    present = loc >= 0
    count_by_loc = np.bincount(loc[present], minlength=world.n_locations)

    sus_ids = np.flatnonzero(comp == Compartment.SUSCEPTIBLE)
    if sus_ids.size == 0:
        return 0
    sus_loc = loc[sus_ids]
    beta_agent = (
        params.beta_base
        * params.band_beta_multiplier[world.age[sus_ids] // 10]
        * world.vax_susceptibility[sus_ids]
    )
    p = infection_probability(
        beta_agent, weight_by_loc[sus_loc], count_by_loc[sus_loc]
    )
    newly = sus_ids[rng.random(sus_ids.size) < p]
    if newly.size == 0:
        return 0
    world.compartment[newly] = Compartment.EXPOSED
    world.ticks_remaining[newly] = sample_duration_ticks(
        Compartment.EXPOSED, rng, size=newly.size, params=params
    )
    return int(newly.size)


def _effective_asymptomatic_prob(
    gamma: np.ndarray, vaccinated: np.ndarray
) -> np.ndarray:
    return np.where(vaccinated, np.minimum(1.0, VACCINE_GAMMA_BOOST * gamma), gamma)


def progression_step(
    world: "WorldState", params: DiseaseParams, rng: np.random.Generator
) -> None:
    """Advance stage timers one tick and move agents whose timer expires.

    Stages are handled from the end of the chain backwards so an agent
    entering a new stage this tick is never processed twice.
    """
    comp = world.compartment
    ticks = world.ticks_remaining

    timed = (comp >= Compartment.EXPOSED) & (comp <= Compartment.HOSPITALIZED)
    if not timed.any():
        return
    ticks[timed] -= 1
    due = timed & (ticks == 0)
    if not due.any():
        return

    band = world.age // 10

    def _enter(ids: np.ndarray, target: Compartment) -> None:
        comp[ids] = target
        if target in (Compartment.RECOVERED, Compartment.DECEASED):
            ticks[ids] = 0
        else:
            ticks[ids] = sample_duration_ticks(
                target, rng, size=ids.size, params=params
            )

    ids = np.flatnonzero(due & (comp == Compartment.HOSPITALIZED))
    if ids.size:
        p_death = params.band_death_given_hospitalized[band[ids]]
        dies = rng.random(ids.size) < p_death
        _enter(ids[dies], Compartment.DECEASED)
        _enter(ids[~dies], Compartment.RECOVERED)

    ids = np.flatnonzero(due & (comp == Compartment.INFECTED_SEVERE))
    if ids.size:
        _enter(ids, Compartment.HOSPITALIZED)

    ids = np.flatnonzero(due & (comp == Compartment.INFECTED_MILD))
    if ids.size:
        worsens = rng.random(ids.size) < params.band_severe_prob[band[ids]]
        _enter(ids[worsens], Compartment.INFECTED_SEVERE)
        _enter(ids[~worsens], Compartment.RECOVERED)

    ids = np.flatnonzero(due & (comp == Compartment.PRE_SYMPTOMATIC))
    if ids.size:
        _enter(ids, Compartment.INFECTED_MILD)

    ids = np.flatnonzero(due & (comp == Compartment.ASYMPTOMATIC))
    if ids.size:
        _enter(ids, Compartment.RECOVERED)

    ids = np.flatnonzero(due & (comp == Compartment.EXPOSED))
    if ids.size:
        gamma = _effective_asymptomatic_prob(
            params.band_asymptomatic_prob[band[ids]], world.vaccinated[ids]
        )
        silent = rng.random(ids.size) < gamma
        _enter(ids[silent], Compartment.ASYMPTOMATIC)
        _enter(ids[~silent], Compartment.PRE_SYMPTOMATIC)


_DEFAULT_PARAMS: DiseaseParams | None = None


def _default_params() -> DiseaseParams:
    global _DEFAULT_PARAMS
    if _DEFAULT_PARAMS is None:
        _DEFAULT_PARAMS = DiseaseParams()
    return _DEFAULT_PARAMS
