"""Household ledger economy.

Each house holds savings and a fixed daily income, both drawn once at
setup. The head earns the income each day unless they are dead, too sick
to work, or kept home by a lockdown; living members each consume a fixed
daily expense. Money is stored as integer hundredths of a unit so replays
are bit-exact, and savings may go negative (debt).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .epidemic import Compartment
from .world import WorldState

CENTS = 100


@dataclass
class EconomyConfig:
    savings_mean: float = 500.0
    savings_sd: float = 350.0
    income_mean: float = 100.0
    income_sd: float = 30.0
    expense_per_person: float = 10.0
    poverty_line: float = 100.0

    def validate(self) -> None:
        for name in (
            "savings_mean",
            "savings_sd",
            "income_mean",
            "income_sd",
            "expense_per_person",
            "poverty_line",
        ):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")


def init_house_ledgers(
    world: WorldState, config: EconomyConfig, rng: np.random.Generator
) -> None:
    """Draw initial savings and daily income per house (both clamped at 0)."""
    config.validate()
    h = world.n_houses
    savings = np.maximum(rng.normal(config.savings_mean, config.savings_sd, h), 0.0)
    income = np.maximum(rng.normal(config.income_mean, config.income_sd, h), 0.0)
    world.savings_cents = np.rint(savings * CENTS).astype(np.int64)
    world.income_cents = np.rint(income * CENTS).astype(np.int64)
    world.economy_config = config


def _require_ledgers(world: WorldState) -> EconomyConfig:
    if world.savings_cents is None or world.economy_config is None:
        raise RuntimeError("house ledgers not initialized; call init_house_ledgers")
    return world.economy_config


def economy_day_step(world: WorldState, day: int, lockdown_active: bool) -> None:
    """Post one day of income and expenses to every house.

    The head earns iff alive, not symptomatic or hospitalized, and either
    no lockdown applies or they are essential or a violator. Expenses are
    charged per living member. Call exactly once per simulated day.
    """
    config = _require_ledgers(world)
    head = world.house_head
    head_comp = world.compartment[head]

    too_sick = (
        (head_comp == Compartment.INFECTED_MILD)
        | (head_comp == Compartment.INFECTED_SEVERE)
        | (head_comp == Compartment.HOSPITALIZED)
        | (head_comp == Compartment.DECEASED)
    )
    earning = ~too_sick
    if lockdown_active:
        earning &= world.is_essential[head] | world.is_violator[head]

    live_members = np.bincount(
        world.house_id[world.alive], minlength=world.n_houses
    )
    expense_cents = int(round(config.expense_per_person * CENTS))
    world.savings_cents += (
        np.where(earning, world.income_cents, 0) - expense_cents * live_members
    )


def below_poverty_count(world: WorldState) -> int:
    """Living agents in houses whose savings sit strictly below the line."""
    config = _require_ledgers(world)
    line_cents = int(round(config.poverty_line * CENTS))
    poor = world.savings_cents < line_cents
    live_members = np.bincount(
        world.house_id[world.alive], minlength=world.n_houses
    )
    return int(live_members[poor].sum())
