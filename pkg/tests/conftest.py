import numpy as np
import pytest

from otclock import expr as ex_mod
from otclock.network import Network, Reaction, SpeciesDef, builtin_ostreococcus


@pytest.fixture(scope="session")
def builtin():
    return builtin_ostreococcus()


def make_birth_death(k=8.0, d=1.0, x0=0.0, omega=1.0):
    """Birth k, death d*X: stationary law is Poisson(k/d)."""
    species = [SpeciesDef("X", x0, 0)]
    names, params = {"X"}, {"k", "d"}
    reactions = [
        Reaction("birth", (), (("X", 1),), (), ex_mod.parse_expr("k", names, params)),
        Reaction("death", (("X", 1),), (), (), ex_mod.parse_expr("d * X", names, params)),
    ]
    return Network(species, reactions, {"k": k, "d": d}, omega,
                   {"total": ((1.0, "X"),)})


def make_light_gated(k=10.0, d=0.3, x0=0.0):
    """Birth fires only in the light: rate k * light_time, death d*X."""
    species = [SpeciesDef("X", x0, 0)]
    names, params = {"X"}, {"k", "d"}
    reactions = [
        Reaction("birth", (), (("X", 1),), (),
                 ex_mod.parse_expr("k * light_time", names, params)),
        Reaction("death", (("X", 1),), (), (),
                 ex_mod.parse_expr("d * X", names, params)),
    ]
    return Network(species, reactions, {"k": k, "d": d}, 1.0,
                   {"total": ((1.0, "X"),)})


def make_zero_reaction(counts=(3.0, 5.0)):
    species = [SpeciesDef(f"S{i}", c, 0) for i, c in enumerate(counts)]
    return Network(species, [], {}, 1.0, {"sum": tuple((1.0, s.name) for s in species)})


@pytest.fixture(scope="session")
def birth_death():
    return make_birth_death()


@pytest.fixture(scope="session")
def light_gated():
    return make_light_gated()


def gated_mean_at(t, k=10.0, d=0.3, dawn=6.0, dusk=18.0):
    """Analytic mean of the light-gated birth-death process at time t <= 24."""
    assert 0 <= t <= 24
    x = 0.0
    if t <= dawn:
        return x * np.exp(-d * t)
    x = x * np.exp(-d * dawn)
    tl = min(t, dusk) - dawn
    x = k / d + (x - k / d) * np.exp(-d * tl)
    if t <= dusk:
        return x
    return x * np.exp(-d * (t - dusk))
