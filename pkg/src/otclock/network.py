"""Reaction networks with general rate laws and a light input.

A :class:`Network` is immutable after construction and safe to share across
simulation workers.  Species order is declaration order and fixes the column
layout of every state vector, trace and output file.

The built-in *Ostreococcus tauri* clock model ships as
:func:`builtin_ostreococcus`: 7 species, 13 reactions, 19 kinetic parameters,
a light accumulator driving TOC1 transcription (Hill kinetics) and TOC1
protein driving LHY transcription (Hill kinetics), with light-switched decay
and conversion rates.  Initial molecule counts are floor(concentration * omega).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import expr as ex
from .errors import ModelError, RateEvaluationError


@dataclass(frozen=True)
class SpeciesDef:
    name: str
    initial_conc: float  # concentration in the model's arbitrary units
    initial_count: int   # floor(initial_conc * omega), fixed by the owning network

    def __post_init__(self):
        if self.initial_conc < 0:
            raise ModelError(f"species {self.name!r} has negative initial value")


@dataclass(frozen=True)
class Reaction:
    id: str
    reactants: tuple  # ((species, stoich >= 1), ...)
    products: tuple
    modifiers: tuple  # species read by the rate law but not consumed/produced
    rate: object      # expression tree


class Network:
    """Species, reactions, parameters, omega and observables."""

    def __init__(self, species, reactions, parameters, omega, observables):
        if omega <= 0:
            raise ModelError(f"omega must be > 0, got {omega}")
        self.omega = float(omega)
        self.parameters = dict(parameters)
        self.observables = {k: tuple(v) for k, v in observables.items()}

        specs = []
        for s in species:
            if isinstance(s, SpeciesDef):
                conc = s.initial_conc
            else:
                raise ModelError("species must be SpeciesDef instances")
            specs.append(SpeciesDef(s.name, conc, int(math.floor(conc * self.omega))))
        self.species = tuple(specs)
        self.reactions = tuple(reactions)

        names = [s.name for s in self.species]
        if len(set(names)) != len(names):
            raise ModelError("species names must be unique")
        self.species_index = {n: i for i, n in enumerate(names)}
        clashes = set(names) & set(self.parameters)
        if clashes:
            raise ModelError(f"names used as both species and parameter: {sorted(clashes)}")
        reserved = (set(names) | set(self.parameters)) & ex.RESERVED
        if reserved:
            raise ModelError(f"reserved names declared: {sorted(reserved)}")

        self._validate()
        self._build_arrays()

    # -- construction helpers -------------------------------------------------

    def _validate(self):
        rids = [r.id for r in self.reactions]
        if len(set(rids)) != len(rids):
            raise ModelError("reaction ids must be unique")
        for r in self.reactions:
            touched = set()
            for part in (r.reactants, r.products):
                for name, st in part:
                    if name not in self.species_index:
                        raise ModelError(f"reaction {r.id!r} references undeclared "
                                         f"species {name!r}")
                    if st < 1:
                        raise ModelError(f"reaction {r.id!r}: stoichiometry must be >= 1")
                    touched.add(name)
            for name in r.modifiers:
                if name not in self.species_index:
                    raise ModelError(f"reaction {r.id!r} references undeclared "
                                     f"modifier {name!r}")
                touched.add(name)
            for name in ex.species_names(r.rate):
                if name not in touched:
                    raise ModelError(
                        f"reaction {r.id!r}: rate law reads species {name!r} which is "
                        "neither reactant, product nor modifier")
            for name in ex.param_names(r.rate):
                if name not in self.parameters:
                    raise ModelError(f"reaction {r.id!r} references undeclared "
                                     f"parameter {name!r}")
        for obs, combo in self.observables.items():
            for coef, name in combo:
                if name not in self.species_index:
                    raise ModelError(f"observable {obs!r} references undeclared "
                                     f"species {name!r}")

    def _build_arrays(self):
        S = len(self.species)
        R = len(self.reactions)
        stoich = np.zeros((R, S), dtype=np.int64)
        for i, r in enumerate(self.reactions):
            for name, st in r.reactants:
                stoich[i, self.species_index[name]] -= st
            for name, st in r.products:
                stoich[i, self.species_index[name]] += st
        stoich.setflags(write=False)
        self.stoich = stoich

        self.param_order = tuple(self.parameters)  # declaration order; omega is last slot
        pv = np.asarray([self.parameters[k] for k in self.param_order] + [self.omega])
        pv.setflags(write=False)
        self.param_vector = pv
        self.omega_slot = len(self.param_order)

        ic = np.asarray([s.initial_count for s in self.species], dtype=np.int64)
        ic.setflags(write=False)
        self.initial_counts = ic

        self.light_dependent = np.asarray([ex.uses_light(r.rate) for r in self.reactions],
                                          dtype=bool)
        self.light_dependent.setflags(write=False)

    # -- public API ------------------------------------------------------------

    @property
    def species_names(self):
        return tuple(s.name for s in self.species)

    def observable_vector(self, name):
        """Coefficient vector c such that obs = c . state."""
        if name not in self.observables:
            raise KeyError(f"unknown observable {name!r}")
        v = np.zeros(len(self.species))
        for coef, sp in self.observables[name]:
            v[self.species_index[sp]] += coef
        return v

    def series_vector(self, name):
        """Coefficient vector for an observable or a bare species column."""
        if name in self.observables:
            return self.observable_vector(name)
        if name in self.species_index:
            v = np.zeros(len(self.species))
            v[self.species_index[name]] = 1.0
            return v
        raise KeyError(f"{name!r} is neither an observable nor a species")

    def eval_rate(self, reaction_id, state, light):
        """Reference (tree-interpreted) propensity of one reaction.

        ``state`` is a non-negative count vector in species order; ``light``
        is 0 or 1.  Raises RateEvaluationError on a negative or non-finite
        result.
        """
        r = self._reaction(reaction_id)
        env = {s.name: float(state[i]) for i, s in enumerate(self.species)}
        val = ex.evaluate(r.rate, env, self.parameters, self.omega, light)
        if not math.isfinite(val) or val < 0.0:
            raise RateEvaluationError(r.id, val)
        return val

    def _reaction(self, reaction_id):
        for r in self.reactions:
            if r.id == reaction_id:
                return r
        raise KeyError(f"unknown reaction {reaction_id!r}")

    def rescale(self, new_omega):
        """Same model at a different system size.

        Initial counts are recomputed as floor(concentration * new_omega) from
        the stored concentrations, so rescaling composes losslessly.
        """
        if new_omega <= 0:
            raise ValueError(f"new omega must be > 0, got {new_omega}")
        return Network(self.species, self.reactions, self.parameters, new_omega,
                       self.observables)

    def with_parameters(self, overrides):
        """Copy with some kinetic parameters replaced (same structure)."""
        params = dict(self.parameters)
        for k, v in overrides.items():
            if k not in params:
                raise ModelError(f"unknown parameter {k!r}")
            params[k] = float(v)
        return Network(self.species, self.reactions, params, self.omega,
                       self.observables)

    def __eq__(self, other):
        if not isinstance(other, Network):
            return NotImplemented
        return (self.omega == other.omega
                and self.parameters == other.parameters
                and self.observables == other.observables
                and [(s.name, s.initial_conc) for s in self.species]
                == [(s.name, s.initial_conc) for s in other.species]
                and self.reactions == other.reactions)

    def __repr__(self):
        return (f"<Network {len(self.species)} species, {len(self.reactions)} "
                f"reactions, omega={self.omega:g}>")


def rescale(net, new_omega):
    """Functional form of :meth:`Network.rescale`."""
    return net.rescale(new_omega)


# ---------------------------------------------------------------------------
# Built-in Ostreococcus tauri clock model.

_OT_PARAMS = {
    "acc_rate": 0.085759993119922787,
    "R_toc1_lhy": 0.80473130211377397,
    "H_toc1_lhy": 2.4786793492076216,
    "L_toc1": 0.0001028030683282734,
    "R_toc1_acc": 0.40030354494924164,
    "D_mrna_toc1": 0.33395900070057227,
    "T_toc1": 0.65069237578254624,
    "Di_toc1_ia_l": 0.11696163098006726,
    "Di_toc1_ia_d": 0.34434576584349563,
    "D_toc1_a_l": 0.53999998111757508,
    "D_toc1_a_d": 0.3587344573844497,
    "H_lhy_toc1": 2.4123768479176113,
    "R_lhy_toc1_a_l": 3.3859126401378155,
    "R_lhy_toc1_a_d": 1.1074418532202324,
    "D_mrna_lhy": 1.9405472466939,
    "T_lhy": 6.5204407183218498,
    "Di_lhy_cn": 7.0630744698933485,
    "D_lhy_l": 0.34866585983482207,
    "D_lhy_d": 0.21098655584281875,
}

_OT_INITIAL = (
    ("acc", 0.99897249736755245),
    ("TOC1_mRNA", 1.9315264449894309e-06),
    ("TOC1_i", 0.34581773957827311),
    ("TOC1_a", 0.47960829226604956),
    ("LHY_mRNA", 9.9999999999999995e-07),
    ("LHY_c", 4.0361051173018776),
    ("LHY_n", 6.7029410613103796e-06),
)

# Shared sub-expressions of the functional rates (inlined where used).
_TMP_TOC1 = "(L_toc1 + acc * R_toc1_acc / omega)"
_TOC1_A_DECAY = "(light_time * D_toc1_a_l + (1 - light_time) * D_toc1_a_d)"
_TOC1_IA_CONV = "(light_time * Di_toc1_ia_l + (1 - light_time) * Di_toc1_ia_d)"
_LHY_DECAY = "(light_time * D_lhy_l + (1 - light_time) * D_lhy_d)"
_LHY_TOC1_REG = ("(TOC1_a * (light_time * R_lhy_toc1_a_l / omega"
                 " + (1 - light_time) * R_lhy_toc1_a_d / omega))")

_OT_REACTIONS = (
    # (id, reactants, products, modifiers, rate law)
    ("prod1", (), ("acc",), (), "acc_rate * omega * light_time"),
    ("deg2", ("acc",), (), (), "acc_rate * acc"),
    ("transc3", (), ("TOC1_mRNA",), ("acc", "LHY_n"),
     f"omega * {_TMP_TOC1} / (1 + {_TMP_TOC1}"
     " + (R_toc1_lhy / omega * LHY_n) ^ H_toc1_lhy)"),
    ("deg4", ("TOC1_a",), (), (), f"{_TOC1_A_DECAY} * TOC1_a"),
    ("transl5", (), ("TOC1_i",), ("TOC1_mRNA",), "T_toc1 * TOC1_mRNA"),
    ("conv6", ("TOC1_i",), ("TOC1_a",), (), f"{_TOC1_IA_CONV} * TOC1_i"),
    ("deg7", ("TOC1_mRNA",), (), (), "D_mrna_toc1 * TOC1_mRNA"),
    ("transc8", (), ("LHY_mRNA",), ("TOC1_a",),
     f"omega * {_LHY_TOC1_REG} ^ H_lhy_toc1"
     f" / (1 + {_LHY_TOC1_REG} ^ H_lhy_toc1)"),
    ("deg9", ("LHY_mRNA",), (), (), "D_mrna_lhy * LHY_mRNA"),
    ("transl10", (), ("LHY_c",), ("LHY_mRNA",), "T_lhy * LHY_mRNA"),
    ("transp11", ("LHY_c",), ("LHY_n",), (), "Di_lhy_cn * LHY_c"),
    ("deg12", ("LHY_c",), (), (), f"{_LHY_DECAY} * LHY_c"),
    ("deg13", ("LHY_n",), (), (), f"{_LHY_DECAY} * LHY_n"),
)

_OT_OBSERVABLES = {
    "Total_LHY": ((1.0, "LHY_c"), (1.0, "LHY_n")),
    "Total_TOC1": ((1.0, "TOC1_i"), (1.0, "TOC1_a")),
}


def builtin_ostreococcus(omega=50.0):
    """The built-in O. tauri clock network (7 species, 13 reactions)."""
    species_set = frozenset(n for n, _ in _OT_INITIAL)
    param_set = frozenset(_OT_PARAMS)
    species = [SpeciesDef(n, c, 0) for n, c in _OT_INITIAL]
    reactions = []
    for rid, reac, prod, mods, law in _OT_REACTIONS:
        tree = ex.parse_expr(law, species_set, param_set)
        reactions.append(Reaction(rid, tuple((n, 1) for n in reac),
                                  tuple((n, 1) for n in prod), tuple(mods), tree))
    return Network(species, reactions, _OT_PARAMS, omega, _OT_OBSERVABLES)
