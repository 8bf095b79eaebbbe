"""Line-oriented text format for reaction networks.

Sections, in any order, one entry per line; ``#`` starts a comment:

    [parameters]  name = value
    [omega]       value
    [species]     name = initial concentration
    [observables] name = coef ident + coef ident ...   (coef optional, default 1)
    [reactions]   id: reactants -> products | modifiers @ rate-expression

Reactant/product lists are ``+``-separated with an optional integer
stoichiometry prefix (``2 A + B``); the modifier list is comma-separated and
may be empty (the ``|`` may then be omitted).  Rate expressions support
``+ - * / ^ floor() H()`` and the reserved symbols ``omega`` and
``light_time``.  Numbers are parsed as exact decimal floats; no locale
dependence.
"""

from __future__ import annotations

import re

from . import expr as ex
from .errors import ModelError, ModelParseError
from .network import Network, Reaction, SpeciesDef

_SECTIONS = ("parameters", "omega", "species", "observables", "reactions")

_IDENT = r"[A-Za-z_][A-Za-z0-9_]*"


def parse_network(text, validate_rates=True):
    """Parse model text into a Network.

    When ``validate_rates`` is set, every rate law is sampled on random
    non-negative states with light 0 and 1 and must evaluate finite and
    non-negative.
    """
    sections = {k: [] for k in _SECTIONS}
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = re.fullmatch(r"\[(\w+)\]", line)
        if m:
            name = m.group(1)
            if name not in _SECTIONS:
                raise ModelParseError(f"unknown section [{name}]", lineno)
            current = name
            continue
        if current is None:
            raise ModelParseError("content before first section header", lineno)
        sections[current].append((lineno, line))

    params = {}
    for lineno, line in sections["parameters"]:
        name, value = _split_assign(line, lineno)
        _check_ident(name, lineno)
        params[name] = _parse_float(value, lineno)

    if not sections["omega"]:
        raise ModelParseError("missing [omega] section", 1)
    if len(sections["omega"]) > 1:
        raise ModelParseError("multiple omega values", sections["omega"][1][0])
    lineno, line = sections["omega"][0]
    omega = _parse_float(line.split("=", 1)[-1].strip(), lineno)
    if omega <= 0:
        raise ModelParseError(f"omega must be > 0, got {omega:g}", lineno)

    species = []
    for lineno, line in sections["species"]:
        name, value = _split_assign(line, lineno)
        _check_ident(name, lineno)
        conc = _parse_float(value, lineno)
        if conc < 0:
            raise ModelParseError(f"species {name!r} has negative initial value",
                                  lineno)
        species.append(SpeciesDef(name, conc, 0))
    species_set = {s.name for s in species}

    observables = {}
    for lineno, line in sections["observables"]:
        name, value = _split_assign(line, lineno)
        _check_ident(name, lineno)
        observables[name] = _parse_combo(value, species_set, lineno)

    reactions = []
    for lineno, line in sections["reactions"]:
        reactions.append(_parse_reaction(line, species_set, set(params), lineno))

    try:
        net = Network(species, reactions, params, omega, observables)
    except ModelError as e:
        raise ModelParseError(str(e)) from e
    if validate_rates:
        _sample_rates(net)
    return net


def parse_network_file(path, validate_rates=True):
    with open(path, "r", encoding="utf-8") as f:
        return parse_network(f.read(), validate_rates=validate_rates)


def _split_assign(line, lineno):
    if "=" not in line:
        raise ModelParseError("expected 'name = value'", lineno)
    name, value = line.split("=", 1)
    return name.strip(), value.strip()


def _check_ident(name, lineno):
    if not re.fullmatch(_IDENT, name):
        raise ModelParseError(f"bad identifier {name!r}", lineno)
    if name in ex.RESERVED:
        raise ModelParseError(f"{name!r} is reserved", lineno)


def _parse_float(text, lineno):
    try:
        return float(text)
    except ValueError:
        raise ModelParseError(f"bad number {text!r}", lineno) from None


def _parse_combo(text, species_set, lineno):
    """Linear combination: 'LHY_c + LHY_n' or '2 X + 0.5 Y'."""
    combo = []
    for part in text.split("+"):
        part = part.strip()
        if not part:
            raise ModelParseError("empty term in linear combination", lineno)
        m = re.fullmatch(rf"(?:([0-9.eE+-]+)\s*\*?\s*)?({_IDENT})", part)
        if not m:
            raise ModelParseError(f"bad term {part!r} in linear combination", lineno)
        coef = _parse_float(m.group(1), lineno) if m.group(1) else 1.0
        name = m.group(2)
        if name not in species_set:
            raise ModelParseError(f"undeclared species {name!r}", lineno)
        combo.append((coef, name))
    return tuple(combo)


def _parse_side(text, species_set, lineno):
    """Reactant or product list: '', 'A', '2 A + B'."""
    text = text.strip()
    if not text:
        return ()
    out = []
    for part in text.split("+"):
        part = part.strip()
        m = re.fullmatch(rf"(?:(\d+)\s+)?({_IDENT})", part)
        if not m:
            raise ModelParseError(f"bad species term {part!r}", lineno)
        st = int(m.group(1)) if m.group(1) else 1
        if st < 1:
            raise ModelParseError("stoichiometry must be >= 1", lineno)
        name = m.group(2)
        if name not in species_set:
            raise ModelParseError(f"undeclared species {name!r}", lineno)
        out.append((name, st))
    return tuple(out)


def _parse_reaction(line, species_set, param_set, lineno):
    if ":" not in line:
        raise ModelParseError("expected 'id: reactants -> products | modifiers @ rate'",
                              lineno)
    rid, rest = line.split(":", 1)
    rid = rid.strip()
    _check_ident(rid, lineno)
    if "@" not in rest:
        raise ModelParseError(f"reaction {rid!r}: missing '@ rate-expression'", lineno)
    lhs, rate_text = rest.rsplit("@", 1)
    if "->" not in lhs:
        raise ModelParseError(f"reaction {rid!r}: missing '->'", lineno)
    reac_text, prod_text = lhs.split("->", 1)
    modifiers = ()
    if "|" in prod_text:
        prod_text, mod_text = prod_text.split("|", 1)
        mod_text = mod_text.strip()
        if mod_text:
            modifiers = tuple(m.strip() for m in mod_text.split(","))
            for m in modifiers:
                if m not in species_set:
                    raise ModelParseError(f"undeclared species {m!r}", lineno)
    reactants = _parse_side(reac_text, species_set, lineno)
    products = _parse_side(prod_text, species_set, lineno)
    rate = ex.parse_expr(rate_text.strip(), species_set, param_set, line=lineno)
    return Reaction(rid, reactants, products, modifiers, rate)


def _sample_rates(net, n_samples=64, max_count=10**6):
    """Load-time sanity check: rate laws must be finite and non-negative on
    sampled non-negative integer states for light in {0, 1}."""
    import numpy as np

    rng = np.random.default_rng(0x0C10C)  # fixed seed: load-time check must be deterministic
    S = len(net.species)
    states = np.concatenate([
        np.zeros((1, S), dtype=np.int64),
        net.initial_counts[None, :],
        rng.integers(0, max_count, size=(n_samples, S)),
    ])
    for r in net.reactions:
        for state in states:
            for lv in (0, 1):
                net.eval_rate(r.id, state, lv)  # raises on violation


# ---------------------------------------------------------------------------
# Serializer (round-trips through parse_network).


def serialize_network(net):
    lines = ["[parameters]"]
    for name in net.param_order:
        lines.append(f"{name} = {net.parameters[name]!r}")
    lines.append("")
    lines.append("[omega]")
    lines.append(repr(net.omega))
    lines.append("")
    lines.append("[species]")
    for s in net.species:
        lines.append(f"{s.name} = {s.initial_conc!r}")
    lines.append("")
    lines.append("[observables]")
    for name, combo in net.observables.items():
        terms = " + ".join(n if c == 1.0 else f"{c!r} {n}" for c, n in combo)
        lines.append(f"{name} = {terms}")
    lines.append("")
    lines.append("[reactions]")
    for r in net.reactions:
        reac = " + ".join(n if st == 1 else f"{st} {n}" for n, st in r.reactants)
        prod = " + ".join(n if st == 1 else f"{st} {n}" for n, st in r.products)
        mods = ", ".join(r.modifiers)
        mid = f"{reac} -> {prod}"
        if mods:
            mid += f" | {mods}"
        lines.append(f"{r.id}: {mid} @ {ex.to_text(r.rate)}")
    lines.append("")
    return "\n".join(lines)
