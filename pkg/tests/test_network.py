import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from otclock import codegen
from otclock.errors import ModelError, RateEvaluationError
from otclock.network import (Network, Reaction, SpeciesDef,
                             builtin_ostreococcus, rescale)
from otclock import expr as ex

from conftest import make_birth_death, make_zero_reaction

# published kinetic parameters of the clock model
CLOCK_PARAMS = {
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


def test_builtin_shape(builtin):
    assert len(builtin.species) == 7
    assert len(builtin.reactions) == 13
    assert builtin.omega == 50.0
    assert set(builtin.observables) == {"Total_LHY", "Total_TOC1"}


def test_builtin_parameters_exact(builtin):
    assert builtin.parameters == CLOCK_PARAMS


def test_builtin_initial_counts(builtin):
    # floor(concentration * 50)
    assert builtin.species_names == ("acc", "TOC1_mRNA", "TOC1_i", "TOC1_a",
                                     "LHY_mRNA", "LHY_c", "LHY_n")
    assert builtin.initial_counts.tolist() == [49, 0, 17, 23, 0, 201, 0]
    assert builtin.initial_counts[0] == math.floor(0.99897249736755245 * 50)


def test_rescale_examples(builtin):
    net500 = rescale(builtin, 500)
    # direct arithmetic on the stored concentration
    assert net500.initial_counts[5] == math.floor(4.0361051173018776 * 500) == 2018
    assert rescale(builtin, 50) == builtin
    huge = rescale(builtin, 50e6)
    assert huge.initial_counts[5] == math.floor(4.0361051173018776 * 50e6)
    assert (huge.initial_counts >= 0).all()
    assert huge.initial_counts.dtype == np.int64


def test_rescale_composes_via_concentrations(builtin):
    a = rescale(rescale(builtin, 73.5), 211.0)
    b = rescale(builtin, 211.0)
    assert a.initial_counts.tolist() == b.initial_counts.tolist()


def test_rescale_invalid(builtin):
    with pytest.raises(ValueError):
        rescale(builtin, 0.0)
    with pytest.raises(ValueError):
        rescale(builtin, -5.0)


def test_eval_rate_transc3_oracle(builtin):
    # independent arithmetic on the published law, acc=49, LHY_n=0
    state = builtin.initial_counts
    tmp = CLOCK_PARAMS["L_toc1"] + 49 * CLOCK_PARAMS["R_toc1_acc"] / 50
    expected = 50 * tmp / (1 + tmp)
    got = builtin.eval_rate("transc3", state, 0)
    assert got == pytest.approx(expected, rel=1e-14)
    assert round(got, 2) == 14.09


def test_eval_rate_deg2_oracle(builtin):
    got = builtin.eval_rate("deg2", builtin.initial_counts, 1)
    assert got == pytest.approx(CLOCK_PARAMS["acc_rate"] * 49, rel=1e-14)
    assert got == pytest.approx(4.2022, abs=5e-4)


def test_eval_rate_zero_activator(builtin):
    state = builtin.initial_counts.copy()
    state[3] = 0  # TOC1_a
    assert builtin.eval_rate("transc8", state, 0) == 0.0
    assert builtin.eval_rate("transc8", state, 1) == 0.0


def test_prod1_needs_light(builtin):
    state = builtin.initial_counts
    assert builtin.eval_rate("prod1", state, 0) == 0.0
    assert builtin.eval_rate("prod1", state, 1) == pytest.approx(
        CLOCK_PARAMS["acc_rate"] * 50, rel=1e-14)


def test_eval_rate_negative_raises():
    net = make_birth_death()
    bad = Network(net.species,
                  [Reaction("neg", (("X", 1),), (), (),
                            ex.parse_expr("X - 5", {"X"}, set()))],
                  {}, 1.0, {})
    with pytest.raises(RateEvaluationError, match="neg"):
        bad.eval_rate("neg", np.array([0]), 0)


@settings(max_examples=60, deadline=None)
@given(state=st.lists(st.integers(0, 10**6), min_size=7, max_size=7),
       light=st.integers(0, 1))
def test_builtin_rates_nonnegative_finite(state, light):
    net = builtin_ostreococcus()
    vec = np.asarray(state, dtype=np.int64)
    for r in net.reactions:
        val = net.eval_rate(r.id, vec, light)  # raises on violation
        assert val >= 0.0 and math.isfinite(val)


def test_stoichiometry_deltas(builtin):
    idx = builtin.species_index
    by_id = {r.id: i for i, r in enumerate(builtin.reactions)}
    row = builtin.stoich[by_id["transp11"]]
    assert row[idx["LHY_c"]] == -1 and row[idx["LHY_n"]] == 1
    assert row.sum() == 0
    row = builtin.stoich[by_id["transc3"]]
    assert row[idx["TOC1_mRNA"]] == 1 and np.count_nonzero(row) == 1
    # modifiers never change
    for i, r in enumerate(builtin.reactions):
        for m in r.modifiers:
            assert builtin.stoich[i, idx[m]] == 0


def test_reactant_in_own_rate_guards_nonnegativity(builtin):
    # every consuming reaction has zero propensity when its reactant is 0
    state = np.full(7, 5, dtype=np.int64)
    for i, r in enumerate(builtin.reactions):
        for name, _ in r.reactants:
            s = state.copy()
            s[builtin.species_index[name]] = 0
            for light in (0, 1):
                assert builtin.eval_rate(r.id, s, light) == 0.0


def test_codegen_matches_interpreter_bitwise(builtin):
    com = codegen.compile_network(builtin, jit=False)
    rng = np.random.default_rng(7)
    for _ in range(25):
        state = rng.integers(0, 1000, 7).astype(np.float64)
        for light in (0.0, 1.0):
            fast = com.rates_vector(state, light, builtin.param_vector)
            ref = np.array([builtin.eval_rate(r.id, state, int(light))
                            for r in builtin.reactions])
            assert np.array_equal(fast, ref)


def test_light_dependence_mask(builtin):
    dep = {r.id for r, m in zip(builtin.reactions, builtin.light_dependent) if m}
    assert dep == {"prod1", "deg4", "conv6", "transc8", "deg12", "deg13"}


def test_validation_errors():
    with pytest.raises(ModelError, match="unique"):
        Network([SpeciesDef("X", 1, 0), SpeciesDef("X", 2, 0)], [], {}, 1.0, {})
    with pytest.raises(ModelError, match="undeclared"):
        Network([SpeciesDef("X", 1, 0)],
                [Reaction("r", (("Y", 1),), (), (), ex.Const(1.0))], {}, 1.0, {})
    with pytest.raises(ModelError, match="neither reactant"):
        Network([SpeciesDef("X", 1, 0), SpeciesDef("Y", 1, 0)],
                [Reaction("r", (("X", 1),), (), (),
                          ex.parse_expr("Y", {"X", "Y"}, set()))], {}, 1.0, {})
    with pytest.raises(ModelError, match="observable"):
        Network([SpeciesDef("X", 1, 0)], [], {}, 1.0, {"o": ((1.0, "Z"),)})
    with pytest.raises(ModelError):
        Network([SpeciesDef("X", 1, 0)], [], {}, -1.0, {})
    with pytest.raises(ModelError, match="reserved"):
        Network([SpeciesDef("omega", 1, 0)], [], {}, 1.0, {})


def test_with_parameters(builtin):
    net2 = builtin.with_parameters({"D_mrna_lhy": 3.0})
    assert net2.parameters["D_mrna_lhy"] == 3.0
    assert builtin.parameters["D_mrna_lhy"] == CLOCK_PARAMS["D_mrna_lhy"]
    with pytest.raises(ModelError):
        builtin.with_parameters({"nope": 1.0})


def test_zero_reaction_network():
    net = make_zero_reaction()
    assert net.stoich.shape == (0, 2)
    assert net.initial_counts.tolist() == [3, 5]
