import itertools
import math
import warnings
from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

import oracles
from deanon_gain.graph import Attribute, AttributeBelief, AttributeSchema, Query
from deanon_gain.knowledge import (
    AlmostAttrs,
    AlmostNodes,
    AttrApproximate,
    AttrExact,
    AttrIgnored,
    AttrProbabilistic,
    DagValue,
    ExactComplete,
    ExactPartial,
    KnowledgeSpec,
    NoisyComplete,
    NoisyPartial,
    ProbGeneral,
    ProbThreeLevel,
    ProbUniform,
    attribute_match_probability,
    attribute_sharing_probabilities,
    dag,
    edge_match_probability,
    edges_from_density,
    expected_match_count,
    match_count,
    noisy_complete_probability,
    powerlaw_match_lower_bound,
    probabilistic_config_sampled,
    probabilistic_config_sum,
    three_level_confidences,
)
from deanon_gain.logspace import LogScalar

probs = st.floats(0.0, 1.0)
open_probs = st.floats(0.01, 0.99)


@st.composite
def query_shape(draw, max_nq=6):
    n_q = draw(st.integers(1, max_nq))
    m0 = n_q * (n_q - 1) // 2
    return n_q, draw(st.integers(0, m0))


def edge_modes(eps=st.integers(0, 4)):
    return st.one_of(
        st.just(ExactPartial()),
        st.just(ExactComplete()),
        eps.map(NoisyPartial),
        eps.map(NoisyComplete),
        st.builds(ProbUniform, probs, st.booleans()),
    )


# -- edge factor ---------------------------------------------------------------


def test_exact_partial_examples():
    assert edge_match_probability(ExactPartial(), 5, 0, 0.3).ln == 0.0
    mpmath.mp.dps = 30
    want = float(368 * mpmath.log(mpmath.mpf("0.2")))
    got = edge_match_probability(ExactPartial(), 50, 368, 0.2).ln
    assert got == pytest.approx(want, rel=1e-13)
    assert got == pytest.approx(-592.27, abs=0.005)


def test_closed_form_examples():
    assert edge_match_probability(ExactComplete(), 3, 2, 0.5).value == pytest.approx(0.125)
    assert edge_match_probability(NoisyPartial(1), 3, 3, 0.5).value == pytest.approx(0.5)
    assert edge_match_probability(ProbUniform(0.0), 6, 4, 0.3).value == 1.0
    mode = ProbThreeLevel(0.9, 0.1, x1=1, x0=1)
    assert edge_match_probability(mode, 3, 1, 0.2).value == pytest.approx(0.26 * 0.74)


@pytest.mark.parametrize("mode", ["exact_partial", "exact_complete", "noisy_partial", "noisy_complete"])
def test_deterministic_modes_match_pattern_enumeration(mode):
    cls = {"exact_partial": ExactPartial, "exact_complete": ExactComplete}
    for n_q in range(1, 5):
        for edges in oracles.connected_graphs(n_q):
            for eps in (0, 1, 2) if mode.startswith("noisy") else (0,):
                for p in (Fraction(1, 5), Fraction(1, 2), Fraction(7, 10)):
                    want = oracles.candidate_edge_prob(n_q, edges, mode, eps, p)
                    m = cls[mode]() if mode in cls else {"noisy_partial": NoisyPartial, "noisy_complete": NoisyComplete}[mode](eps)
                    with warnings.catch_warnings():
                        warnings.simplefilter("ignore")
                        got = edge_match_probability(m, n_q, len(edges), float(p)).value
                    assert got == pytest.approx(float(want), rel=1e-12, abs=1e-15)


def test_noisy_complete_small_case():
    # 3 pair slots, 2 query edges: patterns within one miss and one extra of Q
    assert noisy_complete_probability(1, 3, 2, 0.5).value == pytest.approx(0.75)
    assert float(oracles.candidate_edge_prob(3, [(0, 1), (1, 2)], "noisy_complete", 1, Fraction(1, 2))) == 0.75


def test_noisy_complete_vacuous_epsilon_warns():
    with pytest.warns(UserWarning):
        assert noisy_complete_probability(3, 3, 2, 0.4).value == 1.0


@given(query_shape(), open_probs)
def test_epsilon_zero_reductions(shape, p):
    n_q, m_q = shape
    assert edge_match_probability(NoisyPartial(0), n_q, m_q, p).ln == pytest.approx(
        edge_match_probability(ExactPartial(), n_q, m_q, p).ln, abs=1e-12
    )
    if n_q >= 2:
        assert edge_match_probability(NoisyComplete(0), n_q, m_q, p).ln == pytest.approx(
            edge_match_probability(ExactComplete(), n_q, m_q, p).ln, abs=1e-12
        )


@given(st.integers(2, 8), open_probs)
def test_uniform_full_confidence_is_exact_on_clique(n_q, p):
    m0 = n_q * (n_q - 1) // 2
    assert edge_match_probability(ProbUniform(1.0), n_q, m0, p).ln == pytest.approx(
        edge_match_probability(ExactPartial(), n_q, m0, p).ln
    )


@given(st.integers(2, 7), st.data(), open_probs)
def test_three_level_certain_is_exact_complete_on_known_pairs(n_q, data, p):
    m0 = n_q * (n_q - 1) // 2
    x1 = data.draw(st.integers(0, m0))
    x0 = data.draw(st.integers(0, m0 - x1))
    got = edge_match_probability(ProbThreeLevel(1.0, 0.0, x1, x0), n_q, 0, p).value
    assert got == pytest.approx(p ** x1 * (1 - p) ** x0)


@given(query_shape(), edge_modes(), probs)
def test_edge_probability_in_unit_interval(shape, mode, p):
    n_q, m_q = shape
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        ln = edge_match_probability(mode, n_q, m_q, p).ln
    assert ln <= 0.0


@given(st.integers(2, 30), open_probs)
def test_exact_partial_monotone_in_edges(n_q, p):
    m0 = n_q * (n_q - 1) // 2
    lns = [edge_match_probability(ExactPartial(), n_q, m, p).ln for m in range(m0 + 1)]
    assert all(b <= a for a, b in zip(lns, lns[1:]))


def test_degenerate_p():
    assert edge_match_probability(ExactPartial(), 3, 2, 0.0).is_zero
    assert edge_match_probability(ExactPartial(), 3, 2, 1.0).value == 1.0
    assert edge_match_probability(ExactComplete(), 3, 3, 1.0).value == 1.0
    assert edge_match_probability(ExactComplete(), 3, 2, 1.0).is_zero
    with pytest.raises(ValueError):
        edge_match_probability(ExactPartial(), 3, 4, 0.5)


def test_three_level_even_split():
    assert ProbThreeLevel(r=0.5).counts(1225) == (306, 306)
    assert ProbThreeLevel(r=1.0).counts(10) == (5, 5)
    with pytest.raises(ValueError):
        ProbThreeLevel().counts(10)
    with pytest.raises(ValueError):
        ProbThreeLevel(x1=6, x0=5).counts(10)
    conf = three_level_confidences(5, ProbThreeLevel(x1=3, x0=2))
    assert conf[:5] == [0.9, 0.9, 0.9, 0.1, 0.1] and all(math.isnan(c) for c in conf[5:])
    shuffled = three_level_confidences(5, ProbThreeLevel(x1=3, x0=2), seed=4)
    assert sorted(c for c in shuffled if not math.isnan(c)) == [0.1, 0.1, 0.9, 0.9, 0.9]


def test_prob_general_skips_unchecked_pairs():
    conf = (0.9, float("nan"), 0.2)
    got = edge_match_probability(ProbGeneral(conf), 3, 1, 0.3).value
    assert got == pytest.approx((1 - 0.9 + 0.3 * 0.9) * (1 - 0.2 + 0.3 * 0.2))
    got = edge_match_probability(ProbGeneral(conf, complete=True), 3, 1, 0.3).value
    assert got == pytest.approx((0.3 * 0.9 + 0.7 * 0.1) * (0.3 * 0.2 + 0.7 * 0.8))
    with pytest.raises(ValueError):
        edge_match_probability(ProbGeneral((0.5,)), 3, 1, 0.3)


# -- attributes ----------------------------------------------------------------


def test_attribute_examples():
    s = AttributeSchema.uniform([4])
    assert attribute_match_probability(s, AttrExact(), n_Q=1).value == pytest.approx(0.25)
    assert attribute_match_probability(0.5, AlmostNodes(1), n_Q=2).value == pytest.approx(0.75)
    mpmath.mp.dps = 30
    want = float(50 * mpmath.log(mpmath.mpf("0.001")))
    got = attribute_match_probability(0.001, AttrExact(), n_Q=50).ln
    assert got == pytest.approx(want, rel=1e-13)
    assert got == pytest.approx(-345.39, abs=0.005)
    assert attribute_match_probability(s, AttrIgnored(), n_Q=3).value == 1.0


def _schema():
    return AttributeSchema(
        (
            Attribute("a", np.array([0.5, 0.3, 0.2]), similarity=np.array([[1, 0.5, 0], [0.5, 1, 0], [0, 0, 1.0]])),
            Attribute("b", np.array([0.6, 0.4]), similarity=np.eye(2)),
            Attribute("c", np.array([0.1, 0.2, 0.3, 0.4]), similarity=np.eye(4)),
        )
    )


def _pair_distribution(attr):
    for a, b in itertools.product(range(attr.size), repeat=2):
        yield a, b, attr.probs[a] * attr.probs[b]


def test_sharing_probabilities_by_enumeration():
    s = _schema()
    exact = [sum(w for a, b, w in _pair_distribution(at) if a == b) for at in s]
    approx = [sum(w * at.similarity[a, b] for a, b, w in _pair_distribution(at)) for at in s]
    assert attribute_sharing_probabilities(s) == pytest.approx(exact)
    assert attribute_sharing_probabilities(s, approximate=True) == pytest.approx(approx)


@pytest.mark.parametrize("eps", [0, 1, 2])
def test_almost_attrs_by_enumeration(eps):
    s = _schema()
    share = [sum(w for a, b, w in _pair_distribution(at) if a == b) for at in s]
    per_node = 0.0
    for hits in itertools.product((True, False), repeat=len(s)):
        if hits.count(False) <= eps:
            per_node += math.prod(sh if h else 1 - sh for sh, h in zip(share, hits))
    got = attribute_match_probability(s, AlmostAttrs(eps), n_Q=3).value
    assert got == pytest.approx(per_node ** 3)


def test_almost_attrs_epsilon_bound():
    with pytest.raises(ValueError):
        attribute_match_probability(_schema(), AlmostAttrs(3), n_Q=2)


def test_approximate_needs_kernel():
    with pytest.raises(ValueError):
        attribute_match_probability(AttributeSchema.uniform([3]), AttrApproximate(), n_Q=2)


def test_probabilistic_attribute_factor():
    s = _schema()
    beliefs = AttributeBelief(
        [[[1, 0, 0], [0.5, 0.5], [0.25] * 4], [[0.2, 0.3, 0.5], [1, 0], [0, 0, 0, 1]]]
    )
    want = 1.0
    for node in beliefs.to_list():
        for at, bel in zip(s, node):
            want *= sum(at.probs[a] * at.similarity[a, b] * bel[b] for a in range(at.size) for b in range(at.size))
    got = attribute_match_probability(s, AttrProbabilistic(beliefs), n_Q=2).value
    assert got == pytest.approx(want)


@given(st.floats(0.0, 1.0), st.integers(1, 60), st.integers(0, 5))
def test_almost_nodes_reductions(p_a, n_q, eps):
    assume(eps <= n_q)
    exact = attribute_match_probability(p_a, AttrExact(), n_Q=n_q)
    almost = attribute_match_probability(p_a, AlmostNodes(eps), n_Q=n_q)
    assert almost.ln <= 1e-12
    assert almost.ln >= exact.ln - 1e-9 or exact.is_zero
    if eps == 0:
        assert almost.ln == pytest.approx(exact.ln) or (almost.is_zero and exact.is_zero)


# -- match count, DAG, bound --------------------------------------------------


def test_match_count_examples():
    assert expected_match_count(3, 2, LogScalar.one()).value == pytest.approx(6)
    six = expected_match_count(4, 3, edge_match_probability(ExactPartial(), 3, 2, 0.5))
    assert six.value == pytest.approx(6)
    spec = KnowledgeSpec()
    ln = match_count(spec, 10**6, 50, 368, 0.2).ln
    assert ln == pytest.approx(float(oracles.mp_ln_match_count_exact_partial(10**6, 50, 368, "0.2")), rel=1e-12)
    assert ln == pytest.approx(98.50, abs=0.005)
    ln = match_count(KnowledgeSpec(attribute=AttrExact(), p_A=0.001), 10**6, 50, 368, 0.2).ln
    assert ln == pytest.approx(float(oracles.mp_ln_match_count_exact_partial(10**6, 50, 368, "0.2", "0.001")), rel=1e-12)
    assert ln == pytest.approx(-246.9, abs=0.05)


@pytest.mark.parametrize(
    "q_edges, n_q, mode, eps",
    [
        ([(0, 1), (1, 2)], 3, "exact_partial", 0),
        ([(0, 1), (1, 2)], 3, "exact_complete", 0),
        ([(0, 1), (1, 2), (0, 2)], 3, "noisy_partial", 1),
        ([(0, 1), (1, 2)], 3, "noisy_complete", 1),
        ([(0, 1), (1, 2), (2, 3)], 4, "exact_partial", 0),
        ([(0, 1), (0, 2), (0, 3)], 4, "noisy_complete", 1),
    ],
)
def test_expected_count_equals_graph_enumeration(q_edges, n_q, mode, eps):
    p = Fraction(2, 5)
    want = oracles.exact_expected_count(5, p, n_q, q_edges, mode, eps)
    sem = {
        "exact_partial": ExactPartial(),
        "exact_complete": ExactComplete(),
        "noisy_partial": NoisyPartial(eps),
        "noisy_complete": NoisyComplete(eps),
    }[mode]
    got = match_count(KnowledgeSpec(sem), 5, n_q, len(q_edges), float(p)).value
    assert got == pytest.approx(float(want), rel=1e-12)


def test_dag_statuses():
    assert dag(10, 3, LogScalar.zero()) == DagValue(0.0, DagValue.NO_MATCH)
    assert dag(4, 3, LogScalar.of(6)).value == pytest.approx(0.125)
    assert dag(4, 3, LogScalar.of(6)).status == DagValue.NORMAL
    v = dag(10**6, 50, LogScalar(-246.9))
    assert v == DagValue(5e-5, DagValue.BEYOND_VANISH)
    with pytest.raises(ValueError):
        dag(3, 4, LogScalar.one())


@given(st.integers(1, 10**7), st.data())
def test_dag_in_unit_interval(n, data):
    n_q = data.draw(st.integers(1, min(n, 300)))
    ln = data.draw(st.floats(-1e4, 1e4) | st.just(float("-inf")))
    v = dag(n, n_q, LogScalar(ln))
    assert 0.0 <= v.value <= 1.0
    if v.status == DagValue.NORMAL:
        assert ln >= 0


def test_powerlaw_bound_examples():
    bound, value = powerlaw_match_lower_bound(100, 2.5, 3, 2)
    assert bound.value == pytest.approx(161700 * 6 * 0.03**2)
    assert bound.value == pytest.approx(873.18, abs=0.005)
    assert value.value == pytest.approx(3.436e-5, rel=1e-3)
    bound, _ = powerlaw_match_lower_bound(100, 2.5, 4, 0)
    assert bound.value == pytest.approx(100 * 99 * 98 * 97)
    with pytest.raises(ValueError):
        powerlaw_match_lower_bound(100, 2.0, 3, 2)


@given(st.integers(10, 10**6), st.floats(2.05, 4.0), st.integers(2, 12))
def test_powerlaw_bound_monotone_in_edges(n, beta, n_q):
    assume((beta - 1) / (n * (beta - 2)) < 1)
    m0 = n_q * (n_q - 1) // 2
    lns = [powerlaw_match_lower_bound(n, beta, n_q, m)[0].ln for m in range(m0 + 1)]
    assert all(b <= a + 1e-9 for a, b in zip(lns, lns[1:]))


def test_density_rounding():
    assert edges_from_density(50, 0.3) == 368
    assert edges_from_density(5, 0.25) == 2  # 2.5 rounds to even
    assert edges_from_density(5, 0.35) == 4  # 3.5 rounds to even
    with pytest.raises(ValueError):
        edges_from_density(5, 1.5)


# -- configuration sums --------------------------------------------------------


@given(st.lists(st.floats(0, 1), min_size=0, max_size=8), open_probs, st.booleans())
def test_config_sum_matches_enumeration(conf, p, complete):
    want = float(oracles.config_sum([mpmath.mpf(c) for c in conf], mpmath.mpf(p), complete))
    got = probabilistic_config_sum(conf, p, complete).value
    assert got == pytest.approx(want, rel=1e-10, abs=1e-300)


@pytest.mark.parametrize("m0", [1, 3, 6, 10, 15])
@pytest.mark.parametrize("p, p_e", [(0.2, 0.2), (0.2, 0.5), (0.5, 0.2), (0.5, 0.5), (0.3, 0.4)])
def test_config_sum_uniform_closed_forms(m0, p, p_e):
    partial = probabilistic_config_sum([p_e] * m0, p).value
    complete = probabilistic_config_sum([p_e] * m0, p, complete=True).value
    assert partial == pytest.approx((1 - p_e + p * p_e) ** m0, rel=1e-10)
    assert complete == pytest.approx((1 - p - p_e + 2 * p * p_e) ** m0, rel=1e-10)


def test_config_sum_degenerate_is_exact():
    conf = [1, 0, 1, 1, 0, 0]
    assert probabilistic_config_sum(conf, 0.3).value == pytest.approx(0.3**3)
    assert probabilistic_config_sum(conf, 0.3, complete=True).value == pytest.approx(0.3**3 * 0.7**3)
    est = probabilistic_config_sampled(conf, 0.3, samples=200, seed=1)
    assert est.stderr == 0.0 and est.mean == pytest.approx(0.3**3)


def test_config_sum_limit():
    with pytest.raises(ValueError, match="sampled"):
        probabilistic_config_sum([0.5] * 25, 0.3)
    # unchecked pairs do not count toward the limit
    assert probabilistic_config_sum([0.5] * 20 + [float("nan")] * 10, 0.3).value > 0


def test_config_sampled_against_exact():
    conf = [0.1, 0.9, 0.5, 0.3, 0.7, 0.2, 0.8, 0.6, 0.4, 0.95]
    for complete in (False, True):
        exact = probabilistic_config_sum(conf, 0.35, complete).value
        est = probabilistic_config_sampled(conf, 0.35, complete, samples=100_000, seed=3)
        assert abs(est.mean - exact) <= 3 * est.stderr


def test_config_sampled_stderr_shrinks():
    conf = [0.3] * 12
    small = probabilistic_config_sampled(conf, 0.4, samples=1_000, seed=1).stderr
    large = probabilistic_config_sampled(conf, 0.4, samples=100_000, seed=1).stderr
    assert large == pytest.approx(small / 10, rel=0.2)


def test_config_sum_accepts_query():
    q = Query.with_confidences(3, [0.8, float("nan"), 0.4])
    assert probabilistic_config_sum(q, 0.5).value == pytest.approx((1 - 0.8 + 0.4) * (1 - 0.4 + 0.2))


# -- spec serialization --------------------------------------------------------

attr_modes = st.one_of(
    st.just(AttrIgnored()),
    st.just(AttrExact()),
    st.integers(0, 3).map(AlmostNodes),
    st.integers(0, 3).map(AlmostAttrs),
    st.just(AttrApproximate()),
)
all_edge_modes = st.one_of(
    edge_modes(),
    st.builds(ProbThreeLevel, probs, probs, st.none(), st.none(), probs),
    st.builds(ProbThreeLevel, probs, probs, st.integers(0, 5), st.integers(0, 5)),
    st.builds(ProbGeneral, st.lists(probs | st.just(float("nan")), max_size=6).map(tuple), st.booleans()),
)


@given(all_edge_modes, attr_modes, st.none() | probs)
def test_spec_round_trip(edge, attr, p_a):
    spec = KnowledgeSpec(edge, attr, p_A=p_a)
    back = KnowledgeSpec.from_dict(spec.to_dict())
    assert back.to_dict().keys() == spec.to_dict().keys()
    if isinstance(edge, ProbGeneral):
        np.testing.assert_array_equal(back.edge.confidences, edge.confidences)
        assert back.edge.complete == edge.complete
    else:
        assert back == spec


def test_spec_with_schema_and_beliefs_round_trip():
    s = _schema()
    beliefs = AttributeBelief([[[1, 0, 0], [0.5, 0.5], [0.25] * 4]])
    spec = KnowledgeSpec(ExactPartial(), AttrProbabilistic(beliefs), s)
    back = KnowledgeSpec.from_dict(spec.to_dict())
    assert back.schema.names == s.names
    assert back.attribute.beliefs.to_list() == beliefs.to_list()


def test_spec_validation():
    with pytest.raises(ValueError):
        KnowledgeSpec(NoisyPartial(-1))
    with pytest.raises(ValueError):
        KnowledgeSpec(ProbUniform(1.5))
    with pytest.raises(ValueError):
        KnowledgeSpec(ProbThreeLevel(r=2.0))
    with pytest.raises(ValueError):
        KnowledgeSpec.from_dict({"edge": {"mode": "psychic"}})
