import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from teleplan import statekit as sk
from teleplan.errors import DimensionLimitError, IsometryError, NumericError, StateError

from oracles import binary_entropy, brute_state_entropy

H01 = binary_entropy(0.1)  # 0.4689955935892812


def party_entropy(state, parties):
    fs = [f for f, p in enumerate(state.owner) if p in parties]
    return sk.subset_entropy(state, fs)


# -- make_state ---------------------------------------------------------------


def test_make_state_bell():
    s = sk.make_state([2, 2], {0: 0, 1: 1}, [1 / math.sqrt(2), 0, 0, 1 / math.sqrt(2)])
    assert s.num_parties == 2
    assert party_entropy(s, [0]) == pytest.approx(1.0, abs=1e-12)


def test_make_state_zero_norm():
    with pytest.raises(StateError, match="zero norm"):
        sk.make_state([2, 2], [0, 1], [0, 0, 0, 0])


def test_make_state_schmidt_coefficients():
    s = sk.make_state([2, 2], [0, 1], [0.6, 0, 0, 0.8])
    rho = sk.reduced_density(s, [0]).entries
    np.testing.assert_allclose(np.diag(rho).real, [0.36, 0.64], atol=1e-12)


@pytest.mark.parametrize(
    "dims, owner, amps, msg",
    [
        ([2, 2], [0, 1], [1, 0, 0], "expected 4 amplitudes"),
        ([2, 2], [0, 2], [1, 0, 0, 0], "party B owns no factor"),
        ([2, 2], [0, 1], [1, 0, 0, 1], "norm"),
        ([1, 2], [0, 1], [1, 0], "dimensions must be >= 2"),
    ],
)
def test_make_state_errors(dims, owner, amps, msg):
    with pytest.raises(StateError, match=msg):
        sk.make_state(dims, owner, amps)


def test_make_state_renormalize():
    s = sk.make_state([2, 2], [0, 1], [1, 0, 0, 1], renormalize=True)
    assert np.linalg.norm(s.amplitudes) == pytest.approx(1.0, abs=1e-15)


def test_dimension_cap():
    with pytest.raises(DimensionLimitError):
        sk.make_state([2] * 5, range(5), np.ones(32) / math.sqrt(32), max_total_dim=16)
    with pytest.raises(DimensionLimitError):
        sk.toast(6)
    with pytest.raises(DimensionLimitError):
        sk.ghz(100000)


# -- families -------------------------------------------------------------------


def test_ghz_amplitudes():
    s = sk.ghz(3, 2)
    expected = np.zeros(8)
    expected[[0, 7]] = 1 / math.sqrt(2)
    np.testing.assert_allclose(s.amplitudes, expected, atol=1e-15)
    s3 = sk.ghz(3, 3)
    expected = np.zeros(27)
    expected[[0, 13, 26]] = 1 / math.sqrt(3)
    np.testing.assert_allclose(s3.amplitudes, expected, atol=1e-15)


def test_ghz2_is_bell():
    np.testing.assert_allclose(sk.ghz(2).amplitudes, sk.epr().amplitudes, atol=1e-15)


@pytest.mark.parametrize("n, k", [(1, 2), (3, 1)])
def test_ghz_rejects(n, k):
    with pytest.raises(StateError):
        sk.ghz(n, k)


def test_schmidt_equal_weights_is_ghz():
    s = sk.schmidt_state(3, [1 / math.sqrt(2)] * 2)
    np.testing.assert_allclose(s.amplitudes, sk.ghz(3).amplitudes, atol=1e-15)


def test_schmidt_cut_entropies():
    s = sk.schmidt_state(4, [math.sqrt(0.1), math.sqrt(0.9)])
    t = sk.cut_entropy_table(s)
    for m in range(1, t.full_mask):
        assert t[m] == pytest.approx(H01, abs=1e-9)
    assert round(H01, 4) == 0.4690


def test_schmidt_product():
    t = sk.cut_entropy_table(sk.schmidt_state(2, [1.0, 0.0]))
    assert np.all(np.abs(t.values) < 1e-12)


@pytest.mark.parametrize("coeffs", [[0.5, 0.5], [-0.6, 0.8], [0.0, 0.0]])
def test_schmidt_rejects(coeffs):
    with pytest.raises(StateError):
        sk.schmidt_state(3, coeffs)


def test_toast3_matches_displayed_pairs():
    # A1-B1, A2-C1, B2-C2 with factors ordered A1 A2 B1 B2 C1 C2
    s = sk.toast(3)
    assert s.factor_dims == (2,) * 6
    assert s.owner == (0, 0, 1, 1, 2, 2)
    psi = s.tensor()
    for a1, a2, b2 in itertools.product((0, 1), repeat=3):
        assert psi[a1, a2, a1, b2, a2, b2] == pytest.approx(1 / math.sqrt(8))
    assert np.count_nonzero(np.abs(s.amplitudes) > 1e-12) == 8


def test_toast2_is_epr():
    np.testing.assert_allclose(sk.toast(2).amplitudes, sk.epr().amplitudes)


def test_toast4_single_party_cut():
    t = sk.cut_entropy_table(sk.toast(4))
    for p in range(4):
        assert t[1 << p] == pytest.approx(3.0, abs=1e-9)


def test_epsilon_toast_zero():
    s = sk.epsilon_toast(0.0)
    for p in range(3):
        assert party_entropy(s, [p]) == pytest.approx(2.0, abs=1e-9)


def test_epsilon_toast_support_matches_relabeled_toast():
    # merging each party's qubits of toast(3) into one 4-level digit gives the
    # same amplitudes on the 4x4x4 corner of the 5x5x5 space
    t = sk.toast(3).amplitudes.reshape(4, 4, 4)
    e = sk.epsilon_toast(0.0).amplitudes.reshape(5, 5, 5)
    np.testing.assert_allclose(e[:4, :4, :4], t, atol=1e-15)


def test_epsilon_toast_one_is_product():
    t = sk.cut_entropy_table(sk.epsilon_toast(1.0))
    assert np.all(np.abs(t.values) < 1e-12)


def test_epsilon_toast_small():
    s = sk.epsilon_toast(1e-3)
    exact = brute_state_entropy(s, [0])
    assert party_entropy(s, [0]) == pytest.approx(exact, abs=1e-12)
    assert abs(exact - 2.0) < 0.02


@pytest.mark.parametrize("eps", [-0.1, 1.5])
def test_epsilon_toast_range(eps):
    with pytest.raises(StateError):
        sk.epsilon_toast(eps)


def test_bundle4_pair_graph(bundle4):
    assert party_entropy(bundle4, [0]) == pytest.approx(1, abs=1e-12)
    assert party_entropy(bundle4, [1]) == pytest.approx(3, abs=1e-12)
    assert party_entropy(bundle4, [3]) == pytest.approx(1, abs=1e-12)
    assert party_entropy(bundle4, [0, 1]) == pytest.approx(2, abs=1e-12)


def test_pair_graph_double_pair():
    s = sk.pair_graph_state(2, [(0, 1), (0, 1)])
    assert party_entropy(s, [0]) == pytest.approx(2, abs=1e-12)
    np.testing.assert_allclose(sk.reduced_density(s, s.party_factors(0)).entries, np.eye(4) / 4,
                               atol=1e-15)


@pytest.mark.parametrize("pairs", [[(0, 0)], [(0, 5)]])
def test_pair_graph_rejects(pairs):
    with pytest.raises(StateError):
        sk.pair_graph_state(3, pairs)


# -- reduced density and entropy ------------------------------------------------


def test_reduced_density_examples():
    np.testing.assert_allclose(sk.reduced_density(sk.epr(), [0]).entries, np.eye(2) / 2, atol=1e-15)
    np.testing.assert_allclose(sk.reduced_density(sk.ghz(3), [0]).entries, np.eye(2) / 2, atol=1e-15)
    t = sk.toast(3)
    np.testing.assert_allclose(sk.reduced_density(t, t.party_factors(0)).entries, np.eye(4) / 4,
                               atol=1e-15)


def test_reduced_density_matches_brute_force():
    s = sk.random_state([2, 3, 2, 2], [0, 1, 2, 2], seed=11)
    from oracles import brute_partial_trace

    for keep in ([0], [1, 3], [0, 2, 3], [0, 1, 2, 3]):
        np.testing.assert_allclose(sk.reduced_density(s, keep).entries,
                                   brute_partial_trace(s.amplitudes, s.factor_dims, keep), atol=1e-12)


def test_reduced_density_cap():
    with pytest.raises(DimensionLimitError):
        sk.reduced_density(sk.ghz(6), range(6), max_dim=32)


def test_von_neumann_examples():
    assert sk.von_neumann_entropy(sk.DensityMatrix(np.eye(2) / 2)) == pytest.approx(1.0)
    assert sk.von_neumann_entropy(sk.DensityMatrix(np.diag([1.0, 0.0]))) == 0.0
    s = sk.von_neumann_entropy(sk.DensityMatrix(np.diag([0.1, 0.9])))
    assert s == pytest.approx(H01, abs=1e-12)


def test_broken_density_matrix_is_numeric_error():
    with pytest.raises(NumericError):
        sk.von_neumann_entropy(sk.DensityMatrix(np.diag([1.1, -0.1])))
    with pytest.raises(NumericError):
        sk.DensityMatrix(np.array([[0.5, 0.3], [0.0, 0.5]]))


def test_cut_table_ghz4_all_one():
    t = sk.cut_entropy_table(sk.ghz(4))
    rows = list(t.items())
    assert len(rows) == 14
    assert all(v == pytest.approx(1.0, abs=1e-9) for _, v in rows)
    assert t[0] == 0.0 and t[t.full_mask] == 0.0


def test_cut_table_factor_granularity_and_limit():
    t = sk.cut_entropy_table(sk.toast(3), "factor")
    assert t.unit_names == ("A1", "A2", "B1", "B2", "C1", "C2")
    assert t[[0, 2]] == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(DimensionLimitError):
        sk.cut_entropy_table(sk.toast(4), "factor", max_units=10)


def test_cut_table_parallel_identical():
    s = sk.random_state([2] * 8, range(8), seed=5)
    a = sk.cut_entropy_table(s, workers=1)
    b = sk.cut_entropy_table(s, workers=4)
    assert np.array_equal(a.values, b.values)


# -- isometries -------------------------------------------------------------------


def test_identity_isometry_leaves_state():
    s = sk.random_state([2, 3, 2], [0, 1, 2], seed=3)
    out = sk.apply_isometry(s, sk.identity_isometry(s, 1))
    np.testing.assert_array_equal(out.amplitudes, s.amplitudes)
    assert out.factor_dims == s.factor_dims


def test_non_isometry_rejected():
    with pytest.raises(IsometryError):
        sk.IsometrySpec(0, 2, (2,), np.array([[1, 1], [0, 1]]))
    with pytest.raises(IsometryError):
        sk.apply_isometry(sk.ghz(3), sk.ancilla_embedding_5to8(0))


def test_ancilla_embedding_on_epsilon_toast():
    s = sk.epsilon_toast(0.0)
    for p in range(3):
        s = sk.apply_isometry(s, sk.ancilla_embedding_5to8(p))
    assert s.factor_dims == (2,) * 9
    assert s.owner == (0, 0, 0, 1, 1, 1, 2, 2, 2)
    # qubits 1,2 of each party reproduce 3-Toast, qubit 3 is a pure ancilla in |0>
    psi = s.tensor()
    core = psi[:, :, 0, :, :, 0, :, :, 0].reshape(-1)
    np.testing.assert_allclose(core, sk.toast(3).amplitudes, atol=1e-15)
    assert np.linalg.norm(core) == pytest.approx(1.0)
    for anc in (2, 5, 8):
        assert sk.subset_entropy(s, [anc]) == pytest.approx(0.0, abs=1e-12)


def test_permuting_embedding_keeps_entropies():
    s = sk.random_state([4, 2, 3], [0, 1, 2], seed=8)
    perm = np.eye(4)[:, [2, 0, 3, 1]]
    out = sk.apply_isometry(s, sk.IsometrySpec(0, 4, (2, 2), perm))
    a, b = sk.cut_entropy_table(s), sk.cut_entropy_table(out)
    np.testing.assert_allclose(a.values, b.values, atol=1e-9)


def test_isometry_on_middle_party_keeps_factor_position():
    s = sk.random_state([2, 3, 2], [0, 1, 2], seed=4)
    out = sk.apply_isometry(s, sk.random_isometry(1, 3, (2, 2), seed=1))
    assert out.factor_dims == (2, 2, 2, 2)
    assert out.owner == (0, 1, 1, 2)


# -- random states and entropy properties -------------------------------------------


def test_random_state_deterministic():
    a = sk.random_state([2, 3], [0, 1], seed=42)
    b = sk.random_state([2, 3], [0, 1], seed=42)
    np.testing.assert_array_equal(a.amplitudes, b.amplitudes)
    assert np.linalg.norm(a.amplitudes) == pytest.approx(1.0, abs=1e-12)
    sk.random_state([2, 2], [0, 1], seed=2**64 - 1)


dims_st = st.lists(st.sampled_from([2, 3]), min_size=2, max_size=5)


@settings(max_examples=60, deadline=None)
@given(dims=dims_st, seed=st.integers(0, 2**32))
def test_purity_complement_independent_sides(dims, seed):
    s = sk.random_state(dims, range(len(dims)), seed)
    n = len(dims)
    for r in range(1, n):
        for x in itertools.combinations(range(n), r):
            xc = [f for f in range(n) if f not in x]
            a = sk.von_neumann_entropy(sk.reduced_density(s, x))
            b = sk.von_neumann_entropy(sk.reduced_density(s, xc))
            assert abs(a - b) <= 1e-9


@settings(max_examples=60, deadline=None)
@given(dims=dims_st, seed=st.integers(0, 2**32), data=st.data())
def test_subadditivity_and_araki_lieb(dims, seed, data):
    s = sk.random_state(dims, range(len(dims)), seed)
    n = len(dims)
    labels = data.draw(st.lists(st.sampled_from([0, 1, 2]), min_size=n, max_size=n))
    a = [f for f in range(n) if labels[f] == 0]
    b = [f for f in range(n) if labels[f] == 1]
    sa, sb, sab = sk.subset_entropy(s, a), sk.subset_entropy(s, b), sk.subset_entropy(s, a + b)
    assert sa + sb >= sab - 1e-9
    assert sab >= abs(sa - sb) - 1e-9


def test_subset_entropy_matches_brute_force():
    s = sk.random_state([2, 3, 2, 3], [0, 1, 2, 3], seed=99)
    for r in (1, 2, 3):
        for x in itertools.combinations(range(4), r):
            assert sk.subset_entropy(s, x) == pytest.approx(brute_state_entropy(s, x), abs=1e-10)


@pytest.mark.parametrize("n", [3, 4, 5])
def test_toast_closed_form_all_subsets(n):
    t = sk.cut_entropy_table(sk.toast(n))
    for m in range(1, t.full_mask):
        k = bin(m).count("1")
        assert t[m] == pytest.approx(k * (n - k), abs=1e-9)


@pytest.mark.parametrize("n, coeffs", [(3, [0.6, 0.8]), (4, [0.5, 0.5, math.sqrt(0.5)])])
def test_schmidt_uniformity(n, coeffs):
    t = sk.cut_entropy_table(sk.schmidt_state(n, coeffs))
    vals = [t[m] for m in range(1, t.full_mask)]
    assert max(vals) - min(vals) <= 1e-9


def test_tensor_product_merges_parties():
    s = sk.tensor_product(sk.ghz(3), sk.ghz(3))
    assert s.num_parties == 3
    assert party_entropy(s, [0]) == pytest.approx(2.0, abs=1e-12)
