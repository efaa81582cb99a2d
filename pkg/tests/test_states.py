import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from renyichain import linalg, states
from renyichain.errors import NotPSD, RankInvalid, RenyiError
from renyichain.linalg import TensorFactorization
from renyichain.states import DensityOperator, PureState, SeededSampler


class TestSampler:
    def test_same_seed_same_counter(self):
        a = states.random_pure(SeededSampler(5), 4).vector
        b = states.random_pure(SeededSampler(5), 4).vector
        np.testing.assert_array_equal(a, b)

    def test_counter_advances(self):
        s = SeededSampler(5)
        a, b = states.random_pure(s, 4).vector, states.random_pure(s, 4).vector
        assert s.state() == {"seed": 5, "counter": 2}
        assert not np.allclose(a, b)

    def test_resume_from_state(self):
        s = SeededSampler(9)
        s.generator()
        resumed = SeededSampler(**s.state())
        np.testing.assert_array_equal(s.generator().random(3), resumed.generator().random(3))

    def test_forks_are_distinct_and_stable(self):
        s = SeededSampler(1)
        assert s.fork(0).seed == SeededSampler(1).fork(0).seed
        assert len({s.fork(i).seed for i in range(50)}) == 50
        assert s.counter == 0

    def test_generator_is_pinned(self):
        # frozen draw: Philox keyed by (seed=0, counter=0)
        draw = SeededSampler(0).generator().integers(0, 2**32, size=2)
        again = np.random.Generator(np.random.Philox(key=0)).integers(0, 2**32, size=2)
        np.testing.assert_array_equal(draw, again)


class TestDensityOperator:
    def test_valid(self):
        rho = DensityOperator(np.eye(2) / 2, TensorFactorization(("A",), (2,)))
        assert rho.trace == pytest.approx(1) and rho.purity() == pytest.approx(0.5)

    def test_rejects_negative(self):
        with pytest.raises(NotPSD):
            DensityOperator(np.diag([1.5, -0.5]), TensorFactorization(("A",), (2,)))

    def test_rejects_trace(self):
        with pytest.raises(RenyiError):
            DensityOperator(np.eye(2), TensorFactorization(("A",), (2,)))

    def test_subnormalized(self):
        rho = DensityOperator(np.eye(2) / 4, TensorFactorization(("A",), (2,)), subnormalized=True)
        assert rho.trace == pytest.approx(0.5)
        with pytest.raises(RenyiError):
            DensityOperator(np.eye(2), TensorFactorization(("A",), (2,)), subnormalized=True)

    def test_immutable(self):
        rho = states.maximally_mixed(2)
        with pytest.raises(ValueError):
            rho.matrix[0, 0] = 1

    def test_pure_state_norm(self):
        with pytest.raises(RenyiError):
            PureState(np.array([1.0, 1.0]), TensorFactorization(("A",), (2,)))


class TestPurify:
    def test_pure_input(self):
        rho = states.basis_state(TensorFactorization(("A",), (2,))).density()
        psi = states.purify(rho)
        assert psi.factorization.as_dict() == {"A": 2, "R": 1}
        np.testing.assert_allclose(np.abs(psi.vector), [1, 0])

    def test_maximally_mixed_qubit(self):
        psi = states.purify(states.maximally_mixed(2))
        # degenerate spectrum: any maximally entangled vector is acceptable
        x = psi.op("A", "R")
        np.testing.assert_allclose(x @ x.conj().T, np.eye(2) / 2, atol=1e-15)
        np.testing.assert_allclose(psi.reduce("A").matrix, np.eye(2) / 2, atol=1e-15)

    def test_rank_three(self):
        rho = states.random_density(SeededSampler(2), 4, rank=3)
        psi = states.purify(rho)
        assert psi.factorization.dims[-1] == 3
        assert np.max(np.abs(psi.reduce("A").matrix - rho.matrix)) <= 1e-9

    @pytest.mark.parametrize("dim", [2, 3, 4])
    def test_round_trip_sweep(self, dim):
        master = SeededSampler(dim)
        for i in range(100 // 3 + 1):
            s = master.fork(i)
            rank = 1 + i % dim
            rho = states.random_density(s, dim, rank=rank)
            back = states.purify(rho).reduce("A").matrix
            assert np.max(np.abs(back - rho.matrix)) <= 1e-9

    def test_label_clash(self):
        with pytest.raises(RenyiError):
            states.purify(states.maximally_mixed(2), purifier_label="A")


class TestRandomStates:
    def test_pure_normalized(self):
        v = states.random_pure(SeededSampler(3), 8).vector
        assert abs(np.linalg.norm(v) - 1) <= 1e-12

    def test_haar_first_moment(self):
        s = SeededSampler(10)
        weights = [abs(states.random_pure(s, 2).vector[0]) ** 2 for _ in range(10_000)]
        assert abs(np.mean(weights) - 0.5) <= 0.02

    def test_rank_one_is_pure(self):
        rho = states.random_density(SeededSampler(4), 3, rank=1)
        assert abs(rho.purity() - 1) <= 1e-10

    def test_hilbert_schmidt_mean_purity(self):
        master = SeededSampler(11)
        purities = [states.random_density(master.fork(i), 2).purity() for i in range(10_000)]
        # closed form 2d / (d^2 + 1) at d = 2
        assert abs(np.mean(purities) - 0.8) <= 0.02

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**63), st.integers(1, 6), st.data())
    def test_samples_valid(self, seed, dim, data):
        rank = data.draw(st.integers(1, dim))
        rho = states.random_density(SeededSampler(seed), dim, rank=rank)
        assert np.linalg.eigvalsh(rho.matrix).min() >= -1e-12
        assert abs(rho.trace - 1) <= 1e-10

    @pytest.mark.parametrize("rank", [0, 5])
    def test_rank_invalid(self, rank):
        with pytest.raises(RankInvalid):
            states.random_density(SeededSampler(0), 4, rank=rank)

    def test_haar_unitary(self):
        u = states.random_unitary(SeededSampler(6), 3)
        np.testing.assert_allclose(u.conj().T @ u, np.eye(3), atol=1e-12)


class TestNamedStates:
    def test_maximally_entangled_marginals(self):
        f = TensorFactorization(("A", "B", "C"), (2, 2, 2))
        psi = states.maximally_entangled(f, "A", "C")
        np.testing.assert_allclose(psi.reduce("A").matrix, np.eye(2) / 2, atol=1e-15)
        assert psi.reduce("B").purity() == pytest.approx(1)

    def test_ghz(self):
        f = TensorFactorization(("A", "B", "C"), (2, 2, 2))
        v = states.ghz(f).vector
        assert abs(v[0]) == pytest.approx(2**-0.5) and abs(v[7]) == pytest.approx(2**-0.5)

    def test_reduce_matches_partial_trace(self):
        f = TensorFactorization(("A", "B", "C"), (2, 3, 2))
        psi = states.random_pure(SeededSampler(1), f)
        direct = linalg.partial_trace(psi.density().matrix, f, "AC")
        np.testing.assert_allclose(psi.reduce("AC").matrix, direct, atol=1e-14)

    def test_corner_states(self):
        f = TensorFactorization(("A", "B", "C"), (2, 2, 2))
        corners = dict(states.corner_states(f, SeededSampler(0)))
        assert {"pure_product", "maximally_mixed", "maximally_entangled", "classical_diagonal",
                "rank_deficient"} <= set(corners)
        assert np.linalg.matrix_rank(corners["rank_deficient"].matrix, tol=1e-10) == 2
        m = corners["classical_diagonal"].matrix
        np.testing.assert_array_equal(m, np.diag(np.diag(m)))
