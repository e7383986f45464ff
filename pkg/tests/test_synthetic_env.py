import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import classical_risk, random_density_matrix
from qpac.concept_class import LossFunction, partition_compatible, true_risk
from qpac.quantum_core import ValidationError
from qpac.synthetic_env import (
    Environment,
    bloch_spin_preset,
    bloch_vector,
    classical_embed,
    environment_to_manifest,
    haar_unitary,
    load_environment_manifest,
    orthant_rule,
    random_class,
    random_density,
)

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def random_env(rng, d=3, nx=4, ny=2):
    states = tuple(random_density_matrix(d, rng) for _ in range(nx))
    return Environment(tuple(range(nx)), tuple(range(ny)), states,
                       rng.dirichlet(np.ones(nx * ny)).reshape(nx, ny))


class TestEnvironment:
    def test_average_state_is_density(self, rng):
        env = random_env(rng)
        avg = env.average_state()
        assert avg.dim == 6
        assert abs(np.trace(avg.matrix) - 1) < 1e-12

    def test_average_state_block_structure(self, rng):
        env = random_env(rng)
        avg = env.average_state().matrix
        ref = sum(env.dist[x, y] * np.kron(env.states[x].matrix, np.diag(np.eye(2)[y]))
                  for x in range(4) for y in range(2))
        np.testing.assert_allclose(avg, ref, atol=1e-15)

    def test_bad_distribution(self, rng):
        with pytest.raises(ValidationError):
            Environment((0,), (0, 1), (np.eye(2) / 2,), [[0.5, 0.6]])
        with pytest.raises(ValueError):
            Environment((0,), (0, 1), (np.eye(2) / 2,), [[1.0]])

    def test_draw_samples_frequencies(self):
        rng = np.random.default_rng(4)
        dist = np.array([[0.1, 0.2], [0.3, 0.4]])
        env = Environment((0, 1), (0, 1), (np.eye(2) / 2, np.eye(2) / 2), dist)
        n = 20_000
        counts = np.zeros((2, 2))
        for s in env.draw_samples(n, rng):
            counts[s.x, s.y] += 1
        assert np.all(np.abs(counts / n - dist) <= 4 * np.sqrt(dist * (1 - dist) / n))

    def test_draw_zero_rejected(self, rng):
        with pytest.raises(ValueError):
            random_env(rng).draw_samples(0, rng)

    def test_sample_state_layout(self, rng):
        env = random_env(rng)
        s = env.draw_samples(1, rng)[0]
        np.testing.assert_allclose(s.state.matrix,
                                   np.kron(env.states[s.x].matrix, np.diag(np.eye(2)[s.y])))

    def test_manifest_round_trip(self, rng):
        env = random_env(rng)
        back = load_environment_manifest(environment_to_manifest(env))
        np.testing.assert_array_equal(back.dist, env.dist)
        for a, b in zip(env.states, back.states):
            np.testing.assert_allclose(a.matrix, b.matrix, atol=1e-15)


class TestRandom:
    @pytest.mark.parametrize("d", [2, 5, 16])
    def test_haar_unitary(self, d, rng):
        u = haar_unitary(d, rng)
        np.testing.assert_allclose(u.conj().T @ u, np.eye(d), atol=1e-12)

    def test_random_density_rank(self, rng):
        rho = random_density(4, rng, rank=1)
        assert np.linalg.matrix_rank(rho.matrix, tol=1e-10) == 1

    @pytest.mark.parametrize("structure,m,expect", [("shared_basis", None, 1), ("blocks", 3, 3),
                                                    ("haar_random", None, 5)])
    def test_random_class_partition_sizes(self, structure, m, expect, rng):
        c = random_class(3, 2, 5 if structure != "blocks" else 9, structure, rng, m=m)
        assert partition_compatible(c, "exact").m == expect

    def test_unknown_structure(self, rng):
        with pytest.raises(ValueError):
            random_class(2, 2, 3, "tree", rng)


class TestClassicalEmbed:
    def test_risk_matches(self, rng):
        for _ in range(10):
            nx, ny = int(rng.integers(2, 8)), int(rng.integers(2, 4))
            dist = rng.dirichlet(np.ones(nx * ny)).reshape(nx, ny)
            funcs = [rng.integers(0, ny, nx).tolist() for _ in range(4)]
            env, cls = classical_embed(range(nx), range(ny), dist, funcs)
            loss = LossFunction(tuple(range(ny)), rng.random((ny, ny)))
            for p, f in zip(cls, funcs):
                assert abs(true_risk(p, env, loss) - classical_risk(dist, loss.table, f)) <= 1e-12

    def test_one_compatible_subclass(self, rng):
        funcs = [rng.integers(0, 2, 5).tolist() for _ in range(6)]
        env, cls = classical_embed(range(5), range(2), np.full((5, 2), 0.1), funcs)
        assert partition_compatible(cls, "exact").m == 1

    def test_bad_function(self):
        with pytest.raises(ValueError):
            classical_embed(range(2), range(2), np.full((2, 2), 0.25), [[0, 2]])


class TestBloch:
    def test_north_pole(self):
        env = bloch_spin_preset()
        np.testing.assert_allclose(env.states[0].matrix, np.diag([1.0, 0]), atol=1e-15)

    def test_pure_states(self):
        env = bloch_spin_preset(5, 5)
        for s in env.states:
            assert np.linalg.matrix_rank(s.matrix, tol=1e-10) == 1

    def test_antipodal_states_orthogonal(self):
        env = bloch_spin_preset()
        for i in range(1, 20):
            for j in range(20):
                a = env.states[i * 20 + j].matrix
                b = env.states[(20 - i) * 20 + (j + 10) % 20].matrix
                assert abs(np.trace(a @ b)) <= 1e-12

    def test_uniform_and_deterministic_labels(self):
        env = bloch_spin_preset()
        assert np.all((env.dist > 0).sum(axis=1) == 1)
        np.testing.assert_allclose(env.dist.sum(axis=1), 1 / 400)

    @settings(max_examples=50, deadline=None)
    @given(st.floats(0, math.pi), st.floats(0, 2 * math.pi),
           st.sampled_from([(1, 1, 1), (-1, 1, 1), (1, -1, -1)]))
    def test_orthant_rule(self, theta, phi, orthant):
        v = bloch_vector(theta, phi)
        blue = orthant_rule(orthant)(v)
        assert blue == all(s * c <= 1e-9 for s, c in zip(orthant, v))

    def test_grid_limit(self):
        with pytest.raises(ValueError):
            bloch_spin_preset(21, 5)
