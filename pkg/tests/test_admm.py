import numpy as np
import pytest

from pidal import admm
from pidal.prox import soft_threshold


def identity_term(prox, name):
    return admm.TermSpec(apply=lambda x: x, adjoint=lambda x: x, prox=prox,
                         name=name, identity=True)


def quadratic_prox(b, mu):
    """Prox of (1/2)||u - b||^2 at weight mu: the mu-weighted average."""
    return lambda nu: (b + mu * nu) / (1.0 + mu)


def make_state(z, splits):
    return admm.SplitState(z=z, u=[s.copy() for s in splits],
                           d=[np.zeros_like(s) for s in splits])


class TestTrivialInstances:
    def test_single_quadratic_term_reaches_target(self, rng):
        # min (1/2)||z - b||^2 has the closed-form solution z = b.
        b = rng.standard_normal((4, 4))
        mu = 0.7
        terms = [identity_term(quadratic_prox(b, mu), "quad")]
        init = make_state(np.zeros((4, 4)), [np.zeros((4, 4))])
        cfg = admm.AdmmConfig(mu=mu, max_iters=2000, tol=0.0)
        state, _ = admm.admm_solve(terms, lambda g: g, init, cfg)
        assert np.abs(state.z - b).max() <= 1e-8

    def test_quadratic_plus_nonneg_projects(self, rng):
        # min (1/2)||z - b||^2 s.t. z >= 0 solves to max(b, 0).
        b = rng.standard_normal((5, 3))
        mu = 0.5
        terms = [
            identity_term(quadratic_prox(b, mu), "quad"),
            identity_term(lambda nu: np.maximum(nu, 0.0), "nonneg"),
        ]
        init = make_state(np.zeros((5, 3)), [np.zeros((5, 3))] * 2)
        cfg = admm.AdmmConfig(mu=mu, max_iters=4000, tol=0.0)
        state, _ = admm.admm_solve(terms, lambda g: g / 2.0, init, cfg)
        assert np.abs(state.z - np.maximum(b, 0.0)).max() <= 1e-8


def lasso_cd(a_mat, b, lam, iters=20000):
    """Cycle coordinate descent for min (1/2)||A z - b||^2 + lam ||z||_1."""
    n = a_mat.shape[1]
    col_sq = np.sum(a_mat * a_mat, axis=0)
    z = np.zeros(n)
    residual = b.copy()
    for _ in range(iters):
        delta = 0.0
        for j in range(n):
            old = z[j]
            rho = a_mat[:, j] @ residual + col_sq[j] * old
            new = np.sign(rho) * max(abs(rho) - lam, 0.0) / col_sq[j]
            if new != old:
                residual -= a_mat[:, j] * (new - old)
                z[j] = new
                delta = max(delta, abs(new - old))
        if delta < 1e-13:
            break
    return z


class TestLassoOracle:
    def test_matches_coordinate_descent(self, rng):
        m, n = 12, 8
        a_mat = rng.standard_normal((m, n))
        b = rng.standard_normal(m)
        lam = 0.9
        mu = 1.0
        terms = [
            admm.TermSpec(apply=lambda z: a_mat @ z, adjoint=lambda w: a_mat.T @ w,
                          prox=quadratic_prox(b, mu), name="data"),
            identity_term(lambda nu: soft_threshold(nu, lam / mu), "l1", ),
        ]
        normal = np.linalg.inv(a_mat.T @ a_mat + np.eye(n))
        init = admm.SplitState(z=np.zeros(n), u=[np.zeros(m), np.zeros(n)],
                               d=[np.zeros(m), np.zeros(n)])
        cfg = admm.AdmmConfig(mu=mu, max_iters=5000, tol=0.0)
        state, _ = admm.admm_solve(terms, lambda g: normal @ g, init, cfg)
        expected = lasso_cd(a_mat, b, lam)
        assert np.abs(state.z - expected).max() <= 1e-6


class TestIterationMechanics:
    def _tiny_problem(self, rng):
        b = rng.standard_normal((3, 3))
        mu = 0.8
        terms = [
            identity_term(quadratic_prox(b, mu), "quad"),
            identity_term(lambda nu: np.maximum(nu, 0.0), "nonneg"),
        ]
        state = admm.SplitState(
            z=rng.standard_normal((3, 3)),
            u=[rng.standard_normal((3, 3)) for _ in range(2)],
            d=[rng.standard_normal((3, 3)) for _ in range(2)],
        )
        return terms, state, mu

    def test_multiplier_update_identity_bitwise(self, rng):
        terms, state, mu = self._tiny_problem(rng)
        new_state, internals = admm.admm_iterate(state, terms, lambda g: g / 2.0, mu)
        for j in range(2):
            recomputed = state.d[j] - (internals.hz[j] - new_state.u[j])
            assert np.array_equal(new_state.d[j], recomputed)

    def test_internals_expose_consistent_products(self, rng):
        terms, state, mu = self._tiny_problem(rng)
        new_state, internals = admm.admm_iterate(state, terms, lambda g: g / 2.0, mu)
        for j, term in enumerate(terms):
            assert np.array_equal(internals.hz[j], term.apply(new_state.z))
            assert np.array_equal(internals.nu[j], internals.hz[j] - state.d[j])

    def test_iteration_counter_advances(self, rng):
        terms, state, mu = self._tiny_problem(rng)
        new_state, _ = admm.admm_iterate(state, terms, lambda g: g / 2.0, mu)
        assert new_state.iterations == state.iterations + 1


class TestResiduals:
    def test_primal_residual_zero_on_agreement(self, rng):
        x = rng.standard_normal((4, 4))
        assert admm.primal_residual([x, x], [x.copy(), x.copy()]) == 0.0

    def test_primal_residual_stacks_blocks(self):
        hz = [np.array([3.0, 0.0]), np.array([0.0, 4.0])]
        u = [np.zeros(2), np.zeros(2)]
        assert admm.primal_residual(hz, u) == 5.0

    def test_dual_residual_zero_when_splits_frozen(self, rng):
        terms = [identity_term(lambda nu: nu, "id")]
        u = [rng.standard_normal((3, 3))]
        assert admm.dual_residual(terms, u, [u[0].copy()], mu=2.0) == 0.0


class TestDriverSemantics:
    def _quad_setup(self, rng, **cfg_kwargs):
        b = rng.standard_normal((4, 4))
        mu = cfg_kwargs.pop("mu", 1.0)
        terms = [identity_term(quadratic_prox(b, mu), "quad")]
        init = make_state(np.zeros((4, 4)), [np.zeros((4, 4))])
        return terms, init, admm.AdmmConfig(mu=mu, **cfg_kwargs)

    def test_tol_zero_disables_stopping(self, rng):
        terms, init, cfg = self._quad_setup(rng, tol=0.0, max_iters=7)
        state, trace = admm.admm_solve(terms, lambda g: g, init, cfg)
        assert state.iterations == 7
        assert [row.iteration for row in trace] == list(range(1, 8))

    def test_tol_stops_early(self, rng):
        terms, init, cfg = self._quad_setup(rng, tol=1e-3, max_iters=500)
        state, trace = admm.admm_solve(terms, lambda g: g, init, cfg)
        assert state.iterations < 500
        assert trace[-1].rel_change <= 1e-3
        assert all(row.rel_change > 1e-3 for row in trace[:-1])

    def test_record_trace_off(self, rng):
        terms, init, cfg = self._quad_setup(rng, tol=0.0, max_iters=5, record_trace=False)
        _, trace = admm.admm_solve(terms, lambda g: g, init, cfg)
        assert trace == []

    def test_observer_sees_every_iteration(self, rng):
        terms, init, cfg = self._quad_setup(rng, tol=0.0, max_iters=6)
        seen = []
        admm.admm_solve(terms, lambda g: g, init, cfg,
                        observer=lambda k, state, internals: seen.append(k))
        assert seen == [1, 2, 3, 4, 5, 6]

    def test_trace_monotone_elapsed(self, rng):
        terms, init, cfg = self._quad_setup(rng, tol=0.0, max_iters=10)
        _, trace = admm.admm_solve(terms, lambda g: g, init, cfg)
        elapsed = [row.elapsed_seconds for row in trace]
        assert all(b >= a for a, b in zip(elapsed, elapsed[1:]))

    def test_divergence_detected(self, rng):
        calls = {"n": 0}

        def poisoned(nu):
            calls["n"] += 1
            if calls["n"] >= 3:
                out = nu.copy()
                out.flat[0] = np.nan
                return out
            return nu

        terms = [identity_term(poisoned, "poison")]
        init = make_state(np.zeros((3, 3)), [np.zeros((3, 3))])
        cfg = admm.AdmmConfig(mu=1.0, tol=0.0, max_iters=50)
        with pytest.raises(admm.DivergenceError, match="iteration"):
            admm.admm_solve(terms, lambda g: g, init, cfg)

    def test_no_terms_rejected(self):
        init = make_state(np.zeros((2, 2)), [])
        with pytest.raises(ValueError, match="term"):
            admm.admm_solve([], lambda g: g, init, admm.AdmmConfig(mu=1.0))

    def test_mismatched_init_rejected(self, rng):
        terms = [identity_term(lambda nu: nu, "id")]
        init = make_state(np.zeros((2, 2)), [np.zeros((2, 2)), np.zeros((2, 2))])
        with pytest.raises(ValueError, match="splits"):
            admm.admm_solve(terms, lambda g: g, init, admm.AdmmConfig(mu=1.0))


class TestSpotCheck:
    def test_wrong_adjoint_rejected(self):
        terms = [admm.TermSpec(apply=lambda x: x, adjoint=lambda x: 2.0 * x,
                               prox=lambda nu: nu, name="broken")]
        init = make_state(np.zeros((3, 3)), [np.zeros((3, 3))])
        with pytest.raises(ValueError, match="adjoint"):
            admm.admm_solve(terms, lambda g: g, init, admm.AdmmConfig(mu=1.0))

    def test_wrong_normal_solver_rejected(self):
        terms = [admm.TermSpec(apply=lambda x: x, adjoint=lambda x: x,
                               prox=lambda nu: nu, name="id", identity=True)]
        init = make_state(np.zeros((3, 3)), [np.zeros((3, 3))])
        with pytest.raises(ValueError, match="normal solver"):
            admm.admm_solve(terms, lambda g: g / 3.0, init, admm.AdmmConfig(mu=1.0))


class TestConfigAndCsv:
    def test_config_validation(self):
        with pytest.raises(ValueError, match="mu"):
            admm.AdmmConfig(mu=0.0)
        with pytest.raises(ValueError, match="max_iters"):
            admm.AdmmConfig(mu=1.0, max_iters=0)
        with pytest.raises(ValueError, match="tol"):
            admm.AdmmConfig(mu=1.0, tol=-0.1)

    def test_trace_csv_roundtrip(self, tmp_path, rng):
        terms = [identity_term(quadratic_prox(rng.standard_normal((3, 3)), 1.0), "quad")]
        init = make_state(np.zeros((3, 3)), [np.zeros((3, 3))])
        _, trace = admm.admm_solve(terms, lambda g: g, init,
                                   admm.AdmmConfig(mu=1.0, tol=0.0, max_iters=4))
        path = tmp_path / "trace.csv"
        admm.write_trace_csv(path, trace)
        lines = path.read_text().splitlines()
        assert lines[0] == "iter,primal_residual,dual_residual,rel_change,elapsed_seconds"
        assert len(lines) == 5
        first = lines[1].split(",")
        assert first[0] == "1"
        assert float(first[3]) == trace[0].rel_change
