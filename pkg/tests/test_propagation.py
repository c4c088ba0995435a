"""Message passing: the worked six-variable example, oracle equivalence,
calibration, invariances, classification."""

import numpy as np
import pytest

import unitybn as u
from _synth import (
    brute_posteriors,
    brute_posteriors_slow,
    brute_smoothed_posteriors,
    fig_network,
    fig_tree,
    random_bn,
    sample_row,
)

POLICY = u.SmoothingPolicy.mle_unity()


def worked_evidence(bn):
    return u.Evidence([(bn.variable("b"), "b+"), (bn.variable("c"), "c+")])


class TestWorkedExample:
    def test_initialized_state_shapes(self):
        bn, jt = fig_tree()
        state = u.initialize(jt, worked_evidence(bn), u.SmoothingPolicy.mle_unity(0.25))
        by = {frozenset(jt.cliques[i]): state.potentials[i] for i in range(4)}
        smoothed = by[frozenset("bce")]
        assert smoothed.is_pure_unity and smoothed.unity_names == {"e"} and smoothed.weight == 0.25
        unity_clique = by[frozenset("bde")]
        assert unity_clique.is_pure_unity and unity_clique.unity_names == {"d", "e"}
        assert unity_clique.weight == 1.0
        for key in ("abd", "def"):
            psi = by[frozenset(key)]
            assert not psi.is_pure_unity and not psi.unity_vars and psi.weight == 1.0
        assert state.smoothed == [("c", jt.clique_index("bce"))]

    # The ledger below holds for any generic smoothing value.  At the
    # degenerate setting eps=1 the smoothed replacement is exactly an
    # all-ones table, so the materialized engine has one product fewer
    # (3 multiplications instead of 4) and the shortcut engine records
    # one avoided multiplication fewer; the performed+avoided balance
    # stays equal between the engines either way.

    def test_collect_ledger_with_shortcuts(self):
        bn, jt = fig_tree()
        state = u.collect(u.initialize(jt, worked_evidence(bn), u.SmoothingPolicy.mle_unity(0.5)))
        c = state.phase_counters["collect"]
        assert c.partial_multiplications == 1
        assert c.partial_divisions == 1
        assert c.avoided_multiplications == 3
        assert c.avoided_divisions == 3
        assert c.projections == 1

    def test_collect_ledger_materialized(self):
        bn, jt = fig_tree()
        state = u.collect(
            u.initialize(jt, worked_evidence(bn), u.SmoothingPolicy.mle_unity(0.5), up_enabled=False)
        )
        c = state.phase_counters["collect"]
        assert c.partial_multiplications == 4
        assert c.partial_divisions == 4
        assert c.avoided_multiplications == 0
        assert c.avoided_divisions == 0

    def test_collect_ledger_at_unit_epsilon(self):
        bn, jt = fig_tree()
        with_up = u.collect(u.initialize(jt, worked_evidence(bn), POLICY))
        without = u.collect(u.initialize(jt, worked_evidence(bn), POLICY, up_enabled=False))
        cu, cn = with_up.phase_counters["collect"], without.phase_counters["collect"]
        assert (cu.partial_multiplications, cu.partial_divisions) == (1, 1)
        assert (cn.partial_multiplications, cn.partial_divisions) == (3, 4)
        assert cu.performed + cu.avoided_multiplications + cu.avoided_divisions == cn.performed

    def test_eta_formula(self):
        bn, jt = fig_tree()
        eps = 0.25
        ev = worked_evidence(bn)
        state = u.collect(u.initialize(jt, ev, u.SmoothingPolicy.mle_unity(eps)))
        phi_c1 = bn.cpts["e"].table.multiply(bn.cpts["f"].table)
        phi_c4 = (
            bn.cpts["b"].table.evidence_reduce(ev)
            .multiply(bn.cpts["a"].table.evidence_reduce(ev))
            .multiply(bn.cpts["d"].table.evidence_reduce(ev))
        )
        expected = eps * phi_c1.multiply(phi_c4.project(["d"])).total_mass()
        assert state.eta == pytest.approx(expected, rel=1e-12)
        assert state.eta_smoothed

    def test_sender_states_after_collect(self):
        bn, jt = fig_tree()
        state = u.collect(u.initialize(jt, worked_evidence(bn), u.SmoothingPolicy.mle_unity(0.25)))
        smoothed = state.potentials[jt.clique_index("bce")]
        assert smoothed.is_pure_unity and smoothed.unity_names == {"e"} and smoothed.weight == 1.0
        unity_clique = state.potentials[jt.clique_index("bde")]
        assert unity_clique.is_pure_unity and unity_clique.unity_names == {"d", "e"}
        assert unity_clique.weight == 1.0

    def test_root_after_collect_is_joint_given_evidence(self):
        bn, jt = fig_tree()
        ev = worked_evidence(bn)
        state = u.collect(u.initialize(jt, ev, POLICY))
        joint = u.query_marginal(state, ["d", "e", "f"])
        _eta, oracle = brute_smoothed_posteriors(bn, {"b": "b+", "c": "c+"}, 1.0)
        # single-variable checks through the root joint
        for name in "def":
            got = joint.project([name]).to_dense().values_flat()
            assert np.allclose(got, oracle[name], atol=1e-12)

    def test_trace_golden(self):
        bn, jt = fig_tree()
        state = u.propagate(jt, worked_evidence(bn), u.SmoothingPolicy.mle_unity(0.25))
        assert u.format_trace(state) == (
            "initialize smooth clique=1 mult=avoided tags=iv\n"
            "collect materialize clique=1 mult=avoided tags=iv\n"
            "collect message 0->2 sep=d proj=performed mult=avoided div=performed tags=i\n"
            "collect message 1->2 sep=e proj=skipped mult=avoided div=avoided tags=i,ii\n"
            "collect message 2->3 sep=d,e proj=skipped mult=performed div=avoided tags=ii\n"
            "collect normalize clique=3 div=avoided\n"
            "distribute message 3->2 sep=d,e proj=performed mult=avoided tags=i\n"
            "distribute message 2->0 sep=d proj=performed mult=performed\n"
            "distribute message 2->1 sep=e proj=performed mult=avoided tags=i"
        )

    def test_no_evidence_cliques_are_their_cpt_products(self):
        bn, jt = fig_tree()
        state = u.initialize(jt, u.Evidence.empty(), POLICY)
        for i, cpts in enumerate(jt.assignments):
            if not cpts:
                assert state.potentials[i].is_pure_unity
                continue
            product = cpts[0].table
            for cpt in cpts[1:]:
                product = product.multiply(cpt.table)
            got = u.materialize(state.potentials[i]).project(product.names)
            assert got.same_table(product, rel=1e-12)

    def test_all_variables_observed_reduces_every_clique_to_a_scalar(self):
        rng = np.random.default_rng(17)
        bn = random_bn(rng, n_min=4, n_max=6)
        jt = u.compile_model(bn)
        row = sample_row(bn, rng)
        ev = u.Evidence([(bn.variable(n), row[n]) for n in bn.dag.nodes])
        state = u.initialize(jt, ev, POLICY)
        for psi in state.potentials:
            assert psi.is_pure_unity and not psi.unity_vars
        u.collect(state)
        expected, _ = brute_posteriors(bn, row)
        assert state.eta == pytest.approx(expected, rel=1e-10)

    def test_posteriors_match_smoothed_brute_force_both_modes(self):
        bn, jt = fig_tree()
        for eps in (0.25, 1.0):
            _eta_unused, oracle = brute_smoothed_posteriors(bn, {"b": "b+", "c": "c+"}, eps)
            for up in (True, False):
                state = u.propagate(
                    jt, worked_evidence(bn), u.SmoothingPolicy.mle_unity(eps), up_enabled=up
                )
                for name in "adef":
                    got = u.query_marginal(state, [name]).to_dense().values_flat()
                    assert np.allclose(got, oracle[name], atol=1e-12)

    def test_eta_scales_linearly_in_epsilon(self):
        bn, jt = fig_tree()
        etas = {}
        for eps in (1e-3, 0.5, 1.0):
            state = u.collect(u.initialize(jt, worked_evidence(bn), u.SmoothingPolicy.mle_unity(eps)))
            etas[eps] = state.eta
        base = etas[1.0]
        for eps in (1e-3, 0.5):
            assert etas[eps] / eps == pytest.approx(base, rel=1e-9)


class TestCalibrationAndQueries:
    def test_no_evidence_marginals_match_brute_force(self):
        rng = np.random.default_rng(10)
        for _ in range(10):
            bn = random_bn(rng, n_min=4, n_max=6)
            jt = u.compile_model(bn)
            state = u.propagate(jt, u.Evidence.empty(), POLICY)
            assert state.eta == pytest.approx(1.0, abs=1e-12)
            _eta, oracle = brute_posteriors(bn, {})
            for name in bn.dag.nodes:
                got = u.query_marginal(state, [name]).to_dense().values_flat()
                assert np.allclose(got, oracle[name], atol=1e-10)

    def test_neighbor_cliques_agree_on_separators(self):
        rng = np.random.default_rng(11)
        for _ in range(15):
            bn = random_bn(rng, n_min=5, n_max=8)
            jt = u.compile_model(bn)
            row = sample_row(bn, rng)
            names = list(bn.dag.nodes)
            q = int(rng.integers(0, len(names) - 1))
            picks = [names[i] for i in sorted(rng.choice(len(names), size=q, replace=False))]
            ev = u.Evidence([(bn.variable(n), row[n]) for n in picks])
            state = u.propagate(jt, ev, POLICY)
            for a, b, sep in jt.edges:
                sep_star = sorted(frozenset(sep) - ev.names)
                if not sep_star:
                    continue
                pa = u.materialize(u.up_project(state.potentials[a], sep_star))
                pb = u.materialize(u.up_project(state.potentials[b], sep_star))
                pa, _ = pa.normalize()
                pb, _ = pb.normalize()
                assert pa.same_table(pb, rel=1e-12, abs_tol=1e-12)

    def test_representation_invariance(self):
        rng = np.random.default_rng(12)
        for _ in range(8):
            bn = random_bn(rng, n_min=4, n_max=6)
            dense_cpts = {
                n: u.Cpt(c.child, c.parents, c.table.to_dense()) for n, c in bn.cpts.items()
            }
            sparse_cpts = {
                n: u.Cpt(c.child, c.parents, c.table.to_sparse()) for n, c in bn.cpts.items()
            }
            row = sample_row(bn, rng)
            picks = list(bn.dag.nodes)[:2]
            posts = []
            for cpts in (dense_cpts, sparse_cpts):
                bn2 = u.BayesianNetwork(bn.dag, cpts)
                jt = u.compile_model(bn2)
                ev = u.Evidence([(bn2.variable(n), row[n]) for n in picks])
                state = u.propagate(jt, ev, POLICY)
                posts.append(
                    {
                        n: u.query_marginal(state, [n]).to_dense().values_flat()
                        for n in bn.dag.nodes
                        if n not in picks
                    }
                )
            for n in posts[0]:
                assert np.allclose(posts[0][n], posts[1][n], atol=1e-12)

    def test_joint_in_clique_query(self):
        bn, jt = fig_tree()
        state = u.propagate(jt, u.Evidence.empty(), POLICY)
        joint = u.query_marginal(state, ["d", "e"])
        assert joint.total_mass() == pytest.approx(1.0, abs=1e-12)
        _eta, oracle = brute_posteriors(bn, {})
        assert np.allclose(joint.project(["d"]).to_dense().values_flat(), oracle["d"], atol=1e-10)

    def test_query_errors(self):
        bn, jt = fig_tree()
        ev = worked_evidence(bn)
        state = u.initialize(jt, ev, POLICY)
        with pytest.raises(u.PhaseError):
            u.query_marginal(state, ["d"])
        u.collect(state)
        with pytest.raises(u.QueryError):
            u.query_marginal(state, ["b"])  # evidence variable
        with pytest.raises(u.PhaseError):
            u.query_marginal(state, ["a"])  # off-root before distribute
        u.distribute(state)
        with pytest.raises(u.QueryError):
            u.query_marginal(state, ["a", "f"])  # no shared clique
        with pytest.raises(u.QueryError):
            u.query_marginal(state, ["zz"])
        with pytest.raises(u.QueryError):
            u.query_marginal(state, [])

    def test_phase_order_enforced(self):
        bn, jt = fig_tree()
        state = u.initialize(jt, u.Evidence.empty(), POLICY)
        with pytest.raises(u.PhaseError):
            u.distribute(state)
        with pytest.raises(u.PhaseError):
            u.prob_evidence(state)
        u.collect(state)
        with pytest.raises(u.PhaseError):
            u.collect(state)

    def test_prob_evidence_matches_brute_force(self):
        rng = np.random.default_rng(13)
        for _ in range(10):
            bn = random_bn(rng, n_min=4, n_max=7)
            jt = u.compile_model(bn)
            row = sample_row(bn, rng)
            names = list(bn.dag.nodes)
            q = int(rng.integers(1, len(names)))
            picks = [names[i] for i in sorted(rng.choice(len(names), size=q, replace=False))]
            ev_map = {n: row[n] for n in picks}
            state = u.collect(u.initialize(jt, u.Evidence(
                [(bn.variable(n), l) for n, l in ev_map.items()]), POLICY))
            expected, _ = brute_posteriors(bn, ev_map)
            assert u.prob_evidence(state) == pytest.approx(expected, rel=1e-10)
            assert not state.eta_smoothed

    def test_oracles_cross_check(self):
        rng = np.random.default_rng(14)
        for _ in range(5):
            bn = random_bn(rng, n_min=4, n_max=5)
            row = sample_row(bn, rng)
            ev_map = {list(bn.dag.nodes)[0]: row[list(bn.dag.nodes)[0]]}
            fast_eta, fast = brute_posteriors(bn, ev_map)
            slow_eta, slow = brute_posteriors_slow(bn, ev_map)
            assert fast_eta == pytest.approx(slow_eta, rel=1e-12)
            for n in fast:
                assert np.allclose(fast[n], slow[n], atol=1e-12)


class TestDegenerateAndPolicies:
    def test_laplace_policy_cannot_smooth_at_query_time(self):
        bn, jt = fig_tree()
        with pytest.raises(u.DegenerateModelError):
            u.initialize(jt, worked_evidence(bn), u.SmoothingPolicy.laplace_policy())

    def test_jointly_impossible_evidence_raises_at_collect(self):
        # two deterministic children force x to different values
        x = u.Variable("x", ("0", "1"))
        y = u.Variable("y", ("0", "1"))
        z = u.Variable("z", ("0", "1"))
        dag = u.Dag(("x", "y", "z"), {"x": (), "y": ("x",), "z": ("x",)},
                    {"x": x, "y": y, "z": z})
        mk = lambda ch, ps, flat: u.Cpt(ch, ps, u.Potential.from_dense((ch,) + ps, flat))
        bn = u.BayesianNetwork(dag, {
            "x": mk(x, (), [0.5, 0.5]),
            "y": mk(y, (x,), [1.0, 0.0, 0.0, 1.0]),   # y == x
            "z": mk(z, (x,), [0.0, 1.0, 1.0, 0.0]),   # z == not x
        })
        jt = u.compile_model(bn)
        ev = u.Evidence([(y, "0"), (z, "0")])  # needs x=0 and x=1 at once
        state = u.initialize(jt, ev, POLICY)
        assert not state.smoothed  # no single CPT went null
        with pytest.raises(u.DegenerateModelError):
            u.collect(state)

    def test_weight_neglect(self):
        bn, jt = fig_tree()
        state = u.propagate(jt, worked_evidence(bn), POLICY, track_weights=False)
        assert state.eta is None
        with pytest.raises(u.QueryError):
            u.prob_evidence(state)
        _eta, oracle = brute_smoothed_posteriors(bn, {"b": "b+", "c": "c+"}, 1.0)
        got = u.query_marginal(state, ["d"]).to_dense().values_flat()
        assert np.allclose(got, oracle["d"], atol=1e-12)

    def test_unknown_evidence_variable_rejected(self):
        _bn, jt = fig_tree()
        with pytest.raises(u.QueryError):
            u.initialize(jt, u.Evidence([(u.Variable("zz", ("0", "1")), "0")]), POLICY)

    def test_forest_propagation(self):
        v = {n: u.Variable(n, ("0", "1")) for n in "wxyz"}
        dag = u.Dag(("x", "y", "z", "w"), {"x": (), "y": ("x",), "z": (), "w": ("z",)}, v)
        mk = lambda ch, ps, flat: u.Cpt(v[ch], tuple(v[p] for p in ps),
                                        u.Potential.from_dense((v[ch],) + tuple(v[p] for p in ps), flat))
        bn = u.BayesianNetwork(dag, {
            "x": mk("x", (), [0.3, 0.7]),
            "y": mk("y", ("x",), [0.2, 0.8, 0.6, 0.4]),
            "z": mk("z", (), [0.9, 0.1]),
            "w": mk("w", ("z",), [0.5, 0.5, 0.25, 0.75]),
        })
        jt = u.compile_model(bn)
        assert len(jt.components()) == 2
        ev_map = {"y": "1", "w": "0"}
        state = u.propagate(jt, u.Evidence([(v[n], l) for n, l in ev_map.items()]), POLICY)
        expected_eta, oracle = brute_posteriors(bn, ev_map)
        assert state.eta == pytest.approx(expected_eta, rel=1e-12)
        for n in ("x", "z"):
            got = u.query_marginal(state, [n]).to_dense().values_flat()
            assert np.allclose(got, oracle[n], atol=1e-12)


class TestPredictClass:
    def test_argmax_and_tie_break(self):
        cls = u.Variable("cls", ("first", "second"))
        f = u.Variable("f", ("0", "1"))
        dag = u.Dag(("cls", "f"), {"cls": (), "f": ("cls",)}, {"cls": cls, "f": f})
        mk = lambda ch, ps, flat: u.Cpt(ch, ps, u.Potential.from_dense((ch,) + ps, flat))
        bn = u.BayesianNetwork(dag, {
            "cls": mk(cls, (), [0.7, 0.3]),
            "f": mk(f, (cls,), [0.5, 0.5, 0.5, 0.5]),
        })
        jt = u.compile_model(bn, root_target="cls")
        assert u.predict_class(jt, u.Evidence.empty(), "cls", POLICY) == "first"
        # perfect tie: uniform prior, uninformative feature
        bn2 = u.BayesianNetwork(dag, {
            "cls": mk(cls, (), [0.5, 0.5]),
            "f": mk(f, (cls,), [0.5, 0.5, 0.5, 0.5]),
        })
        jt2 = u.compile_model(bn2, root_target="cls")
        ev = u.Evidence([(f, "1")])
        assert u.predict_class(jt2, ev, "cls", POLICY) == "first"

    def test_class_observed_rejected(self):
        bn, jt = fig_tree()
        jt = jt.with_root(u.choose_root(jt, "a"))
        with pytest.raises(u.QueryError):
            u.predict_class(jt, u.Evidence([(bn.variable("a"), "a+")]), "a", POLICY)

    def test_agrees_with_full_propagation(self):
        rng = np.random.default_rng(15)
        for _ in range(10):
            bn = random_bn(rng, n_min=4, n_max=7)
            names = list(bn.dag.nodes)
            class_var = names[int(rng.integers(len(names)))]
            jt = u.compile_model(bn, root_target=class_var)
            row = sample_row(bn, rng)
            others = [n for n in names if n != class_var]
            q = int(rng.integers(0, len(others) + 1))
            picks = [others[i] for i in sorted(rng.choice(len(others), size=q, replace=False))]
            ev = u.Evidence([(bn.variable(n), row[n]) for n in picks])
            pred = u.predict_class(jt, ev, class_var, POLICY)
            state = u.propagate(jt, ev, POLICY)
            post = u.query_marginal(state, [class_var]).to_dense().values_flat()
            assert pred == bn.variable(class_var).levels[int(np.argmax(post))]

    def test_counters_monotone_and_dominated(self):
        rng = np.random.default_rng(16)
        for _ in range(10):
            bn = random_bn(rng, n_min=5, n_max=8)
            jt = u.compile_model(bn)
            row = sample_row(bn, rng)
            names = list(bn.dag.nodes)
            picks = [n for n in names if rng.random() < 0.4]
            ev = u.Evidence([(bn.variable(n), row[n]) for n in picks])
            sup = u.propagate(jt, ev, POLICY, up_enabled=True)
            sno = u.propagate(jt, ev, POLICY, up_enabled=False)
            assert sup.counters.performed <= sno.counters.performed
            avoided_up = (
                sup.counters.avoided_multiplications + sup.counters.avoided_divisions
            )
            avoided_no = (
                sno.counters.avoided_multiplications + sno.counters.avoided_divisions
            )
            assert sup.counters.performed + avoided_up == sno.counters.performed + avoided_no
