"""Combinatorics golden values and structural properties of trees/woods."""

import pytest
from hypothesis import given, settings, strategies as st

from spdetaylor.trees import (
    DerivationPath,
    LengthMismatch,
    NoActiveTree,
    NodeLabel,
    NotActive,
    ParentNotSmaller,
    STree,
    SWood,
    active_nodes,
    derive_wood,
    expand,
    make_tree,
    parse_derivation_path,
    render,
    subtrees,
    tree_order,
    wood_order,
    wood_w0,
)

# Derivation paths of the named woods w1..w5 from w0.
PATHS = {
    0: [],
    1: [(2, 1)],
    2: [(2, 1), (4, 1)],
    3: [(2, 1), (4, 1), (6, 1)],
    4: [(2, 1), (4, 1), (6, 1), (7, 1)],
    5: [(2, 1), (4, 1), (6, 1), (7, 1), (9, 1), (10, 1), (12, 1)],
}

# Golden active-node sets.
ACN = {
    0: {(2, 1)},
    1: {(4, 1), (5, 1), (5, 2), (6, 1)},
    2: {(5, 1), (5, 2), (6, 1), (7, 1), (8, 1), (8, 3), (9, 1)},
    3: {(5, 1), (5, 2), (7, 1), (8, 1), (8, 3), (9, 1), (10, 1), (11, 1),
        (11, 3), (12, 1)},
    4: {(5, 1), (5, 2), (8, 1), (8, 3), (9, 1), (10, 1), (11, 1), (11, 3),
        (12, 1), (13, 1), (14, 1), (14, 4), (15, 1)},
    5: {(5, 1), (5, 2), (8, 1), (8, 3), (11, 1), (11, 3), (13, 1), (14, 1),
        (14, 4), (15, 1), (16, 1), (17, 1), (17, 4), (18, 1), (19, 1),
        (20, 1), (20, 4), (21, 1), (22, 1), (23, 1), (23, 4), (24, 1)},
}

FIG1_LEFT = ([1, 2, 1], ["1", "1*", "2", "0"])
FIG1_RIGHT = ([1, 1, 1, 1, 4, 4], ["0", "0", "2", "1", "1*", "1", "0"])


def woods():
    return {k: derive_wood(PATHS[k]) for k in PATHS}


class TestMakeTree:
    def test_single_node(self):
        t = make_tree([], ["1*"])
        assert t.length == 1 and t.label(1) is NodeLabel.ONE_STAR

    def test_fig1_left(self):
        t = make_tree(*FIG1_LEFT)
        assert t.parent(4) == 1
        assert t.label(2) is NodeLabel.ONE_STAR

    def test_parent_not_smaller(self):
        with pytest.raises(ParentNotSmaller):
            make_tree([2], ["0", "0"])
        with pytest.raises(ParentNotSmaller):
            make_tree([0], ["0", "0"])

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            make_tree([1, 1], ["0", "0"])
        with pytest.raises(LengthMismatch):
            make_tree([], [])

    def test_label_coercion(self):
        t = make_tree([1], [NodeLabel.ONE_STAR, "2"])
        assert t.labels == (NodeLabel.ONE_STAR, NodeLabel.TWO)
        with pytest.raises(ValueError):
            make_tree([], ["3"])


class TestActiveNodes:
    def test_golden_sets(self):
        ws = woods()
        for k, w in ws.items():
            assert set(active_nodes(w)) == ACN[k], f"w{k}"

    def test_sorted_lexicographic(self):
        for w in woods().values():
            acn = active_nodes(w)
            assert list(acn) == sorted(acn)

    def test_inactive_wood_empty(self):
        w = SWood((make_tree([], ["0"]), make_tree([1], ["1", "2"])))
        assert active_nodes(w) == ()


class TestExpand:
    def test_w1_has_six_trees(self):
        assert len(expand(wood_w0(), (2, 1))) == 6

    def test_not_active(self):
        with pytest.raises(NotActive):
            expand(wood_w0(), (1, 1))
        with pytest.raises(NotActive):
            expand(wood_w0(), (9, 1))

    def test_grows_by_three_and_relabels(self):
        w = derive_wood(PATHS[2])
        for at in active_nodes(w):
            out = expand(w, at)
            assert len(out) == len(w) + 3
            i, j = at
            assert out.tree(i).label(j) is NodeLabel.ONE
            assert at not in active_nodes(out)

    def test_appended_tree_shape(self):
        w = derive_wood(PATHS[1])
        i, j = (5, 2)
        out = expand(w, (i, j))
        old = w.tree(i)
        for m, extra in enumerate(
            (NodeLabel.ZERO, NodeLabel.ONE_STAR, NodeLabel.TWO)
        ):
            app = out.tree(len(w) + 1 + m)
            assert app.length == old.length + 1
            assert app.labels[: old.length] == old.labels
            assert app.parents[: old.length - 1] == old.parents
            assert app.parent(app.length) == j
            assert app.label(app.length) is extra


class TestSubtrees:
    def test_fig1_right_decomposition(self):
        t = make_tree(*FIG1_RIGHT)
        subs = subtrees(t)
        got = [(s.parents, tuple(l.value for l in s.labels)) for s in subs]
        assert got == [
            ((), ("0",)),
            ((), ("2",)),
            ((1, 1), ("1", "1", "0")),
            ((), ("1*",)),
        ]

    def test_single_node_empty(self):
        assert subtrees(make_tree([], ["1*"])) == ()

    def test_root_one_child(self):
        t = make_tree([1], ["1", "2"])
        (s,) = subtrees(t)
        assert s == make_tree([], ["2"])


class TestOrders:
    def test_fig1_orders(self):
        assert str(tree_order(make_tree(*FIG1_LEFT))) == "2 + gamma + delta"
        assert str(tree_order(make_tree(*FIG1_RIGHT))) == "3 + 3*gamma + delta"

    def test_single_one_star(self):
        o = tree_order(make_tree([], ["1*"]))
        assert (o.const_part, o.gamma_coeff, o.delta_coeff) == (1, 0, 0)
        assert o.value(0.3, 0.4) == 1.0

    def test_wood_order_goldens(self):
        ws = woods()
        grid = [(0.25, 0.25), (0.5, 0.5), (0.125, 0.5), (0.75, 0.25), (0.4, 0.3)]
        for g, d in grid:
            assert wood_order(ws[0], g, d)[0] == 1.0
            assert wood_order(ws[1], g, d)[0] == 1.0 + min(g, d)
            assert wood_order(ws[2], g, d)[0] == 1.0 + min(2 * g, d)
            assert wood_order(ws[3], g, d)[0] == 1.0 + 2 * min(g, d)
            assert wood_order(ws[4], g, d)[0] == 1.0 + min(3 * g, g + d, 2 * d)
            assert wood_order(ws[5], g, d)[0] == pytest.approx(
                1.0 + 3 * min(g, d, 1.0 / 3.0), abs=1e-15
            )

    def test_printed_values(self):
        ws = woods()
        assert wood_order(ws[2], 0.25, 0.25) == (1.25, 6)
        assert wood_order(ws[5], 0.5, 0.5)[0] == 2.0

    def test_witness_smallest_index(self):
        # Two active single-node trees attain the same order; witness is first.
        w = SWood((make_tree([], ["1*"]), make_tree([], ["1*"])))
        assert wood_order(w, 0.25, 0.25) == (1.0, 1)

    def test_no_active_tree(self):
        w = SWood((make_tree([], ["0"]),))
        with pytest.raises(NoActiveTree):
            wood_order(w, 0.25, 0.25)

    def test_parameter_ranges(self):
        with pytest.raises(ValueError):
            wood_order(wood_w0(), 0.0, 0.25)
        with pytest.raises(ValueError):
            wood_order(wood_w0(), 0.25, 0.75)


class TestDeriveWood:
    def test_empty_path_is_w0(self):
        assert derive_wood([]) == wood_w0()

    def test_named_paths(self):
        assert len(derive_wood(PATHS[1])) == 6
        assert len(derive_wood(PATHS[2])) == 9
        assert len(derive_wood(PATHS[5])) == 24

    def test_failing_step_index(self):
        with pytest.raises(NotActive) as err:
            derive_wood([(1, 1)])
        assert err.value.step == 1
        assert "step 1: not active" in str(err.value)
        with pytest.raises(NotActive) as err:
            derive_wood([(2, 1), (2, 1)])
        assert err.value.step == 2

    def test_parse_path(self):
        assert parse_derivation_path("(2,1) (4,1)").steps == ((2, 1), (4, 1))
        assert parse_derivation_path("(2,1),(4,1)").steps == ((2, 1), (4, 1))
        assert parse_derivation_path(" ( 2 , 1 ) ").steps == ((2, 1),)
        assert parse_derivation_path("").steps == ()
        with pytest.raises(ValueError):
            parse_derivation_path("(2,1) bogus")


class TestRender:
    def test_w0_ascii(self):
        text = render(wood_w0(), "ascii")
        assert text.splitlines() == [
            "t1", "  n1 [0]", "t2", "  n1 [1*]", "t3", "  n1 [2]",
        ]

    def test_dot_shape_map_and_ids(self):
        text = render(derive_wood(PATHS[1]), "dot")
        assert text.startswith("digraph swood {")
        assert 't1_n1 [shape=diamond, label="0"];' in text
        assert 't2_n1 [shape=circle, label="1"];' in text
        assert 't3_n1 [shape=doublecircle, label="2"];' in text
        assert 't4_n1 [shape=box, label="1*"];' in text
        assert "t4_n1 -> t4_n2;" in text
        assert text.rstrip().endswith("}")

    def test_dot_well_formed(self):
        # Minimal grammar check: balanced braces, every edge references
        # declared nodes, exactly one digraph block.
        text = render(derive_wood(PATHS[2]), "dot")
        assert text.count("{") == text.count("}") == 1
        declared = set()
        edges = []
        for line in text.splitlines():
            line = line.strip()
            if line.endswith('];') and line.startswith("t"):
                declared.add(line.split(" ")[0])
            elif "->" in line:
                a, b = line.rstrip(";").split(" -> ")
                edges.append((a.strip(), b.strip()))
        assert declared and all(a in declared and b in declared for a, b in edges)

    def test_deterministic(self):
        w1 = derive_wood(PATHS[3])
        w2 = derive_wood(PATHS[3])
        assert render(w1, "dot") == render(w2, "dot")
        assert render(w1, "ascii") == render(w2, "ascii")

    def test_unknown_format(self):
        with pytest.raises(ValueError):
            render(wood_w0(), "png")


# ---------------------------------------------------------------------------
# Property-based structural invariants
# ---------------------------------------------------------------------------

@st.composite
def random_trees(draw, max_nodes=8):
    n = draw(st.integers(min_value=1, max_value=max_nodes))
    parents = [draw(st.integers(min_value=1, max_value=j - 1)) for j in range(2, n + 1)]
    labels = [
        draw(st.sampled_from(["0", "1", "2", "1*"])) for _ in range(n)
    ]
    return make_tree(parents, labels)


@st.composite
def random_derivations(draw, max_steps=4):
    n_steps = draw(st.integers(min_value=0, max_value=max_steps))
    w = wood_w0()
    steps = []
    for _ in range(n_steps):
        acn = active_nodes(w)
        at = acn[draw(st.integers(min_value=0, max_value=len(acn) - 1))]
        steps.append(at)
        w = expand(w, at)
    return DerivationPath(tuple(steps))


@given(random_derivations())
@settings(max_examples=200, deadline=None)
def test_expansion_invariants(path):
    w = derive_wood(path)
    for at in active_nodes(w):
        out = expand(w, at)
        assert len(out) == len(w) + 3
        i, j = at
        assert out.tree(i).label(j) is NodeLabel.ONE
        assert at not in active_nodes(out)
        # Unaffected trees are untouched.
        for idx in range(1, len(w) + 1):
            if idx != i:
                assert out.tree(idx) == w.tree(idx)


@given(random_derivations())
@settings(max_examples=200, deadline=None)
def test_order_bookkeeping_under_expansion(path):
    # The three appended trees have orders ord(t~) + gamma, + 1, + delta,
    # where t~ is the relabeled tree i.
    w = derive_wood(path)
    for at in active_nodes(w):
        out = expand(w, at)
        base = tree_order(out.tree(at[0]))
        o_zero = tree_order(out.tree(len(w) + 1))
        o_star = tree_order(out.tree(len(w) + 2))
        o_two = tree_order(out.tree(len(w) + 3))
        assert (o_zero.const_part, o_zero.gamma_coeff, o_zero.delta_coeff) == (
            base.const_part, base.gamma_coeff + 1, base.delta_coeff)
        assert (o_star.const_part, o_star.gamma_coeff, o_star.delta_coeff) == (
            base.const_part + 1, base.gamma_coeff, base.delta_coeff)
        assert (o_two.const_part, o_two.gamma_coeff, o_two.delta_coeff) == (
            base.const_part, base.gamma_coeff, base.delta_coeff + 1)


@given(random_trees())
@settings(max_examples=300, deadline=None)
def test_tree_order_counts(t):
    o = tree_order(t)
    n0 = sum(1 for lab in t.labels if lab is NodeLabel.ZERO)
    n2 = sum(1 for lab in t.labels if lab is NodeLabel.TWO)
    assert o.gamma_coeff == n0 and o.delta_coeff == n2
    assert o.const_part == t.length - n0 - n2
    # ord at gamma = delta = 1 equals the node count.
    assert o.const_part + o.gamma_coeff + o.delta_coeff == t.length


def _shape(t, j):
    """Nested (label, children-shapes) form, independent of node numbering."""
    return (t.label(j).value, tuple(_shape(t, c) for c in t.children(j)))


@given(random_trees())
@settings(max_examples=300, deadline=None)
def test_subtree_rebuild_identity(t):
    # Rebuilding a tree from its root label and subtrees recovers a tree with
    # the same parent/label structure up to the canonical renumbering.
    subs = subtrees(t)
    assert sum(s.length for s in subs) == t.length - 1
    parents = []
    labels = [t.label(1)]
    offset = 1
    for s in subs:
        parents.append(1)
        labels.append(s.label(1))
        root_new = offset + 1
        for j in range(2, s.length + 1):
            parents.append(root_new + s.parent(j) - 1)
            labels.append(s.label(j))
        offset += s.length
    rebuilt = STree(tuple(parents), tuple(labels))
    assert _shape(rebuilt, 1) == _shape(t, 1)


@given(random_trees(), random_trees())
@settings(max_examples=100, deadline=None)
def test_structural_equality(a, b):
    same = a.parents == b.parents and a.labels == b.labels
    assert (a == b) == same
