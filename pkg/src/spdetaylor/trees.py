"""Labeled rooted trees and woods for stochastic Taylor expansions.

A stochastic tree (S-tree) of length N is a rooted tree on nodes 1..N whose
parent map t'(j) satisfies t'(j) < j for j = 2..N and whose nodes carry labels
t''(j) in {0, 1, 2, 1*}.  An S-wood is a nonempty ordered tuple of S-trees;
node addresses (i, j) refer to node j of the i-th tree, both 1-based.

A node labeled 1* is *active*: it stands for a term that still contains the
unknown solution path.  The expansion operator ``expand(w, (i, j))`` relabels
an active node to 1 and appends three child-extended copies of the tree, and
the order functional

    ord(t) = l(t) + (gamma - 1) * #{nodes labeled 0} + (delta - 1) * #{nodes labeled 2}

measures the strong convergence exponent of the remainder associated with a
wood (minimum of ord over its active trees).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence


class TreeError(Exception):
    """Base class for errors raised by tree and wood operations."""


class ParentNotSmaller(TreeError):
    """A parent entry does not satisfy 1 <= t'(j) < j."""


class LengthMismatch(TreeError):
    """Parent and label sequences have inconsistent lengths."""


class NotActive(TreeError):
    """An expansion was requested at an address that is not an active node."""

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message)
        self.step = step


class NoActiveTree(TreeError):
    """A wood-order query was made on a wood with no active tree."""


class NodeLabel(Enum):
    """Node label t''(j): one of 0, 1, 2, 1*; only 1* is active."""

    ZERO = "0"
    ONE = "1"
    TWO = "2"
    ONE_STAR = "1*"

    @property
    def is_active(self) -> bool:
        return self is NodeLabel.ONE_STAR

    @classmethod
    def coerce(cls, value: "NodeLabel | str") -> "NodeLabel":
        if isinstance(value, NodeLabel):
            return value
        try:
            return cls(str(value))
        except ValueError:
            raise ValueError(
                f"unknown node label {value!r}; expected one of '0', '1', '2', '1*'"
            ) from None


#: Graphviz shape per label (stable external interface).
DOT_SHAPES = {
    NodeLabel.ZERO: "diamond",
    NodeLabel.ONE: "circle",
    NodeLabel.TWO: "doublecircle",
    NodeLabel.ONE_STAR: "box",
}


@dataclass(frozen=True)
class STree:
    """Immutable S-tree: ``parents[j-2]`` is t'(j) for j = 2..N, labels 1-based.

    Equality is structural (same parent and label tuples), which is the right
    notion here because the expansion operator fixes the numbering.
    """

    parents: tuple[int, ...]
    labels: tuple[NodeLabel, ...]

    def __post_init__(self):
        if len(self.labels) < 1:
            raise LengthMismatch("a tree needs at least one node")
        if len(self.parents) != len(self.labels) - 1:
            raise LengthMismatch(
                f"got {len(self.parents)} parent entries for {len(self.labels)} "
                f"nodes; expected {len(self.labels) - 1}"
            )
        for j, p in enumerate(self.parents, start=2):
            if not (1 <= p < j):
                raise ParentNotSmaller(
                    f"node {j}: parent {p} must satisfy 1 <= parent < {j}"
                )

    @property
    def length(self) -> int:
        """Number of nodes l(t)."""
        return len(self.labels)

    def label(self, j: int) -> NodeLabel:
        """Label of node j (1-based)."""
        return self.labels[j - 1]

    def parent(self, j: int) -> int:
        """Parent t'(j) of node j >= 2 (1-based)."""
        if j < 2 or j > self.length:
            raise IndexError(f"node {j} has no parent entry")
        return self.parents[j - 2]

    def children(self, j: int) -> tuple[int, ...]:
        """Children of node j in increasing order."""
        return tuple(
            c for c in range(2, self.length + 1) if self.parents[c - 2] == j
        )

    def active_nodes(self) -> tuple[int, ...]:
        """Nodes labeled 1*, in increasing order."""
        return tuple(
            j for j, lab in enumerate(self.labels, start=1) if lab.is_active
        )

    @property
    def is_active(self) -> bool:
        """True if the tree contains at least one active node."""
        return any(lab.is_active for lab in self.labels)


def make_tree(
    parents: Sequence[int], labels: Sequence["NodeLabel | str"]
) -> STree:
    """Validate and build an S-tree from parent entries and labels.

    ``parents`` lists t'(j) for j = 2..N (so it is one entry shorter than
    ``labels``); labels may be given as NodeLabel values or as the strings
    '0', '1', '2', '1*'.

    Raises LengthMismatch on inconsistent lengths and ParentNotSmaller if any
    entry violates 1 <= t'(j) < j.
    """
    return STree(
        tuple(int(p) for p in parents),
        tuple(NodeLabel.coerce(lab) for lab in labels),
    )


@dataclass(frozen=True)
class SWood:
    """Nonempty ordered tuple of S-trees; tree order is significant."""

    trees: tuple[STree, ...]

    def __post_init__(self):
        if len(self.trees) < 1:
            raise LengthMismatch("a wood needs at least one tree")

    def __len__(self) -> int:
        return len(self.trees)

    def tree(self, i: int) -> STree:
        """The i-th tree, 1-based."""
        return self.trees[i - 1]


def make_wood(trees: Iterable[STree]) -> SWood:
    return SWood(tuple(trees))


def wood_w0() -> SWood:
    """The root wood: three single-node trees labeled 0, 1*, 2 in this order."""
    return SWood(
        (
            make_tree([], ["0"]),
            make_tree([], ["1*"]),
            make_tree([], ["2"]),
        )
    )


def active_nodes(w: SWood) -> tuple[tuple[int, int], ...]:
    """All addresses (i, j) with node j of tree i labeled 1*, lexicographic."""
    return tuple(
        (i, j)
        for i, t in enumerate(w.trees, start=1)
        for j in t.active_nodes()
    )


def expand(w: SWood, at: tuple[int, int]) -> SWood:
    """Apply the expansion operator E_(i,j) at an active node.

    Tree i has node j relabeled 1 in place; three new trees are appended, each
    a copy of the *pre-expansion* tree i with one extra leaf child of node j,
    labeled 0, 1*, 2 respectively, in that order.  All other trees are
    unchanged.  Raises NotActive if (i, j) is not an active node of w.
    """
    i, j = at
    if not (1 <= i <= len(w)) or not (1 <= j <= w.tree(i).length):
        raise NotActive(f"address ({i},{j}) is out of range for this wood")
    old = w.tree(i)
    if not old.label(j).is_active:
        raise NotActive(
            f"node ({i},{j}) is labeled {old.label(j).value!r}, not 1*"
        )
    new_labels = list(old.labels)
    new_labels[j - 1] = NodeLabel.ONE
    relabeled = STree(old.parents, tuple(new_labels))
    appended = tuple(
        STree(old.parents + (j,), old.labels + (extra,))
        for extra in (NodeLabel.ZERO, NodeLabel.ONE_STAR, NodeLabel.TWO)
    )
    trees = list(w.trees)
    trees[i - 1] = relabeled
    return SWood(tuple(trees) + appended)


def _descendant_closure(t: STree, root: int) -> list[int]:
    """Sorted list of node ``root`` and all its descendants."""
    keep = {root}
    # Parents precede children in the numbering, so one ascending sweep works.
    for j in range(root + 1, t.length + 1):
        if t.parent(j) in keep:
            keep.add(j)
    return sorted(keep)


def subtrees(t: STree) -> tuple[STree, ...]:
    """The subtrees hanging off the root, one per child of node 1.

    Each subtree is the induced tree on a root child's descendant closure,
    with nodes renumbered to 1..m preserving relative order.  A single-node
    tree has no subtrees.
    """
    out = []
    for c in t.children(1):
        nodes = _descendant_closure(t, c)
        renumber = {old: new for new, old in enumerate(nodes, start=1)}
        labels = tuple(t.label(old) for old in nodes)
        parents = tuple(renumber[t.parent(old)] for old in nodes[1:])
        out.append(STree(parents, labels))
    return tuple(out)


@dataclass(frozen=True)
class SymbolicOrder:
    """Order expression  const_part + gamma_coeff*gamma + delta_coeff*delta.

    For a tree: const_part = l(t) - #0 - #2, gamma_coeff = #0, delta_coeff = #2,
    so that evaluation at (gamma, delta) gives ord(t).
    """

    const_part: int
    gamma_coeff: int
    delta_coeff: int

    def __post_init__(self):
        if self.gamma_coeff < 0 or self.delta_coeff < 0:
            raise ValueError("gamma/delta coefficients must be nonnegative")

    def value(self, gamma: float, delta: float) -> float:
        return self.const_part + self.gamma_coeff * gamma + self.delta_coeff * delta

    def __str__(self) -> str:
        parts = []
        if self.const_part != 0 or (self.gamma_coeff == 0 and self.delta_coeff == 0):
            parts.append(str(self.const_part))
        for coeff, name in ((self.gamma_coeff, "gamma"), (self.delta_coeff, "delta")):
            if coeff == 1:
                parts.append(name)
            elif coeff > 1:
                parts.append(f"{coeff}*{name}")
        return " + ".join(parts)


def tree_order(t: STree) -> SymbolicOrder:
    """Order functional of a tree as a symbolic expression in (gamma, delta)."""
    n0 = sum(1 for lab in t.labels if lab is NodeLabel.ZERO)
    n2 = sum(1 for lab in t.labels if lab is NodeLabel.TWO)
    return SymbolicOrder(t.length - n0 - n2, n0, n2)


def wood_order(w: SWood, gamma: float, delta: float) -> tuple[float, int]:
    """Minimum of ord over the active trees of w, with a 1-based witness index.

    gamma must lie in (0, 1) and delta in (0, 1/2]; ties are broken by the
    smallest tree index.  Raises NoActiveTree if no tree of w is active.
    """
    if not (0.0 < gamma < 1.0):
        raise ValueError(f"gamma must lie in (0, 1); got {gamma}")
    if not (0.0 < delta <= 0.5):
        raise ValueError(f"delta must lie in (0, 1/2]; got {delta}")
    best: tuple[float, int] | None = None
    for i, t in enumerate(w.trees, start=1):
        if not t.is_active:
            continue
        val = tree_order(t).value(gamma, delta)
        if best is None or val < best[0]:
            best = (val, i)
    if best is None:
        raise NoActiveTree("wood has no active tree; its order is undefined")
    return best


@dataclass(frozen=True)
class DerivationPath:
    """Sequence of expansion addresses certifying a wood's construction."""

    steps: tuple[tuple[int, int], ...] = field(default_factory=tuple)

    def __post_init__(self):
        for s in self.steps:
            if len(s) != 2:
                raise ValueError(f"each step must be an (i, j) pair; got {s!r}")


_PATH_STEP = re.compile(r"\(\s*(\d+)\s*,\s*(\d+)\s*\)")


def parse_derivation_path(text: str) -> DerivationPath:
    """Parse '(2,1) (4,1)' or '(2,1),(4,1)' into a DerivationPath."""
    leftover = _PATH_STEP.sub("", text).strip(" ,\t\n")
    if leftover:
        raise ValueError(f"could not parse derivation path {text!r}")
    steps = tuple((int(a), int(b)) for a, b in _PATH_STEP.findall(text))
    return DerivationPath(steps)


def derive_wood(path: "DerivationPath | Sequence[tuple[int, int]]") -> SWood:
    """Replay a sequence of expansions starting from the builtin w0.

    Success certifies membership of the result in the constructible family.
    Raises NotActive at the first failing step; the message carries the
    1-based step index and the exception's ``step`` attribute is set.
    """
    steps = path.steps if isinstance(path, DerivationPath) else tuple(path)
    w = wood_w0()
    for k, at in enumerate(steps, start=1):
        try:
            w = expand(w, tuple(at))
        except NotActive as exc:
            raise NotActive(f"step {k}: not active ({exc})", step=k) from None
    return w


def _render_ascii(w: SWood) -> str:
    lines = []
    for i, t in enumerate(w.trees, start=1):
        lines.append(f"t{i}")

        def walk(j: int, depth: int):
            lines.append("  " * depth + f"n{j} [{t.label(j).value}]")
            for c in t.children(j):
                walk(c, depth + 1)

        walk(1, 1)
    return "\n".join(lines) + "\n"


def _render_dot(w: SWood) -> str:
    lines = ["digraph swood {", "  node [ordering=out];"]
    for i, t in enumerate(w.trees, start=1):
        for j in range(1, t.length + 1):
            lab = t.label(j)
            lines.append(
                f'  t{i}_n{j} [shape={DOT_SHAPES[lab]}, label="{lab.value}"];'
            )
        for j in range(2, t.length + 1):
            lines.append(f"  t{i}_n{t.parent(j)} -> t{i}_n{j};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def render(w: SWood, format: str = "ascii") -> str:
    """Render a wood as an ASCII forest or a Graphviz DOT digraph.

    Node IDs in DOT output are ``t<i>_n<j>`` and shapes encode labels
    (diamond = 0, circle = 1, doublecircle = 2, box = 1*).  Output is
    deterministic: structurally equal woods render byte-identically.
    """
    if format == "ascii":
        return _render_ascii(w)
    if format == "dot":
        return _render_dot(w)
    raise ValueError(f"unknown render format {format!r}; use 'ascii' or 'dot'")
