"""Public-node tree decomposition of a team view.

Classes at the same depth are public with respect to the team when reaching
one makes it common knowledge within the team that the group was reached; the
groups are the connected components, per depth, of the relation linking two
classes whenever some team infoset has nodes weakly below both.  Each
non-leaf group, together with all children of its classes, forms a bag; the
bags form a tree.  (Leaf groups are subsets of their parent's bag and are
omitted; the root group keeps its bag even when the game is a single node.)
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction

from .errors import InternalError, MarginalMismatchError
from .game import ClassKind, TeamView


@dataclass(frozen=True)
class Bag:
    """One vertex of the decomposition: C = C_minus ∪ C_plus."""

    minus: tuple[int, ...]  # the public node (sorted class ids)
    plus: tuple[int, ...]  # all children of minus classes (sorted)
    parent: int | None
    children: tuple[int, ...]
    depth: int

    @property
    def classes(self) -> tuple[int, ...]:
        return self.minus + self.plus

    @property
    def size(self) -> int:
        return len(self.minus) + len(self.plus)


class PublicTreeDecomposition:
    def __init__(self, view: TeamView, bags: tuple[Bag, ...],
                 minus_bag_of: dict[int, int], plus_bag_of: dict[int, int]):
        self.view = view
        self.bags = bags
        # minus_bag_of: class -> bag holding it in C_minus (absent for leaf classes)
        self.minus_bag_of = minus_bag_of
        # plus_bag_of: class -> bag holding it in C_plus (absent for the root class)
        self.plus_bag_of = plus_bag_of

    def __len__(self) -> int:
        return len(self.bags)

    @property
    def root(self) -> int:
        return 0

    def bags_of_class(self, cls: int) -> tuple[int, ...]:
        out = []
        if cls in self.plus_bag_of:
            out.append(self.plus_bag_of[cls])
        if cls in self.minus_bag_of:
            out.append(self.minus_bag_of[cls])
        return tuple(sorted(out))

    def team_bags(self) -> tuple[int, ...]:
        """Bags whose public node contains at least one team decision class."""
        classes = self.view.classes
        return tuple(
            i for i, bag in enumerate(self.bags)
            if any(classes[c].kind is ClassKind.TEAM_DECISION for c in bag.minus))


def public_partition(view: TeamView) -> list[tuple[int, ...]]:
    """Per-depth partition of classes into public nodes (union-find over the
    ancestor closure of every team infoset)."""
    n = len(view.classes)
    parent = list(range(n))

    def find(a: int) -> int:
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def union(a: int, b: int) -> None:
        ra, rb = find(a), find(b)
        if ra != rb:
            if ra > rb:
                ra, rb = rb, ra
            parent[rb] = ra

    infoset_classes: dict[int, set[int]] = {}
    for cid in view.decision_classes:
        infoset_classes.setdefault(view.classes[cid].infoset, set()).add(cid)
    for iid in sorted(infoset_classes):
        current = infoset_classes[iid]
        while len(current) > 1:
            it = iter(sorted(current))
            first = next(it)
            for other in it:
                union(first, other)
            current = {view.classes[c].parent for c in current}
            current.discard(None)

    groups: dict[int, list[int]] = {}
    for c in range(n):
        groups.setdefault(find(c), []).append(c)
    comps = [tuple(sorted(g)) for g in groups.values()]
    comps.sort(key=lambda comp: (view.classes[comp[0]].depth, comp[0]))
    return comps


def build_decomposition(view: TeamView) -> PublicTreeDecomposition:
    """Bags from public nodes, edges from class parenthood (a tree)."""
    comps = public_partition(view)
    comp_of_class: dict[int, int] = {}
    for k, comp in enumerate(comps):
        for c in comp:
            comp_of_class[c] = k

    kept: list[int] = []
    for k, comp in enumerate(comps):
        has_children = any(view.classes[c].children for c in comp)
        if has_children or comp_of_class[0] == k:
            kept.append(k)
    bag_of_comp = {k: i for i, k in enumerate(kept)}

    minus_list: list[tuple[int, ...]] = []
    plus_list: list[tuple[int, ...]] = []
    parents: list[int | None] = []
    for k in kept:
        comp = comps[k]
        plus = sorted({d for c in comp for d in view.classes[c].children})
        minus_list.append(comp)
        plus_list.append(tuple(plus))
        parent_comps = {comp_of_class[view.classes[c].parent]
                        for c in comp if view.classes[c].parent is not None}
        if not parent_comps:
            parents.append(None)
        elif len(parent_comps) > 1:
            raise InternalError(
                f"public node {comp} has parents in {len(parent_comps)} "
                f"distinct public nodes; the bag graph would not be a tree")
        else:
            parents.append(bag_of_comp[parent_comps.pop()])

    children: list[list[int]] = [[] for _ in kept]
    for i, p in enumerate(parents):
        if p is not None:
            children[p].append(i)

    bags = tuple(
        Bag(minus=minus_list[i], plus=plus_list[i], parent=parents[i],
            children=tuple(children[i]),
            depth=view.classes[minus_list[i][0]].depth)
        for i in range(len(kept)))

    minus_bag_of = {c: i for i, bag in enumerate(bags) for c in bag.minus}
    plus_bag_of = {c: i for i, bag in enumerate(bags) for c in bag.plus}
    dec = PublicTreeDecomposition(view, bags, minus_bag_of, plus_bag_of)
    if dec.bags[0].parent is not None or 0 not in dec.bags[0].minus:
        raise InternalError("bag 0 must be the root bag containing class 0")
    return dec


def _constraint_hyperedges(view: TeamView) -> list[tuple[int, ...]]:
    """Dependency hyperedges of the team constraint system on the view tree:
    flow edges {h} ∪ children(h), and for every infoset spanning several
    classes, the pairwise coupling sets {h, h', ha, h'a} per action."""
    edges: list[tuple[int, ...]] = []
    for cid, cls in enumerate(view.classes):
        if cls.children:
            edges.append(tuple(sorted((cid,) + cls.children)))
    by_infoset: dict[int, list[int]] = {}
    for cid in view.decision_classes:
        by_infoset.setdefault(view.classes[cid].infoset, []).append(cid)
    for iid in sorted(by_infoset):
        group = sorted(by_infoset[iid])
        if len(group) < 2:
            continue
        for i, c1 in enumerate(group):
            kids1 = view.action_children(c1)
            for c2 in group[i + 1:]:
                kids2 = view.action_children(c2)
                for act in view.game.infosets[iid].actions:
                    for d1 in kids1[act]:
                        for d2 in kids2[act]:
                            edges.append(tuple(sorted({c1, c2, d1, d2})))
    return edges


def verify_decomposition(dec: PublicTreeDecomposition, view: TeamView) -> bool:
    """True iff every constraint hyperedge fits in some bag and every class's
    bag set is nonempty and connected in the bag tree."""
    bag_sets = [set(bag.classes) for bag in dec.bags]
    adj: dict[int, set[int]] = {i: set() for i in range(len(dec.bags))}
    for i, bag in enumerate(dec.bags):
        if bag.parent is not None:
            if bag.parent not in adj:
                return False
            adj[i].add(bag.parent)
            adj[bag.parent].add(i)

    containing: dict[int, list[int]] = {c: [] for c in range(len(view.classes))}
    for i, s in enumerate(bag_sets):
        for c in s:
            containing[c].append(i)
    for c, bags_with in containing.items():
        if not bags_with:
            return False
        seen = {bags_with[0]}
        stack = [bags_with[0]]
        member = set(bags_with)
        while stack:
            b = stack.pop()
            for nb in adj[b]:
                if nb in member and nb not in seen:
                    seen.add(nb)
                    stack.append(nb)
        if seen != member:
            return False

    for edge in _constraint_hyperedges(view):
        edge_set = set(edge)
        if not any(edge_set <= s for s in bag_sets):
            return False
    return True


@dataclass(frozen=True)
class WidthStats:
    treewidth: int
    max_degree: int
    bag_count: int
    per_bag: tuple[tuple[int, int], ...]  # (|C_minus|, |C_plus|) per bag

    @property
    def combined(self) -> int:
        """Treewidth plus max degree: the W used in program-size formulas."""
        return self.treewidth + self.max_degree

    def to_json_dict(self) -> dict:
        return {
            "bags": self.bag_count,
            "treewidth": self.treewidth,
            "max_degree": self.max_degree,
            "per_bag": [{"minus": m, "plus": p} for m, p in self.per_bag],
        }


def width_stats(dec: PublicTreeDecomposition) -> WidthStats:
    sizes = [bag.size for bag in dec.bags]
    degrees = [len(bag.children) + (0 if bag.parent is None else 1)
               for bag in dec.bags]
    return WidthStats(
        treewidth=max(sizes) - 1,
        max_degree=max(degrees) if degrees else 0,
        bag_count=len(dec.bags),
        per_bag=tuple((len(b.minus), len(b.plus)) for b in dec.bags),
    )


class JointSampler:
    """Draws full assignments from per-bag distributions that agree on shared
    marginals, by sampling the root bag and then each child conditionally on
    the shared pattern (the child's C_minus)."""

    def __init__(self, dec: PublicTreeDecomposition,
                 bag_dists: list[dict[tuple[int, ...], object]],
                 seed: int, tolerance: float = 1e-9):
        if len(bag_dists) != len(dec.bags):
            raise ValueError("need one distribution per bag")
        self.dec = dec
        self.rng = random.Random(seed)
        self._dists = [sorted(d.items()) for d in bag_dists]
        self._pos = [
            {c: i for i, c in enumerate(bag.classes)} for bag in dec.bags
        ]
        self._cond: list[dict[tuple[int, ...], list[tuple[tuple[int, ...], float]]]] = []
        for i, bag in enumerate(dec.bags):
            groups: dict[tuple[int, ...], list[tuple[tuple[int, ...], object]]] = {}
            for assignment, p in self._dists[i]:
                if len(assignment) != bag.size:
                    raise ValueError(f"bag {i}: assignment arity mismatch")
                pat = assignment[:len(bag.minus)]
                groups.setdefault(pat, []).append((assignment, p))
            self._cond.append({
                pat: [(a, float(p)) for a, p in rows]
                for pat, rows in groups.items()
            })
            if bag.parent is not None:
                self._check_edge(bag.parent, i, tolerance)

    def _marginal(self, bag_idx: int, classes: tuple[int, ...]) -> dict:
        pos = self._pos[bag_idx]
        idx = [pos[c] for c in classes]
        out: dict[tuple[int, ...], object] = {}
        for assignment, p in self._dists[bag_idx]:
            pat = tuple(assignment[k] for k in idx)
            out[pat] = out.get(pat, 0) + p
        return out

    def _check_edge(self, parent: int, child: int, tol: float) -> None:
        shared = self.dec.bags[child].minus
        mp = self._marginal(parent, shared)
        mc = self._marginal(child, shared)
        exact = all(isinstance(p, Fraction) for p in list(mp.values()) + list(mc.values()))
        for pat in sorted(set(mp) | set(mc)):
            a = mp.get(pat, 0)
            b = mc.get(pat, 0)
            bad = (a != b) if exact else abs(float(a) - float(b)) > tol
            if bad:
                raise MarginalMismatchError(
                    f"bags {parent}->{child} disagree on pattern {pat}: "
                    f"{a} vs {b}")

    def _draw(self, rows: list[tuple[tuple[int, ...], float]]) -> tuple[int, ...]:
        total = sum(p for _, p in rows)
        u = self.rng.random() * total
        acc = 0.0
        for assignment, p in rows:
            acc += p
            if u <= acc:
                return assignment
        return rows[-1][0]

    def sample(self) -> dict[int, int]:
        """One full assignment: class id -> 0/1."""
        out: dict[int, int] = {}
        root_rows = [(a, float(p)) for a, p in self._dists[0]]
        stack: list[int] = [0]
        choice = {0: self._draw(root_rows)}
        while stack:
            b = stack.pop()
            assignment = choice[b]
            bag = self.dec.bags[b]
            for c, v in zip(bag.classes, assignment):
                out[c] = v
            for child in bag.children:
                pat = tuple(out[c] for c in self.dec.bags[child].minus)
                rows = self._cond[child].get(pat)
                if rows is None:
                    raise MarginalMismatchError(
                        f"bag {child}: no assignment matches pattern {pat} "
                        f"drawn at the parent")
                choice[child] = self._draw(rows)
                stack.append(child)
        return out


def sample_joint(dec: PublicTreeDecomposition,
                 bag_dists: list[dict[tuple[int, ...], object]],
                 seed: int) -> JointSampler:
    """Validate marginal agreement and return a deterministic sampler."""
    return JointSampler(dec, bag_dists, seed)
