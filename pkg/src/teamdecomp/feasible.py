"""Locally feasible set enumeration and reachability statistics.

Each bag's feasible set holds every restriction of a globally feasible pure
plan to the bag's classes.  Enumeration runs top-down: project the parent
bag's set onto the shared classes, deduplicate, then expand each projection
over all joint action choices of the infosets it activates, propagating ones
through non-team classes.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

from .errors import EmptyBagError, FeasibleSetExplosionError
from .game import ClassKind, TeamView
from .decomposition import PublicTreeDecomposition

DEFAULT_CAP = 50_000_000


@dataclass(frozen=True)
class LocalFeasibleSet:
    bag: int
    classes: tuple[int, ...]  # C_minus then C_plus, each sorted by class id
    n_minus: int
    assignments: tuple[tuple[int, ...], ...]  # 0/1 rows, canonically sorted

    def __len__(self) -> int:
        return len(self.assignments)

    def minus_patterns(self) -> tuple[tuple[int, ...], ...]:
        return tuple(sorted({a[:self.n_minus] for a in self.assignments}))


@dataclass(frozen=True)
class EnumerationInfo:
    """Counters from the enumeration run."""

    total: int
    shortcut_fired: int  # times the verbatim C_minus == B_minus shortcut hit


def enumerate_feasible(dec: PublicTreeDecomposition, view: TeamView,
                       cap: int = DEFAULT_CAP) -> tuple[list[LocalFeasibleSet], EnumerationInfo]:
    """Run the per-bag construction breadth-first (bags are in such an order)."""
    classes = view.classes
    sets: list[LocalFeasibleSet | None] = [None] * len(dec.bags)
    total = 0
    shortcut = 0
    for bi, bag in enumerate(dec.bags):
        cm, cp = bag.minus, bag.plus
        cols = cm + cp
        pos = {c: k for k, c in enumerate(cols)}
        if bag.parent is None:
            projections = [(1,) * len(cm)]
        else:
            parent_set = sets[bag.parent]
            if cm == dec.bags[bag.parent].minus:
                # Printed shortcut: reuse the parent's set wholesale.  Under
                # this construction C_minus is always a subset of the parent's
                # C_plus, so this cannot trigger; counted for the record.
                shortcut += 1
                sets[bi] = LocalFeasibleSet(bag=bi, classes=parent_set.classes,
                                            n_minus=parent_set.n_minus,
                                            assignments=parent_set.assignments)
                total += len(parent_set.assignments)
                continue
            ppos = {c: k for k, c in enumerate(parent_set.classes)}
            idx = [ppos[c] for c in cm]
            projections = sorted({tuple(a[k] for k in idx)
                                  for a in parent_set.assignments})
        out: set[tuple[int, ...]] = set()
        for proj in projections:
            active = sorted({
                classes[c].infoset for k, c in enumerate(cm)
                if proj[k] and classes[c].kind is ClassKind.TEAM_DECISION})
            action_spaces = [view.game.infosets[i].actions for i in active]
            slot_of = {iid: k for k, iid in enumerate(active)}
            for joint in itertools.product(*action_spaces):
                row = [0] * len(cols)
                row[:len(cm)] = proj
                for k, c in enumerate(cm):
                    if not proj[k]:
                        continue
                    cls = classes[c]
                    if cls.kind is ClassKind.TEAM_DECISION:
                        chosen = joint[slot_of[cls.infoset]]
                        for child, act in zip(cls.children, cls.child_actions):
                            if act == chosen:
                                row[pos[child]] = 1
                    else:
                        for child in cls.children:
                            row[pos[child]] = 1
                out.add(tuple(row))
                if total + len(out) > cap:
                    raise FeasibleSetExplosionError(bi, total + len(out), cap)
        if not out:
            raise EmptyBagError(f"bag {bi} produced an empty feasible set")
        total += len(out)
        sets[bi] = LocalFeasibleSet(bag=bi, classes=cols, n_minus=len(cm),
                                    assignments=tuple(sorted(out)))
    return [s for s in sets], EnumerationInfo(total=total, shortcut_fired=shortcut)


def binom_at_most(n: int, k: int) -> int:
    """Number of ways to pick at most k items from n."""
    k = min(k, n)
    return sum(math.comb(n, j) for j in range(k + 1))


@dataclass(frozen=True)
class BagReachability:
    bag: int
    size: int  # |X_C|
    width: int  # w(C), inherited from the parent for bags without team nodes
    raw_width: int  # max ones over C_plus regardless of team content
    has_team: bool
    bound: int  # binom(|C_plus|, <= w(C))


@dataclass(frozen=True)
class ReachabilityStats:
    per_bag: tuple[BagReachability, ...]
    reachable_width: int
    sum_xc: int  # root bag plus bags whose public node has team decisions
    sum_xc_all_bags: int

    def to_json_dict(self) -> dict:
        return {
            "sum_xc": self.sum_xc,
            "reachable_width": self.reachable_width,
            "per_bag": [
                {"bag": r.bag, "size": r.size, "w": r.width}
                for r in self.per_bag
            ],
        }


def reachability_stats(sets: list[LocalFeasibleSet],
                       dec: PublicTreeDecomposition) -> ReachabilityStats:
    """Per-bag reachable widths, the global width, and the headline sums.

    `sum_xc` counts the root bag and every bag whose public node contains a
    team decision class: pass-through bags only relay their parent's set, so
    this matches the benchmark accounting.  `sum_xc_all_bags` counts all.
    """
    view = dec.view
    team_bags = set(dec.team_bags())
    per: list[BagReachability] = []
    widths: dict[int, int] = {}
    for bi, bag in enumerate(dec.bags):
        fs = sets[bi]
        nm = fs.n_minus
        raw = max((sum(a[nm:]) for a in fs.assignments), default=0)
        if bi in team_bags:
            w = raw
        elif bag.parent is None:
            w = 0
        else:
            w = widths[bag.parent]
        widths[bi] = w
        per.append(BagReachability(
            bag=bi, size=len(fs.assignments), width=w, raw_width=raw,
            has_team=bi in team_bags,
            bound=binom_at_most(len(bag.plus), w)))
    counted = {0} | team_bags
    return ReachabilityStats(
        per_bag=tuple(per),
        reachable_width=max((widths[b] for b in widths), default=0),
        sum_xc=sum(per[b].size for b in sorted(counted)),
        sum_xc_all_bags=sum(r.size for r in per),
    )


def public_action_bound(t: int, n: int) -> int:
    """Feasible-set size bound 3^t * 2^(t(n-1)) for public-action games with
    t types per player and n team members.  Diagnostic only; the caller
    asserts the structural premise."""
    if t < 1 or n < 1:
        raise ValueError("need t >= 1 and n >= 1")
    return 3 ** t * 2 ** (t * (n - 1))
