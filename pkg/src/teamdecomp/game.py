"""Extensive-form team game representation.

A game is a rooted tree of chance, decision, and terminal nodes, with the
decision nodes of each team partitioned into information sets.  Nodes are
stored in canonical breadth-first order; all downstream identifiers (team-view
classes, bags, LP variables) derive from that order, so identical inputs
produce bit-identical artifacts.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction

from .errors import HeterogeneousClassError, InvalidGameError


class Team(enum.Enum):
    PLUS = "plus"
    MINUS = "minus"

    def other(self) -> "Team":
        return Team.MINUS if self is Team.PLUS else Team.PLUS


class Kind(enum.Enum):
    CHANCE = "chance"
    DECISION = "decision"
    TERMINAL = "terminal"


@dataclass(frozen=True)
class NodeRecord:
    """One tree node; index 0 is the root, whose parent is None."""

    parent: int | None
    action: str  # label of the incoming edge ("" for the root)
    kind: Kind
    depth: int
    team: Team | None = None  # decision nodes only
    player: int | None = None  # decision nodes only
    infoset: int | None = None  # decision nodes only
    probs: tuple[Fraction, ...] = ()  # chance nodes: one prob per child, in child order
    payoff: Fraction | None = None  # terminal nodes: payoff from Team PLUS's perspective


@dataclass(frozen=True)
class Infoset:
    team: Team
    player: int
    nodes: tuple[int, ...]  # canonical node order
    actions: tuple[str, ...]  # shared ordered action labels


@dataclass(frozen=True)
class Violation:
    code: str
    message: str
    node: int | None = None
    infoset: int | None = None

    def __str__(self) -> str:
        where = ""
        if self.node is not None:
            where = f" [node {self.node}]"
        elif self.infoset is not None:
            where = f" [infoset {self.infoset}]"
        return f"{self.code}: {self.message}{where}"


# A team sequence: the ordered (infoset id, action label) pairs played by the
# team on the root-to-node path.
Sequence = tuple[tuple[int, str], ...]


class GameTree:
    """Immutable extensive-form team game.

    Construct via :class:`GameBuilder` or :func:`teamdecomp.generators.load_efg`;
    direct construction expects nodes already in canonical breadth-first order.
    """

    def __init__(self, nodes: list[NodeRecord] | tuple[NodeRecord, ...],
                 infosets: dict[int, Infoset]):
        self.nodes: tuple[NodeRecord, ...] = tuple(nodes)
        self.infosets: dict[int, Infoset] = dict(infosets)
        children: list[list[int]] = [[] for _ in self.nodes]
        for i, node in enumerate(self.nodes):
            if node.parent is not None:
                children[node.parent].append(i)
        self.children: tuple[tuple[int, ...], ...] = tuple(tuple(c) for c in children)
        self._chance_reach: tuple[Fraction, ...] | None = None
        self._validation: list[Violation] | None = None

    def __len__(self) -> int:
        return len(self.nodes)

    @property
    def terminals(self) -> tuple[int, ...]:
        return tuple(i for i, n in enumerate(self.nodes) if n.kind is Kind.TERMINAL)

    def chance_reach(self, node: int) -> Fraction:
        """Probability that nature plays every chance action on the path to `node`."""
        if self._chance_reach is None:
            reach: list[Fraction] = [Fraction(1)] * len(self.nodes)
            for i, rec in enumerate(self.nodes):
                if i == 0:
                    continue
                p = rec.parent
                assert p is not None
                parent = self.nodes[p]
                r = reach[p]
                if parent.kind is Kind.CHANCE:
                    slot = self.children[p].index(i)
                    r = r * parent.probs[slot]
                reach[i] = r
            self._chance_reach = tuple(reach)
        return self._chance_reach[node]

    def ensure_valid(self) -> None:
        """Raise InvalidGameError unless validate() returns an empty report."""
        report = validate(self)
        if report:
            raise InvalidGameError(report)


def validate(game: GameTree) -> list[Violation]:
    """Check every structural invariant; an empty report means the game is valid."""
    out: list[Violation] = []
    nodes = game.nodes
    if not nodes:
        return [Violation("empty", "game has no nodes")]
    if nodes[0].parent is not None:
        out.append(Violation("root", "node 0 must be the root (parent None)", node=0))

    prev_depth = 0
    for i, rec in enumerate(nodes):
        if i == 0:
            if rec.depth != 0:
                out.append(Violation("depth", "root depth must be 0", node=0))
            prev_depth = rec.depth
            continue
        if rec.parent is None:
            out.append(Violation("tree", "non-root node has no parent", node=i))
            continue
        if not (0 <= rec.parent < i):
            out.append(Violation("order", "parent index must precede child", node=i))
            continue
        if rec.depth != nodes[rec.parent].depth + 1:
            out.append(Violation("depth", "child depth must be parent depth + 1", node=i))
        if rec.depth < prev_depth:
            out.append(Violation("order", "nodes must be in breadth-first order", node=i))
        prev_depth = max(prev_depth, rec.depth)

    for i, rec in enumerate(nodes):
        kids = game.children[i]
        if rec.kind is Kind.TERMINAL:
            if kids:
                out.append(Violation("terminal", "terminal node has children", node=i))
            if rec.payoff is None:
                out.append(Violation("terminal", "terminal node lacks a payoff", node=i))
        elif rec.kind is Kind.CHANCE:
            if not kids:
                out.append(Violation("chance", "chance node has no children", node=i))
            if len(rec.probs) != len(kids):
                out.append(Violation(
                    "chance", f"chance node has {len(kids)} children but "
                    f"{len(rec.probs)} probabilities", node=i))
            elif kids:
                total = sum(rec.probs, Fraction(0))
                if any(p < 0 for p in rec.probs) or total != 1:
                    out.append(Violation(
                        "chance", f"chance probabilities sum to {total}, not 1", node=i))
        else:  # decision
            if not kids:
                out.append(Violation("decision", "decision node has no children", node=i))
            if rec.team is None or rec.player is None or rec.infoset is None:
                out.append(Violation(
                    "decision", "decision node needs team, player, and infoset", node=i))
            elif rec.infoset not in game.infosets:
                out.append(Violation("decision", "unknown infoset id", node=i))

    seen_nodes: set[int] = set()
    for iid in sorted(game.infosets):
        info = game.infosets[iid]
        if not info.nodes:
            out.append(Violation("infoset", "infoset has no nodes", infoset=iid))
            continue
        depths = set()
        for h in info.nodes:
            if h in seen_nodes:
                out.append(Violation(
                    "infoset", f"node {h} appears in more than one infoset", infoset=iid))
            seen_nodes.add(h)
            rec = nodes[h]
            if rec.kind is not Kind.DECISION:
                out.append(Violation(
                    "infoset", f"node {h} is not a decision node", infoset=iid))
                continue
            if rec.infoset != iid or rec.team is not info.team or rec.player != info.player:
                out.append(Violation(
                    "infoset", f"node {h} disagrees with infoset ownership", infoset=iid))
            depths.add(rec.depth)
            labels = tuple(nodes[k].action for k in game.children[h])
            if labels != info.actions:
                out.append(Violation(
                    "thin", f"node {h} has actions {labels}, infoset has {info.actions}",
                    infoset=iid))
        if len(depths) > 1:
            out.append(Violation(
                "thin", f"infoset spans depths {sorted(depths)}", infoset=iid))

    for i, rec in enumerate(nodes):
        if rec.kind is Kind.DECISION and rec.infoset is not None \
                and rec.infoset in game.infosets \
                and i not in game.infosets[rec.infoset].nodes:
            out.append(Violation(
                "infoset", "decision node missing from its infoset's node list", node=i))

    # Per-player perfect recall: all nodes of an infoset share that player's
    # own (infoset, action) history.
    player_seq: dict[int, tuple] = {}
    for i, rec in enumerate(nodes):
        if i == 0:
            player_seq[i] = ()
            continue
        p = rec.parent
        if p is None or p not in player_seq:
            player_seq[i] = ()
            continue
        parent = nodes[p]
        seq = player_seq[p]
        if parent.kind is Kind.DECISION:
            seq = seq + (((parent.team, parent.player), parent.infoset, rec.action),)
        player_seq[i] = seq
    for iid in sorted(game.infosets):
        info = game.infosets[iid]
        key = (info.team, info.player)
        own = {
            tuple(step for step in player_seq.get(h, ()) if step[0] == key)
            for h in info.nodes
        }
        if len(own) > 1:
            out.append(Violation(
                "perfect-recall",
                f"player {info.player} of team {info.team.value} has differing "
                f"own histories within the infoset", infoset=iid))
    return out


def team_sequence(game: GameTree, team: Team, node: int) -> Sequence:
    """The (infoset, action) pairs played by `team` on the path to `node`."""
    if not (0 <= node < len(game.nodes)):
        raise IndexError(f"node index {node} out of range")
    pairs: list[tuple[int, str]] = []
    i = node
    while True:
        rec = game.nodes[i]
        p = rec.parent
        if p is None:
            break
        parent = game.nodes[p]
        if parent.kind is Kind.DECISION and parent.team is team:
            pairs.append((parent.infoset, rec.action))
        i = p
    pairs.reverse()
    return tuple(pairs)


class ClassKind(enum.Enum):
    TEAM_DECISION = "decision"
    PASS_THROUGH = "pass"


@dataclass(frozen=True)
class ViewClass:
    """One node of the team-view quotient tree."""

    kind: ClassKind
    infoset: int | None  # the team infoset, for TEAM_DECISION classes
    depth: int
    members: tuple[int, ...]  # original node indices, canonical order
    parent: int | None
    children: tuple[int, ...]
    # For TEAM_DECISION classes: the action label on the edge to each child,
    # aligned with `children`.  None entries for pass-through parents.
    child_actions: tuple[str | None, ...]
    has_terminal: bool


class TeamView:
    """Quotient of the game tree merging same-depth nodes with equal team sequence.

    Two nodes land in the same class when they sit at the same depth, the team
    has played the same (infoset, action) pairs above both, and — for the
    team's own decision nodes — they belong to the same infoset.  The last
    refinement keeps classes homogeneous: a class is either one team infoset's
    decision nodes (TEAM_DECISION) or contains no decision node of this team
    (PASS_THROUGH).
    """

    def __init__(self, game: GameTree, team: Team, classes: tuple[ViewClass, ...],
                 node_class: tuple[int, ...]):
        self.game = game
        self.team = team
        self.classes = classes
        self.node_class = node_class

    def __len__(self) -> int:
        return len(self.classes)

    @property
    def decision_classes(self) -> tuple[int, ...]:
        return tuple(i for i, c in enumerate(self.classes)
                     if c.kind is ClassKind.TEAM_DECISION)

    def actions_of(self, cls: int) -> tuple[str, ...]:
        c = self.classes[cls]
        if c.infoset is None:
            return ()
        return self.game.infosets[c.infoset].actions

    def action_children(self, cls: int) -> dict[str, tuple[int, ...]]:
        """For a decision class, its child classes grouped by action label."""
        c = self.classes[cls]
        out: dict[str, list[int]] = {a: [] for a in self.actions_of(cls)}
        for child, act in zip(c.children, c.child_actions):
            out[act].append(child)
        return {a: tuple(v) for a, v in out.items()}

    def sequence_count(self) -> int:
        """Team sequence count on the quotient: 1 + sum of action counts
        over the team's decision classes."""
        return 1 + sum(len(self.actions_of(i)) for i in self.decision_classes)

    @property
    def terminal_classes(self) -> tuple[int, ...]:
        return tuple(i for i, c in enumerate(self.classes) if c.has_terminal)


def build_team_view(game: GameTree, team: Team) -> TeamView:
    """Build the per-team quotient tree (see TeamView)."""
    game.ensure_valid()
    nodes = game.nodes
    seq_intern: dict[tuple, int] = {(): 0}
    node_seq: list[int] = [0] * len(nodes)
    seq_by_id: list[tuple] = [()]

    def intern(seq: tuple) -> int:
        sid = seq_intern.get(seq)
        if sid is None:
            sid = len(seq_by_id)
            seq_intern[seq] = sid
            seq_by_id.append(seq)
        return sid

    key_to_class: dict[tuple, int] = {}
    members: list[list[int]] = []
    cls_parent: list[int | None] = []
    cls_depth: list[int] = []
    cls_infoset: list[int | None] = []
    node_class: list[int] = [0] * len(nodes)

    for i, rec in enumerate(nodes):
        if i == 0:
            seq = ()
        else:
            p = rec.parent
            parent = nodes[p]
            pseq = seq_by_id[node_seq[p]]
            if parent.kind is Kind.DECISION and parent.team is team:
                seq = pseq + ((parent.infoset, rec.action),)
            else:
                seq = pseq
        node_seq[i] = intern(seq)
        own_infoset = rec.infoset if (rec.kind is Kind.DECISION and rec.team is team) else None
        key = (rec.depth, node_seq[i], own_infoset)
        parent_cls = None if i == 0 else node_class[rec.parent]
        cid = key_to_class.get(key)
        if cid is None:
            cid = len(members)
            key_to_class[key] = cid
            members.append([i])
            cls_parent.append(parent_cls)
            cls_depth.append(rec.depth)
            cls_infoset.append(own_infoset)
        else:
            if cls_parent[cid] != parent_cls:
                raise HeterogeneousClassError(
                    f"team {team.value}: nodes {members[cid][0]} and {i} share depth "
                    f"and team sequence but their parents fall in different classes")
            members[cid].append(i)
        node_class[i] = cid

    n_cls = len(members)
    child_lists: list[list[int]] = [[] for _ in range(n_cls)]
    child_act: list[list[str | None]] = [[] for _ in range(n_cls)]
    seen_edge: set[tuple[int, int]] = set()
    for i, rec in enumerate(nodes):
        if i == 0:
            continue
        pc, cc = node_class[rec.parent], node_class[i]
        if (pc, cc) in seen_edge:
            continue
        seen_edge.add((pc, cc))
        child_lists[pc].append(cc)
        is_decision_edge = cls_infoset[pc] is not None
        child_act[pc].append(rec.action if is_decision_edge else None)

    classes = []
    for cid in range(n_cls):
        order = sorted(range(len(child_lists[cid])), key=lambda k: child_lists[cid][k])
        kind = ClassKind.TEAM_DECISION if cls_infoset[cid] is not None else ClassKind.PASS_THROUGH
        classes.append(ViewClass(
            kind=kind,
            infoset=cls_infoset[cid],
            depth=cls_depth[cid],
            members=tuple(members[cid]),
            parent=cls_parent[cid],
            children=tuple(child_lists[cid][k] for k in order),
            child_actions=tuple(child_act[cid][k] for k in order),
            has_terminal=any(nodes[h].kind is Kind.TERMINAL for h in members[cid]),
        ))
    return TeamView(game, team, tuple(classes), tuple(node_class))


@dataclass(frozen=True)
class PayoffForm:
    """Bilinear payoff sum_z u(z) p(z) x(class_plus(z)) y(class_minus(z)),
    aggregated by (plus class, minus class)."""

    triples: tuple[tuple[int, int, Fraction], ...]
    checksum: Fraction  # sum of all coefficients = sum_z u(z) p(z)

    @property
    def plus_classes(self) -> tuple[int, ...]:
        return tuple(sorted({t[0] for t in self.triples}))

    @property
    def minus_classes(self) -> tuple[int, ...]:
        return tuple(sorted({t[1] for t in self.triples}))


def payoff_form(game: GameTree, vp: TeamView, vm: TeamView) -> PayoffForm:
    """Extract the bilinear payoff coefficients over team-view class pairs."""
    if vp.game is not game or vm.game is not game:
        raise ValueError("team views must be built from the given game")
    if vp.team is not Team.PLUS or vm.team is not Team.MINUS:
        raise ValueError("payoff_form expects (plus view, minus view)")
    agg: dict[tuple[int, int], Fraction] = {}
    checksum = Fraction(0)
    for z, rec in enumerate(game.nodes):
        if rec.kind is not Kind.TERMINAL:
            continue
        w = rec.payoff * game.chance_reach(z)
        checksum += w
        key = (vp.node_class[z], vm.node_class[z])
        agg[key] = agg.get(key, Fraction(0)) + w
    triples = tuple((cp, cm, w) for (cp, cm), w in sorted(agg.items()) if w != 0)
    return PayoffForm(triples=triples, checksum=checksum)


class GameBuilder:
    """Incremental constructor; build() reindexes to canonical breadth-first order.

    Infoset keys may be any hashable value; they are mapped to dense integer
    ids ordered by first appearance in the canonical order.
    """

    def __init__(self):
        self._rows: list[dict] = []
        self._children: list[list[int]] = []

    def _add(self, parent: int | None, action: str, prob: Fraction | None, **fields) -> int:
        idx = len(self._rows)
        if parent is not None:
            self._children[parent].append(idx)
            if prob is not None:
                self._rows[parent].setdefault("child_probs", []).append(prob)
        self._rows.append(dict(parent=parent, action=action, **fields))
        self._children.append([])
        return idx

    def chance(self, parent: int | None, action: str = "",
               prob: Fraction | None = None) -> int:
        return self._add(parent, action, prob, kind=Kind.CHANCE)

    def decision(self, parent: int | None, action: str, team: Team, player: int,
                 infoset_key, prob: Fraction | None = None) -> int:
        return self._add(parent, action, prob, kind=Kind.DECISION,
                         team=team, player=player, infoset_key=infoset_key)

    def terminal(self, parent: int | None, action: str, payoff,
                 prob: Fraction | None = None) -> int:
        return self._add(parent, action, prob, kind=Kind.TERMINAL,
                         payoff=Fraction(payoff))

    def build(self) -> GameTree:
        if not self._rows:
            raise ValueError("cannot build an empty game")
        order: list[int] = [0]
        pos = 0
        while pos < len(order):
            order.extend(self._children[order[pos]])
            pos += 1
        remap = {old: new for new, old in enumerate(order)}
        depth: list[int] = [0] * len(order)
        infoset_ids: dict = {}
        infoset_nodes: dict[int, list[int]] = {}
        records: list[NodeRecord] = []
        for new, old in enumerate(order):
            row = self._rows[old]
            parent = remap[row["parent"]] if row["parent"] is not None else None
            depth[new] = 0 if parent is None else depth[parent] + 1
            team = row.get("team")
            player = row.get("player")
            infoset = None
            if row["kind"] is Kind.DECISION:
                key = row["infoset_key"]
                if key not in infoset_ids:
                    infoset_ids[key] = len(infoset_ids)
                infoset = infoset_ids[key]
                infoset_nodes.setdefault(infoset, []).append(new)
            probs = tuple(row.get("child_probs", ())) if row["kind"] is Kind.CHANCE else ()
            records.append(NodeRecord(
                parent=parent, action=row["action"], kind=row["kind"],
                depth=depth[new], team=team, player=player, infoset=infoset,
                probs=probs, payoff=row.get("payoff")))
        infosets: dict[int, Infoset] = {}
        child_of: list[list[int]] = [[] for _ in records]
        for i, rec in enumerate(records):
            if rec.parent is not None:
                child_of[rec.parent].append(i)
        for iid, node_list in infoset_nodes.items():
            first = node_list[0]
            infosets[iid] = Infoset(
                team=records[first].team,
                player=records[first].player,
                nodes=tuple(node_list),
                actions=tuple(records[k].action for k in child_of[first]),
            )
        return GameTree(records, infosets)
