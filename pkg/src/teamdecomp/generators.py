"""Benchmark game builders and EFG-JSON load/save.

Families: Kuhn poker, Leduc poker, Liar's Dice, Goofspiel (full and limited
information), the satisfiability game, and the width-gap family.  Teams are
formed by colluding seats; payoffs are recorded as the team total from Team
PLUS's perspective (splitting a team's reward evenly among members is affine
and does not change equilibria).  All generators are deterministic: the same
parameters produce a bit-identical game.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from fractions import Fraction

from .errors import EfgParseError, InvalidGameError
from .game import GameBuilder, GameTree, Infoset, Kind, NodeRecord, Team, validate


def _seat_map(players: int, plus_seats: frozenset[int]) -> list[tuple[Team, int]]:
    """Per-seat (team, player id within team), players numbered in seat order."""
    out: list[tuple[Team, int]] = []
    counts = {Team.PLUS: 0, Team.MINUS: 0}
    for seat in range(players):
        team = Team.PLUS if seat in plus_seats else Team.MINUS
        out.append((team, counts[team]))
        counts[team] += 1
    return out


def _seating(m: int, n: int) -> frozenset[int]:
    """Team PLUS gets the first m seats."""
    return frozenset(range(m))


def _alternating_seating(m: int, n: int) -> frozenset[int]:
    """First m-n seats go to PLUS; the last 2n seats alternate PLUS, MINUS."""
    plus = set(range(m - n))
    tail = m - n
    for k in range(2 * n):
        if k % 2 == 0:
            plus.add(tail + k)
    return frozenset(plus)


# ---------------------------------------------------------------------------
# Kuhn poker
# ---------------------------------------------------------------------------

def make_kuhn(m: int, n: int, r: int) -> GameTree:
    """Multiplayer Kuhn poker: one ante, one betting round, bet size 1.

    Players check in seat order until someone bets; after a bet, every other
    player folds or calls once, in cyclic order.  Showdown among non-folded
    players; the highest card wins the pot.
    """
    players = m + n
    if players < 2:
        raise ValueError("need at least two players")
    if r < players:
        raise ValueError(f"need at least {players} ranks, got {r}")
    plus_seats = _seating(m, n)
    seats = _seat_map(players, plus_seats)
    b = GameBuilder()
    root = b.chance(None, "")
    deals = list(itertools.permutations(range(r), players))
    prob = Fraction(1, len(deals))

    def payoff(deal: tuple[int, ...], hist: tuple[str, ...]) -> Fraction:
        contrib = [1] * players
        if "b" in hist:
            bettor = hist.index("b")
            contrib[bettor] += 1
            inside = [bettor]
            for k, act in enumerate(hist[bettor + 1:]):
                seat = (bettor + 1 + k) % players
                if act == "c":
                    contrib[seat] += 1
                    inside.append(seat)
        else:
            inside = list(range(players))
        pot = sum(contrib)
        winner = max(inside, key=lambda s: deal[s])
        total = Fraction(0)
        for s in range(players):
            delta = (pot if s == winner else 0) - contrib[s]
            if s in plus_seats:
                total += delta
        return total

    def actor(hist: tuple[str, ...]) -> int | None:
        if "b" not in hist:
            return len(hist) if len(hist) < players else None
        bettor = hist.index("b")
        responses = len(hist) - bettor - 1
        if responses == players - 1:
            return None
        return (bettor + 1 + responses) % players

    def grow(parent: int, action: str, deal, hist: tuple[str, ...], prob_):
        seat = actor(hist)
        if seat is None:
            b.terminal(parent, action, payoff(deal, hist), prob=prob_)
            return
        key = ("K", seat, deal[seat], hist)
        team, player = seats[seat]
        node = b.decision(parent, action, team, player, key, prob=prob_)
        options = ("k", "b") if "b" not in hist else ("f", "c")
        for act in options:
            grow(node, act, deal, hist + (act,), None)

    for deal in deals:
        grow(root, "d:" + ".".join(map(str, deal)), deal, (), prob)
    return b.build()


# ---------------------------------------------------------------------------
# Leduc poker
# ---------------------------------------------------------------------------

def make_leduc(m: int, n: int, max_bets: int, r: int, c: int,
               no_raise: bool = False) -> GameTree:
    """Multiplayer Leduc poker with r ranks, c indistinguishable suits,
    at most `max_bets` wagers per round (bet size 2, then 4 after the board
    card).  With `no_raise`, Team PLUS may only check, call, or fold.
    """
    players = m + n
    if players < 2 or r < 1 or c < 1 or max_bets < 1:
        raise ValueError("bad Leduc parameters")
    if c * r < players + 1:
        raise ValueError("deck too small for players plus board card")
    plus_seats = _seating(m, n)
    seats = _seat_map(players, plus_seats)
    b = GameBuilder()
    root = b.chance(None, "")

    def deals():
        def rec(prefix: tuple[int, ...], counts: list[int], remaining: int,
                prob: Fraction):
            if len(prefix) == players:
                yield prefix, prob
                return
            for rank in range(r):
                if counts[rank] == 0:
                    continue
                counts[rank] -= 1
                yield from rec(prefix + (rank,), counts, remaining - 1,
                               prob * Fraction(counts[rank] + 1, remaining))
                counts[rank] += 1
        yield from rec((), [c] * r, c * r, Fraction(1))

    def round_actions(seat: int, owed: bool, bets_used: int) -> tuple[str, ...]:
        can_wager = bets_used < max_bets and not (no_raise and seat in plus_seats)
        if not owed:
            return ("k", "b") if can_wager else ("k",)
        return ("f", "c", "r") if can_wager else ("f", "c")

    def showdown(deal, board: int, inside: list[int], pot: Fraction,
                 contrib: list[Fraction]) -> Fraction:
        pairs = [s for s in inside if deal[s] == board]
        if pairs:
            winners = pairs
        else:
            top = max(deal[s] for s in inside)
            winners = [s for s in inside if deal[s] == top]
        share = pot / len(winners)
        total = Fraction(0)
        for s in range(players):
            delta = (share if s in winners else Fraction(0)) - contrib[s]
            if s in plus_seats:
                total += delta
        return total

    def fold_out(inside: list[int], pot: Fraction, contrib: list[Fraction]) -> Fraction:
        winner = inside[0]
        total = Fraction(0)
        for s in range(players):
            delta = (pot if s == winner else Fraction(0)) - contrib[s]
            if s in plus_seats:
                total += delta
        return total

    def betting(parent, action, prob_, deal, board, rnd, inside, pending,
                level, paid, bets_used, contrib, hist):
        """One betting state.  `pending` seats still owe an action; `level`
        is the outstanding per-seat wager for this round."""
        if not pending:
            pot = sum(contrib, Fraction(0))
            if rnd == 0:
                counts = [c] * r
                for rank in deal:
                    counts[rank] -= 1
                remaining = sum(counts)
                chance = b.chance(parent, action, prob=prob_)
                for rank in range(r):
                    if counts[rank] == 0:
                        continue
                    betting(chance, f"B:{rank}", Fraction(counts[rank], remaining),
                            deal, rank, 1, inside, list(inside), 0,
                            {s: Fraction(0) for s in inside}, 0, contrib,
                            hist + (f"B:{rank}",))
                return
            b.terminal(parent, action, showdown(deal, board, inside, pot, contrib),
                       prob=prob_)
            return
        seat = pending[0]
        # A pending seat either faces no wager yet (level 0) or owes a call.
        options = round_actions(seat, level > 0, bets_used)
        key = ("L", seat, deal[seat], board, tuple(hist))
        team, player = seats[seat]
        node = b.decision(parent, action, team, player, key, prob=prob_)
        size = Fraction(2) if rnd == 0 else Fraction(4)
        for act in options:
            new_inside = list(inside)
            new_pending = pending[1:]
            new_paid = dict(paid)
            new_contrib = list(contrib)
            new_level = level
            new_bets = bets_used
            if act == "f":
                new_inside = [s for s in inside if s != seat]
                if len(new_inside) == 1:
                    pot = sum(new_contrib, Fraction(0))
                    b.terminal(node, act, fold_out(new_inside, pot, new_contrib))
                    continue
            elif act == "c":
                delta = level - paid[seat]
                new_paid[seat] = level
                new_contrib[seat] += delta
            elif act in ("b", "r"):
                new_level = level + size
                delta = new_level - paid[seat]
                new_paid[seat] = new_level
                new_contrib[seat] += delta
                new_bets += 1
                after = [s for s in inside if s != seat]
                start = inside.index(seat)
                ordered = inside[start + 1:] + inside[:start]
                new_pending = [s for s in ordered if s in after]
            betting(node, act, None, deal, board, rnd, new_inside, new_pending,
                    new_level, new_paid, new_bets, new_contrib, hist + (act,))

    for deal, p in deals():
        label = "d:" + ".".join(map(str, deal))
        contrib = [Fraction(1)] * players
        betting(root, label, p, deal, None, 0, list(range(players)),
                list(range(players)), 0, {s: Fraction(0) for s in range(players)},
                0, contrib, ())
    return b.build()


# ---------------------------------------------------------------------------
# Liar's Dice
# ---------------------------------------------------------------------------

def make_liars_dice(m: int, n: int, f: int) -> GameTree:
    """Liar's Dice with one f-sided die per player.

    Bids (quantity, face) strictly increase face-major: any bid on a higher
    face beats any quantity of a lower face, and quantity breaks ties within
    a face.  The first player must bid, later players raise or call.  On a
    call, the bid is good when at least `quantity` dice show `face` (no wild
    faces); the loser pays 1 to the winner and other players break even.
    When both teams have at least two players, the last 2n seats alternate
    teams so neither team holds trivially consecutive seats.
    """
    if f < 2 or n < 1 or m < n:
        raise ValueError("bad Liar's Dice parameters")
    players = m + n
    plus_seats = _alternating_seating(m, n) if n >= 2 else _seating(m, n)
    seats = _seat_map(players, plus_seats)
    n_bids = players * f
    b = GameBuilder()
    root = b.chance(None, "")
    prob = Fraction(1, f ** players)

    def bid_qf(k: int) -> tuple[int, int]:
        return k % players + 1, k // players + 1

    def grow(parent, action, prob_, roll, hist: tuple[int, ...]):
        seat = len(hist) % players
        key = ("D", seat, roll[seat], hist)
        team, player = seats[seat]
        node = b.decision(parent, action, team, player, key, prob=prob_)
        start = hist[-1] + 1 if hist else 0
        for k in range(start, n_bids):
            q, face = bid_qf(k)
            grow(node, f"{q}.{face}", None, roll, hist + (k,))
        if hist:
            q, face = bid_qf(hist[-1])
            bidder = (len(hist) - 1) % players
            caller = seat
            count = sum(1 for d in roll if d == face)
            winner = bidder if count >= q else caller
            loser = caller if winner == bidder else bidder
            total = Fraction(0)
            for s in range(players):
                delta = 1 if s == winner else (-1 if s == loser else 0)
                if s in plus_seats:
                    total += delta
            b.terminal(node, "call", total)

    for roll in itertools.product(range(1, f + 1), repeat=players):
        grow(root, "d:" + ".".join(map(str, roll)), prob, roll, ())
    return b.build()


# ---------------------------------------------------------------------------
# Goofspiel
# ---------------------------------------------------------------------------

def make_goofspiel(m: int, n: int, r: int, limited: bool) -> GameTree:
    """Goofspiel with r prize cards revealed one per round in random order.

    Each player holds bid cards 1..r, each used once; all r rounds are
    explicit (the final round's reveal and bids are forced single-option
    moves).  The highest bid wins the prize; ties discard it.  In the
    limited-information variant players observe only each round's winner
    (or a tie), not the bids.  Payoff is the teams' prize margin with prize
    k worth k / (r * (m + n)), one unit per card dealt.
    """
    players = m + n
    if players < 2 or r < 2:
        raise ValueError("bad Goofspiel parameters")
    plus_seats = _seating(m, n)
    seats = _seat_map(players, plus_seats)
    unit = r * players
    b = GameBuilder()

    def resolve(prize: int, bids: tuple[int, ...]) -> tuple[int | None, Fraction]:
        top = max(bids)
        winners = [s for s in range(players) if bids[s] == top]
        if len(winners) > 1:
            return None, Fraction(0)
        s = winners[0]
        return s, Fraction(prize if s in plus_seats else -prize, unit)

    def obs_of(prize: int, bids: tuple[int, ...], winner: int | None) -> tuple:
        if limited:
            return (prize, "tie" if winner is None else winner)
        return (prize, bids)

    def grow_round(parent, action, prob_, hands, own, prizes_left, margin, obs):
        if not prizes_left:
            b.terminal(parent, action, margin, prob=prob_)
            return
        chance = b.chance(parent, action, prob=prob_)
        share = Fraction(1, len(prizes_left))
        for prize in prizes_left:
            rest = tuple(p for p in prizes_left if p != prize)
            grow_bids(chance, f"p:{prize}", share, hands, own, prize, rest,
                      margin, obs, ())

    def grow_bids(parent, action, prob_, hands, own, prize, prizes_rest,
                  margin, obs, bids_so_far):
        seat = len(bids_so_far)
        if seat == players:
            winner, delta = resolve(prize, bids_so_far)
            new_obs = obs + (obs_of(prize, bids_so_far, winner),)
            new_hands = tuple(
                tuple(x for x in hands[s] if x != bids_so_far[s])
                for s in range(players))
            new_own = tuple(own[s] + (bids_so_far[s],) for s in range(players))
            grow_round(parent, action, prob_, new_hands, new_own, prizes_rest,
                       margin + delta, new_obs)
            return
        key = ("G", seat, own[seat], prize, obs)
        team, player = seats[seat]
        node = b.decision(parent, action, team, player, key, prob=prob_)
        for card in hands[seat]:
            grow_bids(node, f"c:{card}", None, hands, own, prize, prizes_rest,
                      margin, obs, bids_so_far + (card,))

    hands = tuple(tuple(range(1, r + 1)) for _ in range(players))
    grow_round(None, "", None, hands, tuple(() for _ in range(players)),
               tuple(range(1, r + 1)), Fraction(0), ())
    return b.build()


# ---------------------------------------------------------------------------
# Satisfiability game (hardness construction, used as a generator)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Cnf:
    """3-CNF: clauses of exactly three signed 1-based variable indices."""

    n_vars: int
    clauses: tuple[tuple[int, int, int], ...]

    def __post_init__(self):
        for cl in self.clauses:
            if len(cl) != 3:
                raise ValueError("each clause needs exactly 3 literals")
            for lit in cl:
                if lit == 0 or abs(lit) > self.n_vars:
                    raise ValueError(f"literal {lit} out of range")

    def satisfiable(self) -> bool:
        for bits in itertools.product((False, True), repeat=self.n_vars):
            if all(any((lit > 0) == bits[abs(lit) - 1] for lit in cl)
                   for cl in self.clauses):
                return True
        return False


def make_sat_game(cnf: Cnf) -> GameTree:
    """Single-team game: nature draws a clause uniformly; player 1 sees the
    clause and picks one of its three literal slots; player 2 sees only the
    chosen variable and assigns it true or false.  The team scores 1 when the
    assignment satisfies some literal of that variable in the clause.
    """
    clause_count = len(cnf.clauses)
    if clause_count == 0:
        raise ValueError("need at least one clause")
    b = GameBuilder()
    root = b.chance(None, "")
    prob = Fraction(1, clause_count)
    for ci, clause in enumerate(cnf.clauses):
        p1 = b.decision(root, f"c:{ci}", Team.PLUS, 0, ("p1", ci), prob=prob)
        for slot in range(3):
            var = abs(clause[slot])
            p2 = b.decision(p1, str(slot), Team.PLUS, 1, ("p2", var))
            for value, label in ((True, "t"), (False, "f")):
                win = any(abs(lit) == var and (lit > 0) == value for lit in clause)
                b.terminal(p2, label, Fraction(1 if win else 0))
    return b.build()


# ---------------------------------------------------------------------------
# Width-gap family (treewidth grows with k, reachable width stays 2)
# ---------------------------------------------------------------------------

def make_width_gap_game(k: int) -> GameTree:
    """Single team of two.  Nature draws player 1's type; player 1 picks one
    of k actions; nature draws player 2's type; player 2, seeing only its own
    type, picks one of two actions.  Payoffs are all zero (the family is used
    for width statistics only).
    """
    if k < 1:
        raise ValueError("k must be positive")
    b = GameBuilder()
    root = b.chance(None, "")
    half = Fraction(1, 2)
    for t1 in (0, 1):
        p1 = b.decision(root, f"t1:{t1}", Team.PLUS, 0, ("p1", t1), prob=half)
        for a in range(k):
            mid = b.chance(p1, f"a{a}")
            for t2 in (0, 1):
                p2 = b.decision(mid, f"t2:{t2}", Team.PLUS, 1, ("p2", t2), prob=half)
                for label in ("l", "r"):
                    b.terminal(p2, label, Fraction(0))
    return b.build()


# ---------------------------------------------------------------------------
# Game spec (CLI surface)
# ---------------------------------------------------------------------------

FAMILIES = ("kuhn", "leduc", "liarsdice", "goofspiel", "sat", "widthgap")


@dataclass(frozen=True)
class GameSpec:
    """Parameter bundle naming one benchmark instance."""

    family: str
    m: int = 0
    n: int = 0
    ranks: int = 0
    bets: int = 0
    suits: int = 0
    no_raise: bool = False
    faces: int = 0
    limited: bool = False
    k: int = 0
    cnf: Cnf | None = None

    def build(self) -> GameTree:
        if self.family == "kuhn":
            return make_kuhn(self.m, self.n, self.ranks)
        if self.family == "leduc":
            return make_leduc(self.m, self.n, self.bets, self.ranks, self.suits,
                              self.no_raise)
        if self.family == "liarsdice":
            return make_liars_dice(self.m, self.n, self.faces)
        if self.family == "goofspiel":
            return make_goofspiel(self.m, self.n, self.ranks, self.limited)
        if self.family == "sat":
            return make_sat_game(self.cnf)
        if self.family == "widthgap":
            return make_width_gap_game(self.k)
        raise ValueError(f"unknown family {self.family!r}")


# ---------------------------------------------------------------------------
# EFG-JSON
# ---------------------------------------------------------------------------

def _fmt_rational(x: Fraction) -> str:
    return f"{x.numerator}/{x.denominator}"


def _parse_rational(text: str, where: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise EfgParseError(f"{where}: bad rational {text!r}") from exc


def game_to_json_dict(game: GameTree) -> dict:
    nodes = []
    for i, rec in enumerate(game.nodes):
        row: dict = {
            "parent": rec.parent,
            "action": rec.action,
            "kind": rec.kind.value,
        }
        if rec.kind is Kind.DECISION:
            row["team"] = rec.team.value
            row["player"] = rec.player
            row["infoset"] = rec.infoset
        elif rec.kind is Kind.CHANCE:
            row["probs"] = [_fmt_rational(p) for p in rec.probs]
        else:
            row["payoff"] = _fmt_rational(rec.payoff)
        nodes.append(row)
    return {"nodes": nodes}


def save_efg(game: GameTree, path: str) -> None:
    """Write the game in EFG-JSON (canonical node order, exact rationals)."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(game_to_json_dict(game), fh, separators=(",", ":"))
        fh.write("\n")


def game_from_json_dict(data: dict) -> GameTree:
    if not isinstance(data, dict) or "nodes" not in data:
        raise EfgParseError("top-level object must contain a 'nodes' array")
    raw = data["nodes"]
    if not isinstance(raw, list) or not raw:
        raise EfgParseError("'nodes' must be a nonempty array")
    records: list[NodeRecord] = []
    depths: list[int] = []
    for i, row in enumerate(raw):
        where = f"node {i}"
        if not isinstance(row, dict):
            raise EfgParseError(f"{where}: expected an object")
        try:
            parent = row["parent"]
            action = row["action"]
            kind = Kind(row["kind"])
        except (KeyError, ValueError) as exc:
            raise EfgParseError(f"{where}: missing or bad field ({exc})") from exc
        if parent is None:
            depth = 0
        else:
            if not isinstance(parent, int) or not (0 <= parent < i):
                raise EfgParseError(f"{where}: parent must be an earlier index")
            depth = depths[parent] + 1
        depths.append(depth)
        team = player = infoset = None
        probs: tuple[Fraction, ...] = ()
        payoff = None
        if kind is Kind.DECISION:
            try:
                team = Team(row["team"])
                player = int(row["player"])
                infoset = int(row["infoset"])
            except (KeyError, ValueError) as exc:
                raise EfgParseError(f"{where}: bad decision fields ({exc})") from exc
        elif kind is Kind.CHANCE:
            if "probs" not in row or not isinstance(row["probs"], list):
                raise EfgParseError(f"{where}: chance node needs a 'probs' array")
            probs = tuple(_parse_rational(p, where) for p in row["probs"])
        else:
            if "payoff" not in row:
                raise EfgParseError(f"{where}: terminal node needs 'payoff'")
            payoff = _parse_rational(row["payoff"], where)
        records.append(NodeRecord(parent=parent, action=action, kind=kind,
                                  depth=depth, team=team, player=player,
                                  infoset=infoset, probs=probs, payoff=payoff))
    infoset_nodes: dict[int, list[int]] = {}
    for i, rec in enumerate(records):
        if rec.kind is Kind.DECISION:
            infoset_nodes.setdefault(rec.infoset, []).append(i)
    child_of: list[list[int]] = [[] for _ in records]
    for i, rec in enumerate(records):
        if rec.parent is not None:
            child_of[rec.parent].append(i)
    infosets: dict[int, Infoset] = {}
    for iid, node_list in infoset_nodes.items():
        first = node_list[0]
        infosets[iid] = Infoset(
            team=records[first].team,
            player=records[first].player,
            nodes=tuple(node_list),
            actions=tuple(records[k].action for k in child_of[first]),
        )
    game = GameTree(records, infosets)
    report = validate(game)
    if report:
        raise InvalidGameError(report)
    return game


def load_efg(path: str) -> GameTree:
    """Load and validate an EFG-JSON file; round-trips save_efg exactly."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise EfgParseError(f"{path}: line {exc.lineno}, column {exc.colno}: "
                            f"{exc.msg}") from exc
    return game_from_json_dict(data)
