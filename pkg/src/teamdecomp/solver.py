"""LP solving and equilibrium utilities.

Exact mode runs a dense two-phase tableau simplex over rationals (gmpy2.mpq
when available) with Dantzig pricing and a Bland fallback against cycling.
Float mode hands the LP to scipy's HiGHS with tight tolerances.  On top of
solve() sit plan extraction, best-response values, the equilibrium gap, the
full game pipeline, and an independent brute-force oracle for small games.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
import scipy.optimize
import scipy.sparse

from .decomposition import build_decomposition
from .errors import (CapExceededError, InfeasibleError, InfeasibleLambdaError,
                     NumericalBreakdownError, UnboundedError)
from .feasible import DEFAULT_CAP, enumerate_feasible, reachability_stats
from .game import GameTree, Kind, PayoffForm, Team, build_team_view, payoff_form
from .lp import (PolytopeDescription, SaddleLP, SparseLP, polytope_description,
                 polytope_lp, saddle_lp)

try:
    from gmpy2 import mpq as _mpq
except ImportError:  # pragma: no cover
    _mpq = Fraction

EXACT_NNZ_THRESHOLD = 100_000  # default mode switch for solve_game


def _to_frac(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    return Fraction(x.numerator, x.denominator)


@dataclass
class LpSolution:
    objective: Fraction | float
    values: list  # per LP column
    row_duals: list  # per LP row, sign: d(max objective)/d(rhs)
    iterations: int
    mode: str


# ---------------------------------------------------------------------------
# Exact simplex
# ---------------------------------------------------------------------------

class _FarkasInfeasible(InfeasibleError):
    """Phase-1 optimum positive; carries the infeasibility certificate."""

    def __init__(self, duals):
        super().__init__("phase-1 optimum is nonzero")
        self.duals = duals


class _ExactSimplex:
    """Dense tableau simplex over exact rationals, minimizing.

    Expects equality standard form: A z = b, z >= 0, b >= 0.  Artificial
    columns stay in the tableau (blocked from entering after phase 1) so the
    row duals can be read off their reduced costs.
    """

    def __init__(self, rows: list[list], b: list, c: list):
        self.m = len(rows)
        self.n = len(c)
        self.rows = rows
        self.b = b
        self.c = c
        self.iterations = 0

    def solve(self):
        m, n = self.m, self.n
        zero = _mpq(0)
        one = _mpq(1)
        T = [row + [zero] * m + [self.b[i]] for i, row in enumerate(self.rows)]
        for i in range(m):
            T[i][n + i] = one
        basis = [n + i for i in range(m)]
        cost = [zero] * (n + m + 1)
        for i in range(m):
            row = T[i]
            for j in range(n):
                if row[j]:
                    cost[j] -= row[j]
            cost[-1] -= row[-1]
        self._run(T, basis, cost, n + m)
        if cost[-1] != 0:
            # duals of phase 1: y_r = 1 - reduced cost of artificial r
            y1 = [1 - _to_frac(cost[n + r]) for r in range(m)]
            raise _FarkasInfeasible(y1)
        live = self._drive_out_artificials(T, basis, n)
        # Phase 2 cost row over the same tableau; artificials keep cost 0.
        cost = list(self.c) + [zero] * (m + 1)
        for i in live:
            cb = cost[basis[i]]
            if cb:
                row = T[i]
                for j in range(n + m):
                    if row[j]:
                        cost[j] -= cb * row[j]
                cost[-1] -= cb * row[-1]
        self._run(T, basis, cost, n, live=live)
        values = [Fraction(0)] * self.n
        for i in live:
            if basis[i] < self.n:
                values[basis[i]] = _to_frac(T[i][-1])
        duals = [Fraction(0)] * m
        for r in range(m):
            duals[r] = -_to_frac(cost[n + r])
        objective = -_to_frac(cost[-1])
        return objective, values, duals

    def _drive_out_artificials(self, T, basis, n) -> list[int]:
        """Pivot artificial basics onto real columns; redundant rows (all-zero
        over real columns) are deactivated and their duals stay zero."""
        live = []
        for i in range(len(basis)):
            if basis[i] < n:
                live.append(i)
                continue
            row = T[i]
            target = None
            for j in range(n):
                if row[j]:
                    target = j
                    break
            if target is None:
                continue
            self._pivot(T, basis, None, i, target)
            live.append(i)
        if len(live) < len(basis):
            self._live_set = set(live)
        return live

    def _run(self, T, basis, cost, width, live=None):
        rows_idx = range(len(T)) if live is None else live
        degenerate_streak = 0
        last_obj = cost[-1]
        while True:
            use_bland = degenerate_streak >= 40
            enter = -1
            if use_bland:
                for j in range(width):
                    if cost[j] < 0:
                        enter = j
                        break
            else:
                best = 0
                for j in range(width):
                    if cost[j] < best:
                        best = cost[j]
                        enter = j
            if enter < 0:
                return
            leave = -1
            best_ratio = None
            for i in rows_idx:
                a = T[i][enter]
                if a > 0:
                    ratio = T[i][-1] / a
                    if (best_ratio is None or ratio < best_ratio
                            or (ratio == best_ratio and basis[i] < basis[leave])):
                        best_ratio = ratio
                        leave = i
            if leave < 0:
                raise UnboundedError("unbounded direction in simplex")
            self._pivot(T, basis, cost, leave, enter)
            self.iterations += 1
            if cost[-1] == last_obj:
                degenerate_streak += 1
            else:
                degenerate_streak = 0
                last_obj = cost[-1]

    @staticmethod
    def _pivot(T, basis, cost, i, j):
        row = T[i]
        piv = row[j]
        if piv != 1:
            inv = 1 / piv
            T[i] = row = [x * inv if x else x for x in row]
        nz = [k for k, x in enumerate(row) if x]
        for k in range(len(T)):
            if k == i:
                continue
            f = T[k][j]
            if f:
                rk = T[k]
                for c in nz:
                    rk[c] -= f * row[c]
        if cost is not None:
            f = cost[j]
            if f:
                for c in nz:
                    cost[c] -= f * row[c]
        basis[i] = j


def _standardize(lp: SparseLP):
    """Convert to min cᵀz, Az = b, z >= 0.  Supports lb in {0, None} and no
    finite upper bounds, which covers every LP this library emits."""
    col_map: list[list[tuple[int, int]]] = []  # per original col: (std col, sign)
    n_std = 0
    for c in range(lp.n_cols):
        lb, ub = lp.var_lb[c], lp.var_ub[c]
        if ub is not None or (lb is not None and lb != 0):
            raise NotImplementedError("only lb in {0, -inf} and ub = +inf")
        if lb is None:
            col_map.append([(n_std, 1), (n_std + 1, -1)])
            n_std += 2
        else:
            col_map.append([(n_std, 1)])
            n_std += 1
    mpq0 = _mpq(0)
    rows: list[list] = [[mpq0] * n_std for _ in range(lp.n_rows)]
    b = [_mpq(r.numerator, r.denominator) for r in lp.rhs]
    for r, c, w in lp.entries:
        wq = _mpq(w.numerator, w.denominator)
        for sc, sign in col_map[c]:
            rows[r][sc] += wq if sign > 0 else -wq
    slack_of_row: dict[int, int] = {}
    for r, sense in enumerate(lp.row_sense):
        if sense == "E":
            continue
        for row in rows:
            row.append(mpq0)
        rows[r][n_std] = _mpq(1) if sense == "L" else _mpq(-1)
        slack_of_row[r] = n_std
        n_std += 1
    # objective: maximize -> minimize negation
    c_std = [mpq0] * n_std
    for c, w in lp.objective:
        wq = _mpq(w.numerator, w.denominator)
        for sc, sign in col_map[c]:
            c_std[sc] += (-wq) if sign > 0 else wq
    flipped = set()
    for r in range(lp.n_rows):
        if b[r] < 0:
            rows[r] = [-x for x in rows[r]]
            b[r] = -b[r]
            flipped.add(r)
    return rows, b, c_std, col_map, slack_of_row, flipped


def solve_exact(lp: SparseLP) -> LpSolution:
    rows, b, c_std, col_map, slack_of_row, flipped = _standardize(lp)
    sx = _ExactSimplex(rows, b, c_std)
    obj_min, z, reduced = sx.solve()
    values: list[Fraction] = []
    for c in range(lp.n_cols):
        total = Fraction(0)
        for sc, sign in col_map[c]:
            total += z[sc] if sign > 0 else -z[sc]
        values.append(total)
    objective = -obj_min
    # Inequality-row duals, oriented as d(max objective)/d(rhs): the reduced
    # cost of a row's slack column recovers them (flipping rows that were
    # negated to make b nonnegative flips their duals).
    duals: list[Fraction | None] = [None] * lp.n_rows
    for r, sc in slack_of_row.items():
        red = reduced[sc]
        d = red if lp.row_sense[r] == "L" else -red
        duals[r] = -d if r in flipped else d
    return LpSolution(objective=objective, values=values, row_duals=duals,
                      iterations=sx.iterations, mode="exact")


# ---------------------------------------------------------------------------
# Float solve (HiGHS)
# ---------------------------------------------------------------------------

def solve_float(lp: SparseLP) -> LpSolution:
    n = lp.n_cols
    c = np.zeros(n)
    for col, w in lp.objective:
        c[col] = -float(w)  # linprog minimizes
    eq_rows = [r for r, s in enumerate(lp.row_sense) if s == "E"]
    ub_rows = [r for r, s in enumerate(lp.row_sense) if s != "E"]
    eq_index = {r: i for i, r in enumerate(eq_rows)}
    ub_index = {r: i for i, r in enumerate(ub_rows)}
    eq_data, eq_i, eq_j = [], [], []
    ub_data, ub_i, ub_j = [], [], []
    for r, col, w in lp.entries:
        if lp.row_sense[r] == "E":
            eq_i.append(eq_index[r]); eq_j.append(col); eq_data.append(float(w))
        else:
            sign = 1.0 if lp.row_sense[r] == "L" else -1.0
            ub_i.append(ub_index[r]); ub_j.append(col); ub_data.append(sign * float(w))
    A_eq = scipy.sparse.csr_matrix((eq_data, (eq_i, eq_j)),
                                   shape=(len(eq_rows), n)) if eq_rows else None
    b_eq = np.array([float(lp.rhs[r]) for r in eq_rows]) if eq_rows else None
    A_ub = scipy.sparse.csr_matrix((ub_data, (ub_i, ub_j)),
                                   shape=(len(ub_rows), n)) if ub_rows else None
    b_ub = np.array([
        float(lp.rhs[r]) * (1.0 if lp.row_sense[r] == "L" else -1.0)
        for r in ub_rows]) if ub_rows else None
    bounds = [(None if lb is None else float(lb),
               None if ub is None else float(ub))
              for lb, ub in zip(lp.var_lb, lp.var_ub)]
    res = scipy.optimize.linprog(
        c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=bounds,
        method="highs",
        options={"primal_feasibility_tolerance": 1e-9,
                 "dual_feasibility_tolerance": 1e-9})
    if res.status == 2:
        raise InfeasibleError(res.message)
    if res.status == 3:
        raise UnboundedError(res.message)
    if res.status != 0:
        raise NumericalBreakdownError(
            f"{res.message} (try exact mode or export the LP)")
    duals: list[float | None] = [None] * lp.n_rows
    if eq_rows:
        for r, i in eq_index.items():
            duals[r] = -float(res.eqlin.marginals[i])
    if ub_rows:
        for r, i in ub_index.items():
            m = -float(res.ineqlin.marginals[i])
            duals[r] = m if lp.row_sense[r] == "L" else -m
    its = int(np.sum(res.nit)) if np.ndim(res.nit) else int(res.nit)
    return LpSolution(objective=-float(res.fun), values=list(res.x),
                      row_duals=duals, iterations=its, mode="float")


def solve(lp: SparseLP, mode: str) -> LpSolution:
    """Solve a SparseLP in 'exact' or 'float' arithmetic."""
    if mode == "exact":
        return solve_exact(lp)
    if mode == "float":
        return solve_float(lp)
    raise ValueError(f"unknown mode {mode!r}")


# ---------------------------------------------------------------------------
# Plans, best responses, gap
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RealizationPlan:
    team: Team
    values: dict[int, Fraction | float]  # team-view class -> reach value
    max_clamp: float = 0.0

    def __getitem__(self, cls: int):
        return self.values[cls]


def extract_plan(desc: PolytopeDescription, lam_values: list,
                 mode: str = "exact") -> RealizationPlan:
    """Fold bag weights into a realization plan over all view classes."""
    tol = 0.0 if mode == "exact" else 1e-7
    max_clamp = 0.0
    # Feasibility of the weights themselves (normalization rows suffice as a
    # cheap certificate; marginal rows were enforced by the solver).
    for bi, bag in enumerate(desc.bags):
        total = sum(lam_values[desc.lam_offset[bi] + i]
                    for i in range(len(bag.assignments)))
        bad = (total != 1) if mode == "exact" else abs(float(total) - 1.0) > 1e-7
        if bad:
            raise InfeasibleLambdaError(
                f"bag {bi} weights sum to {float(total)}, not 1")
    values: dict[int, Fraction | float] = {}
    for cls in sorted(desc.canonical_bag):
        v = desc.class_value(cls, lam_values)
        if mode != "exact":
            fv = float(v)
            if fv < 0.0 or fv > 1.0:
                max_clamp = max(max_clamp, 0.0 - fv if fv < 0 else fv - 1.0)
                fv = min(1.0, max(0.0, fv))
            values[cls] = fv
        else:
            values[cls] = v
    return RealizationPlan(team=desc.team, values=values, max_clamp=max_clamp)


def _fold_payoff(payoff: PayoffForm, plan: RealizationPlan,
                 against: Team) -> dict[int, Fraction]:
    """Objective coefficients on the opponent's linked classes when `plan`
    is held fixed."""
    out: dict[int, Fraction] = {}
    for cp, cm, w in payoff.triples:
        if against is Team.MINUS:
            out[cm] = out.get(cm, Fraction(0)) + w * _as_frac(plan.values[cp])
        else:
            out[cp] = out.get(cp, Fraction(0)) + w * _as_frac(plan.values[cm])
    return out


def _as_frac(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(x)


def best_response_value(opponent: PolytopeDescription, payoff: PayoffForm,
                        plan: RealizationPlan, mode: str = "exact"):
    """Optimal value the opponent can force against a fixed plan."""
    if opponent.team is plan.team:
        raise ValueError("best response needs the opposing description")
    coefs = _fold_payoff(payoff, plan, against=opponent.team)
    link = set(opponent.link_classes)
    obj = {opponent.x_col(c): w for c, w in coefs.items() if c in link}
    sense = "min" if opponent.team is Team.MINUS else "max"
    lp = polytope_lp(opponent, obj, sense, f"br_{opponent.team.value}")
    sol = solve(lp, mode)
    return sol.objective if sense == "max" else -sol.objective


def equilibrium_gap(plan_plus: RealizationPlan, plan_minus: RealizationPlan,
                    desc_plus: PolytopeDescription, desc_minus: PolytopeDescription,
                    payoff: PayoffForm, mode: str = "exact"):
    """(best payoff PLUS can get vs plan_minus) - (least MINUS concedes vs
    plan_plus); nonnegative, zero exactly at equilibrium."""
    hi = best_response_value(desc_plus, payoff, plan_minus, mode)
    lo = best_response_value(desc_minus, payoff, plan_plus, mode)
    return hi - lo


# ---------------------------------------------------------------------------
# Full pipeline
# ---------------------------------------------------------------------------

@dataclass
class SolveResult:
    value: Fraction | float
    plan_plus: RealizationPlan
    plan_minus: RealizationPlan
    gap: Fraction | float
    iterations: int
    wall_seconds: float
    mode: str
    lp_nnz: int


@dataclass
class GameArtifacts:
    """Everything the pipeline builds before solving."""

    game: GameTree
    views: dict[Team, object]
    decs: dict[Team, object]
    sets: dict[Team, list]
    infos: dict[Team, object]
    reach: dict[Team, object]
    descs: dict[Team, PolytopeDescription]
    payoff: PayoffForm
    saddle: SaddleLP


def build_artifacts(game: GameTree, cap: int = DEFAULT_CAP) -> GameArtifacts:
    views = {t: build_team_view(game, t) for t in Team}
    payoff = payoff_form(game, views[Team.PLUS], views[Team.MINUS])
    decs, sets, infos, reach, descs = {}, {}, {}, {}, {}
    link = {Team.PLUS: payoff.plus_classes, Team.MINUS: payoff.minus_classes}
    for t in Team:
        decs[t] = build_decomposition(views[t])
        sets[t], infos[t] = enumerate_feasible(decs[t], views[t], cap)
        reach[t] = reachability_stats(sets[t], decs[t])
        descs[t] = polytope_description(decs[t], sets[t], link[t])
    saddle = saddle_lp(descs[Team.PLUS], descs[Team.MINUS], payoff)
    return GameArtifacts(game=game, views=views, decs=decs, sets=sets,
                         infos=infos, reach=reach, descs=descs, payoff=payoff,
                         saddle=saddle)


def solve_game(game: GameTree, mode: str = "auto",
               cap: int = DEFAULT_CAP, compute_gap: bool = True) -> SolveResult:
    """Run the full pipeline: views, decompositions, feasible sets, polytope
    descriptions, saddle LP, plans for both teams, and the equilibrium gap."""
    t0 = time.perf_counter()
    art = build_artifacts(game, cap)
    lp = art.saddle.lp
    if mode == "auto":
        mode = "exact" if lp.nnz <= EXACT_NNZ_THRESHOLD else "float"
    sol = solve(lp, mode)
    plan_plus = extract_plan(art.descs[Team.PLUS],
                             sol.values[:art.saddle.n_primal_cols], mode)
    plan_minus = _dual_plan(art.saddle, sol, mode)
    if compute_gap:
        gap = equilibrium_gap(plan_plus, plan_minus, art.descs[Team.PLUS],
                              art.descs[Team.MINUS], art.payoff, mode)
        if mode == "float" and -1e-9 < gap < 0:
            gap = 0.0
    else:
        gap = Fraction(0) if mode == "exact" else 0.0
    return SolveResult(value=sol.objective, plan_plus=plan_plus,
                       plan_minus=plan_minus, gap=gap,
                       iterations=sol.iterations,
                       wall_seconds=time.perf_counter() - t0, mode=mode,
                       lp_nnz=lp.nnz)


def _dual_plan(saddle: SaddleLP, sol: LpSolution, mode: str) -> RealizationPlan:
    """The opponent's equilibrium weights are the duals of the coupling rows
    (oriented as d(value)/d(rhs), which is nonnegative for these rows)."""
    desc = saddle.dual_desc
    lam = []
    for col in range(desc.n_cols):
        d = sol.row_duals[saddle.dual_feas_rows[col]]
        lam.append(d if d is not None else 0)
    return extract_plan(desc, lam, mode)


# ---------------------------------------------------------------------------
# Brute-force oracle
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OracleResult:
    value: Fraction
    strategies_plus: int
    strategies_minus: int


def _team_strategies(game: GameTree, team: Team, cap: int):
    infosets = sorted(i for i, rec in game.infosets.items() if rec.team is team)
    count = 1
    for i in infosets:
        count *= len(game.infosets[i].actions)
        if count > cap:
            raise CapExceededError(
                f"team {team.value} has more than {cap} pure strategies")
    spaces = [game.infosets[i].actions for i in infosets]
    return infosets, list(itertools.product(*spaces)), count


def _reach_sets(game: GameTree, team: Team, infosets, strategies):
    """For each pure strategy, the set of terminals it allows."""
    slot = {iid: k for k, iid in enumerate(infosets)}
    # requirement list per terminal: (slot, action) pairs on the path
    reqs: list[list[tuple[int, str]]] = [[] for _ in game.nodes]
    term_reqs = {}
    for z in game.terminals:
        req = []
        i = z
        while game.nodes[i].parent is not None:
            p = game.nodes[i].parent
            rec = game.nodes[p]
            if rec.kind is Kind.DECISION and rec.team is team:
                req.append((slot[rec.infoset], game.nodes[i].action))
            i = p
        term_reqs[z] = req
    out = []
    for strat in strategies:
        out.append({z for z, req in term_reqs.items()
                    if all(strat[s] == a for s, a in req)})
    return out


def brute_force_value(game: GameTree, cap: int = 10_000) -> OracleResult:
    """Exact matrix-game value over exhaustively enumerated pure team
    strategies (correlation = mixing over joint pure strategies)."""
    game.ensure_valid()
    ip, sp, np_ = _team_strategies(game, Team.PLUS, cap)
    im, sm, nm_ = _team_strategies(game, Team.MINUS, cap)
    reach_p = _reach_sets(game, Team.PLUS, ip, sp)
    reach_m = _reach_sets(game, Team.MINUS, im, sm)
    w = {z: game.nodes[z].payoff * game.chance_reach(z) for z in game.terminals}
    matrix = [[Fraction(0)] * len(sm) for _ in sp]
    by_term_m = [set() for _ in game.nodes]
    for j, s in enumerate(reach_m):
        for z in s:
            by_term_m[z].add(j)
    for i, s in enumerate(reach_p):
        row = matrix[i]
        for z in s:
            wz = w[z]
            if wz:
                for j in by_term_m[z]:
                    row[j] += wz
    value = _matrix_game_value(matrix)
    return OracleResult(value=value, strategies_plus=len(sp),
                        strategies_minus=len(sm))


def _matrix_game_value(matrix: list[list[Fraction]]) -> Fraction:
    """Exact value of max_p min_j p^T M e_j via the exact simplex."""
    n_rows = len(matrix)
    n_cols = len(matrix[0]) if n_rows else 0
    if n_rows == 0 or n_cols == 0:
        return Fraction(0)
    # vars: p_0..p_{n_rows-1} >= 0, u free; max u
    var_names = tuple([f"p_{i}" for i in range(n_rows)] + ["u"])
    entries = []
    row_names = []
    senses = []
    rhs = []
    for j in range(n_cols):
        r = len(row_names)
        row_names.append(f"col_{j}")
        senses.append("G")
        rhs.append(Fraction(0))
        for i in range(n_rows):
            if matrix[i][j]:
                entries.append((r, i, matrix[i][j]))
        entries.append((r, n_rows, Fraction(-1)))
    r = len(row_names)
    row_names.append("simplex")
    senses.append("E")
    rhs.append(Fraction(1))
    entries.extend((r, i, Fraction(1)) for i in range(n_rows))
    lp = SparseLP(
        name="matrix_game",
        var_names=var_names,
        var_lb=tuple([Fraction(0)] * n_rows + [None]),
        var_ub=tuple([None] * (n_rows + 1)),
        objective=((n_rows, Fraction(1)),),
        row_names=tuple(row_names), row_sense=tuple(senses), rhs=tuple(rhs),
        entries=tuple(sorted(entries)))
    return solve_exact(lp).objective
