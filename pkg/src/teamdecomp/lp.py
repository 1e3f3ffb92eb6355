"""Polytope descriptions, the saddle-point LP, and text exporters.

The strategy polytope of a team is described by one weight variable per
(bag, locally feasible assignment) pair, with per-bag normalization rows,
per-edge marginal-consistency rows keyed by the pattern over the shared
classes, and linking rows that expose the realization-plan value of each
payoff-relevant class.  Pass-through bags only relay their parent's set, so
the description is built over the root bag and the bags holding team
decisions; the relayed classes are folded into their nearest such ancestor
(each assignment extends uniquely, by copying values down non-team chains).

The equilibrium LP dualizes the inner minimization: the opponent's rows
become free variables, and each opponent column becomes an inequality
coupling those duals to the payoff times this team's linked plan values.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction

from .decomposition import PublicTreeDecomposition
from .errors import EmptyBagError, LpError
from .feasible import LocalFeasibleSet
from .game import PayoffForm, Team

Row = tuple[str, str, Fraction, tuple[tuple[int, Fraction], ...]]


@dataclass(frozen=True)
class LPBag:
    dec_bag: int
    parent: int | None  # index within the description's bag list
    classes: tuple[int, ...]  # C_minus, then C_plus extended through relays
    n_minus: int
    assignments: tuple[bytes, ...]  # one byte per class, 0/1


@dataclass(frozen=True)
class PolytopeDescription:
    team: Team
    bags: tuple[LPBag, ...]
    link_classes: tuple[int, ...]
    lam_offset: tuple[int, ...]  # first column of each bag's weight block
    n_lambda: int
    rows: tuple[Row, ...]
    canonical_bag: dict[int, int]  # class -> description bag that carries it
    class_pos: dict[int, int]  # class -> position within its carrier's classes

    @property
    def n_cols(self) -> int:
        return self.n_lambda + len(self.link_classes)

    def lam_name(self, bag: int, idx: int) -> str:
        return f"lp_{self.team.value}_{bag}_{idx}"

    def x_col(self, cls: int) -> int:
        return self.n_lambda + self.link_classes.index(cls)

    def col_names(self) -> list[str]:
        names = []
        for bi, bag in enumerate(self.bags):
            names.extend(self.lam_name(bi, i) for i in range(len(bag.assignments)))
        names.extend(f"x_{self.team.value}_{c}" for c in self.link_classes)
        return names

    def class_value(self, cls: int, lam: list) -> object:
        """Realization-plan value of a class from bag weights."""
        bi = self.canonical_bag[cls]
        pos = self.class_pos[cls]
        off = self.lam_offset[bi]
        total = 0
        for i, a in enumerate(self.bags[bi].assignments):
            if a[pos]:
                total = total + lam[off + i]
        return total


def polytope_description(dec: PublicTreeDecomposition,
                         sets: list[LocalFeasibleSet],
                         payoff_classes: tuple[int, ...]) -> PolytopeDescription:
    """Weight-variable description of the team's strategy polytope."""
    view = dec.view
    team = view.team
    retained = sorted({0} | set(dec.team_bags()))
    desc_idx = {b: i for i, b in enumerate(retained)}

    for b in retained:
        if not sets[b].assignments:
            raise EmptyBagError(f"bag {b} has an empty feasible set")

    # Mutable build state per retained bag: class list, class->pos, rows.
    classes: list[list[int]] = [list(sets[b].classes) for b in retained]
    pos: list[dict[int, int]] = [
        {c: k for k, c in enumerate(cs)} for cs in classes]
    rows_data: list[list[list[int]]] = [
        [list(a) for a in sets[b].assignments] for b in retained]

    # Every class is carried (held outside a C_minus role) by exactly one
    # retained bag: the root class by the root bag, every other class by the
    # bag whose C_plus or relay extension first contains it.
    canonical_bag: dict[int, int] = {}
    class_pos: dict[int, int] = {}

    def register(cls: int, di: int) -> None:
        if cls not in canonical_bag:
            canonical_bag[cls] = di
            class_pos[cls] = pos[di][cls]

    register(0, 0)
    for di, b in enumerate(retained):
        start = 0 if di == 0 else sets[b].n_minus
        for c in classes[di][start:]:
            register(c, di)

    carrier: dict[int, int] = {}  # dec bag -> retained description index
    parent_of: list[int | None] = [None] * len(retained)
    for bi, bag in enumerate(dec.bags):
        if bi in desc_idx:
            di = desc_idx[bi]
            carrier[bi] = di
            if bag.parent is not None:
                parent_of[di] = carrier[bag.parent]
        else:
            # Relay bag: fold its C_plus into the nearest retained ancestor,
            # copying each pass-through class's value to its children.
            di = carrier[bag.parent]
            carrier[bi] = di
            p = pos[di]
            for c in bag.minus:
                src = p[c]
                for child in view.classes[c].children:
                    if child in p:
                        continue
                    p[child] = len(classes[di])
                    classes[di].append(child)
                    for row in rows_data[di]:
                        row.append(row[src])
                    register(child, di)

    bags = tuple(
        LPBag(dec_bag=retained[di], parent=parent_of[di],
              classes=tuple(classes[di]), n_minus=sets[retained[di]].n_minus,
              assignments=tuple(bytes(r) for r in rows_data[di]))
        for di in range(len(retained)))

    lam_offset = []
    n_lambda = 0
    for bag in bags:
        lam_offset.append(n_lambda)
        n_lambda += len(bag.assignments)

    link_classes = tuple(sorted(payoff_classes))
    x_col = {c: n_lambda + k for k, c in enumerate(link_classes)}

    rows: list[Row] = []
    one = Fraction(1)
    for di, bag in enumerate(bags):
        coefs = tuple((lam_offset[di] + i, one) for i in range(len(bag.assignments)))
        rows.append((f"n_{team.value}_{di}", "E", one, coefs))
    for di, bag in enumerate(bags):
        if bag.parent is None:
            continue
        pdi = bag.parent
        parent = bags[pdi]
        ppos = {c: k for k, c in enumerate(parent.classes)}
        idx = [ppos[c] for c in bag.classes[:bag.n_minus]]
        groups: dict[bytes, list[tuple[int, Fraction]]] = {}
        for i, a in enumerate(parent.assignments):
            pat = bytes(a[k] for k in idx)
            groups.setdefault(pat, []).append((lam_offset[pdi] + i, one))
        for i, a in enumerate(bag.assignments):
            pat = bytes(a[:bag.n_minus])
            if pat not in groups:
                raise LpError(
                    f"bag {bag.dec_bag}: assignment pattern missing at parent")
            groups[pat].append((lam_offset[di] + i, -one))
        for k, pat in enumerate(sorted(groups)):
            rows.append((f"m_{team.value}_{di}_{k}", "E", Fraction(0),
                         tuple(groups[pat])))
    for c in link_classes:
        di = canonical_bag[c]
        p = class_pos[c]
        coefs = [(x_col[c], one)]
        off = lam_offset[di]
        for i, a in enumerate(bags[di].assignments):
            if a[p]:
                coefs.append((off + i, -one))
        rows.append((f"l_{team.value}_{c}", "E", Fraction(0), tuple(coefs)))

    return PolytopeDescription(
        team=team, bags=bags, link_classes=link_classes,
        lam_offset=tuple(lam_offset), n_lambda=n_lambda, rows=tuple(rows),
        canonical_bag=canonical_bag, class_pos=class_pos)


@dataclass(frozen=True)
class SparseLP:
    """Sparse LP in canonical order: nnz is the stored triplet count."""

    name: str
    var_names: tuple[str, ...]
    var_lb: tuple[Fraction | None, ...]
    var_ub: tuple[Fraction | None, ...]
    objective: tuple[tuple[int, Fraction], ...]  # maximized
    row_names: tuple[str, ...]
    row_sense: tuple[str, ...]  # 'E', 'L', 'G'
    rhs: tuple[Fraction, ...]
    entries: tuple[tuple[int, int, Fraction], ...]  # (row, col, coef), row-major

    @property
    def n_rows(self) -> int:
        return len(self.row_names)

    @property
    def n_cols(self) -> int:
        return len(self.var_names)

    @property
    def nnz(self) -> int:
        return len(self.entries)


def lp_size(lp: SparseLP) -> int:
    """Nonzero entries in the constraint matrix."""
    return lp.nnz


@dataclass(frozen=True)
class SaddleLP:
    """The assembled equilibrium LP plus the metadata needed to read plans
    back out of a solution."""

    lp: SparseLP
    primal: PolytopeDescription  # maximizing team
    dual_desc: PolytopeDescription  # opponent, encoded through dual rows
    payoff: PayoffForm
    # Column spans: [0, primal.n_cols) primal lambda/x, then dual variables.
    n_primal_cols: int
    dual_feas_rows: tuple[int, ...]  # one LP row per opponent column, in order


def _rows_to_entries(rows: tuple[Row, ...], row_base: int, col_base: int):
    for r, (_, _, _, coefs) in enumerate(rows):
        for col, coef in coefs:
            yield (row_base + r, col_base + col, coef)


def saddle_lp(desc_plus: PolytopeDescription, desc_minus: PolytopeDescription,
              payoff: PayoffForm, *, maximizer: Team = Team.PLUS) -> SaddleLP:
    """LP whose optimum is the game value for the maximizing team.

    With the default orientation the LP is max over the PLUS polytope of the
    dualized inner minimization over MINUS.  Passing maximizer=MINUS builds
    the role-swapped program (payoff negated and transposed), whose optimum
    is the negated game value and whose primal block carries MINUS's plan.
    """
    if maximizer is Team.PLUS:
        primal, dual = desc_plus, desc_minus
        triples = payoff.triples
    else:
        primal, dual = desc_minus, desc_plus
        triples = tuple((cm, cp, -w) for (cp, cm, w) in payoff.triples)
    if primal.team is dual.team:
        raise LpError("saddle LP needs one description per team")

    # Payoff folded by dual-side class: coefficients on primal link columns.
    by_dual_class: dict[int, list[tuple[int, Fraction]]] = {}
    primal_link = set(primal.link_classes)
    dual_link = set(dual.link_classes)
    for cp, cm, w in triples:
        if cp not in primal_link or cm not in dual_link:
            raise LpError("payoff references classes without link columns")
        by_dual_class.setdefault(cm, []).append((primal.x_col(cp), -w))

    n_primal = primal.n_cols
    n_dual_rows = len(dual.rows)
    var_names = primal.col_names() + [f"v_{name}" for name, _, _, _ in dual.rows]
    var_lb: list[Fraction | None] = [Fraction(0)] * n_primal + [None] * n_dual_rows
    var_ub: list[Fraction | None] = [None] * (n_primal + n_dual_rows)

    row_names: list[str] = []
    row_sense: list[str] = []
    rhs: list[Fraction] = []
    entries: list[tuple[int, int, Fraction]] = []

    for name, sense, b, coefs in primal.rows:
        r = len(row_names)
        row_names.append(name)
        row_sense.append(sense)
        rhs.append(b)
        entries.extend((r, col, coef) for col, coef in coefs)

    # Transpose the dual side's rows to get per-column entries.
    by_col: dict[int, list[tuple[int, Fraction]]] = {}
    for ri, (_, _, _, coefs) in enumerate(dual.rows):
        for col, coef in coefs:
            by_col.setdefault(col, []).append((ri, coef))

    dual_col_names = dual.col_names()
    dual_feas_rows = []
    zero = Fraction(0)
    for col in range(dual.n_cols):
        r = len(row_names)
        dual_feas_rows.append(r)
        row_names.append(f"d_{dual_col_names[col]}")
        row_sense.append("L")
        rhs.append(zero)
        for ri, coef in by_col.get(col, ()):  # F^T v
            entries.append((r, n_primal + ri, coef))
        if col >= dual.n_lambda:
            cls = dual.link_classes[col - dual.n_lambda]
            for pcol, coef in by_dual_class.get(cls, ()):
                entries.append((r, pcol, coef))

    objective = tuple(
        (n_primal + ri, b) for ri, (_, _, b, _) in enumerate(dual.rows) if b != 0)

    lp = SparseLP(
        name=f"saddle_{primal.team.value}",
        var_names=tuple(var_names), var_lb=tuple(var_lb), var_ub=tuple(var_ub),
        objective=objective,
        row_names=tuple(row_names), row_sense=tuple(row_sense), rhs=tuple(rhs),
        entries=tuple(sorted(entries)))
    return SaddleLP(lp=lp, primal=primal, dual_desc=dual, payoff=payoff,
                    n_primal_cols=n_primal, dual_feas_rows=tuple(dual_feas_rows))


def polytope_lp(desc: PolytopeDescription,
                objective: dict[int, Fraction], sense: str,
                name: str) -> SparseLP:
    """LP over a single team's polytope with a linear objective on its
    columns (class links and/or weights).  `sense` is 'max' or 'min';
    the stored objective is always maximized, so 'min' negates."""
    sign = Fraction(1) if sense == "max" else Fraction(-1)
    rows: list[Row] = list(desc.rows)
    entries = []
    row_names = []
    row_sense = []
    rhs = []
    for r, (rname, s, b, coefs) in enumerate(rows):
        row_names.append(rname)
        row_sense.append(s)
        rhs.append(b)
        entries.extend((r, col, coef) for col, coef in coefs)
    return SparseLP(
        name=name,
        var_names=tuple(desc.col_names()),
        var_lb=tuple([Fraction(0)] * desc.n_cols),
        var_ub=tuple([None] * desc.n_cols),
        objective=tuple((c, sign * w) for c, w in sorted(objective.items()) if w != 0),
        row_names=tuple(row_names), row_sense=tuple(row_sense), rhs=tuple(rhs),
        entries=tuple(sorted(entries)))


# ---------------------------------------------------------------------------
# Exporters
# ---------------------------------------------------------------------------

def _num(x: Fraction) -> str:
    if x.denominator == 1:
        return str(x.numerator)
    return repr(float(x))


def _lp_text(lp: SparseLP) -> str:
    by_row: dict[int, list[tuple[int, Fraction]]] = {}
    for r, c, w in lp.entries:
        by_row.setdefault(r, []).append((c, w))

    def terms(pairs) -> str:
        parts = []
        for c, w in pairs:
            name = lp.var_names[c]
            if w < 0:
                parts.append(f"- {_num(-w)} {name}")
            else:
                parts.append(f"{'+ ' if parts else ''}{_num(w)} {name}"
                             if parts else f"{_num(w)} {name}")
        return " ".join(parts) if parts else "0 " + lp.var_names[0]

    out = ["Maximize", f" obj: {terms(sorted(lp.objective))}", "Subject To"]
    op = {"E": "=", "L": "<=", "G": ">="}
    for r in range(lp.n_rows):
        out.append(f" {lp.row_names[r]}: {terms(by_row.get(r, []))} "
                   f"{op[lp.row_sense[r]]} {_num(lp.rhs[r])}")
    out.append("Bounds")
    for c in range(lp.n_cols):
        lb, ub = lp.var_lb[c], lp.var_ub[c]
        name = lp.var_names[c]
        if lb is None and ub is None:
            out.append(f" {name} free")
        elif lb == 0 and ub is None:
            continue  # default bound
        else:
            lo = "-inf" if lb is None else _num(lb)
            hi = "+inf" if ub is None else _num(ub)
            out.append(f" {lo} <= {name} <= {hi}")
    out.append("End")
    return "\n".join(out) + "\n"


def mps_name_map(lp: SparseLP) -> dict[str, str]:
    """Fixed MPS limits names to 8 characters; every row and column gets a
    mangled name, with this map as the sidecar."""
    mapping = {"obj": "OBJ"}
    for r, name in enumerate(lp.row_names):
        mapping[name] = f"R{r:07d}"
    for c, name in enumerate(lp.var_names):
        mapping[name] = f"C{c:07d}"
    return mapping


def _mps_text(lp: SparseLP) -> str:
    names = mps_name_map(lp)
    out = ["NAME          " + lp.name[:8].upper(), "ROWS", " N  OBJ"]
    sense_tag = {"E": "E", "L": "L", "G": "G"}
    for r in range(lp.n_rows):
        out.append(f" {sense_tag[lp.row_sense[r]]}  {names[lp.row_names[r]]}")
    out.append("COLUMNS")
    by_col: dict[int, list[tuple[str, Fraction]]] = {}
    for c, w in lp.objective:
        by_col.setdefault(c, []).append(("OBJ", -w))  # MPS convention minimizes
    for r, c, w in lp.entries:
        by_col.setdefault(c, []).append((names[lp.row_names[r]], w))
    for c in range(lp.n_cols):
        col = names[lp.var_names[c]]
        for rname, w in by_col.get(c, ()):
            out.append(f"    {col:<10}{rname:<10}{float(w):.12g}")
    out.append("RHS")
    for r in range(lp.n_rows):
        if lp.rhs[r] != 0:
            out.append(f"    RHS       {names[lp.row_names[r]]:<10}"
                       f"{float(lp.rhs[r]):.12g}")
    out.append("BOUNDS")
    for c in range(lp.n_cols):
        lb, ub = lp.var_lb[c], lp.var_ub[c]
        col = names[lp.var_names[c]]
        if lb is None and ub is None:
            out.append(f" FR BND       {col}")
        elif lb == 0 and ub is None:
            continue
        else:
            if lb is not None and lb != 0:
                out.append(f" LO BND       {col:<10}{float(lb):.12g}")
            if lb is None:
                out.append(f" MI BND       {col}")
            if ub is not None:
                out.append(f" UP BND       {col:<10}{float(ub):.12g}")
    out.append("ENDATA")
    return "\n".join(out) + "\n"


def export_lp(lp: SparseLP, fmt: str) -> str:
    """Render the LP as 'lp-text' (CPLEX LP format) or 'mps' (fixed MPS with
    mangled 8-character names; pair with mps_name_map for the sidecar)."""
    if fmt == "lp-text":
        return _lp_text(lp)
    if fmt == "mps":
        return _mps_text(lp)
    raise ValueError(f"unknown export format {fmt!r}")


def stats_json(width, reach) -> str:
    data = width.to_json_dict()
    data.update(reach.to_json_dict())
    return json.dumps(data, sort_keys=True)
