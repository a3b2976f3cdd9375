"""SMILES parsing, valence checking and aromaticity perception.

The parser covers the organic subset (B, C, N, O, P, S, F, Cl, Br, I),
bracket atoms with isotope/charge/explicit hydrogens, single/double/triple/
aromatic bonds, branches, two-digit and %nn ring closures, lowercase aromatic
atoms and dot-disconnected fragments.  Stereo markers (@, /, \\) are parsed
and discarded.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from math import ceil


class SmilesError(ValueError):
    """Raised when a SMILES string cannot be parsed into a valid molecule."""


#: Allowed valences for the organic subset.  A formal charge of magnitude q
#: additionally permits each listed valence shifted by +/- q.
VALENCES: dict[str, tuple[int, ...]] = {
    "B": (3,),
    "C": (4,),
    "N": (3, 5),
    "O": (2,),
    "P": (3, 5),
    "S": (2, 4, 6),
    "F": (1,),
    "Cl": (1,),
    "Br": (1,),
    "I": (1,),
}

ORGANIC_SUBSET = set(VALENCES)
AROMATIC_SYMBOLS = {"b", "c", "n", "o", "p", "s"}

#: recognized element symbols for bracket atoms (main periodic table)
ELEMENTS = set(
    "H He Li Be B C N O F Ne Na Mg Al Si P S Cl Ar K Ca Sc Ti V Cr Mn Fe Co "
    "Ni Cu Zn Ga Ge As Se Br Kr Rb Sr Y Zr Nb Mo Tc Ru Rh Pd Ag Cd In Sn Sb "
    "Te I Xe Cs Ba La Ce Pr Nd Pm Sm Eu Gd Tb Dy Ho Er Tm Yb Lu Hf Ta W Re "
    "Os Ir Pt Au Hg Tl Pb Bi Po At Rn Fr Ra Ac Th Pa U".split()
)

_BRACKET_RE = re.compile(
    r"\[(?P<isotope>\d+)?(?P<symbol>[A-Z][a-z]?|[bcnops])(?P<chiral>@{1,2})?"
    r"(?P<hcount>H\d*)?(?P<charge>\+\d+|-\d+|\++|-+)?(?::\d+)?\]"
)

_BOND_ORDERS = {"-": 1, "=": 2, "#": 3, "~": 1, "/": 1, "\\": 1}


@dataclass
class Atom:
    symbol: str  # element symbol, capitalized ("C", "Cl", ...)
    charge: int = 0
    aromatic: bool = False
    h_count: int = 0  # total attached hydrogens after resolution
    isotope: int | None = None
    explicit_h: bool = False  # hydrogens were given in brackets
    from_bracket: bool = False


@dataclass
class Bond:
    a: int
    b: int
    order: int = 1  # 1, 2 or 3; aromatic bonds carry order 1 + flag
    aromatic: bool = False

    def order_value(self) -> float:
        return 1.5 if self.aromatic else float(self.order)

    def key(self) -> tuple[int, int]:
        return (self.a, self.b) if self.a < self.b else (self.b, self.a)


@dataclass
class MolGraph:
    atoms: list[Atom] = field(default_factory=list)
    bonds: list[Bond] = field(default_factory=list)

    def neighbors(self, i: int) -> list[tuple[int, Bond]]:
        out = []
        for bond in self.bonds:
            if bond.a == i:
                out.append((bond.b, bond))
            elif bond.b == i:
                out.append((bond.a, bond))
        return out

    def heavy_atom_count(self) -> int:
        return len(self.atoms)

    def ring_count(self) -> int:
        return len(self.bonds) - len(self.atoms) + self._component_count()

    def _component_count(self) -> int:
        seen: set[int] = set()
        count = 0
        for start in range(len(self.atoms)):
            if start in seen:
                continue
            count += 1
            stack = [start]
            while stack:
                u = stack.pop()
                if u in seen:
                    continue
                seen.add(u)
                stack.extend(v for v, _ in self.neighbors(u))
        return count

    def ring_atoms(self) -> set[int]:
        """Indices of atoms lying on at least one cycle (non-bridge edge)."""
        bridges = _find_bridges(self)
        ring: set[int] = set()
        for bond in self.bonds:
            if bond.key() not in bridges:
                ring.add(bond.a)
                ring.add(bond.b)
        return ring


def _find_bridges(g: MolGraph) -> set[tuple[int, int]]:
    n = len(g.atoms)
    adj: list[list[tuple[int, int]]] = [[] for _ in range(n)]
    for idx, bond in enumerate(g.bonds):
        adj[bond.a].append((bond.b, idx))
        adj[bond.b].append((bond.a, idx))
    visited = [False] * n
    disc = [0] * n
    low = [0] * n
    bridges: set[tuple[int, int]] = set()
    timer = 0
    for root in range(n):
        if visited[root]:
            continue
        # iterative Tarjan bridge search
        stack: list[tuple[int, int, int]] = [(root, -1, 0)]
        while stack:
            u, parent_edge, ptr = stack.pop()
            if ptr == 0:
                visited[u] = True
                disc[u] = low[u] = timer
                timer += 1
            if ptr < len(adj[u]):
                stack.append((u, parent_edge, ptr + 1))
                v, eidx = adj[u][ptr]
                if eidx == parent_edge:
                    continue
                if visited[v]:
                    low[u] = min(low[u], disc[v])
                else:
                    stack.append((v, eidx, 0))
            else:
                if parent_edge >= 0:
                    bond = g.bonds[parent_edge]
                    p = bond.a if bond.b == u else bond.b
                    low[p] = min(low[p], low[u])
                    if low[u] > disc[p]:
                        bridges.add(bond.key())
    return bridges


def _cycle_basis(g: MolGraph) -> list[list[int]]:
    """Fundamental cycles from a spanning forest (small graphs only)."""
    n = len(g.atoms)
    parent = {i: None for i in range(n)}
    depth = {}
    tree_edges: set[tuple[int, int]] = set()
    cycles: list[list[int]] = []
    visited: set[int] = set()
    for root in range(n):
        if root in visited:
            continue
        depth[root] = 0
        stack = [root]
        visited.add(root)
        while stack:
            u = stack.pop()
            for v, bond in g.neighbors(u):
                if v not in visited:
                    visited.add(v)
                    parent[v] = u
                    depth[v] = depth[u] + 1
                    tree_edges.add(bond.key())
                    stack.append(v)
    for bond in g.bonds:
        if bond.key() in tree_edges:
            continue
        # walk both endpoints up to their lowest common ancestor
        a, b = bond.a, bond.b
        path_a, path_b = [a], [b]
        while depth.get(path_a[-1], 0) > depth.get(path_b[-1], 0):
            path_a.append(parent[path_a[-1]])
        while depth.get(path_b[-1], 0) > depth.get(path_a[-1], 0):
            path_b.append(parent[path_b[-1]])
        while path_a[-1] != path_b[-1]:
            path_a.append(parent[path_a[-1]])
            path_b.append(parent[path_b[-1]])
        cycles.append(path_a + path_b[-2::-1])
    return cycles


def parse_smiles(s: str) -> MolGraph:
    """Parse a SMILES string into a MolGraph, raising SmilesError on failure."""
    if not s or not s.strip():
        raise SmilesError("empty SMILES")
    g = MolGraph()
    prev: int | None = None
    pending_bond: tuple[int, bool] | None = None  # (order, aromatic)
    branch_stack: list[int | None] = []
    open_rings: dict[int, tuple[int, tuple[int, bool] | None]] = {}
    i = 0
    while i < len(s):
        ch = s[i]
        if ch == "(":
            branch_stack.append(prev)
            i += 1
        elif ch == ")":
            if not branch_stack:
                raise SmilesError(f"unbalanced parenthesis at {i}")
            prev = branch_stack.pop()
            i += 1
        elif ch == ".":
            prev = None
            pending_bond = None
            i += 1
        elif ch in _BOND_ORDERS:
            pending_bond = (_BOND_ORDERS[ch], False)
            i += 1
        elif ch == ":":
            pending_bond = (1, True)
            i += 1
        elif ch.isdigit() or ch == "%":
            if ch == "%":
                m = re.match(r"%(\d\d)", s[i:])
                if not m:
                    raise SmilesError(f"malformed %nn ring closure at {i}")
                num = int(m.group(1))
                i += 3
            else:
                num = int(ch)
                i += 1
            if prev is None:
                raise SmilesError(f"ring closure digit with no preceding atom at {i}")
            if num in open_rings:
                other, opener_bond = open_rings.pop(num)
                if other == prev:
                    raise SmilesError(f"ring bond {num} closes on the same atom")
                bond = pending_bond or opener_bond
                _add_bond(g, other, prev, bond)
            else:
                open_rings[num] = (prev, pending_bond)
            pending_bond = None
        elif ch == "[":
            m = _BRACKET_RE.match(s, i)
            if not m:
                raise SmilesError(f"malformed bracket atom at {i}")
            idx = _add_bracket_atom(g, m)
            _link(g, prev, idx, pending_bond)
            prev = idx
            pending_bond = None
            i = m.end()
        else:
            sym = None
            if ch.isupper():
                two = s[i : i + 2]
                if two in ("Cl", "Br"):
                    sym = two
                elif ch in ORGANIC_SUBSET and len(ch) == 1:
                    sym = ch
                if sym is None or sym not in ORGANIC_SUBSET:
                    raise SmilesError(f"unknown symbol {ch!r} at {i}")
                atom = Atom(symbol=sym)
            elif ch in AROMATIC_SYMBOLS:
                atom = Atom(symbol=ch.upper(), aromatic=True)
                sym = ch
            else:
                raise SmilesError(f"unknown symbol {ch!r} at {i}")
            g.atoms.append(atom)
            idx = len(g.atoms) - 1
            _link(g, prev, idx, pending_bond)
            prev = idx
            pending_bond = None
            i += len(sym)
    if branch_stack:
        raise SmilesError("unbalanced parenthesis: unclosed '('")
    if open_rings:
        raise SmilesError(f"unclosed ring bond(s): {sorted(open_rings)}")
    ring_atoms = g.ring_atoms()
    for idx, atom in enumerate(g.atoms):
        if atom.aromatic and idx not in ring_atoms:
            raise SmilesError(f"aromatic atom {atom.symbol.lower()} outside any ring")
    perceive_aromaticity(g)
    assign_hydrogens(g)
    return g


def _add_bracket_atom(g: MolGraph, m: re.Match) -> int:
    raw = m.group("symbol")
    aromatic = raw.islower()
    symbol = raw.capitalize()
    if aromatic and raw not in AROMATIC_SYMBOLS:
        raise SmilesError(f"invalid aromatic symbol {raw!r}")
    if symbol not in ELEMENTS:
        raise SmilesError(f"unknown element symbol {raw!r}")
    hcount = 0
    if m.group("hcount"):
        digits = m.group("hcount")[1:]
        hcount = int(digits) if digits else 1
    charge = 0
    cg = m.group("charge")
    if cg:
        if cg in ("+", "-") or set(cg) in ({"+"}, {"-"}):
            charge = cg.count("+") - cg.count("-")
        else:
            charge = int(cg)
    isotope = int(m.group("isotope")) if m.group("isotope") else None
    g.atoms.append(
        Atom(
            symbol=symbol,
            charge=charge,
            aromatic=aromatic,
            h_count=hcount,
            isotope=isotope,
            explicit_h=True,
            from_bracket=True,
        )
    )
    return len(g.atoms) - 1


def _link(g: MolGraph, prev: int | None, idx: int, pending: tuple[int, bool] | None):
    if prev is None:
        return
    _add_bond(g, prev, idx, pending)


def _add_bond(g: MolGraph, a: int, b: int, pending: tuple[int, bool] | None):
    for bond in g.bonds:
        if bond.key() == ((a, b) if a < b else (b, a)):
            raise SmilesError(f"duplicate bond between atoms {a} and {b}")
    if pending is not None:
        order, aromatic = pending
    else:
        aromatic = g.atoms[a].aromatic and g.atoms[b].aromatic
        order = 1
    g.bonds.append(Bond(a, b, order=order, aromatic=aromatic))


def _pi_contribution(g: MolGraph, idx: int, ring: set[int]) -> int | None:
    """Electrons atom `idx` donates to the ring pi system; None if ineligible."""
    atom = g.atoms[idx]
    nbrs = g.neighbors(idx)
    double_in = [v for v, b in nbrs if b.order == 2 and not b.aromatic and v in ring]
    double_out = [v for v, b in nbrs if b.order == 2 and not b.aromatic and v not in ring]
    triple = [v for v, b in nbrs if b.order == 3]
    if triple:
        return None
    if atom.aromatic:
        if atom.symbol in ("O", "S"):
            return 2
        if atom.symbol in ("N", "P"):
            donor = atom.h_count > 0 or len(nbrs) >= 3
            return 2 if donor else 1
        if atom.symbol == "B":
            return 0
        return 1
    if double_out:
        return None  # exocyclic double bond: keep kekulized (quinone-like)
    if double_in:
        return 1
    # all single bonds
    if atom.symbol in ("N", "P") and atom.charge == 0:
        return 2
    if atom.symbol in ("O", "S") and atom.charge == 0:
        return 2
    if atom.symbol == "C" and atom.charge == -1:
        return 2
    if atom.symbol == "B":
        return 0
    return None


def perceive_aromaticity(g: MolGraph) -> None:
    """Mark Hueckel (4n+2) rings of size 5-7 aromatic; ambiguity keeps kekulized."""
    bond_by_key = {b.key(): b for b in g.bonds}
    aromatic_rings: list[list[int]] = []
    for ring in _cycle_basis(g):
        if not 5 <= len(ring) <= 7:
            continue
        ring_set = set(ring)
        pi = 0
        ok = True
        for idx in ring:
            c = _pi_contribution(g, idx, ring_set)
            if c is None:
                ok = False
                break
            pi += c
        if ok and pi % 4 == 2:
            aromatic_rings.append(ring)
    for ring in aromatic_rings:
        for idx in ring:
            g.atoms[idx].aromatic = True
        for a, b in zip(ring, ring[1:] + ring[:1]):
            bond = bond_by_key.get((a, b) if a < b else (b, a))
            if bond is not None:
                bond.aromatic = True
                bond.order = 1


def _is_pi_donor(g: MolGraph, idx: int) -> bool:
    atom = g.atoms[idx]
    if atom.symbol in ("O", "S"):
        return True
    if atom.symbol in ("N", "P"):
        return atom.h_count > 0 or len(g.neighbors(idx)) >= 3
    return False


def used_valence(g: MolGraph, idx: int) -> int:
    """Bonding capacity consumed by heavy-atom bonds (hydrogens excluded)."""
    atom = g.atoms[idx]
    nbrs = g.neighbors(idx)
    n_arom = sum(1 for _, b in nbrs if b.aromatic)
    plain = sum(b.order for _, b in nbrs if not b.aromatic)
    if n_arom == 0:
        return plain
    if atom.aromatic and _is_pi_donor(g, idx):
        return n_arom + plain
    return n_arom + plain + 1  # one extra for the delocalized pi bond


def allowed_valences(atom: Atom) -> tuple[int, ...]:
    base = VALENCES.get(atom.symbol)
    if base is None:
        return ()
    q = abs(atom.charge)
    vals = set()
    for v in base:
        vals.add(v + q)
        if v - q >= 0:
            vals.add(v - q)
    return tuple(sorted(vals))


def assign_hydrogens(g: MolGraph) -> None:
    """Fill implicit hydrogens from the valence table and check valences."""
    for idx, atom in enumerate(g.atoms):
        allowed = allowed_valences(atom)
        used = used_valence(g, idx)
        if not allowed:
            # element outside the table: keep explicit hydrogens, skip check
            continue
        if atom.explicit_h:
            total = used + atom.h_count
            if total > max(allowed):
                raise SmilesError(
                    f"valence violation on atom {idx} ({atom.symbol}): "
                    f"{total} > {max(allowed)}"
                )
        else:
            fit = [v for v in allowed if v >= used]
            if not fit:
                raise SmilesError(
                    f"valence violation on atom {idx} ({atom.symbol}): "
                    f"bond order {used} > {max(allowed)}"
                )
            atom.h_count = fit[0] - used


def implied_h_count(g: MolGraph, idx: int) -> int | None:
    """Hydrogen count a bare (non-bracket) atom would get in its bond context."""
    atom = g.atoms[idx]
    allowed = allowed_valences(Atom(symbol=atom.symbol))
    if not allowed or atom.charge != 0:
        return None
    used = used_valence(g, idx)
    fit = [v for v in allowed if v >= used]
    if not fit:
        return None
    return fit[0] - used


def is_valid(s: str) -> bool:
    """True iff the string parses as a molecule passing the valence check."""
    try:
        parse_smiles(s)
        return True
    except Exception:
        return False
