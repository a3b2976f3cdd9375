"""Deterministic canonical SMILES writer.

Ranking uses iterative neighborhood-invariant refinement with explicit tie
promotion: whenever refinement stalls with tied atoms, every candidate in the
lowest tied class is promoted in turn and the lexicographically smallest
resulting string wins.  This is not industry-exact canonical SMILES, but two
isomorphic graphs always map to the same string.
"""

from __future__ import annotations

from .graph import MolGraph, implied_h_count, ORGANIC_SUBSET

_MAX_TIE_CANDIDATES = 16


def canonical_smiles(g: MolGraph) -> str:
    components = _components(g)
    parts = sorted(_canon_component(g, comp) for comp in components)
    return ".".join(parts)


def _components(g: MolGraph) -> list[list[int]]:
    seen: set[int] = set()
    comps = []
    for start in range(len(g.atoms)):
        if start in seen:
            continue
        comp = []
        stack = [start]
        while stack:
            u = stack.pop()
            if u in seen:
                continue
            seen.add(u)
            comp.append(u)
            stack.extend(v for v, _ in g.neighbors(u))
        comps.append(sorted(comp))
    return comps


def _initial_invariants(g: MolGraph, comp: list[int]) -> dict[int, tuple]:
    inv = {}
    for i in comp:
        a = g.atoms[i]
        inv[i] = (
            a.symbol,
            a.aromatic,
            len(g.neighbors(i)),
            a.charge,
            a.h_count,
            a.isotope or 0,
        )
    return inv


def _refine(g: MolGraph, comp: list[int], ranks: dict[int, int]) -> dict[int, int]:
    while True:
        inv = {}
        for i in comp:
            nbr = sorted(
                (b.order_value(), ranks[v]) for v, b in g.neighbors(i) if v in ranks
            )
            inv[i] = (ranks[i], tuple(nbr))
        new_ranks = _dense(inv)
        if len(set(new_ranks.values())) == len(set(ranks.values())):
            return new_ranks
        ranks = new_ranks


def _dense(inv: dict[int, tuple]) -> dict[int, int]:
    order = sorted(set(inv.values()))
    lut = {v: r for r, v in enumerate(order)}
    return {i: lut[v] for i, v in inv.items()}


def _canon_component(g: MolGraph, comp: list[int]) -> str:
    ranks = _refine(g, comp, _dense(_initial_invariants(g, comp)))
    return _resolve(g, comp, ranks)


def _resolve(g: MolGraph, comp: list[int], ranks: dict[int, int]) -> str:
    distinct = len(set(ranks.values()))
    if distinct == len(comp):
        return _write(g, comp, ranks)
    # lowest tied class
    by_rank: dict[int, list[int]] = {}
    for i, r in ranks.items():
        by_rank.setdefault(r, []).append(i)
    tied_rank = min(r for r, atoms in by_rank.items() if len(atoms) > 1)
    candidates = sorted(by_rank[tied_rank])[:_MAX_TIE_CANDIDATES]
    best: str | None = None
    for cand in candidates:
        promoted = {i: 2 * r for i, r in ranks.items()}
        promoted[cand] -= 1
        refined = _refine(g, comp, _dense({i: (r,) for i, r in promoted.items()}))
        s = _resolve(g, comp, refined)
        if best is None or s < best:
            best = s
    assert best is not None
    return best


def _atom_token(g: MolGraph, idx: int) -> str:
    a = g.atoms[idx]
    sym = a.symbol.lower() if a.aromatic else a.symbol
    plain_ok = (
        a.symbol in ORGANIC_SUBSET
        and a.charge == 0
        and a.isotope is None
        and implied_h_count(g, idx) == a.h_count
    )
    if plain_ok:
        return sym
    h = "" if a.h_count == 0 else ("H" if a.h_count == 1 else f"H{a.h_count}")
    if a.charge == 0:
        q = ""
    elif a.charge == 1:
        q = "+"
    elif a.charge == -1:
        q = "-"
    else:
        q = f"{a.charge:+d}"
    iso = "" if a.isotope is None else str(a.isotope)
    return f"[{iso}{sym}{h}{q}]"


def _bond_token(g: MolGraph, a: int, b: int, bond) -> str:
    if bond.aromatic:
        return ""
    if bond.order == 2:
        return "="
    if bond.order == 3:
        return "#"
    if g.atoms[a].aromatic and g.atoms[b].aromatic:
        return "-"  # single bond between aromatic atoms must be explicit
    return ""


def _write(g: MolGraph, comp: list[int], ranks: dict[int, int]) -> str:
    root = min(comp, key=lambda i: ranks[i])
    # first pass: tree edges and ring-closure (back) edges in DFS order
    visited: set[int] = set()
    children: dict[int, list[int]] = {i: [] for i in comp}
    closure_bonds: list[tuple[int, int]] = []  # (opening atom, closing atom)
    used_edges: set[tuple[int, int]] = set()

    def explore(u: int):
        visited.add(u)
        for v, bond in sorted(g.neighbors(u), key=lambda p: ranks[p[0]]):
            key = bond.key()
            if key in used_edges:
                continue
            if v in visited:
                used_edges.add(key)
                closure_bonds.append((v, u))
            else:
                used_edges.add(key)
                children[u].append(v)
                explore(v)

    import sys

    old_limit = sys.getrecursionlimit()
    sys.setrecursionlimit(max(old_limit, 4 * len(comp) + 100))
    try:
        explore(root)
    finally:
        sys.setrecursionlimit(old_limit)

    # assign ring closure numbers in discovery order of the closing atom
    bond_lut = {b.key(): b for b in g.bonds}
    ring_digits: dict[int, list[tuple[int, str]]] = {i: [] for i in comp}
    open_digits: set[int] = set()
    order_of = {u: n for n, u in enumerate(_preorder(root, children))}
    for opener, closer in sorted(
        closure_bonds, key=lambda oc: (order_of[oc[0]], order_of[oc[1]])
    ):
        num = 1
        while num in open_digits:
            num += 1
        open_digits.add(num)  # digits never reused within one component
        bond = bond_lut[(opener, closer) if opener < closer else (closer, opener)]
        tok = _bond_token(g, opener, closer, bond)
        ring_digits[opener].append((num, tok))
        ring_digits[closer].append((num, ""))

    def digit_str(num: int) -> str:
        return str(num) if num < 10 else f"%{num:02d}"

    def emit(u: int) -> str:
        out = [_atom_token(g, u)]
        for num, tok in ring_digits[u]:
            out.append(tok + digit_str(num))
        kids = children[u]
        for k, v in enumerate(kids):
            bond = bond_lut[(u, v) if u < v else (v, u)]
            inner = _bond_token(g, u, v, bond) + emit(v)
            if k < len(kids) - 1:
                out.append(f"({inner})")
            else:
                out.append(inner)
        return "".join(out)

    sys.setrecursionlimit(max(old_limit, 4 * len(comp) + 100))
    try:
        return emit(root)
    finally:
        sys.setrecursionlimit(old_limit)


def _preorder(root: int, children: dict[int, list[int]]) -> list[int]:
    out = []
    stack = [root]
    while stack:
        u = stack.pop()
        out.append(u)
        stack.extend(reversed(children[u]))
    return out
