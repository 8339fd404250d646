"""Integer matrix normal forms for finitely presented abelian groups.

Everything is exact over Z with arbitrary-precision integers; pivoting is
deterministic so presentations are reproducible across runs.
"""

from __future__ import annotations


def smith_normal_form(
    rows: list[list[int]], ncols: int
) -> tuple[list[list[int]], list[list[int]]]:
    """Return (D, V) with U*M*V = D diagonal and d_i | d_{i+1}.

    M is given by `rows` (each of length ncols).  Only the column-operation
    matrix V is tracked: the class of the g-th standard generator in the
    cokernel Z^ncols / rowspan(M) has coordinates V[g] in the diagonal basis.
    """
    m = len(rows)
    a = [row[:] for row in rows]
    v = [[1 if i == j else 0 for j in range(ncols)] for i in range(ncols)]

    def swap_cols(i: int, j: int) -> None:
        for r in a:
            r[i], r[j] = r[j], r[i]
        for r in v:
            r[i], r[j] = r[j], r[i]

    def add_col(src: int, dst: int, q: int) -> None:
        for r in a:
            r[dst] += q * r[src]
        for r in v:
            r[dst] += q * r[src]

    t = 0
    while t < min(m, ncols):
        piv = None
        best = None
        for i in range(t, m):
            for j in range(t, ncols):
                x = abs(a[i][j])
                if x and (best is None or x < best):
                    best, piv = x, (i, j)
        if piv is None:
            break
        a[t], a[piv[0]] = a[piv[0]], a[t]
        if piv[1] != t:
            swap_cols(t, piv[1])
        while True:
            progress = False
            for i in range(t + 1, m):
                if a[i][t]:
                    q = a[i][t] // a[t][t]
                    a[i] = [x - q * y for x, y in zip(a[i], a[t])]
                    if a[i][t]:
                        a[t], a[i] = a[i], a[t]
                        progress = True
            for j in range(t + 1, ncols):
                if a[t][j]:
                    q = a[t][j] // a[t][t]
                    add_col(t, j, -q)
                    if a[t][j]:
                        swap_cols(t, j)
                        progress = True
            if not progress:
                break
        if a[t][t] < 0:
            for r in a:
                r[t] = -r[t]
            for r in v:
                r[t] = -r[t]
        # divisibility: d_t must divide every later entry
        offender = None
        for i in range(t + 1, m):
            for j in range(t + 1, ncols):
                if a[i][j] % a[t][t]:
                    offender = i
                    break
            if offender is not None:
                break
        if offender is not None:
            a[t] = [x + y for x, y in zip(a[t], a[offender])]
            continue
        t += 1
    return a, v


def cokernel_presentation(
    rows: list[list[int]], ncols: int
) -> tuple[int, list[int], list[list[int]]]:
    """Invariants of Z^ncols / rowspan(rows).

    Returns (rank, torsion, images): the free rank, the invariant factors > 1
    in divisibility order, and for each standard generator its coordinates in
    the reduced group (torsion coordinates first, each reduced mod its
    factor, then the free coordinates)."""
    d, v = smith_normal_form(rows, ncols)
    diag = [abs(d[i][i]) if i < len(d) else 0 for i in range(ncols)]
    torsion_idx = [i for i, x in enumerate(diag) if x > 1]
    free_idx = [i for i, x in enumerate(diag) if x == 0]
    torsion = [diag[i] for i in torsion_idx]
    images = []
    for g in range(ncols):
        images.append(
            [v[g][i] % diag[i] for i in torsion_idx] + [v[g][i] for i in free_idx]
        )
    return len(free_idx), torsion, images
