"""Orthonormal separable 2D discrete wavelet transform with an exact adjoint.

The transform uses zero extension at every boundary, which keeps analysis an
exact linear isometry: synthesis is its transpose, so perfect reconstruction
and the adjoint identity hold to machine precision for every family, level,
and matrix shape.  Inputs whose dimensions do not divide cleanly are first
zero-padded to the minimal shape for which every level's working length is
even (`padded_shape`).
"""

import numpy as np

__all__ = [
    "FAMILIES",
    "WaveletSpec",
    "CoeffGrid",
    "make_wavelet",
    "default_level",
    "max_level",
    "padded_shape",
    "grid_shape",
    "check_level",
    "dwt2",
    "idwt2",
    "dwt2_adjoint",
    "subband_energy",
]

_SQRT2 = np.sqrt(2.0)

# Closed-form scaling filters.  Lengths 2/4/6 orthonormal filters are unique
# up to reflection, so sym2/sym3 coincide with db2/db3.


def _haar():
    return np.array([1.0, 1.0]) / _SQRT2


def _db2():
    s3 = np.sqrt(3.0)
    return np.array([1.0 + s3, 3.0 + s3, 3.0 - s3, 1.0 - s3]) / (4.0 * _SQRT2)


def _db3():
    s10 = np.sqrt(10.0)
    b = np.sqrt(5.0 + 2.0 * s10)
    return np.array(
        [
            1.0 + s10 + b,
            5.0 + s10 + 3.0 * b,
            10.0 - 2.0 * s10 + 2.0 * b,
            10.0 - 2.0 * s10 - 2.0 * b,
            5.0 + s10 - 3.0 * b,
            1.0 + s10 - b,
        ]
    ) / (16.0 * _SQRT2)


# Newton seeds for the families without a convenient closed form.  The seeds
# are refined against the defining equations at import time (see _polish), so
# the working coefficients are certified rather than trusted constants.

_SYM4_SEED = [
    0.0322231006040427,
    -0.012603967262037833,
    -0.09921954357684722,
    0.29785779560527736,
    0.8037387518059161,
    0.49761866763201545,
    -0.02963552764599851,
    -0.07576571478927333,
]

_COIF1_SEED = [
    -0.0727326195128539,
    0.3378976624578092,
    0.8525720202122554,
    0.38486484686420286,
    -0.0727326195128539,
    -0.01565572813546454,
]

_COIF2_SEED = [
    0.016387336463522112,
    -0.04146493678175915,
    -0.06737255472196302,
    0.3861100668211622,
    0.8127236354455423,
    0.41700518442169254,
    -0.0764885990783064,
    -0.0594344186464569,
    0.023680171946334084,
    0.0056114348193944995,
    -0.0018232088707029932,
    -0.0007205494453645122,
]


def _qmf(h):
    """Quadrature mirror of a lowpass filter: g[k] = (-1)^k h[L-1-k]."""
    return (-1.0) ** np.arange(h.size) * h[::-1]


def _polish(seed, n_psi_moments, n_phi_moments=0, phi_center=0):
    """Newton-refine a scaling filter to machine precision.

    The system is: even-shift orthonormality, vanishing moments of the
    quadrature-mirror highpass, and (for coiflets) vanishing scaling-filter
    moments about `phi_center`.  The system is consistent but can be
    rank-deficient at the solution, so steps use a truncated pseudoinverse.
    """
    h = np.asarray(seed, dtype=float).copy()
    L = h.size
    k = np.arange(L, dtype=float)
    sign = (-1.0) ** np.arange(L)
    mid = (L - 1) / 2.0
    for _ in range(10):
        rows, vals = [], []
        for s in range(L // 2):
            row = np.zeros(L)
            row[: L - 2 * s] += h[2 * s:]
            row[2 * s:] += h[: L - 2 * s]
            rows.append(row)
            vals.append(np.dot(h[: L - 2 * s], h[2 * s:]) - (1.0 if s == 0 else 0.0))
        for j in range(n_psi_moments):
            w = (k - mid) ** j
            rows.append(w[::-1] * sign[::-1])
            vals.append(np.dot(w, _qmf(h)))
        for j in range(1, n_phi_moments + 1):
            row = (k - phi_center) ** j
            rows.append(row)
            vals.append(np.dot(row, h))
        F = np.asarray(vals)
        if np.max(np.abs(F)) < 1e-15:
            break
        h = h - np.linalg.pinv(np.asarray(rows), rcond=1e-8) @ F
    return h


def _scaling_filter(family):
    if family == "db1":
        return _haar()
    if family in ("db2", "sym2"):
        return _db2()
    if family in ("db3", "sym3"):
        return _db3()
    if family == "sym4":
        return _polish(_SYM4_SEED, n_psi_moments=4)
    if family == "coif1":
        return _polish(_COIF1_SEED, n_psi_moments=2, n_phi_moments=2, phi_center=2)
    if family == "coif2":
        return _polish(_COIF2_SEED, n_psi_moments=4, n_phi_moments=3, phi_center=4)
    raise ValueError(f"unknown wavelet family: {family!r}")


FAMILIES = ("db1", "db2", "db3", "sym2", "sym3", "sym4", "coif1", "coif2")


class WaveletSpec:
    """An orthonormal wavelet filter bank plus a decomposition level.

    Analysis coefficients are sliding inner products of the signal against
    the decomposition filters at even offsets; the reconstruction filters
    are their time-reverses (synthesis is the exact adjoint of analysis).
    """

    def __init__(self, family, level, lowpass_dec, highpass_dec):
        self.family = family
        self.level = int(level)
        self.lowpass_dec = np.asarray(lowpass_dec, dtype=float)
        self.highpass_dec = np.asarray(highpass_dec, dtype=float)
        self.lowpass_rec = self.lowpass_dec[::-1].copy()
        self.highpass_rec = self.highpass_dec[::-1].copy()

    @property
    def filter_length(self):
        return self.lowpass_dec.size

    def __repr__(self):
        return f"WaveletSpec(family={self.family!r}, level={self.level})"

    def __eq__(self, other):
        return (
            isinstance(other, WaveletSpec)
            and self.family == other.family
            and self.level == other.level
        )


def _verify_filter_bank(family, h, g, tol=1e-12):
    """Raise if the filter pair violates the orthonormal QMF identities."""
    L = h.size
    if L % 2 != 0:
        raise ValueError(f"{family}: filter length must be even, got {L}")
    if abs(h.sum() - _SQRT2) > tol:
        raise ValueError(f"{family}: lowpass does not sum to sqrt(2)")
    for s in range(L // 2):
        target = 1.0 if s == 0 else 0.0
        if abs(np.dot(h[: L - 2 * s], h[2 * s:]) - target) > tol:
            raise ValueError(f"{family}: lowpass fails shift-{s} orthonormality")
    if np.max(np.abs(g - _qmf(h))) > tol:
        raise ValueError(f"{family}: highpass is not the quadrature mirror of lowpass")


def make_wavelet(family, level):
    """Build a WaveletSpec, verifying the filter identities.

    Raises ValueError for an unknown family or a level < 1.
    """
    if level < 1:
        raise ValueError(f"level must be >= 1, got {level}")
    h = _scaling_filter(family)
    g = _qmf(h)
    _verify_filter_bank(family, h, g)
    return WaveletSpec(family, level, h, g)


def max_level(m, n):
    """Largest admissible decomposition level for an (m, n) target."""
    return int(np.floor(np.log2(min(m, n))))


def default_level(m, n, cap=8):
    """Default decomposition level: floor(log2(min(m, n))), capped."""
    return max(1, min(max_level(m, n), cap))


def check_level(m, n, spec):
    if min(m, n) < 2 or spec.level > max_level(m, n):
        raise ValueError(
            f"level {spec.level} infeasible for shape ({m}, {n}); "
            f"max is {max_level(m, n) if min(m, n) >= 2 else 0}"
        )


def _padded_length(m, filter_length, level):
    """Minimal input length >= m whose working length stays even at every level.

    With zero extension, one analysis step maps an even length N to
    (N + L - 2) / 2 per band.  Writing b = N - (L - 2), the band length is
    b/2 + (L - 2), so all working lengths are even exactly when b is
    divisible by 2^level.
    """
    c = filter_length - 2
    b = m - c
    k = max(-(-b // (1 << level)), 1 if c == 0 else 0)
    return c + (k << level)


def padded_shape(m, n, spec):
    """Shape the input is zero-padded to before analysis."""
    L = spec.filter_length
    return (_padded_length(m, L, spec.level), _padded_length(n, L, spec.level))


def _band_lengths(padded, filter_length, level):
    """Per-band working lengths [n_1, ..., n_level] starting from `padded`."""
    c = filter_length - 2
    out = []
    cur = padded
    for _ in range(level):
        cur = (cur + c) // 2
        out.append(cur)
    return out


def _detail_offsets(lengths):
    """Start offsets of the detail bands, coarsest first.

    lengths is [n_1, ..., n_J]; the layout along one axis is
    [approx_J | detail_J | detail_{J-1} | ... | detail_1].
    """
    J = len(lengths)
    offs = {}
    pos = lengths[J - 1]  # approx block
    for j in range(J, 0, -1):
        offs[j] = pos
        pos += lengths[j - 1]
    return offs, pos


def grid_shape(m, n, spec):
    """Shape of the coefficient grid for an (m, n) target.

    Equals padded_shape for db1; longer filters are expansive, so the grid
    grows by (L - 2) per band and axis.
    """
    pm, pn = padded_shape(m, n, spec)
    L = spec.filter_length
    _, tm = _detail_offsets(_band_lengths(pm, L, spec.level))
    _, tn = _detail_offsets(_band_lengths(pn, L, spec.level))
    return (tm, tn)


class CoeffGrid:
    """Multi-level wavelet coefficients packed into one flat matrix.

    Subbands are rectangles: the level-J approximation sits top-left and
    detail bands follow coarsest-to-finest along each axis.  For filters
    longer than 2 taps the transform is expansive and the LH/HL rectangles
    carry short all-zero tails; uniform position sampling may hit those
    slots, which then act as dead parameters.
    """

    def __init__(self, data, spec, target_shape):
        self.data = np.asarray(data, dtype=float)
        self.spec = spec
        self.target_shape = tuple(target_shape)
        expected = grid_shape(*target_shape, spec)
        if self.data.shape != expected:
            raise ValueError(
                f"grid data shape {self.data.shape} does not match "
                f"expected {expected} for target {target_shape}"
            )

    @property
    def shape(self):
        return self.data.shape

    def _geometry(self):
        m, n = self.target_shape
        L = self.spec.filter_length
        pm, pn = padded_shape(m, n, self.spec)
        rows = _band_lengths(pm, L, self.spec.level)
        cols = _band_lengths(pn, L, self.spec.level)
        row_offs, _ = _detail_offsets(rows)
        col_offs, _ = _detail_offsets(cols)
        return rows, cols, row_offs, col_offs

    def subbands(self):
        """Mapping of subband name -> (row_start, col_start, rows, cols).

        Names are 'LL<J>' plus 'LH<j>', 'HL<j>', 'HH<j>' per level j; LH
        holds detail along the column axis, HL along the row axis.  The
        rectangles tile the grid exactly with no overlap; for expansive
        filters the LH/HL rectangles include their dead tails.
        """
        rows, cols, row_offs, col_offs = self._geometry()
        J = self.spec.level
        out = {f"LL{J}": (0, 0, rows[J - 1], cols[J - 1])}
        for j in range(J, 0, -1):
            mj, nj = rows[j - 1], cols[j - 1]
            out[f"LH{j}"] = (0, col_offs[j], row_offs[j], nj)
            out[f"HL{j}"] = (row_offs[j], 0, mj, col_offs[j])
            out[f"HH{j}"] = (row_offs[j], col_offs[j], mj, nj)
        return out

    def band(self, name):
        r, c, h, w = self.subbands()[name]
        return self.data[r:r + h, c:c + w]


def _analyze_axis1(X, h, g):
    """One analysis step along axis 1: rows -> [lowpass | highpass] halves."""
    m, N = X.shape
    L = h.size
    nc = (N + L - 2) // 2
    if L == 2:
        lo = h[0] * X[:, 0::2] + h[1] * X[:, 1::2]
        hi = g[0] * X[:, 0::2] + g[1] * X[:, 1::2]
        return lo, hi
    Xp = np.zeros((m, N + 2 * (L - 2)))
    Xp[:, L - 2:L - 2 + N] = X
    lo = np.zeros((m, nc))
    hi = np.zeros((m, nc))
    for i in range(L):
        sl = Xp[:, i:i + 2 * nc:2]
        lo += h[i] * sl
        hi += g[i] * sl
    return lo, hi


def _synthesize_axis1(lo, hi, N, h, g):
    """Adjoint of _analyze_axis1: coefficients back to length-N signals."""
    m, nc = lo.shape
    L = h.size
    if L == 2:
        X = np.empty((m, N))
        X[:, 0::2] = h[0] * lo + g[0] * hi
        X[:, 1::2] = h[1] * lo + g[1] * hi
        return X
    Xp = np.zeros((m, N + 2 * (L - 2)))
    for i in range(L):
        Xp[:, i:i + 2 * nc:2] += h[i] * lo + g[i] * hi
    return Xp[:, L - 2:L - 2 + N]


def dwt2(matrix, spec):
    """Multi-level separable analysis (rows then columns, recursing on LL).

    Zero-extension boundaries make this an exact isometry of the zero-padded
    input, so the Frobenius norm of the grid equals that of the input.
    """
    X = np.asarray(matrix, dtype=float)
    m, n = X.shape
    check_level(m, n, spec)
    h, g = spec.lowpass_dec, spec.highpass_dec
    pm, pn = padded_shape(m, n, spec)
    work = np.zeros((pm, pn))
    work[:m, :n] = X

    rows = _band_lengths(pm, spec.filter_length, spec.level)
    cols = _band_lengths(pn, spec.filter_length, spec.level)
    row_offs, tm = _detail_offsets(rows)
    col_offs, tn = _detail_offsets(cols)
    data = np.zeros((tm, tn))

    ll = work
    for j in range(1, spec.level + 1):
        lo, hi = _analyze_axis1(ll, h, g)
        ll_, hl = _analyze_axis1(lo.T, h, g)
        lh, hh = _analyze_axis1(hi.T, h, g)
        mj, nj = rows[j - 1], cols[j - 1]
        ro, co = row_offs[j], col_offs[j]
        data[:mj, co:co + nj] = lh.T
        data[ro:ro + mj, :nj] = hl.T
        data[ro:ro + mj, co:co + nj] = hh.T
        ll = ll_.T
    data[:rows[-1], :cols[-1]] = ll
    return CoeffGrid(data, spec, (m, n))


def idwt2(grid, spec, target_shape=None):
    """Exact left-inverse of dwt2; synthesis output cropped to target_shape."""
    if spec != grid.spec:
        raise ValueError("grid was built with a different wavelet spec")
    if target_shape is None:
        target_shape = grid.target_shape
    if tuple(target_shape) != grid.target_shape:
        raise ValueError(
            f"grid targets shape {grid.target_shape}, requested {target_shape}"
        )
    m, n = grid.target_shape
    h, g = spec.lowpass_dec, spec.highpass_dec
    pm, pn = padded_shape(m, n, spec)
    rows = _band_lengths(pm, spec.filter_length, spec.level)
    cols = _band_lengths(pn, spec.filter_length, spec.level)
    row_offs, _ = _detail_offsets(rows)
    col_offs, _ = _detail_offsets(cols)

    ll = grid.data[:rows[-1], :cols[-1]]
    for j in range(spec.level, 0, -1):
        mj, nj = rows[j - 1], cols[j - 1]
        ro, co = row_offs[j], col_offs[j]
        lh = grid.data[:mj, co:co + nj]
        hl = grid.data[ro:ro + mj, :nj]
        hh = grid.data[ro:ro + mj, co:co + nj]
        prev_m = rows[j - 2] if j >= 2 else pm
        prev_n = cols[j - 2] if j >= 2 else pn
        lo = _synthesize_axis1(ll.T, hl.T, prev_m, h, g).T
        hi = _synthesize_axis1(lh.T, hh.T, prev_m, h, g).T
        ll = _synthesize_axis1(lo, hi, prev_n, h, g)
    return ll[:m, :n]


def dwt2_adjoint(matrix, spec, target_shape=None):
    """Adjoint of crop(idwt2(.)): <idwt2(C), G> == <C, dwt2_adjoint(G)>.

    Because synthesis is implemented as the exact transpose of analysis and
    cropping as the transpose of zero-padding, the adjoint coincides with
    dwt2 itself for every shape, dyadic or not.
    """
    G = np.asarray(matrix, dtype=float)
    if target_shape is not None and tuple(target_shape) != G.shape:
        raise ValueError(f"matrix shape {G.shape} != target {tuple(target_shape)}")
    return dwt2(G, spec)


def subband_energy(grid):
    """Sum of squares per subband rectangle; totals ||grid||_F^2 exactly."""
    out = {}
    for name, (r, c, h, w) in grid.subbands().items():
        out[name] = float(np.sum(grid.data[r:r + h, c:c + w] ** 2))
    return out
