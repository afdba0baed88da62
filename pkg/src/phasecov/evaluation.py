"""Model-error metrics: operator-norm correlation errors, long-range
correlation profiles, and structure functions.

Correlation matrices are compared on a fixed vertex window V0 with a shared
normalization diagonal taken from the population reference, so the errors
are invariant to a global rescaling of the fields.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, NumericalError
from .harmonics import phase_harmonic
from .wavelets import LOWPASS, channel_fields


@dataclass
class EvalWindow:
    """Vertex window for correlation-matrix comparisons.

    Band vertices carry harmonic exponents k_lo <= k < k_hi (half-open: the
    defaults k_lo=0, k_hi=4 give exponents 0..3) and square spatial offsets
    |n|_inf <= delta_n on each channel's lattice; the low-pass contributes
    its k = 1 vertices.  The defaults reproduce the reference window size
    |V0| = 8025 at J = 5, Q = 16.
    """

    k_lo: int = 0
    k_hi: int = 4
    delta_n: int = 2

    def offsets(self):
        r = self.delta_n
        return [(a, b) for a in range(-r, r + 1) for b in range(-r, r + 1)]

    def vertices(self, J, Q):
        out = []
        for j in range(1, J + 1):
            stride = 2 ** (j - 1)
            for ell in range(Q):
                for k in range(self.k_lo, self.k_hi):
                    for n in self.offsets():
                        out.append(((j, ell), k, (n[0] * stride, n[1] * stride)))
        stride = 2 ** (J - 1)
        for n in self.offsets():
            out.append((LOWPASS, 1, (n[0] * stride, n[1] * stride)))
        return out

    def count(self, J, Q):
        return len(self.vertices(J, Q))


def correlation_matrix(fields, bank, window, ref_diag=None):
    """Windowed correlation matrix averaged over one or more realizations.

    Returns (C, D): the Hermitian correlation matrix on the window's
    vertices and the diagonal D used to normalize (the average covariance
    diagonal unless ``ref_diag`` is supplied).  Estimation is the
    translation-orbit average per realization, then the ensemble mean.
    """
    fields = [fields] if isinstance(fields, np.ndarray) else list(fields)
    verts = window.vertices(bank.J, bank.Q)
    nv = len(verts)
    classes = sorted({(v[0], v[1]) for v in verts}, key=str)
    d = bank.d
    K = np.zeros((nv, nv), dtype=complex)
    means_acc = {c: 0.0 + 0j for c in classes}
    # per-realization centered harmonic fields, correlation via FFT lag maps
    lag_maps = {}
    for x in fields:
        chans = channel_fields(x, bank)
        h = {}
        for (ch, k) in classes:
            arr = phase_harmonic(chans[ch], k)
            m = arr.mean()
            means_acc[(ch, k)] += m / len(fields)
            h[(ch, k)] = np.fft.fft2(arr - m)
        for ia, ca in enumerate(classes):
            for ib in range(ia, len(classes)):
                cb = classes[ib]
                lm = np.fft.fft2(h[ca] * np.conj(h[cb])) / (d * d)
                key = (ca, cb)
                lag_maps[key] = lag_maps.get(key, 0) + lm / len(fields)
    n = bank.side
    for i, (ch, k, u) in enumerate(verts):
        for jv in range(i, nv):
            ch2, k2, u2 = verts[jv]
            ca, cb = (ch, k), (ch2, k2)
            du = (u2[0] - u[0], u2[1] - u[1])
            if (ca, cb) in lag_maps:
                val = lag_maps[(ca, cb)][du[0] % n, du[1] % n]
            else:
                val = np.conj(lag_maps[(cb, ca)][(-du[0]) % n, (-du[1]) % n])
            K[i, jv] = val
            K[jv, i] = np.conj(val)
    if ref_diag is None:
        D = np.real(np.diag(K)).copy()
    else:
        D = np.asarray(ref_diag, dtype=float)
    if np.any(D <= 0):
        raise ConfigError("degenerate diagonal in the evaluation window")
    scale = 1.0 / np.sqrt(D)
    return scale[:, None] * K * scale[None, :], D


def operator_norm(matrix, tol=1e-6, max_iter=10000, seed=0):
    """Largest |eigenvalue| of a Hermitian matrix by power iteration."""
    m = np.asarray(matrix)
    m = 0.5 * (m + np.conj(m.T))
    rng = np.random.Generator(np.random.Philox(key=seed))
    v = rng.standard_normal(m.shape[0]) + 1j * rng.standard_normal(m.shape[0])
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iter):
        w = m @ v
        norm = np.linalg.norm(w)
        if norm == 0:
            return 0.0
        new = abs(np.vdot(v, w))
        v = w / norm
        if abs(new - lam) <= tol * abs(new):
            return float(new)
        lam = new
    raise NumericalError("operator-norm power iteration did not converge")


def correlation_error(C_ref, C_test, tol=1e-6):
    """Relative operator-norm error ||C_ref - C_test|| / ||C_ref||."""
    C_ref = np.asarray(C_ref)
    C_test = np.asarray(C_test)
    if C_ref.shape != C_test.shape:
        raise ConfigError("correlation matrices must share the window")
    denom = operator_norm(C_ref, tol=tol)
    if denom == 0:
        raise ConfigError("reference correlation matrix has zero norm")
    return operator_norm(C_ref - C_test, tol=tol) / denom


def long_range_profile(fields, bank, k, j, a_max, ref_diag=None):
    """Max normalized correlation |C(v, v')| at distances |u-u'| = 2^j a.

    Same-channel, same-k correlations; the maximum runs over the Q angles
    and over lattice lags in the width-one annulus around 2^j a.  Entry
    a = 0 is the normalized diagonal, exactly 1.
    """
    fields = [fields] if isinstance(fields, np.ndarray) else list(fields)
    n = bank.side
    if 2 ** j * a_max >= n // 2:
        raise ConfigError("profile distance beyond the grid half-period")
    d = bank.d
    maps = []
    for ell in range(bank.Q):
        acc = 0.0
        for x in fields:
            y = channel_fields(x, bank, channels=[(j, ell)])[(j, ell)]
            h = phase_harmonic(y, k)
            h = h - h.mean()
            acc = acc + np.fft.fft2(np.fft.fft2(h) * np.conj(np.fft.fft2(h))) / (d * d)
        acc /= len(fields)
        maps.append(np.real_if_close(acc))
    m = np.fft.fftfreq(n) * n
    m1, m2 = np.meshgrid(m, m, indexing="ij")
    dist = np.hypot(m1, m2)
    out = np.empty(a_max + 1)
    for a in range(a_max + 1):
        if a == 0:
            out[0] = 1.0
            continue
        ring = np.abs(dist - (2 ** j) * a) < 0.5
        if not ring.any():
            out[a] = np.nan
            continue
        best = 0.0
        for ell, lm in enumerate(maps):
            diag = float(np.real(lm[0, 0]))
            vals = np.abs(lm[ring]) / diag
            best = max(best, float(vals.max()))
        out[a] = best
    return out


def increment_offsets(j, side):
    """Integer lags in the width-one annulus around 2^(j-1)."""
    target = 2 ** (j - 1)
    r = int(np.ceil(target + 0.5))
    out = []
    for a in range(-r, r + 1):
        for b in range(-r, r + 1):
            if (a, b) == (0, 0):
                continue
            if abs(np.hypot(a, b) - target) < 0.5:
                out.append((a, b))
    return out


def structure_function(x, j, q):
    """S(j, q): max over lags |tau| ~ 2^(j-1) of mean |x(u) - x(u-tau)|^q."""
    x = np.asarray(x, dtype=float)
    if q < 1:
        raise ConfigError("structure-function order must be >= 1")
    if 2 ** (j - 1) >= x.shape[0] // 2:
        raise ConfigError("increment scale beyond the grid half-period")
    best = 0.0
    for tau in increment_offsets(j, x.shape[0]):
        inc = x - np.roll(x, shift=tau, axis=(0, 1))
        best = max(best, float(np.mean(np.abs(inc) ** q)))
    return best


@dataclass
class ErrorReport:
    """Relative errors of one metric over paired realizations."""

    metric: str
    j: int
    q: float
    values: list = field(default_factory=list)

    @property
    def mean(self):
        return float(np.mean(self.values))

    @property
    def std(self):
        return float(np.std(self.values))


def structure_error(reference_fields, model_fields, j, q):
    """Paired relative structure-function errors |S_ref - S_model| / |S_ref|."""
    refs = list(reference_fields)
    models = list(model_fields)
    if not refs or not models:
        raise ConfigError("both realization sets must be non-empty")
    npairs = min(len(refs), len(models))
    report = ErrorReport(metric="structure", j=j, q=q)
    for i in range(npairs):
        s_ref = structure_function(refs[i], j, q)
        if s_ref == 0:
            raise ConfigError("reference structure function vanishes")
        s_mod = structure_function(models[i], j, q)
        report.values.append(abs(s_ref - s_mod) / abs(s_ref))
    return report
