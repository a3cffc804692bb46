"""Modal reduction onto biorthonormal eigenvectors with bilinear terms.

Reduced dynamics, with ``dw = Phi z`` and ``z = Psi^H dw``::

    z_k' = lambda_k z_k + sum_ij D_kij z_i z_j
           + psi_k^H (B_c delta + B_c1 delta_dot + B_c2 delta_ddot + B_g w_g)

Conjugate pairs are always retained together.  A mode count ``m`` counts
a conjugate pair once, so the complex/real state dimension is
``n_real + 2 n_pairs``.
"""

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, DimensionError, NonFiniteError

CRITERIA = ("frequency_band", "gust_participation", "manual")
INPUT_NAMES = ("delta", "delta_dot", "delta_ddot", "gust")


@dataclass(frozen=True)
class ModeSelection:
    retained_indices: tuple
    criterion: str = "manual"
    band_limits: tuple = None
    scores: dict = field(default_factory=dict)

    def __post_init__(self):
        idx = tuple(int(i) for i in self.retained_indices)
        object.__setattr__(self, "retained_indices", idx)
        if not idx:
            raise ConfigError("mode selection is empty")
        if len(set(idx)) != len(idx):
            raise ConfigError("mode selection contains duplicate indices")
        if self.criterion not in CRITERIA:
            raise ConfigError(f"criterion must be one of {CRITERIA}")

    @property
    def order(self):
        return len(self.retained_indices)


@dataclass(frozen=True)
class RealRealization:
    """Real block-diagonal form; inputs ordered as ``INPUT_NAMES``."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    V: np.ndarray = None
    W: np.ndarray = None
    output_names: tuple = ()

    def column(self, name):
        return self.B[:, [INPUT_NAMES.index(name)]]

    def output_row(self, name):
        return self.C[[list(self.output_names).index(name)], :]


@dataclass(frozen=True)
class ReducedOrderModel:
    eigenvalues: np.ndarray
    b_c: np.ndarray
    b_c1: np.ndarray
    b_c2: np.ndarray
    b_g: np.ndarray
    Phi_out: np.ndarray
    D: np.ndarray
    partner: np.ndarray
    output_names: tuple = ()
    Phi: np.ndarray = None
    Psi: np.ndarray = None
    retained_indices: tuple = ()

    @property
    def m(self):
        return len(self.eigenvalues)

    @property
    def Lambda(self):
        return np.diag(self.eigenvalues)

    @property
    def n_modes(self):
        """Mode count with conjugate pairs counted once."""
        return int(sum(1 for k, p in enumerate(self.partner) if p >= k))

    @property
    def B(self):
        return np.hstack([self.b_c, self.b_c1, self.b_c2, self.b_g])

    def frequency_response(self, omega, input_name="gust", output="tip_displacement"):
        b = self.B[:, INPUT_NAMES.index(input_name)]
        c = self.Phi_out[list(self.output_names).index(output)]
        omega = np.atleast_1d(omega)
        return np.array([np.sum(c * b / (1j * w - self.eigenvalues)) for w in omega])

    def real_realization(self):
        """Equivalent real model: 1x1 blocks for real modes, 2x2 for conjugate pairs.

        A pair ``(lambda, conj(lambda))`` with coordinate ``z`` maps to
        ``xi = (Re z, -Im z)`` and the block ``[[Re l, Im l], [-Im l, Re l]]``.
        """
        reps = [k for k, p in enumerate(self.partner) if p >= k]
        n_r = sum(1 if self.partner[k] == k else 2 for k in reps)
        A = np.zeros((n_r, n_r))
        B = np.zeros((n_r, 4))
        C = np.zeros((self.Phi_out.shape[0], n_r))
        Bc = self.B
        has_basis = self.Phi is not None
        if has_basis:
            V = np.zeros((self.Phi.shape[0], n_r))
            W = np.zeros((self.Psi.shape[0], n_r))
        r = 0
        for k in reps:
            lam = self.eigenvalues[k]
            if self.partner[k] == k:
                A[r, r] = lam.real
                B[r] = Bc[k].real
                C[:, r] = self.Phi_out[:, k].real
                if has_basis:
                    V[:, r] = self.Phi[:, k].real
                    W[:, r] = self.Psi[:, k].real
                r += 1
            else:
                s, w = lam.real, lam.imag
                A[r : r + 2, r : r + 2] = [[s, w], [-w, s]]
                B[r] = Bc[k].real
                B[r + 1] = -Bc[k].imag
                C[:, r] = 2.0 * self.Phi_out[:, k].real
                C[:, r + 1] = 2.0 * self.Phi_out[:, k].imag
                if has_basis:
                    V[:, r] = 2.0 * self.Phi[:, k].real
                    V[:, r + 1] = 2.0 * self.Phi[:, k].imag
                    W[:, r] = self.Psi[:, k].real
                    W[:, r + 1] = self.Psi[:, k].imag
                r += 2
        return RealRealization(
            A=A,
            B=B,
            C=C,
            V=V if has_basis else None,
            W=W if has_basis else None,
            output_names=self.output_names,
        )


def _representatives(decomp, candidates=None):
    idx = range(decomp.m) if candidates is None else candidates
    return [k for k in idx if decomp.partner[k] >= k]


def _closure(decomp, indices):
    out = set(indices)
    out |= {int(decomp.partner[k]) for k in indices}
    return tuple(sorted(out))


def gust_lag_modes(decomp, linsys):
    """Real modes whose right vectors touch the states the gust enters directly."""
    rows = np.flatnonzero(np.abs(linsys.B_g[:, 0]) > 0)
    out = []
    for k in range(decomp.m):
        if decomp.partner[k] != k:
            continue
        phi = decomp.Phi[:, k]
        if np.linalg.norm(phi[rows]) > 1e-8 * np.linalg.norm(phi):
            out.append(k)
    return out


def participation_scores(decomp, linsys, output="tip_displacement", marginal_tol=1e-6):
    """``|psi_k^H B_g| |C phi_k| / |Re lambda_k|`` for every mode.

    Modes that are not asymptotically stable (``Re lambda >= -marginal_tol *
    max |lambda|``, e.g. the plunge-position and steady-climb modes of a
    free aircraft) score zero: the ratio is undefined for them and a
    design plant cannot contain them.
    """
    c = linsys.output_row(output)[0]
    bg = linsys.B_g[:, 0]
    gust = np.abs(decomp.Psi.conj().T @ bg)
    obs = np.abs(c @ decomp.Phi)
    lam = decomp.eigenvalues
    cut = marginal_tol * max(1.0, np.abs(lam).max())
    stable = lam.real < -cut
    return np.where(stable, gust * obs / np.where(stable, -lam.real, 1.0), 0.0)


def select_modes(decomp, linsys, criterion="gust_participation", m=8, band=None, indices=None,
                 output="tip_displacement"):
    """Choose the retained modal set.

    gust_participation
        rank conjugate-pair representatives by :func:`participation_scores`
        and keep the top ``m`` (pairs count once).
    frequency_band
        keep complex modes with ``|Im lambda|`` inside ``band`` plus every
        real gust-lag mode.
    manual
        keep ``indices``.

    Ties are broken by ascending ``|lambda|`` then ascending index.  The
    result is always closed under conjugation.
    """
    if criterion not in CRITERIA:
        raise ConfigError(f"criterion must be one of {CRITERIA}")
    scores = participation_scores(decomp, linsys, output)
    lam = decomp.eigenvalues
    if criterion == "gust_participation":
        if m is None or int(m) < 1:
            raise ConfigError("m: at least one mode must be requested")
        reps = _representatives(decomp)
        ranked = sorted(reps, key=lambda k: (-scores[k], abs(lam[k]), k))
        chosen = ranked[: int(m)]
    elif criterion == "frequency_band":
        if band is None:
            raise ConfigError("frequency_band criterion needs band=(lo, hi) in rad/s")
        lo, hi = band
        chosen = [k for k in _representatives(decomp) if decomp.partner[k] != k and lo <= abs(lam[k].imag) <= hi]
        chosen += gust_lag_modes(decomp, linsys)
    else:
        if not indices:
            raise ConfigError("manual criterion needs a non-empty index list")
        chosen = [int(i) for i in indices]
        if any(i < 0 or i >= decomp.m for i in chosen):
            raise ConfigError("manual indices out of range")
    if not chosen:
        raise ConfigError("mode selection is empty")
    retained = _closure(decomp, chosen)
    return ModeSelection(
        retained_indices=retained,
        criterion=criterion,
        band_limits=tuple(band) if band is not None else None,
        scores={int(k): float(scores[k]) for k in retained},
    )


def project(linsys, decomp, sel):
    """Linear part of the reduced model (``D`` zeroed)."""
    idx = np.array(sel.retained_indices)
    if idx.max() >= decomp.m:
        raise DimensionError("retained_indices", f"< {decomp.m}", int(idx.max()))
    Phi = decomp.Phi[:, idx]
    Psi = decomp.Psi[:, idx]
    PsiH = Psi.conj().T
    local = {int(g): i for i, g in enumerate(idx)}
    partner = np.array([local[int(decomp.partner[g])] for g in idx])
    m = idx.size
    return ReducedOrderModel(
        eigenvalues=decomp.eigenvalues[idx].copy(),
        b_c=PsiH @ linsys.B_c,
        b_c1=PsiH @ linsys.B_c1,
        b_c2=PsiH @ linsys.B_c2,
        b_g=PsiH @ linsys.B_g,
        Phi_out=linsys.C @ Phi,
        D=np.zeros((m, m, m), dtype=complex),
        partner=partner,
        output_names=tuple(linsys.output_names),
        Phi=Phi,
        Psi=Psi,
        retained_indices=tuple(int(i) for i in idx),
    )


def _hessian_action(R, w0, u, v, h):
    """Second directional derivative ``H(u, v)`` by the four-point polarization stencil."""
    s = u + v
    d = u - v
    return (R(w0 + h * s) + R(w0 - h * s) - R(w0 + h * d) - R(w0 - h * d)) / (4.0 * h * h)


def identify_bilinear(model, trim, decomp, sel, h=1e-4):
    """Bilinear tensor ``D_kij = 1/2 psi_k^H H(phi_i, phi_j)``, symmetric in ``(i, j)``.

    The Hessian action is evaluated on real and imaginary parts separately
    so the residual only ever sees real states; the step is ``h`` times
    ``max(1, ||w0||)``.
    """
    w0 = np.asarray(trim.w0, dtype=float)
    params = trim.parameters or model.parameters
    zero = np.zeros(3)

    def R(w):
        return np.asarray(model.residual(w, zero, 0.0, params), dtype=float)

    step = h * max(1.0, np.linalg.norm(w0))
    idx = list(sel.retained_indices)
    Phi = decomp.Phi[:, idx]
    PsiH = decomp.Psi[:, idx].conj().T
    m = len(idx)
    re, im = Phi.real, Phi.imag
    has_im = np.abs(im).max(axis=0) > 0
    D = np.zeros((m, m, m), dtype=complex)
    cache = {}

    def H(a, ka, b, kb):
        key = (min((ka, a), (kb, b)), max((ka, a), (kb, b)))
        if key not in cache:
            cache[key] = _hessian_action(R, w0, (re if ka == 0 else im)[:, a], (re if kb == 0 else im)[:, b], step)
        return cache[key]

    for i in range(m):
        for j in range(i, m):
            Hij = H(i, 0, j, 0).astype(complex)
            if has_im[i] and has_im[j]:
                Hij -= H(i, 1, j, 1)
            if has_im[j]:
                Hij += 1j * H(i, 0, j, 1)
            if has_im[i]:
                Hij += 1j * H(i, 1, j, 0)
            if not np.all(np.isfinite(Hij)):
                raise NonFiniteError(f"non-finite Hessian action for pair (i, j) = ({i}, {j})")
            col = 0.5 * (PsiH @ Hij)
            if not np.all(np.isfinite(col)):
                k = int(np.flatnonzero(~np.isfinite(col))[0])
                raise NonFiniteError(f"non-finite bilinear coefficient at (k, i, j) = ({k}, {i}, {j})")
            D[:, i, j] = col
            D[:, j, i] = col
    return D


def with_bilinear(rom, D):
    D = np.asarray(D, dtype=complex)
    if D.shape != (rom.m,) * 3:
        raise DimensionError("D", (rom.m,) * 3, D.shape)
    return replace(rom, D=D)


def rom_rhs(rom, z, u_c=(0.0, 0.0, 0.0), u_d=0.0):
    """Reduced right-hand side including the bilinear terms."""
    z = np.asarray(z, dtype=complex)
    quad = np.einsum("kij,i,j->k", rom.D, z, z)
    forcing = rom.b_c[:, 0] * u_c[0] + rom.b_c1[:, 0] * u_c[1] + rom.b_c2[:, 0] * u_c[2] + rom.b_g[:, 0] * u_d
    return rom.eigenvalues * z + quad + forcing


# --------------------------------------------------------------------------
# persistence

ROM_SCHEMA = "gla-rom/1"
D_FLOOR = 1e-12


def _cplx(a):
    a = np.asarray(a)
    return {"re": a.real.tolist(), "im": a.imag.tolist()}


def _uncplx(d):
    return np.asarray(d["re"], dtype=float) + 1j * np.asarray(d["im"], dtype=float)


def rom_to_dict(rom, metadata=None):
    m = rom.m
    k, i, j = np.nonzero(np.abs(rom.D) > D_FLOOR)
    return {
        "schema": ROM_SCHEMA,
        "order": m,
        "n_modes": rom.n_modes,
        "eigenvalues": _cplx(rom.eigenvalues),
        "partner": [int(p) for p in rom.partner],
        "retained_indices": list(rom.retained_indices),
        "output_names": list(rom.output_names),
        "b_c": _cplx(rom.b_c[:, 0]),
        "b_c1": _cplx(rom.b_c1[:, 0]),
        "b_c2": _cplx(rom.b_c2[:, 0]),
        "b_g": _cplx(rom.b_g[:, 0]),
        "Phi_out": _cplx(rom.Phi_out),
        "D": [[int(a), int(b), int(c), float(rom.D[a, b, c].real), float(rom.D[a, b, c].imag)] for a, b, c in zip(k, i, j)],
        "metadata": metadata or {},
    }


def rom_from_dict(d):
    if d.get("schema") != ROM_SCHEMA:
        raise ConfigError(f"unsupported ROM schema {d.get('schema')!r}")
    m = int(d["order"])
    D = np.zeros((m, m, m), dtype=complex)
    for a, b, c, re, im in d["D"]:
        D[a, b, c] = re + 1j * im
    col = lambda key: _uncplx(d[key])[:, None]  # noqa: E731
    return ReducedOrderModel(
        eigenvalues=_uncplx(d["eigenvalues"]),
        b_c=col("b_c"),
        b_c1=col("b_c1"),
        b_c2=col("b_c2"),
        b_g=col("b_g"),
        Phi_out=_uncplx(d["Phi_out"]).reshape(len(d["output_names"]), m),
        D=D,
        partner=np.array(d["partner"], dtype=int),
        output_names=tuple(d["output_names"]),
        retained_indices=tuple(d.get("retained_indices", ())),
    )


def save_rom(rom, path, metadata=None):
    with open(path, "w") as fh:
        json.dump(rom_to_dict(rom, metadata), fh, indent=1)


def load_rom(path):
    with open(path) as fh:
        return rom_from_dict(json.load(fh))
