"""Linear symplectic algebra on R^{2n} with Darboux coordinates (x, y).

The symplectic form is sigma((x1, y1), (x2, y2)) = <x1, y2> - <x2, y1>, i.e.
``sigma(v, w) = v @ J @ w`` with ``J = [[0, I], [-I, 0]]``.  In phase-space
language x is the impulse part p and y the position part q, so the form is
sum_i dp_i ^ dq_i.

Subspaces are always carried as explicit frames (2n x k column matrices);
graph coordinates are derived from frames when needed.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import InputError, NormalizationError, TransversalityError

ISOTROPY_TOL = 1e-10
TRANSVERSALITY_TOL = 1e-12
RANK_TOL = 1e-10


def standard_form(n):
    """Return the 2n x 2n matrix [[0, I], [-I, 0]]."""
    eye = np.eye(n)
    zero = np.zeros((n, n))
    return np.block([[zero, eye], [-eye, zero]])


@dataclass(frozen=True)
class SymplecticSpace:
    n: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise InputError(f"half-dimension must be a positive integer, got {self.n!r}")

    @property
    def dim(self):
        return 2 * self.n

    @property
    def form_matrix(self):
        return standard_form(self.n)


def _as_columns(matrix, rows, what):
    arr = np.asarray(matrix, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[0] != rows:
        raise InputError(f"{what} must have {rows} rows, got shape {arr.shape}")
    return arr


def orthonormalize(columns):
    """Orthonormal frame with the same span (thin QR, signs fixed by R's diagonal)."""
    q, r = np.linalg.qr(columns)
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return q * signs


@dataclass(frozen=True)
class LagrangianFrame:
    """A 2n x n frame whose column span is (meant to be) Lagrangian.

    The columns are kept exactly as given: matrices of forms and operators
    expressed "in the frame basis" refer to these columns.
    """

    space: SymplecticSpace
    columns: np.ndarray = field(repr=False)

    def __post_init__(self):
        cols = _as_columns(self.columns, self.space.dim, "frame")
        if cols.shape[1] != self.space.n:
            raise InputError(f"Lagrangian frame needs {self.space.n} columns, got {cols.shape[1]}")
        object.__setattr__(self, "columns", cols)

    @classmethod
    def from_columns(cls, columns):
        cols = np.asarray(columns, dtype=float)
        if cols.ndim != 2 or cols.shape[0] % 2:
            raise InputError(f"frame must be a 2n x n array, got shape {cols.shape}")
        return cls(SymplecticSpace(cols.shape[0] // 2), cols)

    @classmethod
    def vertical(cls, n):
        """The frame [I; 0]: the fibre directions (impulse part) of T*R^n."""
        return cls(SymplecticSpace(n), np.vstack([np.eye(n), np.zeros((n, n))]))

    @classmethod
    def horizontal(cls, n):
        return cls(SymplecticSpace(n), np.vstack([np.zeros((n, n)), np.eye(n)]))

    @classmethod
    def graph(cls, S):
        """Frame of {(x, S x)}; Lagrangian iff S is symmetric."""
        S = np.atleast_2d(np.asarray(S, dtype=float))
        n = S.shape[0]
        return cls(SymplecticSpace(n), np.vstack([np.eye(n), S]))

    @property
    def n(self):
        return self.space.n

    def orthonormalized(self):
        return LagrangianFrame(self.space, orthonormalize(self.columns))


@dataclass(frozen=True)
class IsotropicTuple:
    space: SymplecticSpace
    vectors: np.ndarray = field(repr=False)

    def __post_init__(self):
        vecs = _as_columns(self.vectors, self.space.dim, "isotropic tuple")
        if vecs.shape[1] > self.space.n:
            raise InputError(f"at most n={self.space.n} isotropic vectors allowed, got {vecs.shape[1]}")
        object.__setattr__(self, "vectors", vecs)

    @classmethod
    def from_vectors(cls, vectors, n=None):
        vecs = np.asarray(vectors, dtype=float)
        if vecs.ndim == 1:
            vecs = vecs[:, None]
        if n is None:
            n = vecs.shape[0] // 2
        return cls(SymplecticSpace(n), vecs)

    @classmethod
    def empty(cls, n):
        return cls(SymplecticSpace(n), np.zeros((2 * n, 0)))

    @property
    def s(self):
        return self.vectors.shape[1]

    def defects(self):
        """(max |sigma(l_i, l_j)|, smallest relative singular value)."""
        if self.s == 0:
            return 0.0, 1.0
        V = self.vectors
        gram = V.T @ self.space.form_matrix @ V
        scale = max(np.max(np.linalg.norm(V, axis=0)) ** 2, 1e-300)
        sv = np.linalg.svd(V, compute_uv=False)
        return float(np.max(np.abs(gram)) / scale), float(sv[-1] / sv[0]) if sv[0] > 0 else 0.0

    def validate(self):
        iso, indep = self.defects()
        if iso > ISOTROPY_TOL:
            raise InputError(f"tuple is not isotropic (defect {iso:.3e})")
        if indep < RANK_TOL:
            raise InputError("tuple vectors are linearly dependent")
        return self


def symplectic_form(space, v, w):
    """sigma(v, w) = v^T J w for 2n-vectors (or column blocks)."""
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    if v.shape[0] != space.dim or w.shape[0] != space.dim:
        raise InputError(f"vectors must have length {space.dim}, got {v.shape[0]} and {w.shape[0]}")
    return v.T @ space.form_matrix @ w


@dataclass(frozen=True)
class LagrangianCheck:
    ok: bool
    defect: float
    rank: int

    def __bool__(self):
        return self.ok


def check_lagrangian(frame, tol=ISOTROPY_TOL):
    """Rank-n and isotropy check; the defect is measured on an orthonormalized frame."""
    cols = frame.columns
    sv = np.linalg.svd(cols, compute_uv=False)
    rank = int(np.sum(sv > RANK_TOL * sv[0])) if sv[0] > 0 else 0
    if rank < frame.n:
        return LagrangianCheck(False, float("inf"), rank)
    Q = orthonormalize(cols)
    defect = float(np.max(np.abs(Q.T @ frame.space.form_matrix @ Q)))
    return LagrangianCheck(defect <= tol, defect, rank)


def transversality_ratio(frame_a, frame_b):
    """sigma_min / sigma_max of Fa^T J Fb for orthonormalized frames (0 = not transversal)."""
    J = frame_a.space.form_matrix
    K = orthonormalize(frame_a.columns).T @ J @ orthonormalize(frame_b.columns)
    sv = np.linalg.svd(K, compute_uv=False)
    return float(sv[-1] / sv[0]) if sv[0] > 0 else 0.0


def intersection_dimension(frame_a, frame_b, tol=1e-8):
    """dim(A cap B) for Lagrangian A, B = nullity of the pairing Fa^T J Fb."""
    J = frame_a.space.form_matrix
    K = orthonormalize(frame_a.columns).T @ J @ orthonormalize(frame_b.columns)
    sv = np.linalg.svd(K, compute_uv=False)
    return int(np.sum(sv <= tol))


def canonical_basis(vectors, dim=None, tol=RANK_TOL):
    """Deterministic orthonormal basis of span(vectors).

    The basis is read off a pivoted QR of the orthogonal projector, so a
    subspace spanned by coordinate axes gets (up to sign) those axes back.
    """
    V = np.asarray(vectors, dtype=float)
    if V.size == 0:
        return np.zeros((V.shape[0], 0))
    U, sv, _ = np.linalg.svd(V, full_matrices=False)
    r = int(np.sum(sv > tol * sv[0])) if sv[0] > 0 else 0
    if dim is not None:
        r = dim
    if r == 0:
        return np.zeros((V.shape[0], 0))
    U = U[:, :r]
    P = U @ U.T
    q, rr, _ = scipy.linalg.qr(P, pivoting=True)
    basis = q[:, :r] * np.where(np.diag(rr)[:r] < 0, -1.0, 1.0)
    return basis


def null_space_basis(M, dim=None, tol=RANK_TOL):
    """Canonical orthonormal basis of ker M."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    ncols = M.shape[1]
    if M.shape[0] == 0 or not np.any(M):
        return np.eye(ncols) if dim is None else canonical_basis(np.eye(ncols), dim=dim)
    _, sv, vt = np.linalg.svd(M)
    if dim is None:
        rank = int(np.sum(sv > tol * sv[0]))
        dim = ncols - rank
    if dim <= 0:
        return np.zeros((ncols, 0))
    return canonical_basis(vt[ncols - dim:].T, dim=dim)


def skew_orthogonal_complement(space, vectors):
    """Basis (2n x (2n - rank)) of {v : sigma(v, l) = 0 for all columns l}."""
    L = _as_columns(vectors, space.dim, "vectors")
    if L.shape[1] == 0:
        return np.eye(space.dim)
    return null_space_basis((space.form_matrix @ L).T)


def symplectic_gram_schmidt(space, vectors):
    """Darboux basis (E | F) of the symplectic subspace spanned by ``vectors``.

    Returns a 2n x 2m matrix [e_1..e_m, f_1..f_m] with sigma(e_i, f_j) = delta_ij
    and sigma(e, e) = sigma(f, f) = 0.
    """
    J = space.form_matrix
    remaining = [v for v in np.asarray(vectors, dtype=float).T]
    es, fs = [], []
    while remaining:
        e = remaining.pop(0)
        # partner with the largest pairing keeps the process well conditioned
        pairings = [abs(e @ J @ w) for w in remaining]
        if not pairings or max(pairings) < 1e-12 * max(np.linalg.norm(e), 1e-300):
            raise NormalizationError("subspace is not symplectic", module="symplectic_core")
        k = int(np.argmax(pairings))
        f = remaining.pop(k)
        f = f / (e @ J @ f)
        es.append(e)
        fs.append(f)
        new = []
        for w in remaining:
            # remove the (e, f) components: w - sigma(w, f) e + sigma(w, e) f
            w = w - (w @ J @ f) * e + (w @ J @ e) * f
            new.append(w)
        remaining = new
    if not es:
        return np.zeros((space.dim, 0))
    return np.column_stack(es + fs)


def is_symplectic(T, tol=1e-10):
    n = T.shape[0] // 2
    J = standard_form(n)
    return float(np.max(np.abs(T.T @ J @ T - J))) <= tol


def symplectic_inverse(T):
    """Inverse of a symplectic matrix, -J T^T J."""
    J = standard_form(T.shape[0] // 2)
    return -J @ T.T @ J


@dataclass(frozen=True)
class QuotientResult:
    """Reduced Lagrangian frame in (span l)^angle / span l plus the maps realizing it.

    ``basis`` holds [e_1..e_m, f_1..f_m] (ambient vectors, m = n - s) forming a
    Darboux basis of a complement of span l inside (span l)^angle; ``project``
    sends an ambient vector of (span l)^angle to quotient Darboux coordinates,
    ``lift`` sends quotient coordinates back to that complement.
    """

    frame: LagrangianFrame
    basis: np.ndarray
    kernel: np.ndarray
    intersection_dim: int

    @property
    def quotient_space(self):
        return self.frame.space

    def project(self, v):
        m = self.basis.shape[1] // 2
        E, F = self.basis[:, :m], self.basis[:, m:]
        J = standard_form(self.basis.shape[0] // 2)
        v = np.asarray(v, dtype=float)
        x = (v.T @ J @ F).T          # sigma(v, f_i)
        y = (E.T @ J @ v)            # sigma(e_i, v)
        return np.concatenate([x, y], axis=0)

    def lift(self, coords):
        return self.basis @ np.asarray(coords, dtype=float)


def quotient_darboux_basis(space, ell):
    """Darboux basis of a complement of span(ell) inside (span ell)^angle."""
    L = ell.vectors
    comp = skew_orthogonal_complement(space, L)
    if L.shape[1]:
        # Euclidean complement of span(ell) within the skew complement
        proj = comp - canonical_basis(L) @ (canonical_basis(L).T @ comp)
        comp = canonical_basis(proj, dim=space.dim - 2 * L.shape[1])
    return symplectic_gram_schmidt(space, comp)


def skew_complement_quotient(frame, ell, basis=None):
    """Frame of (Lambda cap l^angle + span l) / span l in the quotient space.

    ``basis`` may fix the quotient Darboux basis (as returned by
    :func:`quotient_darboux_basis`) so that several subspaces share one chart.
    """
    space = frame.space
    if ell.space.n != space.n:
        raise InputError("frame and isotropic tuple live in different spaces")
    s = ell.s
    if basis is None:
        basis = quotient_darboux_basis(space, ell)
    F = orthonormalize(frame.columns)
    if s == 0:
        kernel = F
    else:
        pairing = F.T @ space.form_matrix @ ell.vectors     # sigma(F c, l_i)
        coeff = null_space_basis(pairing.T)
        kernel = F @ coeff
    inter = kernel.shape[1] - (space.n - s)
    proxy = QuotientResult(None, basis, kernel, inter)
    image = proxy.project(kernel)
    m = space.n - s
    red = canonical_basis(image, dim=m) if m > 0 else np.zeros((0, 0))
    qspace = SymplecticSpace(m) if m > 0 else None
    qframe = LagrangianFrame(qspace, red) if m > 0 else None
    return QuotientResult(qframe, basis, kernel, inter)


def dual_map_matrix(base, other):
    """Matrix K = other^T J base: K[i, j] = sigma(other_i, base_j)."""
    J = base.space.form_matrix
    return other.columns.T @ J @ base.columns


def _require_transversal(base, frame, name):
    K = dual_map_matrix(base, frame)
    sv = np.linalg.svd(K, compute_uv=False)
    scale = np.linalg.norm(frame.columns, 2) * np.linalg.norm(base.columns, 2)
    if sv[-1] < TRANSVERSALITY_TOL * max(sv[0], scale * 1e-300):
        raise TransversalityError(f"{name} is not transversal to the base subspace", module="symplectic_core")
    return K


def identification(base, frame, name="frame"):
    """Matrix of I_Gamma = (B_Lambda restricted to Gamma)^{-1}: Lambda* -> Gamma.

    Covectors on Lambda are given by their values on the base columns;
    the result C satisfies I_Gamma(l) = frame.columns @ C @ l.
    """
    K = _require_transversal(base, frame, name)
    return np.linalg.inv(K.T)


def affine_subtract(space, gamma, delta, base):
    """Quadratic form (Gamma - Delta)(l) = sigma(I_Gamma l, I_Delta l) on Lambda*.

    The matrix is expressed in the basis of Lambda* dual to ``base.columns``.
    """
    for fr in (gamma, delta, base):
        if fr.space.n != space.n:
            raise InputError("all frames must live in the given space")
    Cg = identification(base, gamma, "gamma")
    Cd = identification(base, delta, "delta")
    J = space.form_matrix
    M = Cg.T @ (gamma.columns.T @ J @ delta.columns) @ Cd
    return 0.5 * (M + M.T)


def adapted_darboux_basis(space, lambda_frame, ell, a_vectors):
    """Symplectic change of basis T bringing (Lambda, l, a) to normal form.

    In the new coordinates (columns of T = [E | F]):

    * E_1..E_{n-s} span Lambda cap l^angle,
    * F_{n-s+i} = l_i,
    * E_{n-s+1}..E_n span a_1..a_s,

    so Lambda itself becomes the horizontal-in-x subspace {(x, 0)}.
    """
    n, s = space.n, ell.s
    L = ell.vectors
    A_vec = _as_columns(a_vectors, space.dim, "a_vectors")
    J = space.form_matrix
    if A_vec.shape[1] != s:
        raise InputError("need exactly one a-vector per isotropic vector")
    F = orthonormalize(lambda_frame.columns)
    if s:
        off = A_vec - F @ (F.T @ A_vec)
        if np.max(np.abs(off)) > 1e-8 * max(1.0, np.abs(A_vec).max()):
            raise NormalizationError("a-vectors must lie in Lambda", module="symplectic_core")
        coeff = null_space_basis((F.T @ J @ L).T)
        if coeff.shape[1] != n - s:
            raise NormalizationError("Lambda meets span l; intersection condition fails",
                                     module="symplectic_core")
        kern = canonical_basis(F @ coeff, dim=n - s)
        sal = A_vec.T @ J @ L                    # sal[m, k] = sigma(a_m, l_k)
        if np.linalg.svd(sal, compute_uv=False)[-1] < 1e-12 * max(1.0, np.abs(sal).max()):
            raise NormalizationError("span(a) meets l^angle (det A = 0)", module="symplectic_core")
        # E_{n-s+j} with sigma(E_{n-s+j}, l_k) = delta_jk
        e_last = A_vec @ np.linalg.inv(sal).T
    else:
        kern = F
        e_last = np.zeros((space.dim, 0))
    E = np.column_stack([kern, e_last])
    # dual basis inside the Lagrangian complement J^T Lambda
    G0 = J.T @ orthonormalize(E)
    G = G0 @ np.linalg.inv(E.T @ J @ G0)         # sigma(E_i, G_j) = delta_ij
    M = np.zeros((n, n))
    if s:
        # l_k - G_{n-s+k} lies in Lambda; express it in the E basis
        D = np.linalg.lstsq(E, L - G[:, n - s:], rcond=None)[0]
        M[:, n - s:] = D
        M[n - s:, : n - s] = D[: n - s].T
        M[n - s:, n - s:] = 0.5 * (D[n - s:] + D[n - s:].T)
    Fcols = G + E @ M
    T = np.column_stack([E, Fcols])
    if not is_symplectic(T, tol=1e-8 * max(1.0, np.abs(T).max() ** 2)):
        raise NormalizationError("failed to build a symplectic adapted basis", module="symplectic_core")
    return T
