"""Dense linear-algebra kernel for small control design problems.

Everything in this module operates on plain ``numpy.ndarray`` objects and is
written for the matrix sizes that show up in sampled-data controller design:
state dimensions in the single digits, augmented systems at most a few dozen
rows. Simplicity and verifiability win over asymptotic cleverness at this
scale, so the algorithms are the classical textbook ones:

==================  =========================================================
``expm``            scaling and squaring with a diagonal Pade approximant
``sym_eig``         cyclic Jacobi rotations for symmetric matrices
``lyap_solve``      continuous Lyapunov equation via Kronecker vectorization
``sqrtm_spd``       principal square root through the eigendecomposition
``induced_norm2``   spectral norm as sqrt(lambda_max(M' M))
``det``             LU factorization with partial pivoting
==================  =========================================================

All tolerances are module constants so callers can tighten or relax them in
one place.
"""

import math

import numpy as np

from .errors import DimensionError, NumericError

# Pade order 6 is exact to machine precision once the argument is scaled
# below this bound.
_PADE_SCALE_LIMIT = 0.5
# Coefficients of the diagonal (6,6) Pade approximant to exp(x).
_PADE6 = (
    1.0,
    1.0 / 2.0,
    5.0 / 44.0,
    1.0 / 66.0,
    1.0 / 792.0,
    1.0 / 15840.0,
    1.0 / 665280.0,
)

_SYMMETRY_RTOL = 1e-12
_JACOBI_SWEEP_LIMIT = 50
_JACOBI_OFF_RTOL = 1e-15
_LYAP_RESIDUAL_RTOL = 1e-9


def as_square(M, name="matrix"):
    """Validate and return ``M`` as a finite square 2-D float array.

    Scalars become 1x1 matrices. Raises ``DimensionError`` for non-square
    input and ``NumericError`` for non-finite entries.
    """
    A = np.asarray(M, dtype=float)
    if A.ndim == 0:
        A = A.reshape(1, 1)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise NumericError(f"{name} has non-finite entries")
    return A


def expm(M, t=1.0):
    """Matrix exponential ``exp(M * t)``.

    Scales ``M*t`` by a power of two until its 1-norm is at most
    ``_PADE_SCALE_LIMIT``, applies the diagonal Pade(6,6) approximant, and
    squares back. Accurate to better than 1e-10 relative error for
    ``norm(M*t)`` up to around 100, which covers every use in this package.
    """
    A = as_square(M, "expm argument")
    if not math.isfinite(t):
        raise NumericError("expm time argument is not finite")
    A = A * t
    m = A.shape[0]
    ident = np.eye(m)

    norm1 = float(np.abs(A).sum(axis=0).max()) if m else 0.0
    s = 0
    if norm1 > _PADE_SCALE_LIMIT:
        s = int(math.ceil(math.log2(norm1 / _PADE_SCALE_LIMIT)))
        A = A / (2.0 ** s)

    b = _PADE6
    A2 = A @ A
    A4 = A2 @ A2
    A6 = A2 @ A4
    U = A @ (b[1] * ident + b[3] * A2 + b[5] * A4)
    V = b[0] * ident + b[2] * A2 + b[4] * A4 + b[6] * A6
    try:
        R = np.linalg.solve(V - U, V + U)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"Pade denominator is singular: {exc}") from exc
    for _ in range(s):
        R = R @ R
    return R


def sym_eig(S):
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Parameters
    ----------
    S : array_like
        Square matrix, symmetric to within ``_SYMMETRY_RTOL`` relative to its
        largest entry. It is symmetrized as ``(S + S') / 2`` before the
        iteration.

    Returns
    -------
    (values, vectors)
        ``values`` ascending, ``vectors`` orthogonal with eigenvectors in
        columns, so that ``S ~= vectors @ diag(values) @ vectors.T``.
    """
    A = as_square(S, "sym_eig argument")
    scale = max(1.0, float(np.abs(A).max()))
    if float(np.abs(A - A.T).max()) > _SYMMETRY_RTOL * scale:
        raise NumericError("sym_eig argument is not symmetric")
    A = 0.5 * (A + A.T)
    m = A.shape[0]
    V = np.eye(m)
    if m == 1:
        return A[0, 0].reshape(1), V

    fro = float(np.sqrt((A * A).sum()))
    tol = _JACOBI_OFF_RTOL * max(fro, 1.0)
    for _ in range(_JACOBI_SWEEP_LIMIT):
        # Summed directly over the off-diagonal entries: subtracting the
        # diagonal mass from the total cancels catastrophically and would
        # hide residues below the square root of one ulp of the total.
        off = math.sqrt(float(((A - np.diag(np.diag(A))) ** 2).sum()))
        if off <= tol:
            break
        for p in range(m - 1):
            for q in range(p + 1, m):
                apq = A[p, q]
                # Entries this small cannot lift the off-diagonal mass above
                # the sweep tolerance, and rotating on them risks overflow.
                if abs(apq) <= 0.01 * tol / m:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                if abs(theta) > 1e150:
                    # theta**2 would overflow; the rotation angle is ~1/(2 theta)
                    t = 0.5 / theta
                else:
                    t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(1.0 + theta * theta))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                app, aqq = A[p, p], A[q, q]
                col_p = A[:, p].copy()
                col_q = A[:, q].copy()
                A[:, p] = c * col_p - s * col_q
                A[:, q] = s * col_p + c * col_q
                row_p = A[p, :].copy()
                row_q = A[q, :].copy()
                A[p, :] = c * row_p - s * row_q
                A[q, :] = s * row_p + c * row_q
                A[p, p] = c * c * app - 2.0 * s * c * apq + s * s * aqq
                A[q, q] = s * s * app + 2.0 * s * c * apq + c * c * aqq
                A[p, q] = 0.0
                A[q, p] = 0.0
                vp = V[:, p].copy()
                vq = V[:, q].copy()
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq
    values = np.diag(A).copy()
    order = np.argsort(values, kind="stable")
    return values[order], V[:, order]


def lyap_solve(A, Q):
    """Solve the continuous Lyapunov equation ``A' P + P A = -Q``.

    Vectorizes the equation with Kronecker products and solves the dense
    linear system by LU factorization. ``Q`` must be symmetric positive
    definite; the returned ``P`` is symmetrized and checked both for the
    residual (relative to ``norm(Q)``) and for positive definiteness, so a
    successful return certifies that ``A`` is Hurwitz.
    """
    A = as_square(A, "Lyapunov A")
    Q = as_square(Q, "Lyapunov Q")
    m = A.shape[0]
    if Q.shape[0] != m:
        raise DimensionError(f"Q has shape {Q.shape}, expected {(m, m)}")
    scale = max(1.0, float(np.abs(Q).max()))
    if float(np.abs(Q - Q.T).max()) > _SYMMETRY_RTOL * scale:
        raise NumericError("Q is not symmetric")

    ident = np.eye(m)
    # Row-major vectorization: vec(A' X) = kron(A', I) vec(X),
    # vec(X A) = kron(I, A') vec(X).
    L = np.kron(A.T, ident) + np.kron(ident, A.T)
    try:
        p = np.linalg.solve(L, -Q.reshape(-1))
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"Lyapunov system is singular: {exc}") from exc
    P = p.reshape(m, m)
    P = 0.5 * (P + P.T)

    residual = A.T @ P + P @ A + Q
    q_norm = float(np.sqrt((Q * Q).sum()))
    if float(np.sqrt((residual * residual).sum())) > _LYAP_RESIDUAL_RTOL * max(q_norm, 1e-30):
        raise NumericError("Lyapunov residual out of tolerance")
    values, _ = sym_eig(P)
    if values[0] <= 0.0:
        raise NumericError("Lyapunov solution is not positive definite")
    return P


def sqrtm_spd(P):
    """Principal square root of a symmetric positive definite matrix."""
    values, vectors = sym_eig(P)
    if values[0] <= 0.0:
        raise NumericError("matrix is not positive definite")
    S = (vectors * np.sqrt(values)) @ vectors.T
    return 0.5 * (S + S.T)


def induced_norm2(M):
    """Induced 2-norm (largest singular value) of a rectangular matrix."""
    A = np.asarray(M, dtype=float)
    if A.ndim == 0:
        A = A.reshape(1, 1)
    if A.ndim != 2:
        raise DimensionError(f"expected a matrix, got ndim {A.ndim}")
    if not np.all(np.isfinite(A)):
        raise NumericError("matrix has non-finite entries")
    if A.shape[0] == 0 or A.shape[1] == 0:
        return 0.0
    # Work with the smaller Gram matrix of the two.
    G = A.T @ A if A.shape[0] >= A.shape[1] else A @ A.T
    values, _ = sym_eig(0.5 * (G + G.T))
    return math.sqrt(max(0.0, float(values[-1])))


def det(M):
    """Determinant through LU factorization with partial pivoting."""
    A = as_square(M, "det argument").copy()
    m = A.shape[0]
    parity = 1.0
    for k in range(m - 1):
        piv = k + int(np.argmax(np.abs(A[k:, k])))
        if A[piv, k] == 0.0:
            return 0.0
        if piv != k:
            A[[k, piv]] = A[[piv, k]]
            parity = -parity
        factors = A[k + 1:, k] / A[k, k]
        A[k + 1:, k:] -= np.outer(factors, A[k, k:])
    return parity * float(np.prod(np.diag(A)))
