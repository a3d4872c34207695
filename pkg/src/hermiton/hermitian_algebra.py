"""Complex linear algebra for Hermitian forms.

Index conventions used throughout the package (all arrays are plain numpy
``complex128`` matrices; the tensor character lives in the documentation):

* covariant sesquilinear forms (the scalar product ``gamma``, the Hamiltonian
  form ``chi``, velocities ``gamma_dot``) are stored as ``F[a, b]`` meaning
  the component with first (row) index conjugated; Hermitian means
  ``F == F.conj().T``;
* contravariant objects (inverse forms, momenta conjugate to ``gamma``,
  conserved tensors) are stored as ``K[b, a]`` with the row index
  unconjugated, so that ``K @ F`` and ``F @ K`` are the natural
  contractions;
* mixed tensors (operators on the state space, e.g. the Hamilton operator)
  are stored as ``M[a, b]``.

With these conventions ordinary matrix multiplication implements every
index contraction in the package, and conjugate-transposition implements
hermiticity for all three kinds of object.
"""

from __future__ import annotations

import numpy as np

from .errors import NonFinite, NotHermitian, SingularForm

__all__ = [
    "check_hermitian",
    "hermitian_part",
    "hermiticity_drift",
    "complex_vector",
    "hermitian_form",
    "invert_form",
    "raise_first_index",
    "matrix_exp",
    "gamma_velocity",
    "trace_invariants",
    "real_decompose",
    "hermitian_basis",
    "hermitian_to_real",
    "real_to_hermitian",
    "tensor4_pair_defect",
    "tensor4_hermiticity_defect",
]

#: default relative tolerance for hermiticity validation
HERM_TOL_FACTOR = 1e-9
#: default relative tolerance for the nondegeneracy check, scaled by norm**n
DET_TOL_FACTOR = 1e-12


def _as_complex_matrix(f) -> np.ndarray:
    f = np.asarray(f, dtype=complex)
    if f.ndim != 2 or f.shape[0] != f.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {f.shape}")
    return f


def check_hermitian(f, tol: float) -> bool:
    """True iff max |F - F^dag| <= tol (entrywise)."""
    f = _as_complex_matrix(f)
    return bool(np.max(np.abs(f - f.conj().T)) <= tol)


def hermitian_part(f) -> np.ndarray:
    """(F + F^dag) / 2."""
    f = _as_complex_matrix(f)
    return (f + f.conj().T) / 2.0


def hermiticity_drift(f) -> float:
    """Relative hermiticity defect ||F - F^dag|| / max(||F||, tiny)."""
    f = _as_complex_matrix(f)
    norm = np.linalg.norm(f)
    return float(np.linalg.norm(f - f.conj().T) / max(norm, 1e-300))


def complex_vector(entries) -> np.ndarray:
    """Validate a state vector: 1-D, n >= 1, finite entries."""
    v = np.asarray(entries, dtype=complex)
    if v.ndim != 1 or v.size < 1:
        raise ValueError(f"expected a 1-D vector of length >= 1, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise NonFinite("state vector has non-finite entries")
    return v


def hermitian_form(
    entries,
    herm_tol: float | None = None,
    det_tol: float | None = None,
    require_invertible: bool = True,
    require_positive: bool = False,
) -> np.ndarray:
    """Validate and re-symmetrize a Hermitian form.

    The matrix is accepted if ||F - F^dag|| <= herm_tol (default
    1e-9 * ||F||) and, when ``require_invertible``, |det F| > det_tol
    (default 1e-12 * ||F||**n).  The returned matrix is the Hermitian part
    of the input, so integrator round-off cannot silently break the type
    invariant while the drift stays measurable beforehand.
    """
    f = _as_complex_matrix(entries)
    if not np.all(np.isfinite(f)):
        raise NonFinite("form has non-finite entries")
    n = f.shape[0]
    norm = float(np.linalg.norm(f))
    if herm_tol is None:
        herm_tol = HERM_TOL_FACTOR * max(norm, 1e-300)
    if np.linalg.norm(f - f.conj().T) > herm_tol:
        raise NotHermitian(
            f"form deviates from hermiticity by {np.linalg.norm(f - f.conj().T):.3e}"
            f" (tolerance {herm_tol:.3e})"
        )
    f = hermitian_part(f)
    if require_invertible:
        if det_tol is None:
            det_tol = DET_TOL_FACTOR * max(norm, 1e-300) ** n
        det = np.linalg.det(f)
        if abs(det) <= det_tol:
            raise SingularForm(f"|det| = {abs(det):.3e} <= {det_tol:.3e}")
    if require_positive:
        eigs = np.linalg.eigvalsh(f)
        if np.min(eigs) <= 0.0:
            raise NotHermitian(f"form is not positive definite (min eig {np.min(eigs):.3e})")
    return f


def invert_form(gamma, det_tol: float | None = None) -> np.ndarray:
    """Contravariant inverse of a nondegenerate Hermitian form.

    Satisfies inverse @ gamma == identity and is itself Hermitian.
    """
    g = _as_complex_matrix(gamma)
    n = g.shape[0]
    if det_tol is None:
        det_tol = DET_TOL_FACTOR * max(float(np.linalg.norm(g)), 1e-300) ** n
    det = np.linalg.det(g)
    if abs(det) <= det_tol:
        raise SingularForm(f"|det| = {abs(det):.3e} <= {det_tol:.3e}")
    inv = np.linalg.inv(g)
    return hermitian_part(inv)


def raise_first_index(gamma, chi) -> np.ndarray:
    """Raise the first index of a covariant form with gamma's inverse.

    Returns the mixed operator ``H = gamma^{-1} @ chi``, which is Hermitian
    with respect to gamma: gamma(H u, v) == gamma(u, H v).
    """
    return invert_form(gamma) @ _as_complex_matrix(chi)


# Pade-13 numerator/denominator coefficients for the exponential kernel.
_PADE13 = (
    64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
    1187353796428800.0, 129060195264000.0, 10559470521600.0,
    670442572800.0, 33522128640.0, 1323241920.0, 40840800.0,
    960960.0, 16380.0, 182.0, 1.0,
)


def matrix_exp(m, t: float = 1.0) -> np.ndarray:
    """exp(M t) by scaling-and-squaring with a fixed-order Pade kernel.

    The argument is halved until its 1-norm is <= 0.5, the Pade-13
    approximant is evaluated, and the result is squared back up.
    exp(0) == I exactly.
    """
    a = _as_complex_matrix(m) * t
    if not np.all(np.isfinite(a)):
        raise NonFinite("matrix exponential of a non-finite argument")
    n = a.shape[0]
    ident = np.eye(n, dtype=complex)
    norm = float(np.linalg.norm(a, 1))
    if norm == 0.0:
        return ident
    squarings = max(0, int(np.ceil(np.log2(norm / 0.5))))
    a = a / (2.0 ** squarings)

    b = _PADE13
    a2 = a @ a
    a4 = a2 @ a2
    a6 = a4 @ a2
    u = a @ (a6 @ (b[13] * a6 + b[11] * a4 + b[9] * a2)
             + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * ident)
    v = (a6 @ (b[12] * a6 + b[10] * a4 + b[8] * a2)
         + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * ident)
    result = np.linalg.solve(v - u, v + u)
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(squarings):
            result = result @ result
    if not np.all(np.isfinite(result)):
        raise NonFinite("matrix exponential overflowed")
    return result


def gamma_velocity(gamma, gamma_dot, hatted: bool = True) -> np.ndarray:
    """Nonholonomic velocity of a curve of Hermitian forms.

    ``hatted=True`` returns gamma^{-1} @ gamma_dot (the mixed tensor acting
    on the state space); ``hatted=False`` returns gamma_dot @ gamma^{-1},
    its conjugate-slot companion.  The two are similar, so they share all
    trace invariants.
    """
    inv = invert_form(gamma)
    gd = _as_complex_matrix(gamma_dot)
    return inv @ gd if hatted else gd @ inv


def trace_invariants(m, pmax: int) -> list[complex]:
    """[Tr(M^p) for p = 1..pmax]; basis-free by similarity invariance."""
    m = _as_complex_matrix(m)
    if not 1 <= pmax <= m.shape[0]:
        raise ValueError(f"pmax must lie in 1..{m.shape[0]}, got {pmax}")
    out = []
    power = np.eye(m.shape[0], dtype=complex)
    for _ in range(pmax):
        power = power @ m
        out.append(complex(np.trace(power)))
    return out


def real_decompose(gamma, herm_tol: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Split a Hermitian form into real symmetric + i * real antisymmetric.

    Returns (S, A) with gamma == S + i A exactly (after re-symmetrization).
    """
    g = hermitian_form(gamma, herm_tol=herm_tol, require_invertible=False)
    s = g.real.copy()
    a = g.imag.copy()
    return s, a


def hermitian_basis(n: int) -> list[np.ndarray]:
    """Orthonormal real basis of the n^2-dimensional space of Hermitian
    n x n matrices under the inner product <P, Q> = Tr(P Q)."""
    basis = []
    for a in range(n):
        e = np.zeros((n, n), dtype=complex)
        e[a, a] = 1.0
        basis.append(e)
    inv_sqrt2 = 1.0 / np.sqrt(2.0)
    for a in range(n):
        for b in range(a + 1, n):
            e = np.zeros((n, n), dtype=complex)
            e[a, b] = inv_sqrt2
            e[b, a] = inv_sqrt2
            basis.append(e)
            f = np.zeros((n, n), dtype=complex)
            f[a, b] = 1j * inv_sqrt2
            f[b, a] = -1j * inv_sqrt2
            basis.append(f)
    return basis


def hermitian_to_real(x) -> np.ndarray:
    """Coordinates of a Hermitian matrix in the ``hermitian_basis`` order."""
    x = _as_complex_matrix(x)
    n = x.shape[0]
    coords = [x[a, a].real for a in range(n)]
    sqrt2 = np.sqrt(2.0)
    for a in range(n):
        for b in range(a + 1, n):
            coords.append(sqrt2 * x[a, b].real)
            coords.append(-sqrt2 * x[a, b].imag)
    return np.array(coords)


def real_to_hermitian(coords, n: int) -> np.ndarray:
    """Inverse of :func:`hermitian_to_real`."""
    coords = np.asarray(coords, dtype=float)
    if coords.size != n * n:
        raise ValueError(f"expected {n * n} coordinates, got {coords.size}")
    x = np.zeros((n, n), dtype=complex)
    for a in range(n):
        x[a, a] = coords[a]
    k = n
    inv_sqrt2 = 1.0 / np.sqrt(2.0)
    for a in range(n):
        for b in range(a + 1, n):
            re = coords[k] * inv_sqrt2
            im = -coords[k + 1] * inv_sqrt2
            x[a, b] = re + 1j * im
            x[b, a] = re - 1j * im
            k += 2
    return x


def tensor4_pair_defect(omega) -> float:
    """Max deviation from the pair-exchange symmetry O[d,c,b,a] == O[b,a,d,c]."""
    o = np.asarray(omega, dtype=complex)
    return float(np.max(np.abs(o - o.transpose(2, 3, 0, 1))))


def tensor4_hermiticity_defect(omega) -> float:
    """Max deviation from conj(O[d,c,b,a]) == O[a,b,c,d]."""
    o = np.asarray(omega, dtype=complex)
    return float(np.max(np.abs(o.conj() - o.transpose(3, 2, 1, 0))))
