"""Finite-dimensional state and gate algebra.

Conventions used everywhere in the package:

* Rotations are ``R_a(theta) = exp(-i theta sigma_a / 2)``. Under this
  convention ``i * Rx(pi) @ Ry(pi/2)`` is exactly the Hadamard matrix.
* Qubit 0 is the leftmost tensor factor, i.e. the most significant bit of the
  basis index: ``|q0 q1 ... q_{N-1}>`` has index ``sum q_k 2**(N-1-k)``.
* States are compared through fidelity ``|<a|b>|^2``, never entrywise, so
  global phases never matter.
"""

from fractions import Fraction

import numpy as np

from .errors import ConfigurationError, DimensionError, DomainError

MAX_QUBITS = 10
ATOL = 1e-12

SIGMA = {
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}
IDENTITY2 = np.eye(2, dtype=complex)
HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2.0)


def _n_qubits_for(dim):
    n = int(dim).bit_length() - 1
    if dim < 1 or 2**n != dim:
        raise DimensionError(f"dimension {dim} is not a power of two")
    if n > MAX_QUBITS:
        raise DimensionError(f"{n} qubits exceeds the limit of {MAX_QUBITS}")
    return n


class StateVector:
    """Normalised pure state of ``N`` qubits."""

    def __init__(self, amplitudes, *, atol=ATOL):
        a = np.array(amplitudes, dtype=complex).reshape(-1)
        self.n_qubits = _n_qubits_for(a.size)
        norm = np.linalg.norm(a)
        if abs(norm - 1.0) > atol:
            raise DomainError(f"state not normalised: |psi| = {norm!r}")
        self.amplitudes = a

    @classmethod
    def normalized(cls, amplitudes):
        a = np.array(amplitudes, dtype=complex).reshape(-1)
        return cls(a / np.linalg.norm(a))

    @classmethod
    def basis(cls, bits):
        """Computational basis state from a bit string such as ``"01"``."""
        bits = str(bits)
        if not bits or set(bits) - {"0", "1"}:
            raise ConfigurationError(f"bad basis label {bits!r}")
        a = np.zeros(2 ** len(bits), dtype=complex)
        a[int(bits, 2)] = 1.0
        return cls(a)

    @property
    def dim(self):
        return self.amplitudes.size

    def projector(self):
        return np.outer(self.amplitudes, self.amplitudes.conj())

    def __repr__(self):
        return f"StateVector({np.array2string(self.amplitudes, precision=4)})"


class UnitaryGate:
    def __init__(self, matrix, label="U", *, atol=ATOL):
        m = np.array(matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionError(f"gate matrix must be square, got shape {m.shape}")
        self.n_qubits = _n_qubits_for(m.shape[0])
        err = np.max(np.abs(m @ m.conj().T - np.eye(m.shape[0])))
        if err > atol:
            raise DomainError(f"{label}: not unitary (max |UU^dag - I| = {err:.3e})")
        self.matrix = m
        self.label = label

    @property
    def dim(self):
        return self.matrix.shape[0]

    def __matmul__(self, other):
        if isinstance(other, UnitaryGate):
            _check_dims(self.dim, other.dim)
            return UnitaryGate(self.matrix @ other.matrix, f"{self.label}*{other.label}")
        if isinstance(other, StateVector):
            _check_dims(self.dim, other.dim)
            return StateVector(self.matrix @ other.amplitudes, atol=1e-10)
        return NotImplemented

    def dagger(self):
        return UnitaryGate(self.matrix.conj().T, f"{self.label}^dag")

    def __repr__(self):
        return f"UnitaryGate({self.label!r}, dim={self.dim})"


class DensityMatrix:
    """Hermitian, unit-trace, positive semidefinite ``2^N x 2^N`` matrix."""

    def __init__(self, matrix, *, atol=ATOL):
        m = np.array(matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionError(f"density matrix must be square, got shape {m.shape}")
        self.n_qubits = _n_qubits_for(m.shape[0])
        herm = np.max(np.abs(m - m.conj().T))
        if herm > atol:
            raise DomainError(f"density matrix not Hermitian ({herm:.3e})")
        tr = np.trace(m)
        if abs(tr - 1.0) > atol:
            raise DomainError(f"density matrix trace {tr!r} != 1")
        lo = np.linalg.eigvalsh(m).min()
        if lo < -atol:
            raise DomainError(f"density matrix not PSD (min eigenvalue {lo:.3e})")
        self.matrix = m

    @property
    def dim(self):
        return self.matrix.shape[0]

    def trace(self):
        return complex(np.trace(self.matrix))

    def purity(self):
        return float(np.real(np.trace(self.matrix @ self.matrix)))

    def eigenvalues(self):
        return np.linalg.eigvalsh(self.matrix)


def exact(x):
    """Decimal-exact rational for a float, e.g. ``1e-06 -> 1/1000000``."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    return Fraction(repr(float(x)))


class PseudoPureSpec:
    """``rho = (1 - epsilon) I / 2^N + epsilon |psi><psi|``.

    The impure fraction ``1 - epsilon`` is held as an exact rational so that
    repeated purification steps compose without rounding (``1 - 1e-18`` is
    not representable as a float).
    """

    def __init__(self, n_qubits, epsilon=None, pure_state=None, *, impure_fraction=None):
        if (epsilon is None) == (impure_fraction is None):
            raise ConfigurationError("give exactly one of epsilon or impure_fraction")
        impure = 1 - exact(epsilon) if impure_fraction is None else exact(impure_fraction)
        if not 0 <= impure <= 1:
            raise DomainError(f"epsilon must lie in [0, 1], got {float(1 - impure)}")
        if pure_state is None:
            raise ConfigurationError("pure_state is required")
        if pure_state.n_qubits != n_qubits:
            raise DimensionError("pure_state dimension does not match n_qubits")
        self.n_qubits = int(n_qubits)
        self.pure_state = pure_state
        self._impure = impure

    @property
    def impure_fraction(self):
        """Exact ``1 - epsilon`` as a ``Fraction``."""
        return self._impure

    @property
    def epsilon(self):
        return float(1 - self._impure)

    def __repr__(self):
        return (f"PseudoPureSpec(n_qubits={self.n_qubits}, "
                f"impure_fraction={float(self._impure)!r})")


def _check_dims(a, b):
    if a != b:
        raise DimensionError(f"dimension mismatch: {a} vs {b}")


def rotation_gate(axis, angle):
    """``exp(-i angle sigma_axis / 2)`` as a 2x2 gate."""
    if axis not in SIGMA:
        raise ConfigurationError(f"axis must be one of x, y, z; got {axis!r}")
    angle = float(angle)
    if not np.isfinite(angle):
        raise DomainError("rotation angle must be finite")
    c, s = np.cos(angle / 2.0), np.sin(angle / 2.0)
    m = c * IDENTITY2 - 1j * s * SIGMA[axis]
    return UnitaryGate(m, f"R{axis}({angle:.6g})")


def hadamard_via_rotations():
    """Hadamard assembled as ``i * Rx(pi) @ Ry(pi/2)``."""
    m = 1j * rotation_gate("x", np.pi).matrix @ rotation_gate("y", np.pi / 2).matrix
    return UnitaryGate(m, "H")


def embed(gate, qubit, n_qubits):
    """Lift a single-qubit gate onto ``qubit`` of an ``n_qubits`` register."""
    g = gate.matrix if isinstance(gate, UnitaryGate) else np.asarray(gate, dtype=complex)
    if not 0 <= qubit < n_qubits:
        raise ConfigurationError(f"qubit {qubit} out of range for {n_qubits} qubits")
    out = np.array([[1.0 + 0j]])
    for k in range(n_qubits):
        out = np.kron(out, g if k == qubit else IDENTITY2)
    label = gate.label if isinstance(gate, UnitaryGate) else "U"
    return UnitaryGate(out, f"{label}[{qubit}]")


def controlled(gate, control, target, n_qubits):
    """Apply a single-qubit gate to ``target`` only when ``control`` is |1>."""
    if control == target:
        raise ConfigurationError("control and target must differ")
    for q in (control, target):
        if not 0 <= q < n_qubits:
            raise ConfigurationError(f"qubit {q} out of range for {n_qubits} qubits")
    g = gate.matrix if isinstance(gate, UnitaryGate) else np.asarray(gate, dtype=complex)
    p0 = np.diag([1.0, 0.0]).astype(complex)
    p1 = np.diag([0.0, 1.0]).astype(complex)

    def chain(factors):
        out = np.array([[1.0 + 0j]])
        for f in factors:
            out = np.kron(out, f)
        return out

    idle = [p0 if k == control else IDENTITY2 for k in range(n_qubits)]
    active = [p1 if k == control else g if k == target else IDENTITY2
              for k in range(n_qubits)]
    label = gate.label if isinstance(gate, UnitaryGate) else "U"
    return UnitaryGate(chain(idle) + chain(active), f"C{control}-{label}[{target}]")


def cnot_gate(control, target, n_qubits):
    if not 1 <= n_qubits <= MAX_QUBITS:
        raise ConfigurationError(f"n_qubits must be in [1, {MAX_QUBITS}]")
    g = controlled(SIGMA["x"], control, target, n_qubits)
    g.label = f"CNOT({control}->{target})"
    return g


def pseudo_pure_density(spec):
    d = 2**spec.n_qubits
    impure = float(spec.impure_fraction)
    m = (impure / d) * np.eye(d, dtype=complex) + \
        (1.0 - impure) * spec.pure_state.projector()
    return DensityMatrix(m)


def conjugate_density(rho, u):
    """``U rho U^dag``; the result is re-symmetrised to be exactly Hermitian."""
    _check_dims(rho.dim, u.dim)
    m = u.matrix @ rho.matrix @ u.matrix.conj().T
    return DensityMatrix(0.5 * (m + m.conj().T), atol=1e-10)


def pseudo_pure_parameters(rho):
    """Recover ``(epsilon, |psi>)`` from a pseudo-pure density matrix.

    The spectrum of a pseudo-pure state is ``(1-eps)/d`` with multiplicity
    ``d - 1`` plus ``(1-eps)/d + eps``; the top eigenvector is ``psi``.
    """
    w, v = np.linalg.eigh(rho.matrix)
    eps = float(w[-1] - w[0]) if rho.dim > 1 else 1.0
    return eps, StateVector.normalized(v[:, -1])


def purify_step(spec, step_factor):
    """Scale the impure fraction ``1 - epsilon`` by ``step_factor``."""
    if not 0.0 < step_factor <= 1.0:
        raise DomainError(f"step_factor must lie in (0, 1], got {step_factor}")
    if step_factor == 1:
        return spec
    return PseudoPureSpec(spec.n_qubits, pure_state=spec.pure_state,
                          impure_fraction=spec.impure_fraction * exact(step_factor))


def state_fidelity(a, b):
    _check_dims(a.dim, b.dim)
    f = abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2
    return float(min(max(f, 0.0), 1.0))


BELL_LABELS = ("Phi+", "Phi-", "Psi+", "Psi-")


def bell_states():
    """The four Bell states keyed ``Phi+``, ``Phi-``, ``Psi+``, ``Psi-``."""
    r = 1.0 / np.sqrt(2.0)
    return {
        "Phi+": StateVector([r, 0, 0, r]),
        "Phi-": StateVector([r, 0, 0, -r]),
        "Psi+": StateVector([0, r, r, 0]),
        "Psi-": StateVector([0, r, -r, 0]),
    }


# JSON layout: complex numbers are [re, im] pairs; matrices are row-major
# lists of rows.

def complex_to_json(array):
    a = np.asarray(array, dtype=complex)
    if a.ndim == 0:
        return [float(a.real), float(a.imag)]
    return [complex_to_json(x) for x in a]


def complex_from_json(data):
    a = np.asarray(data, dtype=float)
    if a.shape[-1] != 2:
        raise ConfigurationError("complex JSON arrays need [re, im] pairs")
    return a[..., 0] + 1j * a[..., 1]


def state_to_json(state):
    return {"n_qubits": state.n_qubits, "amplitudes": complex_to_json(state.amplitudes)}


def gate_to_json(gate):
    return {"label": gate.label, "n_qubits": gate.n_qubits,
            "matrix": complex_to_json(gate.matrix)}


def density_to_json(rho):
    return {"n_qubits": rho.n_qubits, "matrix": complex_to_json(rho.matrix)}


def state_from_json(data):
    return StateVector(complex_from_json(data["amplitudes"]))


def gate_from_json(data):
    return UnitaryGate(complex_from_json(data["matrix"]), data.get("label", "U"))


def density_from_json(data):
    return DensityMatrix(complex_from_json(data["matrix"]))
