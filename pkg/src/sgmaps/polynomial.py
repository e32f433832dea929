"""Sparse multivariate polynomials with float coefficients.

A :class:`MultiPoly` stores a mapping from exponent tuples to coefficients.
Values are immutable; every arithmetic operation returns a new polynomial.
Terms are kept in graded lexicographic order (ascending total degree, then
descending exponent tuple) so that text and document serialization is
deterministic.
"""
from __future__ import annotations

import math
from itertools import combinations_with_replacement
from typing import Iterable, Mapping, Sequence

import numpy as np

DROP_TOL = 1e-14


def _grlex_key(exps: tuple[int, ...]):
    return (sum(exps), tuple(-e for e in exps))


class MultiPoly:
    """Polynomial in ``nvars`` real variables.

    Parameters
    ----------
    nvars : int
        Number of variables.
    terms : mapping
        ``{exponent tuple: coefficient}``. Exact zero coefficients are
        discarded; repeated keys are not possible in a mapping.
    """

    __slots__ = ("_nvars", "_terms", "_eval_cache", "_hash")

    def __init__(self, nvars: int, terms: Mapping[Sequence[int], float] | None = None):
        if nvars < 0:
            raise ValueError("nvars must be non-negative")
        self._nvars = int(nvars)
        clean: dict[tuple[int, ...], float] = {}
        for exps, coeff in (terms or {}).items():
            key = tuple(int(e) for e in exps)
            if len(key) != self._nvars:
                raise ValueError(f"exponent {key} has length {len(key)}, expected {self._nvars}")
            if any(e < 0 for e in key):
                raise ValueError(f"negative exponent in {key}")
            c = float(coeff)
            if not math.isfinite(c):
                raise ValueError("coefficients must be finite")
            if c != 0.0:
                clean[key] = clean.get(key, 0.0) + c
        self._terms = {k: clean[k] for k in sorted(clean, key=_grlex_key) if clean[k] != 0.0}
        self._eval_cache = None
        self._hash = None

    # -- constructors -----------------------------------------------------
    @classmethod
    def zero(cls, nvars: int) -> "MultiPoly":
        return cls(nvars)

    @classmethod
    def constant(cls, nvars: int, value: float) -> "MultiPoly":
        return cls(nvars, {(0,) * nvars: value})

    @classmethod
    def variable(cls, index: int, nvars: int) -> "MultiPoly":
        if not 0 <= index < nvars:
            raise ValueError(f"variable index {index} out of range for {nvars} variables")
        exps = [0] * nvars
        exps[index] = 1
        return cls(nvars, {tuple(exps): 1.0})

    @classmethod
    def _from_arith(cls, nvars: int, terms: Mapping[tuple[int, ...], float]) -> "MultiPoly":
        return cls(nvars, {k: c for k, c in terms.items() if abs(c) >= DROP_TOL})

    # -- basic properties ---------------------------------------------------
    @property
    def nvars(self) -> int:
        return self._nvars

    @property
    def terms(self) -> dict[tuple[int, ...], float]:
        return dict(self._terms)

    def items(self):
        return self._terms.items()

    def __len__(self) -> int:
        return len(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    @property
    def degree(self) -> int:
        """Total degree; ``-1`` for the zero polynomial."""
        return max((sum(e) for e in self._terms), default=-1)

    def coeff(self, exps: Sequence[int]) -> float:
        return self._terms.get(tuple(exps), 0.0)

    def __eq__(self, other) -> bool:
        if not isinstance(other, MultiPoly):
            return NotImplemented
        return self._nvars == other._nvars and self._terms == other._terms

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash((self._nvars, tuple(self._terms.items())))
        return self._hash

    def __repr__(self) -> str:
        if not self._terms:
            return f"MultiPoly({self._nvars}, 0)"
        parts = []
        for exps, c in self._terms.items():
            mono = "*".join(
                f"x{i + 1}" if e == 1 else f"x{i + 1}^{e}" for i, e in enumerate(exps) if e
            )
            parts.append(f"{c!r}" + (f"*{mono}" if mono else ""))
        return f"MultiPoly({self._nvars}, " + " + ".join(parts) + ")"

    def allclose(self, other: "MultiPoly", atol: float = 1e-12) -> bool:
        if self._nvars != other._nvars:
            return False
        keys = set(self._terms) | set(other._terms)
        return all(abs(self.coeff(k) - other.coeff(k)) <= atol for k in keys)

    # -- arithmetic ---------------------------------------------------------
    def _coerce(self, other) -> "MultiPoly":
        if isinstance(other, MultiPoly):
            if other._nvars != self._nvars:
                raise ValueError(f"nvars mismatch: {self._nvars} vs {other._nvars}")
            return other
        if isinstance(other, (int, float, np.floating, np.integer)):
            return MultiPoly.constant(self._nvars, float(other))
        raise TypeError(f"cannot combine MultiPoly with {type(other).__name__}")

    def __add__(self, other) -> "MultiPoly":
        other = self._coerce(other)
        out = dict(self._terms)
        for k, c in other._terms.items():
            out[k] = out.get(k, 0.0) + c
        return MultiPoly._from_arith(self._nvars, out)

    __radd__ = __add__

    def __neg__(self) -> "MultiPoly":
        return MultiPoly(self._nvars, {k: -c for k, c in self._terms.items()})

    def __sub__(self, other) -> "MultiPoly":
        return self + (-self._coerce(other))

    def __rsub__(self, other) -> "MultiPoly":
        return self._coerce(other) - self

    def __mul__(self, other) -> "MultiPoly":
        if isinstance(other, (int, float, np.floating, np.integer)):
            s = float(other)
            return MultiPoly._from_arith(self._nvars, {k: c * s for k, c in self._terms.items()})
        other = self._coerce(other)
        out: dict[tuple[int, ...], float] = {}
        for ka, ca in self._terms.items():
            for kb, cb in other._terms.items():
                key = tuple(a + b for a, b in zip(ka, kb))
                out[key] = out.get(key, 0.0) + ca * cb
        return MultiPoly._from_arith(self._nvars, out)

    __rmul__ = __mul__

    def __truediv__(self, scalar: float) -> "MultiPoly":
        return self * (1.0 / float(scalar))

    def __pow__(self, power: int) -> "MultiPoly":
        if int(power) != power or power < 0:
            raise ValueError("only non-negative integer powers are supported")
        result = MultiPoly.constant(self._nvars, 1.0)
        base = self
        p = int(power)
        while p:
            if p & 1:
                result = result * base
            p >>= 1
            if p:
                base = base * base
        return result

    # -- calculus and variable maps -----------------------------------------
    def partial_derivative(self, var: int) -> "MultiPoly":
        if not 0 <= var < self._nvars:
            raise ValueError(f"variable index {var} out of range for {self._nvars} variables")
        out = {}
        for exps, c in self._terms.items():
            e = exps[var]
            if e:
                key = exps[:var] + (e - 1,) + exps[var + 1:]
                out[key] = c * e
        return MultiPoly(self._nvars, out)

    def gradient(self) -> list["MultiPoly"]:
        return [self.partial_derivative(i) for i in range(self._nvars)]

    def embed(self, nvars: int, offset: int = 0) -> "MultiPoly":
        """Same polynomial viewed in ``nvars`` variables, own variables starting at ``offset``."""
        if offset < 0 or offset + self._nvars > nvars:
            raise ValueError("embedding does not fit")
        pad_l, pad_r = (0,) * offset, (0,) * (nvars - offset - self._nvars)
        return MultiPoly(nvars, {pad_l + k + pad_r: c for k, c in self._terms.items()})

    def linear_substitute(self, matrix) -> "MultiPoly":
        """Return ``q(z) = p(A z)`` for a square matrix ``A``."""
        a = np.asarray(matrix, dtype=float)
        if a.shape != (self._nvars, self._nvars):
            raise ValueError("matrix shape must be (nvars, nvars)")
        n = self._nvars
        images = [
            MultiPoly(n, {tuple(int(i == j) for i in range(n)): a[row, j] for j in range(n)})
            for row in range(n)
        ]
        result = MultiPoly.zero(n)
        for exps, c in self._terms.items():
            term = MultiPoly.constant(n, c)
            for img, e in zip(images, exps):
                if e:
                    term = term * img**e
            result = result + term
        return result

    # -- evaluation ---------------------------------------------------------
    def _eval_order(self):
        if self._eval_cache is None:
            order = sorted(self._terms.items(), key=lambda kc: (sum(kc[0]), abs(kc[1])))
            exps = np.array([k for k, _ in order], dtype=np.int64).reshape(len(order), self._nvars)
            coeffs = np.array([c for _, c in order], dtype=float)
            self._eval_cache = (exps, coeffs)
        return self._eval_cache

    def eval(self, point) -> float:
        """Value at a single point, summed with :func:`math.fsum`."""
        x = np.asarray(point, dtype=float).reshape(-1)
        if x.shape[0] != self._nvars:
            raise ValueError(f"point has {x.shape[0]} coordinates, expected {self._nvars}")
        exps, coeffs = self._eval_order()
        vals = [c * math.prod(xi**int(e) for xi, e in zip(x, row)) for row, c in zip(exps, coeffs)]
        return math.fsum(vals)

    def __call__(self, points) -> np.ndarray | float:
        """Vectorized evaluation; ``points`` has shape ``(..., nvars)``."""
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            return self.eval(pts)
        if pts.shape[-1] != self._nvars:
            raise ValueError(f"points have {pts.shape[-1]} coordinates, expected {self._nvars}")
        lead = pts.shape[:-1]
        flat = pts.reshape(-1, self._nvars)
        exps, coeffs = self._eval_order()
        if not len(coeffs):
            return np.zeros(lead)
        powers = []
        for i in range(self._nvars):
            table = [None, flat[:, i]]
            for _ in range(2, int(exps[:, i].max()) + 1):
                table.append(table[-1] * flat[:, i])
            powers.append(table)
        out = np.zeros(flat.shape[0])
        for row, c in zip(exps, coeffs):
            term = None
            for i, e in enumerate(row):
                if e:
                    term = powers[i][e] if term is None else term * powers[i][e]
            out += c if term is None else c * term
        return out.reshape(lead)

    # -- serialization ------------------------------------------------------
    def to_text(self) -> str:
        """One term per line: ``coeff e1 ... ek``, preceded by a ``# nvars`` header."""
        lines = [f"# nvars {self._nvars}"]
        for exps, c in self._terms.items():
            lines.append(" ".join([repr(c)] + [str(e) for e in exps]))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, nvars: int | None = None) -> "MultiPoly":
        terms = {}
        for raw in text.splitlines():
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                fields = line[1:].split()
                if len(fields) == 2 and fields[0] == "nvars":
                    nvars = int(fields[1])
                continue
            fields = line.split()
            exps = tuple(int(f) for f in fields[1:])
            if nvars is None:
                nvars = len(exps)
            if exps in terms:
                raise ValueError(f"duplicate term {exps}")
            terms[exps] = float(fields[0])
        if nvars is None:
            raise ValueError("cannot infer nvars of an empty polynomial without a header")
        return cls(nvars, terms)

    def to_doc(self) -> dict:
        return {
            "nvars": self._nvars,
            "terms": [{"coeff": c, "exps": list(k)} for k, c in self._terms.items()],
        }

    @classmethod
    def from_doc(cls, doc: Mapping) -> "MultiPoly":
        terms = {}
        for t in doc["terms"]:
            key = tuple(t["exps"])
            if key in terms:
                raise ValueError(f"duplicate term {key}")
            terms[key] = t["coeff"]
        return cls(int(doc["nvars"]), terms)


class UniPoly:
    """Univariate polynomial; ``coeffs[i]`` multiplies ``t**i``."""

    __slots__ = ("_coeffs",)

    def __init__(self, coeffs: Iterable[float]):
        c = [float(v) for v in coeffs]
        while c and c[-1] == 0.0:
            c.pop()
        self._coeffs = tuple(c)

    @property
    def coeffs(self) -> tuple[float, ...]:
        return self._coeffs

    @property
    def degree(self) -> int:
        return len(self._coeffs) - 1

    def is_zero(self) -> bool:
        return not self._coeffs

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        acc = np.zeros_like(t)
        for c in reversed(self._coeffs):
            acc = acc * t + c
        return float(acc) if acc.ndim == 0 else acc

    def derivative(self) -> "UniPoly":
        return UniPoly([i * c for i, c in enumerate(self._coeffs)][1:])

    def __eq__(self, other) -> bool:
        return isinstance(other, UniPoly) and self._coeffs == other._coeffs

    def __hash__(self) -> int:
        return hash(self._coeffs)

    def __repr__(self) -> str:
        return f"UniPoly({list(self._coeffs)!r})"

    def to_doc(self) -> dict:
        return {"coeffs": list(self._coeffs)}

    @classmethod
    def from_doc(cls, doc: Mapping) -> "UniPoly":
        return cls(doc["coeffs"])


def evaluate(p: MultiPoly, point) -> float:
    return p.eval(point)


def partial_derivative(p: MultiPoly, var: int) -> MultiPoly:
    return p.partial_derivative(var)


def product_of(ps: Sequence[MultiPoly]) -> MultiPoly:
    ps = list(ps)
    if not ps:
        raise ValueError("product of an empty list")
    nvars = ps[0].nvars
    for q in ps[1:]:
        if q.nvars != nvars:
            raise ValueError(f"nvars mismatch: {nvars} vs {q.nvars}")
    result = ps[0]
    for q in ps[1:]:
        result = result * q
    return result


def compose_univariate(outer: UniPoly, inner: MultiPoly, scale: float = 1.0) -> MultiPoly:
    """Expand ``outer(inner / scale)`` as a polynomial in the variables of ``inner``."""
    if not scale > 0:
        raise ValueError("scale must be positive")
    if outer.is_zero():
        return MultiPoly.zero(inner.nvars)
    arg = inner * (1.0 / scale)
    acc = MultiPoly.constant(inner.nvars, outer.coeffs[-1])
    for c in reversed(outer.coeffs[:-1]):
        acc = acc * arg + c
    return acc


def monomials(nvars: int, degree: int) -> list[tuple[int, ...]]:
    """All exponent tuples of total degree <= ``degree``, in grlex order."""
    out = []
    for d in range(degree + 1):
        for combo in combinations_with_replacement(range(nvars), d):
            exps = [0] * nvars
            for v in combo:
                exps[v] += 1
            out.append(tuple(exps))
    return sorted(set(out), key=_grlex_key)


def sum_of_squares(nvars: int, offset: int = 0, count: int | None = None) -> MultiPoly:
    """``sum y_j**2`` over ``count`` consecutive variables starting at ``offset``."""
    count = nvars - offset if count is None else count
    terms = {}
    for j in range(offset, offset + count):
        exps = [0] * nvars
        exps[j] = 2
        terms[tuple(exps)] = 1.0
    return MultiPoly(nvars, terms)
