"""Candidate-term library and the grouped block-diagonal regression system.

Every candidate term evaluated on the grid contributes one column per step of
the varying axis; the stacked per-step regressions form a block-diagonal
design that is never materialized densely; all downstream solvers work on the
(step, row, term) tensor directly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .differentiation import DerivativeStack


@dataclass(frozen=True)
class Term:
    """A product of powers of u and its spatial derivatives.

    factors are (derivative order, power) pairs with order 0 meaning u itself;
    the empty product is the constant term.
    """

    factors: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        orders = [q for q, _ in self.factors]
        if len(set(orders)) != len(orders):
            raise ValueError("duplicate derivative order in term factors")
        if any(p < 1 for _, p in self.factors):
            raise ValueError("factor powers must be positive")

    @property
    def descriptor(self) -> str:
        if not self.factors:
            return "1"
        parts = []
        for q, p in sorted(self.factors):
            base = "u" if q == 0 else "u_" + "x" * q
            parts.append(base if p == 1 else f"{base}^{p}")
        return "*".join(parts)

    @property
    def max_derivative(self) -> int:
        return max((q for q, _ in self.factors), default=0)


@dataclass(frozen=True)
class LibrarySpec:
    """An ordered collection of candidate terms."""

    terms: tuple[Term, ...]

    def __post_init__(self):
        descriptors = [t.descriptor for t in self.terms]
        if len(set(descriptors)) != len(descriptors):
            raise ValueError("duplicate terms in library")
        if not self.terms:
            raise ValueError("library must contain at least one term")

    @property
    def descriptors(self) -> tuple[str, ...]:
        return tuple(t.descriptor for t in self.terms)

    @property
    def max_derivative(self) -> int:
        return max(t.max_derivative for t in self.terms)

    @classmethod
    def standard(
        cls, max_poly_power: int = 3, max_deriv_order: int = 4, include_constant: bool = True
    ) -> "LibrarySpec":
        """All products u^p * (d^q u / dx^q), p <= max_poly_power, q <= max_deriv_order."""
        terms = []
        for q in range(max_deriv_order + 1):
            for p in range(max_poly_power + 1):
                factors = []
                if p > 0:
                    factors.append((0, p))
                if q > 0:
                    factors.append((q, 1))
                if not factors and not include_constant:
                    continue
                terms.append(Term(tuple(factors)))
        return cls(tuple(terms))

    @classmethod
    def products(cls, max_deriv_order: int = 1, max_factors: int = 2) -> "LibrarySpec":
        """All monomials of total degree <= max_factors in u and its derivatives."""
        variables = list(range(max_deriv_order + 1))
        terms = [Term(())]
        for total in range(1, max_factors + 1):
            terms.extend(_monomials(variables, total))
        return cls(tuple(terms))


def _monomials(variables: list[int], total: int) -> list[Term]:
    out = []

    def rec(idx: int, remaining: int, factors: tuple):
        if remaining == 0:
            out.append(Term(factors))
            return
        if idx == len(variables):
            return
        for p in range(remaining, -1, -1):
            rec(idx + 1, remaining - p, factors + (((variables[idx], p),) if p else ()))

    rec(0, total, ())
    # keep ascending-derivative order within a degree level: u^2, u*u_x, u_x^2, ...
    out.sort(key=lambda t: tuple(sorted((q, -p) for q, p in t.factors)))
    return out


def evaluate_terms(stack: DerivativeStack, spec: LibrarySpec) -> np.ndarray:
    """Evaluate every candidate term on the valid region; returns (n_x, n_t, n_terms)."""
    if spec.max_derivative > stack.max_order:
        missing = [t.descriptor for t in spec.terms if t.max_derivative > stack.max_order]
        raise ValueError(f"derivative stack (order {stack.max_order}) cannot evaluate {missing}")
    n_x, n_t = stack.u.shape
    values = np.empty((n_x, n_t, len(spec.terms)))
    for g, term in enumerate(spec.terms):
        col = np.ones((n_x, n_t))
        for q, p in term.factors:
            base = stack.u if q == 0 else stack.space[q]
            col = col * base**p
        values[:, :, g] = col
    return values


class ZeroColumnError(ValueError):
    """A design column is identically zero and cannot be normalized."""


@dataclass(frozen=True)
class GroupedLinearSystem:
    """Stacked per-step regressions u_t^(i) = Theta(u^(i)) xi^(i).

    blocks[i] is the i-th step's design block (n_rows x n_groups); the implied
    global design is block-diagonal with column i*G + g belonging to group g.
    """

    blocks: np.ndarray  # (n_steps, n_rows, n_groups)
    target: np.ndarray  # (n_steps, n_rows)
    descriptors: tuple[str, ...]
    varying_axis: str
    step_coords: np.ndarray
    scales: np.ndarray | None = None  # (n_steps, n_groups) column norms, set by normalize

    def __post_init__(self):
        m, n, g = self.blocks.shape
        if self.target.shape != (m, n):
            raise ValueError("target shape does not match blocks")
        if len(self.descriptors) != g:
            raise ValueError("descriptor count does not match group count")
        if self.step_coords.shape != (m,):
            raise ValueError("step coordinate count does not match step count")
        if self.scales is not None:
            if self.scales.shape != (m, g):
                raise ValueError("scales shape does not match blocks")
            if np.any(self.scales <= 0):
                raise ValueError("stored column scales must be strictly positive")

    @property
    def n_steps(self) -> int:
        return self.blocks.shape[0]

    @property
    def n_rows(self) -> int:
        return self.blocks.shape[1]

    @property
    def n_groups(self) -> int:
        return self.blocks.shape[2]

    @property
    def n_observations(self) -> int:
        return self.blocks.shape[0] * self.blocks.shape[1]

    @property
    def normalized(self) -> bool:
        return self.scales is not None

    def matvec(self, beta: np.ndarray) -> np.ndarray:
        """Apply the block-diagonal design to step-major coefficients (m, G) -> (m, n)."""
        return np.einsum("mng,mg->mn", self.blocks, beta)

    def residual_norm_sq(self, beta: np.ndarray) -> float:
        r = self.target - self.matvec(beta)
        return float((r * r).sum())

    def gram(self) -> np.ndarray:
        """Per-step Gram matrices Theta_i^T Theta_i, shape (m, G, G)."""
        return np.einsum("mng,mnh->mgh", self.blocks, self.blocks)

    def design_target(self) -> np.ndarray:
        """Per-step Theta_i^T y_i, shape (m, G)."""
        return np.einsum("mng,mn->mg", self.blocks, self.target)

    def subsystem(self, indices: np.ndarray) -> "GroupedLinearSystem":
        """Restrict to a subset of groups (columns deleted for removed groups)."""
        indices = np.asarray(indices, dtype=int)
        return replace(
            self,
            blocks=self.blocks[:, :, indices],
            descriptors=tuple(self.descriptors[i] for i in indices),
            scales=None if self.scales is None else self.scales[:, indices],
        )

    def dense(self) -> np.ndarray:
        """Materialize the block-diagonal design (tests and small systems only)."""
        m, n, g = self.blocks.shape
        out = np.zeros((m * n, m * g))
        for i in range(m):
            out[i * n : (i + 1) * n, i * g : (i + 1) * g] = self.blocks[i]
        return out

    def export_debug(self, directory: str | Path) -> None:
        """Dump per-step CSV blocks plus a JSON column-to-group map."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        m, n, g = self.blocks.shape
        for i in range(m):
            np.savetxt(directory / f"block_{i:04d}.csv", self.blocks[i], delimiter=",")
        np.savetxt(directory / "target.csv", self.target, delimiter=",")
        group_map = {
            "descriptors": list(self.descriptors),
            "varying_axis": self.varying_axis,
            "n_steps": m,
            "n_rows": n,
            "column_group": {str(i * g + j): j for i in range(m) for j in range(g)},
        }
        (directory / "groups.json").write_text(json.dumps(group_map, indent=2, sort_keys=True))


def assemble_grouped_system(
    term_values: np.ndarray,
    u_t: np.ndarray,
    varying_axis: str,
    step_coords: np.ndarray,
    descriptors: tuple[str, ...],
) -> GroupedLinearSystem:
    """Assemble the grouped system; for a space-varying axis the roles of x and t
    are transposed so steps index space."""
    if term_values.ndim != 3:
        raise ValueError("term values must be (n_x, n_t, n_terms)")
    if u_t.shape != term_values.shape[:2]:
        raise ValueError(f"u_t shape {u_t.shape} does not match term grid {term_values.shape[:2]}")
    if varying_axis == "time":
        blocks = np.ascontiguousarray(term_values.transpose(1, 0, 2))
        target = np.ascontiguousarray(u_t.T)
    elif varying_axis == "space":
        blocks = np.ascontiguousarray(term_values)
        target = np.ascontiguousarray(u_t)
    else:
        raise ValueError("varying_axis must be 'time' or 'space'")
    step_coords = np.asarray(step_coords, dtype=float)
    return GroupedLinearSystem(blocks, target, tuple(descriptors), varying_axis, step_coords)


def normalize_columns(system: GroupedLinearSystem) -> GroupedLinearSystem:
    """Rescale every design column to unit L2 norm, remembering the scales."""
    norms = np.sqrt(np.einsum("mng,mng->mg", system.blocks, system.blocks))
    if np.any(norms == 0):
        i, g = np.argwhere(norms == 0)[0]
        raise ZeroColumnError(
            f"term {system.descriptors[g]!r} has a zero column at step "
            f"{system.step_coords[i]:g}"
        )
    return replace(system, blocks=system.blocks / norms[:, None, :], scales=norms)


def lstsq_trajectories(system: GroupedLinearSystem) -> np.ndarray:
    """Per-step least squares, returned in the system's own column scaling (m, G)."""
    m = system.n_steps
    beta = np.empty((m, system.n_groups))
    for i in range(m):
        beta[i], *_ = np.linalg.lstsq(system.blocks[i], system.target[i], rcond=None)
    return beta


@dataclass(frozen=True)
class CoefficientTrajectories:
    """Per-term coefficient values along the varying axis, with a group mask."""

    values: np.ndarray  # (n_steps, n_groups), physical scale
    active: np.ndarray  # (n_groups,) bool
    descriptors: tuple[str, ...]
    step_coords: np.ndarray
    varying_axis: str

    def __post_init__(self):
        m, g = self.values.shape
        if len(self.descriptors) != g or self.active.shape != (g,) or self.step_coords.shape != (m,):
            raise ValueError("inconsistent trajectory shapes")
        inactive = ~self.active
        if inactive.any() and np.any(self.values[:, inactive] != 0.0):
            raise ValueError("excluded groups must have exactly-zero trajectories")

    @property
    def selected(self) -> tuple[str, ...]:
        return tuple(d for d, a in zip(self.descriptors, self.active) if a)

    def group(self, descriptor: str) -> np.ndarray:
        return self.values[:, self.descriptors.index(descriptor)]
