"""Benchmark problem generators with reproducible data and cached solves.

Every generator draws its data from ``numpy.random.default_rng(seed)`` in a
fixed documented order, builds the split form

    minimize  f(x) + g(z)   subject to   A x + B z = c

as a :class:`~admmtune.engine.ProblemSpec`, and wraps it in a
:class:`ProblemInstance` together with the raw arrays.  Two size profiles are
bundled: "desk" instances solve in seconds and back the test suite, "paper"
instances are the full-size counterparts.

Families
--------
lp      linear program over the nonnegative orthant, equality constrained
qp      box-constrained convex quadratic
lad     least absolute deviations regression
huber   huber regression
bp      minimum-l1 solution of an underdetermined linear system
lasso   l1-penalized least squares
tv      quadratic data fit with an l1 penalty on first differences
sics    sparse inverse covariance selection
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve, cho_solve_banded, cholesky_banded

from .engine import ProblemSpec, TerminationRule, solve
from .prox import _GammaCache, _soft_threshold, catalog_prox
from . import tuner

__all__ = [
    "KINDS",
    "PROFILES",
    "ProblemInstance",
    "OracleSolution",
    "generate",
    "compute_oracle",
    "step_formula",
]

KINDS = ("lp", "qp", "lad", "huber", "bp", "lasso", "tv", "sics")

PROFILES = {
    "lp": {"desk": {"m": 40, "n": 50}, "paper": {"m": 400, "n": 500}},
    "qp": {"desk": {"n": 30}, "paper": {"n": 100}},
    "lad": {"desk": {"m": 500, "n": 50}, "paper": {"m": 1000, "n": 100}},
    "huber": {"desk": {"m": 500, "n": 50}, "paper": {"m": 5000, "n": 200}},
    "bp": {"desk": {"m": 10, "n": 30}, "paper": {"m": 10, "n": 30}},
    "lasso": {"desk": {"m": 150, "n": 500}, "paper": {"m": 1500, "n": 5000}},
    "tv": {"desk": {"n": 100}, "paper": {"n": 100}},
    "sics": {"desk": {"n": 20, "samples": 200}, "paper": {"n": 100, "samples": 1000}},
}

_DEFAULT_PARAMS = {
    "lp": {},
    "qp": {},
    "lad": {"corrupt_count": None},
    "huber": {"noise_density": 0.04},
    "bp": {"density": 0.1, "alpha": 1.0},
    "lasso": {"density": 0.02, "alpha": None},
    "tv": {"alpha": 5.0, "spike_fraction": 0.1, "spike_scale": 10.0},
    "sics": {"alpha": 1.0},
}


@dataclass(frozen=True)
class OracleSolution:
    """High-accuracy solution pair from a reference run."""

    x: np.ndarray
    z: np.ndarray
    lam: np.ndarray
    ax: np.ndarray
    residue: float
    iterations: int


@dataclass
class ProblemInstance:
    """A generated benchmark problem plus everything needed to rerun it."""

    kind: str
    seed: int
    dims: dict
    params: dict
    spec: ProblemSpec
    data: dict = field(repr=False)
    oracle: OracleSolution = field(default=None, repr=False)

    @property
    def structure_data(self) -> dict:
        """Inputs for :func:`admmtune.tuner.structure_init`."""
        if self.kind == "lp":
            return {"A": self.data["A"], "b": self.data["b"]}
        if self.kind == "qp":
            return {"lower": self.data["lower"], "upper": self.data["upper"]}
        return {"dim": self.spec.p}

    def to_dict(self) -> dict:
        """JSON-ready description: scalars as-is, arrays as nested lists."""
        return {
            "schema": 1,
            "kind": self.kind,
            "seed": self.seed,
            "dims": dict(self.dims),
            "params": {k: v for k, v in self.params.items()},
            "data": {k: np.asarray(v).tolist() for k, v in self.data.items()},
        }


def _count(fraction, total):
    return max(1, int(round(fraction * total)))


def _build_lp(rng, dims, params):
    m, n = dims["m"], dims["n"]
    cost = rng.uniform(0.5, 1.5, n)
    x_feas = np.abs(rng.standard_normal(n))
    A = np.abs(rng.standard_normal((m, n)))
    b = A @ x_feas
    gram = cho_factor(A @ A.T)
    a_cost = A @ cost

    def prox_f(w, g):
        nu = cho_solve(gram, g * (A @ w - b) - a_cost)
        return w - (cost + A.T @ nu) / g

    def prox_g(w, g):
        return np.maximum(-w, 0.0)

    def objective(x, z):
        return float(cost @ x)

    spec = ProblemSpec(prox_f, prox_g, objective, n=n, p=n)
    return spec, {"cost": cost, "A": A, "b": b}, dict(params)


def _build_qp(rng, dims, params):
    n = dims["n"]
    M = rng.uniform(0.0, 1.0, (n, n))
    w_eig, Q = np.linalg.eigh(0.5 * (M + M.T))
    # shift the spectrum nonnegative, then lift each eigenvalue by U[0,1]
    w_eig = w_eig + max(0.0, -w_eig[0]) + rng.uniform(0.0, 1.0, n)
    P = (Q * w_eig) @ Q.T
    P = 0.5 * (P + P.T)
    q = rng.standard_normal(n)
    r = float(rng.standard_normal())
    b1 = rng.standard_normal(n)
    b2 = rng.standard_normal(n)
    lower = np.minimum(b1, b2)
    upper = np.maximum(b1, b2)
    cache = _GammaCache(lambda g: cho_factor(P + g * np.eye(n)))

    def prox_f(w, g):
        return cho_solve(cache.get(g), g * w - q)

    def prox_g(w, g):
        return np.clip(-w, lower, upper)

    def objective(x, z):
        return float(0.5 * x @ (P @ x) + q @ x + r)

    spec = ProblemSpec(prox_f, prox_g, objective, n=n, p=n)
    data = {"P": P, "q": q, "r": r, "lower": lower, "upper": upper}
    return spec, data, dict(params)


def _build_lad(rng, dims, params):
    m, n = dims["m"], dims["n"]
    A = rng.standard_normal((m, n))
    x_true = 10.0 * rng.standard_normal(n)
    b = A @ x_true
    k = params["corrupt_count"]
    k = _count(0.02, m) if k is None else int(k)
    idx = rng.choice(m, size=k, replace=False)
    b[idx] += 100.0 * rng.standard_normal(k)
    gram = cho_factor(A.T @ A)

    def prox_f(w, g):
        return cho_solve(gram, A.T @ w)

    def prox_g(w, g):
        return _soft_threshold(-w, 1.0 / g)

    def objective(x, z):
        return float(np.abs(z).sum())

    spec = ProblemSpec(prox_f, prox_g, objective, A=A, c=b)
    out = dict(params, corrupt_count=k)
    return spec, {"A": A, "b": b, "x_true": x_true}, out


def _build_huber(rng, dims, params):
    m, n = dims["m"], dims["n"]
    A = rng.standard_normal((m, n))
    A = A / np.linalg.norm(A, axis=0)
    x_true = rng.standard_normal(n)
    eps_dense = 0.1 * rng.standard_normal(m)
    k = _count(params["noise_density"], m)
    idx = rng.choice(m, size=k, replace=False)
    eps_sparse = np.zeros(m)
    eps_sparse[idx] = rng.uniform(0.0, 1.0, k)
    b = A @ x_true + eps_dense + eps_sparse
    gram = cho_factor(A.T @ A)

    def prox_f(w, g):
        return cho_solve(gram, A.T @ w)

    def prox_g(w, g):
        t = 1.0 / g
        v = -w
        return np.where(np.abs(v) <= 1.0 + t, v / (1.0 + t), v - t * np.sign(v))

    def objective(x, z):
        a = np.abs(z)
        return float(np.where(a <= 1.0, 0.5 * z * z, a - 0.5).sum())

    spec = ProblemSpec(prox_f, prox_g, objective, A=A, c=b)
    return spec, {"A": A, "b": b, "x_true": x_true}, dict(params)


def _build_bp(rng, dims, params):
    m, n = dims["m"], dims["n"]
    A = rng.standard_normal((m, n))
    k = _count(params["density"], n)
    idx = rng.choice(n, size=k, replace=False)
    x_true = np.zeros(n)
    x_true[idx] = rng.standard_normal(k)
    b = A @ x_true
    alpha = float(params["alpha"])
    gram = cho_factor(A @ A.T)

    def prox_f(w, g):
        return w - A.T @ cho_solve(gram, A @ w - b)

    def prox_g(w, g):
        return _soft_threshold(-w, alpha / g)

    def objective(x, z):
        return float(alpha * np.abs(z).sum())

    spec = ProblemSpec(prox_f, prox_g, objective, n=n, p=n)
    return spec, {"A": A, "b": b, "x_true": x_true}, dict(params)


def _build_lasso(rng, dims, params):
    m, n = dims["m"], dims["n"]
    A = rng.standard_normal((m, n))
    A = A / np.linalg.norm(A, axis=0)
    k = _count(params["density"], n)
    idx = rng.choice(n, size=k, replace=False)
    x_true = np.zeros(n)
    x_true[idx] = rng.standard_normal(k)
    b = A @ x_true + math.sqrt(0.001) * rng.standard_normal(m)
    alpha = params["alpha"]
    alpha = 0.1 * float(np.abs(A.T @ b).max()) if alpha is None else float(alpha)
    atb = A.T @ b
    if m >= n:
        gram = A.T @ A
        cache = _GammaCache(lambda g: cho_factor(gram + g * np.eye(n)))

        def prox_f(w, g):
            return cho_solve(cache.get(g), atb + g * w)

    else:
        gram = A @ A.T
        cache = _GammaCache(lambda g: cho_factor(gram + g * np.eye(m)))

        def prox_f(w, g):
            u = atb + g * w
            return (u - A.T @ cho_solve(cache.get(g), A @ u)) / g

    def prox_g(w, g):
        return _soft_threshold(-w, alpha / g)

    def objective(x, z):
        res = A @ x - b
        return float(0.5 * res @ res + alpha * np.abs(z).sum())

    spec = ProblemSpec(prox_f, prox_g, objective, n=n, p=n)
    out = dict(params, alpha=alpha)
    return spec, {"A": A, "b": b, "x_true": x_true}, out


def _difference_matrix(n):
    F = np.zeros((n - 1, n))
    idx = np.arange(n - 1)
    F[idx, idx] = -1.0
    F[idx, idx + 1] = 1.0
    return F


def _build_tv(rng, dims, params):
    n = dims["n"]
    x_true = np.ones(n)
    k = _count(params["spike_fraction"], n)
    idx = rng.choice(n, size=k, replace=False)
    x_true[idx] *= params["spike_scale"] * rng.standard_normal(k)
    b = x_true + rng.standard_normal(n)
    alpha = float(params["alpha"])
    F = _difference_matrix(n)

    banded = _GammaCache(
        lambda g: cholesky_banded(_tv_banded(n, g))
    )

    def prox_f(w, g):
        rhs = b.copy()
        rhs[:-1] -= g * w
        rhs[1:] += g * w
        return cho_solve_banded((banded.get(g), False), rhs)

    def prox_g(w, g):
        return _soft_threshold(-w, alpha / g)

    def objective(x, z):
        d = x - b
        return float(0.5 * d @ d + alpha * np.abs(z).sum())

    # F is (n-1) x n and can never have full column rank; the quadratic
    # data fit keeps the x step single-valued regardless
    spec = ProblemSpec(prox_f, prox_g, objective, A=F, c=np.zeros(n - 1), rank_check=False)
    return spec, {"b": b, "x_true": x_true}, dict(params)


def _tv_banded(n, gamma):
    ab = np.zeros((2, n))
    ab[1, :] = 1.0 + 2.0 * gamma
    ab[1, 0] = 1.0 + gamma
    ab[1, -1] = 1.0 + gamma
    ab[0, 1:] = -gamma
    return ab


def _build_sics(rng, dims, params):
    n, samples = dims["n"], dims["samples"]
    D = rng.standard_normal((samples, n))
    S = np.cov(D, rowvar=False)
    alpha = float(params["alpha"])
    logdet_handle = catalog_prox("logdet_quad", n=n, S=S)

    def prox_f(w, g):
        return logdet_handle.evaluate(w, 1.0 / g)

    def prox_g(w, g):
        return _soft_threshold(-w, alpha / g)

    def objective(x, z):
        X = x.reshape(n, n)
        sign, logdet = np.linalg.slogdet(X)
        if sign <= 0:
            return float("inf")
        return float(np.trace(S @ X) - logdet + alpha * np.abs(z).sum())

    spec = ProblemSpec(prox_f, prox_g, objective, n=n * n, p=n * n)
    return spec, {"S": S}, dict(params)


_BUILDERS = {
    "lp": _build_lp,
    "qp": _build_qp,
    "lad": _build_lad,
    "huber": _build_huber,
    "bp": _build_bp,
    "lasso": _build_lasso,
    "tv": _build_tv,
    "sics": _build_sics,
}


def generate(kind: str, dims: dict = None, seed: int = 0, params: dict = None,
             profile: str = None) -> ProblemInstance:
    """Generate a reproducible benchmark instance.

    Parameters
    ----------
    kind : str
        One of ``KINDS``.
    dims : dict or None
        Size keys per family (see ``PROFILES``).  None picks the profile.
    seed : int
        Seed for ``numpy.random.default_rng``.
    params : dict or None
        Family-specific overrides merged over ``_DEFAULT_PARAMS`` entries,
        for example ``alpha`` for the penalized families.
    profile : str or None
        "desk" or "paper"; only read when ``dims`` is None.  None means
        "paper", the full-size recipe.

    Returns
    -------
    ProblemInstance
    """
    if kind not in _BUILDERS:
        raise ValueError(f"unknown problem kind {kind!r}; known kinds: {sorted(_BUILDERS)}")
    if dims is None:
        profile = "paper" if profile is None else profile
        if profile not in PROFILES[kind]:
            raise ValueError(f"unknown profile {profile!r}; known profiles: {sorted(PROFILES[kind])}")
        dims = PROFILES[kind][profile]
    dims = {k: int(v) for k, v in dims.items()}
    expected = set(PROFILES[kind]["desk"])
    if set(dims) != expected:
        raise ValueError(f"dims for {kind} needs keys {sorted(expected)}, got {sorted(dims)}")
    merged = dict(_DEFAULT_PARAMS[kind])
    for key, value in (params or {}).items():
        if key not in merged:
            raise ValueError(f"unknown parameter {key!r} for kind {kind}; known: {sorted(merged)}")
        merged[key] = value
    rng = np.random.default_rng(seed)
    spec, data, params_out = _BUILDERS[kind](rng, dims, merged)
    return ProblemInstance(kind=kind, seed=int(seed), dims=dims, params=params_out,
                           spec=spec, data=data)


def compute_oracle(instance: ProblemInstance, tol: float = 1e-10,
                   max_iter: int = 200_000, refresh: bool = False) -> OracleSolution:
    """High-accuracy solution pair, cached on the instance.

    Runs the solver from the zero start at unit step size until the unscaled
    residue drops to ``tol``.
    """
    if instance.oracle is not None and not refresh:
        return instance.oracle
    rec = solve(instance.spec, tuner.StepSizePlan.fixed(1.0), init=None,
                rule=TerminationRule(tol=tol, max_iter=max_iter))
    if not rec.converged:
        raise ArithmeticError(
            f"reference run for kind {instance.kind!r} stalled at residue "
            f"{rec.rows[-1][2]:.3e} after {rec.iterations} sweeps"
        )
    oracle = OracleSolution(x=rec.x, z=rec.z, lam=rec.lam, ax=rec.ax,
                            residue=rec.rows[-1][2], iterations=rec.iterations)
    instance.oracle = oracle
    return oracle


def step_formula(kind: str, state) -> float:
    """Family-specific norm-ratio step-size estimate.

    Equals the generic zero-start estimate ``||lam|| / ||A x||`` written in
    each family's own quantities: the plain iterate norm where the constraint
    couples x to z directly, the regression image ``A x`` for lad and huber,
    the difference image for tv, and the Frobenius norm for sics.

    Returns None (caller keeps the previous step size) when the denominator
    is degenerate, for example a constant iterate under the difference map.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown problem kind {kind!r}")
    lam_nrm = float(np.linalg.norm(state.lam))
    if kind in ("lp", "qp", "bp", "lasso", "sics"):
        den = float(np.linalg.norm(state.x))
    else:
        if state.ax is None:
            raise ValueError(f"state.ax is required for kind {kind}")
        den = float(np.linalg.norm(state.ax))
    if den < 1e-12:
        return None
    return lam_nrm / den
