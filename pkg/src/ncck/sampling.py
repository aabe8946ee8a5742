"""Random matrix sampling and trace estimation on kernel level-set bands.

Samples GOE / Wishart tuples, keeps those whose trace-Siciak approximant
falls in the requested band, and averages a trace observable over the
accepted samples.  Worker streams are keyed by seed XOR worker-index, and
shards are merged in worker order, so output is bit-identical for a fixed
(seed, workers, config).
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ncck.kernel import KernelRep, LevelSetSpec, cd_kernel, cd_kernel_free_product
from ncck.poly import NcPolynomial, parse_poly
from ncck.states import free_poisson_state, semicircle_state
from ncck.words import EMPTY_WORD, Word

DEFAULT_BATCH = 4096
RATE_FLOOR = 1e-6
RATE_CHECK_AFTER = 10_000_000

# GOE conventions: "entry" draws X with i.i.d. N(0, sigma^2) entries and
# returns (X + X^T)/2, the literal reading of a unit scale parameter;
# "bulk" rescales entries by sqrt(2/k) so the empirical spectral law
# approaches the variance-sigma^2 semicircle for every matrix size.  The
# two coincide at k = 2.
GOE_CONVENTIONS = ("entry", "bulk")


@dataclass(frozen=True)
class SamplerConfig:
    law: str                      # "goe" | "wishart"
    k: int
    sigma: float = 1.0            # goe scale parameter
    c: float | None = None        # wishart rate; M = c * k must be integral
    seed: int = 0
    workers: int = 1
    convention: str = "entry"

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("matrix size must be >= 1")
        if self.law not in ("goe", "wishart"):
            raise ValueError(f"unknown law {self.law!r}")
        if self.law == "wishart":
            if self.c is None:
                raise ValueError("wishart sampling needs the rate c")
            if abs(self.c * self.k - round(self.c * self.k)) > 1e-9:
                raise ValueError("wishart requires M = c*k integral")
        if self.convention not in GOE_CONVENTIONS:
            raise ValueError(f"unknown GOE convention {self.convention!r}")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


@dataclass
class SampleReport:
    config: SamplerConfig
    d: int
    epsilon: float
    target: int
    accepted: int
    draws: int
    band_hits: int          # all draws inside the band, kept or not
    mean: float
    stderr: float
    wall_time: float
    observable: str = ""

    @property
    def acceptance_rate(self) -> float:
        return self.band_hits / self.draws if self.draws else 0.0

    def csv_row(self) -> str:
        return ",".join([
            str(self.d), str(self.config.k), _fmt(self.epsilon),
            str(self.target), _fmt(self.acceptance_rate),
            _fmt(self.mean), _fmt(self.stderr),
        ])


CSV_HEADER = "d,k,epsilon,N,accept_rate,mean,stderr"


def _fmt(x: float) -> str:
    return f"{x:.17g}"


class RejectionError(RuntimeError):
    """The sampler could not fill the quota inside the draw budget."""


def sample_goe(k: int, sigma: float, rng: np.random.Generator,
               convention: str = "entry", batch: int = 1) -> np.ndarray:
    """Batch of real symmetric matrices (X + X^T)/2."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    scale = sigma if convention == "entry" else sigma * np.sqrt(2.0 / k)
    x = rng.standard_normal((batch, k, k)) * scale
    return (x + np.swapaxes(x, 1, 2)) / 2


def sample_wishart(k: int, M: int, rng: np.random.Generator,
                   batch: int = 1) -> np.ndarray:
    """Batch of (1/k) G G* with G a k x M standard complex Gaussian."""
    if M < 1:
        raise ValueError("M must be >= 1")
    g = (rng.standard_normal((batch, k, M))
         + 1j * rng.standard_normal((batch, k, M))) * np.sqrt(0.5)
    return g @ np.conj(np.swapaxes(g, 1, 2)) / k


def draw_tuple(config: SamplerConfig, n: int, rng: np.random.Generator,
               batch: int) -> list[np.ndarray]:
    """One independent matrix per variable, each of the configured law."""
    if config.law == "goe":
        return [sample_goe(config.k, config.sigma, rng, config.convention, batch)
                for _ in range(n)]
    M = int(round(config.c * config.k))
    return [sample_wishart(config.k, M, rng, batch) for _ in range(n)]


# ---------------------------------------------------------------------------
# batched kernel-trace evaluation
# ---------------------------------------------------------------------------

class GenericTraceEvaluator:
    """tr_k kappa(A, A*)(I) via the dense orthonormal coefficient matrix.

    P_w(A) is assembled for every basis word by one batched product per
    word plus a dense (sigma x sigma) contraction; suitable whenever
    sigma(n, d) is small.
    """

    def __init__(self, kernel: KernelRep):
        self.words = kernel.words
        self.D = kernel.orthonormal_matrix()
        self.d = kernel.d
        self.n = kernel.n

    def trace_values(self, mats: Sequence[np.ndarray]) -> np.ndarray:
        mats = _check_batch(mats, self.n)
        batch, k = mats[0].shape[0], mats[0].shape[1]
        powers: dict[Word, np.ndarray] = {
            EMPTY_WORD: np.broadcast_to(np.eye(k, dtype=complex), (batch, k, k))}

        def power(w: Word) -> np.ndarray:
            m = powers.get(w)
            if m is None:
                m = power(Word(w.letters[:-1])) @ mats[w.letters[-1] - 1]
                powers[w] = m
            return m

        out = np.zeros(batch)
        stack = np.stack([power(w) for w in self.words])       # (s, B, k, k)
        pw = np.einsum("wv,vbij->wbij", self.D, stack)
        out += np.sum(np.abs(pw) ** 2, axis=(0, 2, 3))
        return out / k


class HermitianEigenTraceEvaluator:
    """Single-variable fast path for Hermitian inputs.

    For A = A*, tr kappa(A, A*)(I)/k is the eigenvalue average of the
    scalar function sum_j P_j(x)^2, so a batched eigenvalue solve plus a
    Vandermonde contraction replaces all matrix products.
    """

    def __init__(self, kernel: KernelRep):
        if kernel.n != 1:
            raise ValueError("eigenvalue path needs a single variable")
        self.d = kernel.d
        self.n = 1
        self.D = kernel.orthonormal_matrix()   # (d+1, d+1), row j = P_j

    def trace_values(self, mats: Sequence[np.ndarray]) -> np.ndarray:
        a = _check_batch(mats, 1)[0]
        eigs = np.linalg.eigvalsh(a)                       # (B, k)
        powers = eigs[..., None] ** np.arange(self.d + 1)  # (B, k, d+1)
        values = powers @ self.D.T                         # P_j at eigenvalues
        return np.mean(np.sum(values ** 2, axis=-1), axis=-1)


def _check_batch(mats: Sequence[np.ndarray], n: int) -> Sequence[np.ndarray]:
    if len(mats) != n:
        raise ValueError(f"expected {n} batched matrix arrays, got {len(mats)}")
    for m in mats:
        if np.ndim(m) != 3 or m.shape[-1] != m.shape[-2]:
            raise ValueError("each variable needs a (batch, k, k) array")
    return mats


class FreeProductTraceEvaluator:
    """tr_k kappa(A, A*)(I) using the run-product structure of a free
    product basis: P_w(A) is one batched product per word, built from the
    per-variable orthonormal polynomials evaluated by Horner powers."""

    def __init__(self, kernel: KernelRep):
        if kernel.single_bases is None:
            raise ValueError("kernel does not carry single-variable bases")
        self.d = kernel.d
        self.n = kernel.n
        self.coeffs: list[list[np.ndarray]] = []
        for basis in kernel.single_bases:
            per_var = []
            for r in range(kernel.d + 1):
                q = basis.polys[Word([1] * r)]
                scale = float(basis.norms[Word([1] * r)]) ** -0.5
                arr = np.zeros(r + 1)
                for u, c in q.terms.items():
                    arr[len(u)] = float(c) * scale
                per_var.append(arr)
            self.coeffs.append(per_var)

    def trace_values(self, mats: Sequence[np.ndarray]) -> np.ndarray:
        mats = _check_batch(mats, self.n)
        batch, k = mats[0].shape[0], mats[0].shape[1]
        d, n = self.d, self.n
        # orthonormal single-variable values U[j][r]: (B, k, k)
        U: list[list[np.ndarray]] = []
        for j in range(n):
            powers = [np.broadcast_to(np.eye(k, dtype=complex), (batch, k, k))]
            for _ in range(d):
                powers.append(powers[-1] @ mats[j])
            stacked = np.stack(powers)
            U.append([np.einsum("e,ebij->bij", self.coeffs[j][r], stacked[:r + 1])
                      for r in range(d + 1)])

        acc = np.full(batch, float(k))  # the empty word contributes ||I||^2

        def descend(letter: int, run: int, product: np.ndarray,
                    base: np.ndarray | None, length: int):
            acc[:] += np.sum(np.abs(product) ** 2, axis=(1, 2))
            if length == d:
                return
            for j in range(1, n + 1):
                if j == letter:
                    grown = (U[j - 1][run + 1] if base is None
                             else base @ U[j - 1][run + 1])
                    descend(j, run + 1, grown, base, length + 1)
                else:
                    descend(j, 1, product @ U[j - 1][1], product, length + 1)

        for j in range(1, n + 1):
            descend(j, 1, U[j - 1][1], None, 1)
        return acc / k


def trace_evaluator(kernel: KernelRep):
    """Pick the cheapest exact evaluation strategy for Hermitian samples."""
    if kernel.n == 1:
        return HermitianEigenTraceEvaluator(kernel)
    if getattr(kernel, "single_bases", None) is not None:
        return FreeProductTraceEvaluator(kernel)
    return GenericTraceEvaluator(kernel)


def observable_traces(f: NcPolynomial, mats: Sequence[np.ndarray]) -> np.ndarray:
    """Normalized traces tr_k f(A) over a batch of tuples."""
    batch, k = mats[0].shape[0], mats[0].shape[1]
    powers: dict[Word, np.ndarray] = {
        EMPTY_WORD: np.broadcast_to(np.eye(k, dtype=complex), (batch, k, k))}

    def power(w: Word) -> np.ndarray:
        m = powers.get(w)
        if m is None:
            m = power(Word(w.letters[:-1])) @ mats[w.letters[-1] - 1]
            powers[w] = m
        return m

    out = np.zeros(batch, dtype=complex)
    for w, c in f.terms.items():
        out += complex(c) * np.einsum("bii->b", power(w))
    return out.real / k


# ---------------------------------------------------------------------------
# rejection sampling
# ---------------------------------------------------------------------------

def _worker_shard(evaluator, spec: LevelSetSpec, config: SamplerConfig,
                  n_vars: int, quota: int, f: NcPolynomial, worker_index: int,
                  draw_budget: int, batch_size: int):
    rng = np.random.Generator(np.random.Philox(key=config.seed ^ worker_index))
    lo = spec.target - spec.epsilon
    hi = spec.target + spec.epsilon
    inv_d = 1.0 / spec.d
    values: list[np.ndarray] = []
    collected = 0
    draws = 0
    accepted_all = 0
    while collected < quota:
        if draws >= draw_budget:
            raise RejectionError(
                f"draw budget {draw_budget} exhausted with {collected}/{quota} "
                f"accepted (worker {worker_index})")
        batch = min(batch_size, draw_budget - draws)
        mats = draw_tuple(config, n_vars, rng, batch)
        draws += batch
        phi = evaluator.trace_values(mats) ** inv_d
        mask = (phi >= lo) & (phi <= hi)
        accepted_all += int(mask.sum())
        if draws >= RATE_CHECK_AFTER and accepted_all / draws < RATE_FLOOR:
            raise RejectionError(
                f"acceptance rate {accepted_all / draws:.2e} below {RATE_FLOOR} "
                f"after {draws} draws: band and sampler are mismatched")
        if mask.any():
            take = min(quota - collected, int(mask.sum()))
            idx = np.nonzero(mask)[0][:take]
            accepted = [m[idx] for m in mats]
            values.append(observable_traces(f, accepted))
            collected += take
    return np.concatenate(values) if values else np.empty(0), draws, accepted_all


def rejection_sample(kernel: KernelRep, spec: LevelSetSpec,
                     config: SamplerConfig, N: int, f: NcPolynomial,
                     draw_cutoff: int = 10 ** 9,
                     batch_size: int = DEFAULT_BATCH) -> SampleReport:
    """Draw until N accepted tuples, then average tr_k f over them.

    Deterministic for fixed (seed, workers, config): each worker owns an
    independent Philox stream and a fixed share of the quota, and shares
    are concatenated in worker order.
    """
    if N < 1:
        raise ValueError("need at least one accepted sample")
    evaluator = trace_evaluator(kernel)
    n_vars = kernel.n
    started = time.perf_counter()
    workers = config.workers
    quotas = [N // workers + (1 if i < N % workers else 0) for i in range(workers)]
    budget = draw_cutoff // workers

    results = []
    if workers == 1:
        results.append(_worker_shard(evaluator, spec, config, n_vars,
                                     quotas[0], f, 0, budget, batch_size))
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_worker_shard, evaluator, spec, config,
                                   n_vars, quotas[i], f, i, budget, batch_size)
                       for i in range(workers) if quotas[i] > 0]
            results = [fut.result() for fut in futures]

    samples = np.concatenate([r[0] for r in results])
    draws = sum(r[1] for r in results)
    band_hits = sum(r[2] for r in results)
    wall = time.perf_counter() - started
    mean = float(np.mean(samples))
    stderr = float(np.std(samples, ddof=1) / np.sqrt(len(samples))) if len(samples) > 1 else 0.0
    return SampleReport(config=config, d=spec.d, epsilon=spec.epsilon,
                        target=N, accepted=len(samples), draws=draws,
                        band_hits=band_hits, mean=mean, stderr=stderr,
                        wall_time=wall, observable=f.text())


# ---------------------------------------------------------------------------
# figure grids
# ---------------------------------------------------------------------------

@dataclass
class FigureConfig:
    law: str                      # semicircle | poisson
    vars: int
    degrees: list[int]
    ks: list[int]
    epsilon: float
    samples: int
    observable: str
    seed: int
    sigma: float = 1.0
    c: float | None = None
    variance: float = 1.0
    workers: int = 1
    convention: str = "entry"
    cutoff: int = 10 ** 9

    @staticmethod
    def parse(text: str) -> "FigureConfig":
        raw: dict[str, str] = {}
        for line_no, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"line {line_no}: expected key = value")
            key, value = (s.strip() for s in line.split("=", 1))
            raw[key] = value

        def ints(key):
            return [int(s) for s in raw[key].replace(",", " ").split()]

        required = ("law", "vars", "degree", "k", "epsilon", "samples",
                    "observable", "seed")
        missing = [key for key in required if key not in raw]
        if missing:
            raise ValueError(f"missing config keys: {', '.join(missing)}")
        return FigureConfig(
            law=raw["law"],
            vars=int(raw["vars"]),
            degrees=ints("degree"),
            ks=ints("k"),
            epsilon=float(raw["epsilon"]),
            samples=int(raw["samples"]),
            observable=raw["observable"],
            seed=int(raw["seed"]),
            sigma=float(raw.get("sigma", "1")),
            c=float(raw["c"]) if "c" in raw else None,
            variance=float(raw.get("variance", "1")),
            workers=int(raw.get("workers", "1")),
            convention=raw.get("convention", "entry"),
            cutoff=int(float(raw.get("cutoff", str(10 ** 9)))),
        )


def build_experiment_kernel(law: str, n: int, d: int, variance=1, c=None) -> KernelRep:
    from fractions import Fraction
    if law == "semicircle":
        state = semicircle_state(Fraction(variance), n)
    elif law == "poisson":
        if c is None:
            raise ValueError("poisson law needs the rate c")
        state = free_poisson_state(Fraction(c), n)
    else:
        raise ValueError(f"unknown law {law!r}")
    if n > 1:
        return cd_kernel_free_product(state, d)
    return cd_kernel(state, d)


def run_figure(config: FigureConfig) -> list[SampleReport]:
    """One rejection-sampling run per (d, k) grid point."""
    f = parse_poly(config.observable, n=config.vars)
    reports = []
    for d in config.degrees:
        kernel = build_experiment_kernel(config.law, config.vars, d,
                                         config.variance, config.c)
        for k in config.ks:
            if config.law == "poisson":
                sampler = SamplerConfig(law="wishart", k=k, c=config.c,
                                        seed=config.seed, workers=config.workers)
            else:
                sampler = SamplerConfig(law="goe", k=k, sigma=config.sigma,
                                        seed=config.seed, workers=config.workers,
                                        convention=config.convention)
            spec = LevelSetSpec(target=config.vars, epsilon=config.epsilon,
                                k=k, d=d)
            reports.append(rejection_sample(kernel, spec, sampler,
                                            config.samples, f,
                                            draw_cutoff=config.cutoff))
    return reports


def reports_to_csv(reports: list[SampleReport]) -> str:
    lines = [CSV_HEADER]
    lines.extend(r.csv_row() for r in reports)
    return "\n".join(lines) + "\n"
