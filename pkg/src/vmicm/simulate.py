"""Scenario generators, evaluation metrics, and the replicated study harness.

Datasets are produced by a counter-based RNG (numpy's Philox keyed by
``(seed, replicate)``) so replicates are independent, reproducible, and
identical whether run serially or in a process pool.
"""
from __future__ import annotations

import concurrent.futures
from dataclasses import dataclass, field

import numpy as np

from .basis import transformed_basis_matrix
from .exceptions import ParameterError, StudyError
from .model import (
    Coefficients,
    Dataset,
    FittedModel,
    FunctionClassification,
    LoadingVector,
    index_values,
)
from .solver import SolverConfig, fit, oracle_fit
from .tuning import TuningConfig

#: Identity of the random number generation scheme, recorded in reports.
RNG_ALGORITHM = "numpy Philox4x64 counter-based generator, key=(seed, replicate)"

SCENARIO_KINDS = ("continuous", "discrete")


@dataclass(frozen=True)
class ScenarioConfig:
    """Dimensions, replicate count, and RNG seed for one study scenario."""

    kind: str
    n: int = 500
    p: int = 50
    q: int = 5
    replicates: int = 100
    seed: int = 0
    noise_sd: float = 1.0

    def __post_init__(self):
        if self.kind not in SCENARIO_KINDS:
            raise ParameterError(f"unknown scenario kind {self.kind!r}")
        if min(self.n, self.p, self.q, self.replicates) < 1:
            raise ParameterError("n, p, q, replicates must all be >= 1")
        if self.kind == "continuous" and (self.p < 5 or self.q < 2):
            raise ParameterError("continuous scenario needs p >= 5 and q >= 2")
        if self.kind == "discrete" and self.p < 10:
            raise ParameterError("discrete scenario needs p >= 10")
        if self.noise_sd < 0:
            raise ParameterError("noise_sd must be >= 0")


@dataclass(frozen=True)
class FunctionForm:
    """Coefficient-function shape a*sin(2 pi u) + b*cos(pi u) + c."""

    amp_sin: float = 0.0
    amp_cos: float = 0.0
    const: float = 0.0

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        return (self.amp_sin * np.sin(2.0 * np.pi * u)
                + self.amp_cos * np.cos(np.pi * u) + self.const)

    @property
    def category(self) -> str:
        if self.amp_sin != 0.0 or self.amp_cos != 0.0:
            return "varying"
        return "constant" if self.const != 0.0 else "zero"


@dataclass(frozen=True)
class TrueModel:
    """Generating truth: function forms, loadings, and classification."""

    forms: tuple[FunctionForm, ...]
    beta: LoadingVector
    classification: FunctionClassification


def _true_beta(q: int) -> LoadingVector:
    beta = np.zeros(q)
    beta[0] = beta[1] = 1.0 / np.sqrt(2.0)
    return LoadingVector(beta)


def _classify_forms(forms) -> FunctionClassification:
    varying, constant, zero = [], [], []
    for k, form in enumerate(forms):
        if k == 0:
            continue
        {"varying": varying, "constant": constant, "zero": zero}[form.category].append(k)
    return FunctionClassification(varying=tuple(varying), constant=tuple(constant),
                                  zero=tuple(zero))


def _continuous_forms(p: int) -> tuple[FunctionForm, ...]:
    forms = [FunctionForm(amp_sin=2.0),
             FunctionForm(amp_cos=2.0, const=2.0),
             FunctionForm(amp_sin=1.0, amp_cos=1.0, const=1.0),
             FunctionForm(const=2.0),
             FunctionForm(const=2.5)]
    forms.extend(FunctionForm() for _ in range(p - 4))
    return tuple(forms)


def _discrete_forms(p: int) -> tuple[FunctionForm, ...]:
    varying_a = FunctionForm(amp_cos=2.0, const=2.0)
    varying_b = FunctionForm(amp_sin=1.0, amp_cos=1.0, const=1.0)
    forms = [FunctionForm(amp_sin=2.0)]
    forms.extend([varying_a, varying_b] * 3)
    forms.extend([FunctionForm(const=2.0)] * 3)
    forms.extend(FunctionForm() for _ in range(p - 9))
    return tuple(forms)


def _rng(seed: int, replicate: int) -> np.random.Generator:
    key = np.array([np.uint64(seed), np.uint64(replicate)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _assemble(config: ScenarioConfig, forms, x, gmat, eps) -> tuple[Dataset, TrueModel]:
    beta = _true_beta(config.q)
    g = np.column_stack([np.ones(config.n), gmat])
    u = x @ beta.beta
    y = sum(forms[k](u) * g[:, k] for k in range(config.p + 1)) + eps
    truth = TrueModel(forms=forms, beta=beta, classification=_classify_forms(forms))
    return Dataset(y=y, x=x, g=g), truth


def gen_continuous(config: ScenarioConfig, replicate: int = 0
                   ) -> tuple[Dataset, TrueModel]:
    """Continuous-gene scenario: uniform loadings, standard normal genes.

    Draw order per replicate is fixed (X, then G, then noise) as part of the
    reproducibility contract.
    """
    if config.kind != "continuous":
        raise ParameterError("config.kind must be 'continuous'")
    rng = _rng(config.seed, replicate)
    x = rng.uniform(0.0, 1.0, size=(config.n, config.q))
    gmat = rng.standard_normal(size=(config.n, config.p))
    eps = config.noise_sd * rng.standard_normal(config.n)
    return _assemble(config, _continuous_forms(config.p), x, gmat, eps)


def gen_discrete(config: ScenarioConfig, replicate: int = 0
                 ) -> tuple[Dataset, TrueModel]:
    """SNP scenario: genotype values 0/1/2 from per-gene allele frequencies.

    Frequencies are 0.5 for genes 1,2,7, 0.3 for 3,4,8, 0.1 for 5,6,9, and
    uniform on (0.05, 0.5) for the rest.  Draw order per replicate: allele
    frequencies, X, G, noise.
    """
    if config.kind != "discrete":
        raise ParameterError("config.kind must be 'discrete'")
    rng = _rng(config.seed, replicate)
    maf = np.empty(config.p)
    # gene index order: 1,2 -> .5; 3,4 -> .3; 5,6 -> .1; 7 -> .5; 8 -> .3; 9 -> .1
    maf[:9] = [0.5, 0.5, 0.3, 0.3, 0.1, 0.1, 0.5, 0.3, 0.1]
    if config.p > 9:
        maf[9:] = rng.uniform(0.05, 0.5, size=config.p - 9)
    x = rng.uniform(0.0, 1.0, size=(config.n, config.q))
    u01 = rng.uniform(0.0, 1.0, size=(config.n, config.p))
    p0 = maf ** 2
    p1 = 2.0 * maf * (1.0 - maf)
    gmat = (u01 > p0).astype(float) + (u01 > p0 + p1).astype(float)
    eps = config.noise_sd * rng.standard_normal(config.n)
    return _assemble(config, _discrete_forms(config.p), x, gmat, eps)


def generate(config: ScenarioConfig, replicate: int = 0) -> tuple[Dataset, TrueModel]:
    if config.kind == "continuous":
        return gen_continuous(config, replicate)
    return gen_discrete(config, replicate)


# ---------------------------------------------------------------------------
# metrics

def _fk_on_grid(fit_model: FittedModel, k: int, grid: np.ndarray) -> np.ndarray:
    T = transformed_basis_matrix(fit_model.spec, grid, clamp_all=True)
    return fit_model.coef.constant[k] + T[:, 1:] @ fit_model.coef.varying[k]


def imse(fit_model: FittedModel, truth: TrueModel, k: int, dataset: Dataset,
         n_grid: int = 100) -> float:
    """Mean squared error of fhat_k on the fitted-index quantile grid."""
    if not 0 <= k < len(truth.forms):
        raise ParameterError(f"function index {k} out of range")
    u = index_values(dataset, fit_model.beta)
    grid = np.quantile(u, np.arange(1, n_grid + 1) / n_grid)
    diff = truth.forms[k](grid) - _fk_on_grid(fit_model, k, grid)
    return float(np.mean(diff ** 2))


def mse_beta(fits, truth: TrueModel, d: int) -> float:
    """Mean squared loading error over replicates."""
    est = np.array([f.beta.beta[d] for f in fits])
    return float(np.mean((est - truth.beta.beta[d]) ** 2))


def oracle_percentage(fits, truth: TrueModel, target: int,
                      kind: str = "function") -> float:
    """Share of replicates classifying a function (or loading) correctly."""
    if kind == "function":
        want = "varying" if target == 0 else truth.classification.category(target)
        hits = sum(f.classification.category(target) == want for f in fits)
    elif kind == "beta":
        want = truth.beta.beta[target] != 0.0
        hits = sum((f.beta.beta[target] != 0.0) == want for f in fits)
    else:
        raise ParameterError(f"unknown oracle-percentage kind {kind!r}")
    return 100.0 * hits / len(fits)


# ---------------------------------------------------------------------------
# study harness

@dataclass(frozen=True)
class ReportRow:
    name: str
    oracle_pct: float
    model_metric: float
    oracle_metric: float


@dataclass(frozen=True)
class StudyReport:
    """Aggregated selection and estimation accuracy for one scenario."""

    scenario: ScenarioConfig
    rng_algorithm: str
    function_rows: tuple[ReportRow, ...]
    beta_rows: tuple[ReportRow, ...]
    failures: tuple[tuple[int, str], ...] = ()

    def to_csv(self) -> str:
        lines = [
            f"# scenario={self.scenario.kind} n={self.scenario.n} "
            f"p={self.scenario.p} q={self.scenario.q} "
            f"replicates={self.scenario.replicates} seed={self.scenario.seed} "
            f"noise_sd={self.scenario.noise_sd:.17g}",
            f"# rng={self.rng_algorithm}",
            f"# failed_replicates={len(self.failures)}",
            "section,name,oracle_pct,model_metric,oracle_metric",
        ]
        for row in self.function_rows:
            lines.append(f"function,{row.name},{row.oracle_pct:.17g},"
                         f"{row.model_metric:.17g},{row.oracle_metric:.17g}")
        for row in self.beta_rows:
            lines.append(f"beta,{row.name},{row.oracle_pct:.17g},"
                         f"{row.model_metric:.17g},{row.oracle_metric:.17g}")
        return "\n".join(lines) + "\n"

    def to_text(self) -> str:
        def block(title, rows, metric):
            out = [title,
                   f"{'':<10}{'Oracle %':>10}{'Model ' + metric:>16}"
                   f"{'Oracle ' + metric:>16}"]
            for row in rows:
                out.append(f"{row.name:<10}{row.oracle_pct:>9.1f}%"
                           f"{row.model_metric:>16.3e}{row.oracle_metric:>16.3e}")
            return out

        head = [
            f"Scenario: {self.scenario.kind}, n={self.scenario.n}, "
            f"p={self.scenario.p}, q={self.scenario.q}, "
            f"R={self.scenario.replicates}, seed={self.scenario.seed}",
            f"RNG: {self.rng_algorithm}",
            f"Failed replicates: {len(self.failures)}",
            "",
        ]
        lines = head + block("Coefficient functions", self.function_rows, "IMSE")
        lines += [""] + block("Loadings", self.beta_rows, "MSE")
        return "\n".join(lines) + "\n"


@dataclass
class _ReplicateOutcome:
    replicate: int
    error: str | None = None
    categories: tuple[str, ...] = ()
    beta_model: np.ndarray | None = None
    beta_oracle: np.ndarray | None = None
    imse_model: np.ndarray | None = None
    imse_oracle: np.ndarray | None = None


def run_replicate(scenario: ScenarioConfig, replicate: int,
                  solver_config: SolverConfig | None = None,
                  tuning_config: TuningConfig | None = None) -> _ReplicateOutcome:
    """Generate one replicate, run the penalized and reference fits, score both."""
    solver_config = solver_config or SolverConfig()
    tuning_config = tuning_config or TuningConfig()
    try:
        dataset, truth = generate(scenario, replicate)
        model = fit(dataset, solver_config, tuning_config)
        reference = oracle_fit(dataset, model.spec, truth.classification,
                               truth.beta.support(), solver_config)
        p1 = scenario.p + 1
        imse_m = np.array([imse(model, truth, k, dataset) for k in range(p1)])
        imse_o = np.array([imse(reference, truth, k, dataset) for k in range(p1)])
        cats = tuple(model.classification.category(k) for k in range(p1))
        return _ReplicateOutcome(
            replicate=replicate, categories=cats,
            beta_model=model.beta.beta.copy(), beta_oracle=reference.beta.beta.copy(),
            imse_model=imse_m, imse_oracle=imse_o,
        )
    except Exception as exc:
        return _ReplicateOutcome(replicate=replicate, error=f"{type(exc).__name__}: {exc}")


def _worker(args) -> _ReplicateOutcome:
    return run_replicate(*args)


def run_study(scenario: ScenarioConfig, solver_config: SolverConfig | None = None,
              tuning_config: TuningConfig | None = None,
              threads: int | None = None) -> StudyReport:
    """Run all replicates (optionally in a process pool) and aggregate.

    Failed replicates are excluded and recorded; more than 10% failures
    aborts the study.  Results are assembled in replicate order, so the
    report is identical for any worker count.
    """
    jobs = [(scenario, rep, solver_config, tuning_config)
            for rep in range(scenario.replicates)]
    if threads is not None and threads <= 1:
        outcomes = [_worker(job) for job in jobs]
    else:
        with concurrent.futures.ProcessPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(_worker, jobs))
    outcomes.sort(key=lambda o: o.replicate)

    good = [o for o in outcomes if o.error is None]
    failures = tuple((o.replicate, o.error) for o in outcomes if o.error is not None)
    if len(failures) > 0.10 * scenario.replicates or not good:
        raise StudyError(f"{len(failures)} of {scenario.replicates} replicates failed")

    _, truth = generate(scenario, 0)
    p1 = scenario.p + 1
    named = [k for k in range(p1)
             if k == 0 or truth.classification.category(k) != "zero"]
    zeros = [k for k in range(1, p1) if truth.classification.category(k) == "zero"]

    cats = np.array([o.categories for o in good])
    imse_m = np.stack([o.imse_model for o in good])
    imse_o = np.stack([o.imse_oracle for o in good])
    beta_m = np.stack([o.beta_model for o in good])
    beta_o = np.stack([o.beta_oracle for o in good])

    def pct_function(k: int) -> float:
        want = "varying" if k == 0 else truth.classification.category(k)
        return 100.0 * float(np.mean(cats[:, k] == want))

    function_rows = [
        ReportRow(name=f"f{k}", oracle_pct=pct_function(k),
                  model_metric=float(imse_m[:, k].mean()),
                  oracle_metric=float(imse_o[:, k].mean()))
        for k in named
    ]
    if zeros:
        zcats = cats[:, zeros]
        function_rows.append(ReportRow(
            name="Zero",
            oracle_pct=100.0 * float(np.mean(zcats == "zero")),
            model_metric=float(imse_m[:, zeros].mean()),
            oracle_metric=float(imse_o[:, zeros].mean()),
        ))

    beta_rows = []
    for d in range(scenario.q):
        want = truth.beta.beta[d] != 0.0
        pct = 100.0 * float(np.mean((beta_m[:, d] != 0.0) == want))
        beta_rows.append(ReportRow(
            name=f"beta{d + 1}", oracle_pct=pct,
            model_metric=float(np.mean((beta_m[:, d] - truth.beta.beta[d]) ** 2)),
            oracle_metric=float(np.mean((beta_o[:, d] - truth.beta.beta[d]) ** 2)),
        ))

    return StudyReport(
        scenario=scenario, rng_algorithm=RNG_ALGORITHM,
        function_rows=tuple(function_rows), beta_rows=tuple(beta_rows),
        failures=failures,
    )
