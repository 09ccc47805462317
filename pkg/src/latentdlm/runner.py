"""Model fitting front end: run configuration, data preparation, chains and output files."""
from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__
from .bqr_model import BQRData, BQRPriors, BQRState, bqr_constants, bqr_gibbs_sweep
from .diagnostics import (
    MIN_IF_LENGTH,
    hpd_interval,
    inclusion_probabilities,
    inefficiency_factor,
    lag_response_summary,
    pearson,
    posterior_summary,
)
from .distributions import RngStream
from .gaussian_core import FactorizationError, GaussianPrior
from .lag_design import (
    BasisMatrix,
    DesignMatrix,
    LagSpec,
    assemble_design,
    bspline_basis,
    build_lag_matrix,
    lag_response_curve,
    place_knots,
)
from .nb_model import NBData, NBPriors, NBState, nb_gibbs_sweep
from .variable_selection import SelectionConfig

log = logging.getLogger(__name__)

START_STRATEGIES = ("intercept-only", "full", "random")
IMPUTATIONS = ("none", "mean", "forward-fill")


class ValidationError(ValueError):
    """Input data or configuration failed validation."""


class NumericalFailure(RuntimeError):
    """A chain hit a numerical failure; ``dump_path`` holds the state for reproduction."""

    def __init__(self, message, dump_path=None):
        super().__init__(message)
        self.dump_path = dump_path


@dataclass
class RunConfig:
    model: str = "nb"
    iterations: int = 50000
    burn_in: int | None = None
    thin: int = 10
    chains: int = 4
    starts: tuple = ("intercept-only", "full", "random", "random")
    prior_variance: float = 100.0
    inclusion_prior: float = 0.5
    xi_shape: float = 2.0
    xi_rate: float = 1.0 / 50.0
    fixed_xi: float | None = None
    q: float = 0.9
    tau: int = 40
    knots: int = 3
    degree: int = 3
    start_offset: int = 0
    seed: int = 0
    imputation: str = "none"
    dichotomize: float | None = None
    response: str = "y"
    statics: tuple | None = None
    dynamics: tuple | None = None
    intercept: bool = True
    center_dynamics: bool = False
    selection: bool = True
    group_selection: bool = False
    lock_intercept: bool = True
    workers: int = 1

    def __post_init__(self):
        if self.burn_in is None:
            self.burn_in = self.iterations // 2
        self.starts = tuple(self.starts)
        if self.statics is not None:
            self.statics = tuple(self.statics)
        if self.dynamics is not None:
            self.dynamics = tuple(self.dynamics)
        self.validate()

    def validate(self):
        if self.model not in ("nb", "bqr"):
            raise ValidationError(f"model must be 'nb' or 'bqr', got {self.model!r}")
        if self.iterations < 1 or not 0 <= self.burn_in < self.iterations:
            raise ValidationError(f"need 0 <= burn_in < iterations (got {self.burn_in}, {self.iterations})")
        if self.thin < 1:
            raise ValidationError("thin must be at least 1")
        if self.chains < 1:
            raise ValidationError("chains must be at least 1")
        bad = [s for s in self.starts if s not in START_STRATEGIES]
        if bad or not self.starts:
            raise ValidationError(f"unknown start strategies {bad}; choose from {START_STRATEGIES}")
        if self.imputation not in IMPUTATIONS:
            raise ValidationError(f"imputation must be one of {IMPUTATIONS}")
        if not 0 < self.inclusion_prior < 1:
            raise ValidationError("inclusion_prior must lie in (0, 1)")
        if not 0 < self.q < 1:
            raise ValidationError("q must lie in (0, 1)")
        if self.prior_variance <= 0 or self.xi_shape <= 0 or self.xi_rate <= 0:
            raise ValidationError("prior variance and xi prior parameters must be positive")

    def start_for(self, chain: int) -> str:
        return self.starts[chain % len(self.starts)]

    def to_dict(self) -> dict:
        # worker count only affects scheduling, never the draws
        d = asdict(self)
        d.pop("workers")
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d


PRESETS = {
    "simulation": {"iterations": 50000, "thin": 10},
    "real": {"iterations": 100000, "thin": 10},
}


def _coerce(f, raw: str):
    text = raw.strip()
    kind = str(f.type)
    if text.lower() in ("none", "") and ("None" in kind):
        return None
    if "tuple" in kind:
        return tuple(s.strip() for s in text.split(",") if s.strip())
    if "bool" in kind:
        if text.lower() in ("1", "true", "yes", "on"):
            return True
        if text.lower() in ("0", "false", "no", "off"):
            return False
        raise ValidationError(f"{f.name}: expected a boolean, got {raw!r}")
    if "int" in kind and "float" not in kind:
        return int(text)
    if "float" in kind:
        if "/" in text:
            num, den = text.split("/", 1)
            return float(num) / float(den)
        return float(text)
    return text


def parse_config_text(text: str) -> dict:
    """Parse flat ``key = value`` lines (``#`` starts a comment)."""
    by_name = {f.name: f for f in fields(RunConfig)}
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"config line {lineno}: expected key=value, got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in by_name:
            raise ValidationError(f"config line {lineno}: unknown key {key!r}")
        try:
            out[key] = _coerce(by_name[key], value)
        except ValueError as exc:
            raise ValidationError(f"config line {lineno}: {exc}") from None
    return out


# ---------------------------------------------------------------------------
# data preparation
# ---------------------------------------------------------------------------


def read_table(path) -> dict:
    """Read a CSV into ``{column: float array}``; blanks and ``NA`` become ``nan``."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValidationError(f"{path}: empty file") from None
        rows = list(reader)
    cols = {h: np.empty(len(rows)) for h in header}
    for r, row in enumerate(rows, start=2):
        if len(row) != len(header):
            raise ValidationError(f"{path}: row {r} has {len(row)} fields, header has {len(header)}")
        for h, cell in zip(header, row):
            cell = cell.strip()
            if cell in ("", "NA", "NaN", "nan"):
                val = math.nan
            else:
                try:
                    val = float(cell)
                except ValueError:
                    raise ValidationError(f"{path}: column {h!r} row {r} is not numeric ({cell!r})") from None
            cols[h][r - 2] = val
    return cols


def _impute(name, values, how, first_row):
    bad = ~np.isfinite(values)
    if not bad.any():
        return values
    if how == "none":
        r = int(np.flatnonzero(bad)[0])
        raise ValidationError(f"column {name!r} has a missing value at data row {first_row + r} "
                              f"(set imputation=mean or forward-fill)")
    out = values.copy()
    if how == "mean":
        out[bad] = np.mean(values[~bad])
    else:
        idx = np.where(~bad, np.arange(values.size), 0)
        np.maximum.accumulate(idx, out=idx)
        out = values[idx]
        # leading gaps take the first observed value
        first = np.flatnonzero(~bad)[0]
        out[:first] = values[first]
    return out


@dataclass
class PreparedData:
    data: NBData | BQRData
    design: DesignMatrix
    bases: dict = field(default_factory=dict)  # dynamic covariate -> BasisMatrix
    n_history: int = 0


def prepare_data(table: dict, config: RunConfig) -> PreparedData:
    """Build the design and response from a column table.

    Rows run oldest to newest. The last ``len - tau - start_offset`` rows are
    response rows; earlier rows only supply dynamic history. Design rows are
    newest-first to match the lag-matrix layout.
    """
    if config.response not in table:
        raise ValidationError(f"response column {config.response!r} not found")
    dyn_names = list(config.dynamics) if config.dynamics is not None else [c for c in table if c.startswith("dyn_")]
    if config.statics is not None:
        static_names = list(config.statics)
    else:
        static_names = [c for c in table if c != config.response and c not in dyn_names]
    for c in (*dyn_names, *static_names):
        if c not in table:
            raise ValidationError(f"column {c!r} not found")
    n_rows = len(table[config.response])
    lead = config.tau + config.start_offset
    n_resp = n_rows - lead
    if n_resp < 1:
        raise ValidationError(f"{n_rows} rows cannot cover tau={config.tau} lags plus start_offset={config.start_offset}")

    y = table[config.response][lead:]
    if not np.all(np.isfinite(y)):
        r = int(np.flatnonzero(~np.isfinite(y))[0])
        raise ValidationError(f"column {config.response!r} is missing at data row {lead + r + 1}")
    if config.dichotomize is not None:
        y = (y > config.dichotomize).astype(float)
    if config.model == "bqr" and not np.all((y == 0) | (y == 1)):
        raise ValidationError("bqr needs a 0/1 response; supply dichotomize=<threshold> for count data")
    if config.model == "nb" and (np.any(y < 0) or np.any(y != np.round(y))):
        raise ValidationError("nb needs non-negative integer responses")

    statics = []
    for name in static_names:
        col = _impute(name, table[name][lead:], config.imputation, lead + 1)
        statics.append((name, col[::-1]))
    dynamics, bases = [], {}
    spec = LagSpec(tau=config.tau, n=n_resp - 1, start_offset=config.start_offset)
    basis = bspline_basis(config.tau, config.degree, place_knots(config.tau, config.knots) if config.knots else ())
    for name in dyn_names:
        z = _impute(name, table[name], config.imputation, 1)
        if config.center_dynamics:
            z = z - z.mean()
        label = name[4:] if name.startswith("dyn_") else name
        dynamics.append((build_lag_matrix(z, spec, name=label), basis))
        bases[label] = basis
    design = assemble_design(statics, config.intercept, dynamics)
    y = y[::-1].astype(np.int64)
    data = NBData(y, design) if config.model == "nb" else BQRData(y, design)
    return PreparedData(data=data, design=design, bases=bases, n_history=lead)


# ---------------------------------------------------------------------------
# chains
# ---------------------------------------------------------------------------


@dataclass
class ChainResult:
    index: int
    start: str
    labels: list
    beta: np.ndarray  # draws x P
    gamma: np.ndarray  # draws x P, bool
    xi: np.ndarray | None
    acceptance: float

    def param_matrix(self):
        """Draw matrix and labels for the continuous parameters."""
        if self.xi is None:
            return self.beta, list(self.labels)
        return np.column_stack([self.beta, self.xi]), [*self.labels, "xi"]


def _selection_config(design: DesignMatrix, config: RunConfig) -> SelectionConfig:
    kinds = [c.kind for c in design.group_map]
    locked = np.array([k == "intercept" and config.lock_intercept for k in kinds])
    groups = None
    if config.group_selection:
        names = design.covariates
        groups = np.array([names.index(c.covariate) for c in design.group_map])
    return SelectionConfig(prior_inclusion=config.inclusion_prior, locked=locked, groups=groups,
                           enabled=config.selection)


def initial_gamma(strategy: str, selection: SelectionConfig, p: int, rng: np.random.Generator) -> np.ndarray:
    locked = selection.locked_mask(p)
    if strategy == "full":
        gamma = np.ones(p, dtype=bool)
    elif strategy == "intercept-only":
        gamma = locked.copy()
    else:
        gamma = locked | (rng.random(p) < 0.5)
    if selection.groups is not None:
        # whole-group proposals need each group in a single state
        for g in np.unique(selection.groups):
            members = selection.groups == g
            gamma[members] = gamma[np.flatnonzero(members)[0]] or bool(locked[members].any())
    if not gamma.any() and locked.any():
        gamma = locked.copy()
    return gamma


def _initial_state(prepared: PreparedData, config: RunConfig, gamma: np.ndarray):
    data = prepared.data
    p = data.X.shape[1]
    beta = np.zeros(p)
    if config.model == "nb":
        y = data.y.astype(float)
        mean, var = y.mean(), y.var()
        if config.fixed_xi is not None:
            xi = float(config.fixed_xi)
        elif var > mean > 0:
            xi = float(np.clip(mean * mean / (var - mean), 0.5, 1000.0))
        else:
            xi = 100.0
        kinds = [c.kind for c in data.design.group_map]
        if "intercept" in kinds and mean > 0:
            beta[kinds.index("intercept")] = math.log(mean / xi)
        beta = np.where(gamma, beta, 0.0)
        n = y.size
        return NBState(beta=beta, gamma=gamma, omega=np.ones(n), xi=xi, psi=np.zeros(n, dtype=np.int64))
    n = data.y.size
    ystar = np.where(data.y == 1, 1.0, -1.0)
    return BQRState(beta=beta, gamma=gamma, ystar=ystar, nu=np.ones(n))


def _dump_state(path, chain, iteration, state, config, exc):
    payload = {
        "chain": chain,
        "iteration": iteration,
        "seed": config.seed,
        "stream": chain,
        "error": repr(exc),
        "state": {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in asdict(state).items()},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1)


def run_chain(prepared: PreparedData, config: RunConfig, chain: int, dump_dir=None) -> ChainResult:
    """Run one chain on its own random stream ``(config.seed, chain)``."""
    rng = RngStream(config.seed, chain).generator()
    design = prepared.design
    p = design.X.shape[1]
    selection = _selection_config(design, config)
    strategy = config.start_for(chain)
    gamma = initial_gamma(strategy, selection, p, rng)
    state = _initial_state(prepared, config, gamma)
    prior = GaussianPrior.isotropic(p, config.prior_variance)
    if config.model == "nb":
        priors = NBPriors(prior, a0=config.xi_shape, b0=config.xi_rate, fixed_xi=config.fixed_xi)

        def sweep(s):
            return nb_gibbs_sweep(s, prepared.data, priors, selection, rng)
    else:
        priors = BQRPriors(prior)
        constants = bqr_constants(config.q)

        def sweep(s):
            return bqr_gibbs_sweep(s, prepared.data, constants, priors, selection, rng)

    kept = [it for it in range(config.burn_in + 1, config.iterations + 1) if (it - config.burn_in) % config.thin == 0]
    n_keep = len(kept)
    betas = np.empty((n_keep, p))
    gammas = np.empty((n_keep, p), dtype=bool)
    xis = np.empty(n_keep) if config.model == "nb" else None
    flips = 0
    k = 0
    report_every = max(config.iterations // 10, 1)
    for it in range(1, config.iterations + 1):
        prev_gamma = state.gamma
        try:
            with np.errstate(over="raise", invalid="raise", divide="raise"):
                state = sweep(state)
        except (FactorizationError, FloatingPointError, np.linalg.LinAlgError, ValueError) as exc:
            dump = None
            if dump_dir is not None:
                dump = Path(dump_dir) / f"chain_{chain}_failure.json"
                _dump_state(dump, chain, it, state, config, exc)
            raise NumericalFailure(f"chain {chain} failed at iteration {it}: {exc}", dump) from exc
        flips += not np.array_equal(prev_gamma, state.gamma)
        if k < n_keep and it == kept[k]:
            betas[k] = state.beta
            gammas[k] = state.gamma
            if xis is not None:
                xis[k] = state.xi
            k += 1
        if it % report_every == 0:
            log.info("chain %d: iteration %d/%d", chain, it, config.iterations)
    return ChainResult(index=chain, start=strategy, labels=design.labels, beta=betas, gamma=gammas, xi=xis,
                       acceptance=flips / config.iterations)


def _run_chain_star(args):
    return run_chain(*args)


def fit_chains(prepared: PreparedData, config: RunConfig, dump_dir=None, workers: int | None = None):
    """Run ``config.chains`` chains, serially or in worker processes.

    Each chain owns the stream ``(seed, chain)``, so results do not depend on
    how chains are scheduled.
    """
    workers = config.workers if workers is None else workers
    jobs = [(prepared, config, c, dump_dir) for c in range(config.chains)]
    if workers <= 1 or config.chains == 1:
        return [run_chain(*job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_chain_star, jobs))


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------


def _f(x) -> str:
    x = float(x)
    if math.isnan(x):
        return "NA"
    return repr(x)


def write_chain_csv(result: ChainResult, path):
    draws, labels = result.param_matrix()
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([*labels, *[f"gamma[{lab}]" for lab in result.labels]])
        for row, g in zip(draws, result.gamma):
            w.writerow([*map(_f, row), *map(str, g.astype(int))])


def read_chain_csv(path):
    """Read a chain file back into ``(draws, labels, gamma, gamma_labels)``."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValidationError(f"{path}: empty draws file") from None
        rows = list(reader)
    g_idx = [j for j, h in enumerate(header) if h.startswith("gamma[")]
    p_idx = [j for j, h in enumerate(header) if not h.startswith("gamma[")]
    try:
        mat = np.array([[float("nan") if c == "NA" else float(c) for c in r] for r in rows], dtype=float)
    except ValueError as exc:
        raise ValidationError(f"{path}: malformed draws file ({exc})") from None
    if rows and (mat.ndim != 2 or mat.shape[1] != len(header)):
        raise ValidationError(f"{path}: malformed draws file (ragged rows)")
    if not rows:
        mat = np.zeros((0, len(header)))
    labels = [header[j] for j in p_idx]
    glabels = [header[j][6:-1] for j in g_idx]
    return mat[:, p_idx], labels, mat[:, g_idx].astype(bool), glabels


def _write_rows(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def lag_response_rows(betas, labels, bases: dict, prob: float = 0.95):
    """Long-format rows ``(covariate, lag, mean, lower, upper)`` from coefficient draws."""
    rows = []
    for name, basis in bases.items():
        cols = [j for j, lab in enumerate(labels) if lab.startswith(f"{name}[")]
        if not cols:
            continue
        curves = lag_response_curve(basis, betas[:, cols])
        mean, lo, hi = lag_response_summary(curves, prob)
        for k in range(basis.tau + 1):
            rows.append([name, str(k), _f(mean[k]), _f(lo[k]), _f(hi[k])])
    return rows


def write_fit_outputs(results, prepared: PreparedData, config: RunConfig, out_dir):
    """Write chain draws, pooled summaries, inclusion table, lag-response curves and a manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for r in results:
        write_chain_csv(r, out / f"chain_{r.index}.csv")

    mats = [r.param_matrix() for r in results]
    labels = mats[0][1]
    pooled = np.vstack([m[0] for m in mats])
    summary = posterior_summary(pooled, labels)
    per_chain_if = []
    for j in range(len(labels)):
        vals = [inefficiency_factor(m[0][:, j]) for m in mats if m[0].shape[0] >= MIN_IF_LENGTH]
        per_chain_if.append(float(np.mean(vals)) if vals else float("nan"))
    head = ["parameter", "mean", "sd", "q2.5", "q50", "q97.5", "hpd_lower", "hpd_upper", "inefficiency"]
    srows = [[s.label, *map(_f, (s.mean, s.sd, s.q025, s.q50, s.q975, s.hpd_lower, s.hpd_upper, ifv))]
             for s, ifv in zip(summary, per_chain_if)]
    _write_rows(out / "summary.csv", head, srows)
    with open(out / "summary.json", "w", encoding="utf-8") as fh:
        json.dump([dict(zip(head, [r[0], *[None if v == "NA" else float(v) for v in r[1:]]])) for r in srows],
                  fh, indent=2)
        fh.write("\n")

    glabels = results[0].labels
    incl = [inclusion_probabilities(r.gamma) for r in results]
    pooled_incl = inclusion_probabilities(np.vstack([r.gamma for r in results]))
    _write_rows(out / "inclusion.csv", ["parameter", *[f"chain_{r.index}" for r in results], "pooled"],
                [[lab, *[_f(v[j]) for v in incl], _f(pooled_incl[j])] for j, lab in enumerate(glabels)])

    betas = np.vstack([r.beta for r in results])
    _write_rows(out / "lag_response.csv", ["covariate", "lag", "mean", "lower", "upper"],
                lag_response_rows(betas, glabels, prepared.bases))

    manifest = {
        "package_version": __version__,
        "config": config.to_dict(),
        "n_observations": int(prepared.data.y.size),
        "n_history_rows": prepared.n_history,
        "columns": [c._asdict() for c in prepared.design.group_map],
        "bases": {k: {"tau": b.tau, "degree": b.degree, "interior_knots": list(b.interior_knots)}
                  for k, b in prepared.bases.items()},
        "chains": [{"index": r.index, "start": r.start, "draws": int(r.beta.shape[0]),
                    "gamma_move_rate": r.acceptance} for r in results],
    }
    with open(out / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return out


def bases_from_manifest(manifest: dict) -> dict:
    out = {}
    for name, spec in manifest.get("bases", {}).items():
        out[name] = bspline_basis(int(spec["tau"]), int(spec["degree"]), spec["interior_knots"])
    return out


# ---------------------------------------------------------------------------
# diagnostics report
# ---------------------------------------------------------------------------


def diagnose_chains(chain_files, corr_threshold: float = 0.9) -> dict:
    """Inefficiency factors, inclusion frequencies and flagged correlations."""
    chains = []
    for path in chain_files:
        draws, labels, gamma, glabels = read_chain_csv(path)
        chains.append((Path(path).name, draws, labels, gamma, glabels))
    if not chains:
        raise ValidationError("no chain files given")
    labels = chains[0][2]
    if any(c[2] != labels for c in chains):
        raise ValidationError("chain files have different parameter columns")

    if_rows = []
    for name, draws, _, _, _ in chains:
        for j, lab in enumerate(labels):
            col = draws[:, j]
            if col.size < MIN_IF_LENGTH:
                value = "unavailable"
            else:
                value = inefficiency_factor(col)
            if_rows.append({"chain": name, "parameter": lab, "inefficiency": value, "draws": int(col.size)})

    incl_rows = []
    for name, _, _, gamma, glabels in chains:
        if gamma.shape[0]:
            freq = inclusion_probabilities(gamma)
            incl_rows.extend({"chain": name, "parameter": g, "inclusion": float(f)} for g, f in zip(glabels, freq))

    pooled = np.vstack([c[1] for c in chains])
    pairs = []
    if "intercept" in labels and "xi" in labels:
        pairs.append(("intercept", "xi"))
    varying = [j for j in range(len(labels)) if pooled.shape[0] > 1 and np.ptp(pooled[:, j]) > 0]
    for a_i, a in enumerate(varying):
        for b in varying[a_i + 1 :]:
            pair = (labels[a], labels[b])
            if pair in pairs:
                continue
            r = pearson(pooled[:, a], pooled[:, b])
            if abs(r) >= corr_threshold:
                pairs.append(pair)
    corr_rows = []
    for a, b in pairs:
        ja, jb = labels.index(a), labels.index(b)
        corr_rows.append({"a": a, "b": b, "pooled": pearson(pooled[:, ja], pooled[:, jb]) if pooled.shape[0] else None,
                          "per_chain": {c[0]: (pearson(c[1][:, ja], c[1][:, jb]) if c[1].shape[0] > 1 else None)
                                        for c in chains}})
    hpd = {}
    for j, lab in enumerate(labels):
        if pooled.shape[0]:
            hpd[lab] = list(hpd_interval(pooled[:, j]))
    return {"inefficiency": if_rows, "inclusion": incl_rows, "correlations": corr_rows, "hpd95": hpd}
