"""MSE metrics against the probit target, experiment grids and CSV output."""

from __future__ import annotations

import csv
import inspect
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import conl as conl_mod
from .gev import DeltaRule, MnlModel, build_lnl, build_pcl, probabilities, theta0_from_cv
from .gevcov import QuadratureSpec, gev_fcm, reduce_to_rcm
from .mnp import MnpSpec, ds_moments, simulate_mnp_probabilities, xi_from_cv
from .netgraph import BUILTINS, ChoiceSet, Network, NetworkError, OdPair, load_network
from .routegen import enumerate_efficient_routes

MODELS = ("mnl", "lnl-const", "lnl-arith", "lnl-geom", "pcl", "conl")
LNL_RULES = {"lnl-const": "constant", "lnl-arith": "arithmetic", "lnl-geom": "geometric"}

#: Reference MNL reduced-correlation MSE values (x1e3) per built-in network and
#: parameter set. The RCM reference route is the one whose MNL value comes
#: closest to it.
#: Keys hold the complete parameter set, defaults included.
RCM_ANCHORS = {
    ("mesh2x2", (("c", 1.0),)): 45.44,
    ("braess", (("a", 4.0), ("b", 5.0), ("h", 0.0))): 14.59,
    ("braess", (("a", 4.0), ("b", 5.0), ("h", 0.1))): 14.03,
}


class ConfigError(ValueError):
    """Invalid experiment configuration."""


# --------------------------------------------------------------------------
# metrics
# --------------------------------------------------------------------------

def mse_probabilities(p_model, p_target) -> float:
    """Mean squared probability error, scaled by 1e4."""
    a, b = np.asarray(p_model, dtype=float), np.asarray(p_target, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    return float(np.mean((a - b) ** 2) * 1e4)


def mse_probabilities_se(p_model, p_target, n_draws: int) -> float:
    """Delta-method standard error of ``mse_probabilities`` when the target
    is a vector of multinomial frequencies over ``n_draws`` draws."""
    a, b = np.asarray(p_model, dtype=float), np.asarray(p_target, dtype=float)
    grad = -2.0 * (a - b) / a.size
    cov = (np.diag(b) - np.outer(b, b)) / n_draws
    return float(math.sqrt(max(grad @ cov @ grad, 0.0)) * 1e4)


def mse_correlations(r_model, r_target) -> float:
    """Mean squared error over all matrix entries, scaled by 1e3."""
    a, b = np.asarray(r_model, dtype=float), np.asarray(r_target, dtype=float)
    if a.shape != b.shape or a.ndim != 2:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return float(np.mean((a - b) ** 2) * 1e3)


# --------------------------------------------------------------------------
# network resolution and reference search
# --------------------------------------------------------------------------

def resolve_network(name: str, params: dict | None = None, od: OdPair | None = None) -> tuple[Network, OdPair]:
    """A built-in network by name, or a network file by path."""
    params = params or {}
    if name in BUILTINS:
        net, default_od = BUILTINS[name](**params)
    else:
        path = Path(name)
        if not path.is_file():
            raise NetworkError(f"{name!r} is neither a built-in network {sorted(BUILTINS)} nor a file")
        if params:
            raise NetworkError("network parameters apply to built-in networks only")
        with path.open(encoding="utf-8") as fh:
            net, default_od = load_network(fh)
    od = od or default_od
    if od is None:
        raise NetworkError("no o-d pair given and none declared in the network file")
    net.check_od(od)
    return net, od


def rcm_anchor(name: str, params: dict | None = None) -> float | None:
    """Anchor for a built-in network; explicit parameters equal to the
    defaults select the same anchor as omitting them."""
    factory = BUILTINS.get(name)
    if factory is None:
        return None
    full = {k: float(v.default) for k, v in inspect.signature(factory).parameters.items()}
    full.update({k: float(v) for k, v in (params or {}).items()})
    return RCM_ANCHORS.get((name, tuple(sorted(full.items()))))


def mnl_rcm_mses(ds_cov: np.ndarray) -> np.ndarray:
    n = ds_cov.shape[0]
    eye = np.eye(n)
    return np.array([mse_correlations(reduce_to_rcm(eye, r, np.ones(n)), reduce_to_rcm(ds_cov, r)) for r in range(n)])


def find_rcm_reference(ds_cov: np.ndarray, anchor: float | None) -> int:
    """Reference route whose MNL reduced-correlation MSE is closest to
    ``anchor`` (lowest index on ties); route 0 without an anchor."""
    if anchor is None:
        return 0
    values = mnl_rcm_mses(ds_cov)
    return int(np.argmin(np.round(np.abs(values - anchor), 9)))


# --------------------------------------------------------------------------
# models
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ModelSpec:
    name: str
    variant: str = ""

    def __post_init__(self):
        if self.name not in MODELS:
            raise ConfigError(f"unknown model {self.name!r}; choose from {MODELS}")

    @property
    def label(self) -> str:
        return f"{self.name}-{self.variant}" if self.name == "conl" else self.name

    @property
    def uses_dmin(self) -> bool:
        return self.name.startswith("lnl") or self.name == "conl"

    def build(self, net: Network, cs: ChoiceSet, theta0: float, dmin: float, gamma: float = 1.0):
        if self.name == "mnl":
            return MnlModel(theta0, len(cs))
        if self.name in LNL_RULES:
            return build_lnl(net, cs, DeltaRule(LNL_RULES[self.name], dmin), theta0)
        if self.name == "pcl":
            return build_pcl(net, cs, theta0)
        return conl_mod.build_conl(net, cs, theta0, int(self.variant or 24), dmin, gamma)


def model_probabilities(model, cs: ChoiceSet) -> np.ndarray:
    if isinstance(model, conl_mod.ConlModel):
        return conl_mod.conl_probabilities(model, cs.impedances)
    return probabilities(model, cs.impedances)


def model_fcm(model, quad: QuadratureSpec | None = None) -> np.ndarray:
    if isinstance(model, conl_mod.ConlModel):
        return conl_mod.conl_fcm(model)
    return gev_fcm(model, quad)


def model_rcm(fcm: np.ndarray, reference: int) -> np.ndarray:
    """Every model here is homoscedastic, so unit variances suffice."""
    return reduce_to_rcm(fcm, reference, np.ones(fcm.shape[0]))


# --------------------------------------------------------------------------
# grid
# --------------------------------------------------------------------------

def parse_grid(text: str) -> tuple[float, ...]:
    """'0:1:0.1' (inclusive range) or '0.1,0.2'."""
    text = text.strip()
    try:
        if ":" in text:
            start, stop, step = (float(x) for x in text.split(":"))
            if not step > 0 or stop < start:
                raise ConfigError(f"bad range {text!r}")
            n = int(math.floor((stop - start) / step + 1e-9)) + 1
            return tuple(round(start + i * step, 10) for i in range(n))
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError as exc:
        raise ConfigError(f"bad numeric grid {text!r}: {exc}") from None


@dataclass(frozen=True)
class ExperimentConfig:
    network: str = "mesh2x2"
    network_params: dict = field(default_factory=dict)
    od: OdPair | None = None
    models: tuple[str, ...] = MODELS
    weights: tuple[int, ...] = (24,)
    dmin: tuple[float, ...] = parse_grid("0:1:0.1")
    cv: tuple[float, ...] = (0.1, 0.2)
    draws: int = 1_000_000
    seed: int = 0
    rcm_ref: int | None = None
    gamma: float = 1.0
    quad: QuadratureSpec = QuadratureSpec()

    def __post_init__(self):
        if not self.models or not self.dmin or not self.cv:
            raise ConfigError("model, dmin and cv grids must be nonempty")
        for m in self.models:
            ModelSpec(m)
        if any(not 0.0 <= d <= 1.0 for d in self.dmin):
            raise ConfigError("dmin values must lie in [0, 1]")
        if any(not c > 0 for c in self.cv):
            raise ConfigError("cv values must be positive")
        if any(w not in conl_mod.WEIGHT_VARIANTS for w in self.weights) or not self.weights:
            raise ConfigError(f"weights must be among {conl_mod.WEIGHT_VARIANTS}")
        if self.draws < 1:
            raise ConfigError("draws must be >= 1")

    def model_specs(self) -> list[ModelSpec]:
        specs = []
        for m in self.models:
            if m == "conl":
                specs.extend(ModelSpec(m, str(w)) for w in self.weights)
            else:
                specs.append(ModelSpec(m))
        return specs


@dataclass(frozen=True)
class MseRow:
    model: str
    variant: str
    dmin: float
    cv: float
    prob_mse_x1e4: float
    fcm_mse_x1e3: float
    rcm_mse_x1e3: float
    prob_mse_se_x1e4: float


@dataclass(frozen=True)
class MnpTarget:
    cv: float
    probabilities: np.ndarray
    std_errors: np.ndarray
    n_draws: int


@dataclass(frozen=True)
class MseReport:
    rows: tuple[MseRow, ...]
    choice_set: ChoiceSet
    reference: int
    targets: tuple[MnpTarget, ...]
    labels: tuple[str, ...]


def run_grid(cfg: ExperimentConfig) -> MseReport:
    net, od = resolve_network(cfg.network, cfg.network_params, cfg.od)
    cs = enumerate_efficient_routes(net, od)
    if len(cs) < 2:
        raise ConfigError("the choice set has a single route; correlations are undefined")
    c_min = cs.min_impedance
    ds_cov, ds_corr = ds_moments(net, cs, 1.0)
    if cfg.rcm_ref is not None:
        if not 0 <= cfg.rcm_ref < len(cs):
            raise ConfigError(f"rcm reference {cfg.rcm_ref} out of range for {len(cs)} routes")
        ref = cfg.rcm_ref
    else:
        ref = find_rcm_reference(ds_cov, rcm_anchor(cfg.network, cfg.network_params))
    rcm_target = reduce_to_rcm(ds_cov, ref)

    targets = []
    for cv in cfg.cv:
        res = simulate_mnp_probabilities(net, cs, MnpSpec(xi_from_cv(cv, c_min), cfg.draws, cfg.seed))
        targets.append(MnpTarget(cv, res.probabilities, res.std_errors, res.n_draws))

    specs = cfg.model_specs()
    rows = []
    for spec in specs:
        corr_cache: dict[float, tuple[float, float]] = {}
        for dmin in cfg.dmin:
            key = dmin if spec.uses_dmin else 0.0
            for target in targets:
                model = spec.build(net, cs, theta0_from_cv(target.cv, c_min), dmin, cfg.gamma)
                if key not in corr_cache:
                    fcm = model_fcm(model, cfg.quad)
                    corr_cache[key] = (mse_correlations(fcm, ds_corr), mse_correlations(model_rcm(fcm, ref), rcm_target))
                p = model_probabilities(model, cs)
                rows.append(MseRow(
                    spec.name, spec.variant, dmin, target.cv,
                    mse_probabilities(p, target.probabilities),
                    *corr_cache[key],
                    mse_probabilities_se(p, target.probabilities, target.n_draws),
                ))
    return MseReport(tuple(rows), cs, ref, tuple(targets), tuple(s.label for s in specs))


# --------------------------------------------------------------------------
# output
# --------------------------------------------------------------------------

TABLE_COLUMNS = ("model", "variant", "dmin", "cv", "prob_mse_x1e4", "fcm_mse_x1e3", "rcm_mse_x1e3")


def fmt(x: float) -> str:
    return f"{x:.10g}"


def _write(path: Path, header, rows) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def emit_outputs(report: MseReport, out_dir: str | Path) -> list[Path]:
    """Write the MSE table, the curve files and the probit targets; returns the paths."""
    if not report.rows:
        raise ValueError("empty report")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    path = out / "table.csv"
    _write(path, TABLE_COLUMNS, [
        (r.model, r.variant, fmt(r.dmin), fmt(r.cv), fmt(r.prob_mse_x1e4), fmt(r.fcm_mse_x1e3), fmt(r.rcm_mse_x1e3))
        for r in report.rows
    ])
    written.append(path)

    path = out / "prob_mse_se.csv"
    _write(path, ("model", "variant", "dmin", "cv", "prob_mse_se_x1e4"), [
        (r.model, r.variant, fmt(r.dmin), fmt(r.cv), fmt(r.prob_mse_se_x1e4)) for r in report.rows
    ])
    written.append(path)

    path = out / "mnp_targets.csv"
    _write(path, ("cv", "route_index", "probability", "std_error"), [
        (fmt(t.cv), k, fmt(p), fmt(s))
        for t in report.targets for k, (p, s) in enumerate(zip(t.probabilities, t.std_errors))
    ])
    written.append(path)

    path = out / "routes.csv"
    with path.open("w", newline="", encoding="utf-8") as fh:
        report.choice_set.to_csv(fh)
    written.append(path)

    labels = list(report.labels)
    dmins = sorted({r.dmin for r in report.rows})
    cvs = sorted({r.cv for r in report.rows})

    def label(r: MseRow) -> str:
        return f"{r.model}-{r.variant}" if r.model == "conl" else r.model

    def curve(name: str, metric: str, cv: float) -> None:
        cell = {(label(r), r.dmin): getattr(r, metric) for r in report.rows if r.cv == cv}
        p = out / name
        _write(p, ["dmin", *labels], [[fmt(d), *(fmt(cell[(m, d)]) for m in labels)] for d in dmins])
        written.append(p)

    for cv in cvs:
        curve(f"curve_prob_cv{fmt(cv)}.csv", "prob_mse_x1e4", cv)
    # correlations do not depend on cv
    curve("curve_fcm.csv", "fcm_mse_x1e3", cvs[0])
    curve("curve_rcm.csv", "rcm_mse_x1e3", cvs[0])
    return written
