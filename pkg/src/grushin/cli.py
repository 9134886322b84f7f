"""Command-line front end: parameter reporting, spectrum/profile/weyl/riesz/
density/hf-check subcommands, flat-file config handling, and deterministic
CSV/JSON artifact emission.

Precedence for every setting is defaults < config file < flags. All error
paths print a machine-readable JSON object {"code", "message"} on stderr and
exit 2 for validation errors or 3 for numerical non-convergence.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import dataclass

import numpy as np

from ._emit import csv_bytes, to_json_bytes
from .core import (
    GrushinParams,
    beta_of_alpha,
    circle_spectrum,
    derive_gas_planet,
    derive_params,
    load_cross_spectrum,
    torus_spectrum,
)
from .errors import VALIDATION_ERRORS, EngineError, ParameterDomainError
from .model import (
    CrossObservable,
    ModelOperator,
    assemble_spectrum,
    counting_function,
    density_moment,
    eigen_table_csv_bytes,
    hellmann_feynman,
    lemma1_rhs,
    mass_capture,
    moment_report_json_obj,
    required_mu_max,
    riesz_mean,
    trace_with_potential,
    weyl_fit,
)
from .profile import (
    compute_profile_A,
    compute_profile_B,
    profile_csv_bytes,
    profile_json_obj,
    profile_quantile,
)
from .scaling import cached_reference_spectrum
from .sturm1d import GridPolicy, Potential, load_tabulated_potential

_CONFIG_KEYS = (
    "n", "beta", "alpha", "cross", "x_max", "right_bc", "k_max", "cert_tol",
    "lambda", "v1", "v2", "workers", "out", "format", "s", "epsilon",
    "nodes_per_wavelength",
)


@dataclass(frozen=True)
class RunConfig:
    """Resolved settings for one CLI invocation."""

    n: int
    beta: float | None
    alpha: float | None
    cross: str | None
    x_max: float
    right_bc: str
    k_max: int
    cert_tol: float
    lambdas: tuple[float, ...] | None
    v1: str | None
    v2: str | None
    workers: int
    out: str
    format: str
    s: float | None
    epsilon: float | None
    nodes_per_wavelength: float

    def __post_init__(self):
        if (self.beta is None) == (self.alpha is None):
            raise ParameterDomainError("give exactly one of beta or alpha")
        if self.right_bc not in ("dirichlet", "neumann"):
            raise ParameterDomainError("right_bc must be dirichlet|neumann")
        if self.format not in ("csv", "json", "both"):
            raise ParameterDomainError("format must be csv|json|both")
        if self.k_max < 1:
            raise ParameterDomainError("k_max must be >= 1")
        if not (self.cert_tol > 0.0 and math.isfinite(self.cert_tol)):
            raise ParameterDomainError("cert_tol must be finite and > 0")
        if self.workers < 1:
            raise ParameterDomainError("workers must be >= 1")
        if self.lambdas is not None:
            lams = tuple(float(t) for t in self.lambdas)
            if any(not (t > 0.0 and math.isfinite(t)) for t in lams):
                raise ParameterDomainError("lambda values must be finite and > 0")
            if any(b <= a for a, b in zip(lams, lams[1:])):
                raise ParameterDomainError("lambda list must be strictly ascending")
            object.__setattr__(self, "lambdas", lams)

    @property
    def params(self) -> GrushinParams:
        beta = self.beta if self.beta is not None else beta_of_alpha(self.alpha)
        return derive_params(self.n, beta)

    @property
    def policy(self) -> GridPolicy:
        return GridPolicy(nodes_per_wavelength=self.nodes_per_wavelength)


def _read_config_file(path: str) -> dict:
    """Flat key-value config: one `key = value` per line, '#' comments."""
    values: dict = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ParameterDomainError(f"cannot read config file {path}: {exc}")
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParameterDomainError(f"{path}:{lineno}: expected key = value")
        key, _, val = line.partition("=")
        key = key.strip().replace("-", "_")
        if key not in _CONFIG_KEYS:
            raise ParameterDomainError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = val.strip()
    return values


def _parse_lambda_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(tok) for tok in text.split(",") if tok.strip())
    except ValueError:
        raise ParameterDomainError(f"bad lambda list {text!r}")


def _pick(flag, config: dict, key: str, default, convert):
    """defaults < config file < flags."""
    if flag is not None:
        return convert(flag)
    if key in config:
        return convert(config[key])
    return default


def resolve_config(args: argparse.Namespace) -> RunConfig:
    config = _read_config_file(args.config) if args.config else {}

    def conv_float(v):
        try:
            return float(v)
        except (TypeError, ValueError):
            raise ParameterDomainError(f"expected a number, got {v!r}")

    def conv_int(v):
        try:
            return int(v)
        except (TypeError, ValueError):
            raise ParameterDomainError(f"expected an integer, got {v!r}")

    def conv_lams(v):
        return _parse_lambda_list(v) if isinstance(v, str) else tuple(v)

    return RunConfig(
        n=_pick(args.n, config, "n", 1, conv_int),
        beta=_pick(args.beta, config, "beta", None, conv_float),
        alpha=_pick(args.alpha, config, "alpha", None, conv_float),
        cross=_pick(args.cross, config, "cross", None, str),
        x_max=_pick(args.x_max, config, "x_max", 1.0, conv_float),
        right_bc=_pick(args.right_bc, config, "right_bc", "dirichlet", str),
        k_max=_pick(args.k_max, config, "k_max", 200, conv_int),
        cert_tol=_pick(args.cert_tol, config, "cert_tol", 1e-4, conv_float),
        lambdas=_pick(getattr(args, "lambda"), config, "lambda", None, conv_lams),
        v1=_pick(args.v1, config, "v1", None, str),
        v2=_pick(args.v2, config, "v2", None, str),
        workers=_pick(args.workers, config, "workers", os.cpu_count() or 1, conv_int),
        out=_pick(args.out, config, "out", ".", str),
        format=_pick(args.format, config, "format", "both", str),
        s=_pick(getattr(args, "s", None), config, "s", None, conv_float),
        epsilon=_pick(getattr(args, "epsilon", None), config, "epsilon", None, conv_float),
        nodes_per_wavelength=_pick(
            args.nodes_per_wavelength, config, "nodes_per_wavelength", 20.0, conv_float
        ),
    )


def parse_cross(cfg: RunConfig):
    """Materialize the cross spectrum named by `--cross` with enough modes
    to certify the cutoff at the largest requested lambda."""
    if cfg.cross is None:
        raise ParameterDomainError("this subcommand needs --cross")
    if cfg.lambdas is None or not cfg.lambdas:
        raise ParameterDomainError("this subcommand needs --lambda")
    lam_top = cfg.lambdas[-1]
    spec = cfg.cross
    if spec.startswith("file:"):
        return load_cross_spectrum(spec[5:])
    mu_witness = 4.0 * required_mu_max(
        cfg.params, lam_top, x_max=cfg.x_max, right_bc=cfg.right_bc, policy=cfg.policy
    )
    if spec.startswith("circle:"):
        return circle_spectrum(float(spec[7:]), mu_witness)
    if spec.startswith("torus:"):
        body = spec[6:]
        parts = body.split("x")
        if len(parts) != 2:
            raise ParameterDomainError(f"bad torus spec {spec!r}, want torus:<L1>x<L2>")
        return torus_spectrum((float(parts[0]), float(parts[1])), mu_witness)
    raise ParameterDomainError(f"unknown cross spec {spec!r}")


def parse_v1(text: str | None) -> Potential | None:
    if text is None:
        return None
    if text.startswith("const:"):
        return Potential("const", a=float(text[6:]))
    if text.startswith("exp:"):
        parts = text[4:].split(",")
        if len(parts) != 2:
            raise ParameterDomainError(f"bad v1 spec {text!r}, want exp:<a>,<b>")
        return Potential("exp", a=float(parts[0]), b=float(parts[1]))
    if text.startswith("indicator:"):
        parts = text[10:].split(",")
        if len(parts) != 2:
            raise ParameterDomainError(f"bad v1 spec {text!r}, want indicator:<a>,<b>")
        return Potential("indicator", a=float(parts[0]), b=float(parts[1]))
    if text.startswith("file:"):
        return load_tabulated_potential(text[5:])
    raise ParameterDomainError(f"unknown v1 spec {text!r}")


def parse_v2(text: str | None) -> CrossObservable:
    if text is None:
        return CrossObservable("const", 1.0)
    if text.startswith("const:"):
        return CrossObservable("const", float(text[6:]))
    if text.startswith("cos:"):
        return CrossObservable("cos", 1.0, int(text[4:]))
    raise ParameterDomainError(f"unknown v2 spec {text!r}")


def _write_artifact(cfg: RunConfig, name: str, payload: bytes, written: list) -> None:
    os.makedirs(cfg.out, exist_ok=True)
    path = os.path.join(cfg.out, name)
    with open(path, "wb") as fh:
        fh.write(payload)
    written.append(path)


def _wants(cfg: RunConfig, kind: str) -> bool:
    return cfg.format == "both" or cfg.format == kind


def _reference(cfg: RunConfig):
    return cached_reference_spectrum(
        cfg.params, k_max=cfg.k_max, certificate_tol=cfg.cert_tol
    )


def _params_json_obj(cfg: RunConfig) -> dict:
    params = cfg.params
    obj = {
        "n": params.n,
        "beta": params.beta,
        "c_beta": params.c_beta,
        "d": params.d,
        "l_cl": params.l_cl,
        "regime": params.regime,
    }
    if cfg.alpha is not None:
        gp = derive_gas_planet(cfg.n, cfg.alpha)
        obj["alpha"] = gp.alpha
        obj["rate_exponent"] = gp.rate_exponent
        obj["theorem_range"] = gp.theorem_range
    return obj


def cmd_params(cfg: RunConfig, written: list) -> None:
    sys.stdout.buffer.write(to_json_bytes(_params_json_obj(cfg)))


def cmd_spectrum(cfg: RunConfig, written: list) -> None:
    if cfg.cross is None:
        ref = _reference(cfg)
        if _wants(cfg, "csv"):
            rows = [(k + 1, float(v)) for k, v in enumerate(ref.eigenvalues)]
            _write_artifact(cfg, "reference_spectrum.csv", csv_bytes("k,lambda", rows), written)
        if _wants(cfg, "json"):
            obj = {
                "n": ref.params.n,
                "beta": ref.params.beta,
                "k_max": ref.k_max,
                "certificate_tol": ref.certificate_tol,
                "dn_gap": ref.dn_gap,
                "eigenvalues": [float(v) for v in ref.eigenvalues],
            }
            _write_artifact(cfg, "reference_spectrum.json", to_json_bytes(obj), written)
        return
    cross = parse_cross(cfg)
    model = ModelOperator(
        params=cfg.params, cross=cross, x_max=cfg.x_max,
        right_bc=cfg.right_bc, policy=cfg.policy,
    )
    table = assemble_spectrum(model, cfg.lambdas[-1], workers=cfg.workers)
    if _wants(cfg, "csv"):
        _write_artifact(cfg, "eigen_table.csv", eigen_table_csv_bytes(table), written)
    if _wants(cfg, "json"):
        entries = [
            {
                "j": int(table.js[i]),
                "k": int(table.ks[i]),
                "multiplicity": int(table.mults[i]),
                "lambda": float(table.lambdas[i]),
            }
            for i in range(table.n_entries)
        ]
        obj = {
            "lambda_max": table.lambda_max,
            "right_bc": table.right_bc,
            "cross": table.cross_label,
            "volume": table.volume,
            "entries": entries,
        }
        _write_artifact(cfg, "eigen_table.json", to_json_bytes(obj), written)


def cmd_profile(cfg: RunConfig, written: list) -> None:
    ref = _reference(cfg)
    profile_b = compute_profile_B(ref)
    profile_a = compute_profile_A(profile_b, cfg.alpha) if cfg.alpha is not None else None
    if _wants(cfg, "csv"):
        _write_artifact(cfg, "profile_B.csv", profile_csv_bytes(profile_b), written)
    if _wants(cfg, "json"):
        _write_artifact(cfg, "profile_B.json", to_json_bytes(profile_json_obj(profile_b)), written)
    if profile_a is not None:
        if _wants(cfg, "csv"):
            _write_artifact(cfg, "profile_A.csv", profile_csv_bytes(profile_a), written)
        if _wants(cfg, "json"):
            _write_artifact(
                cfg, "profile_A.json", to_json_bytes(profile_json_obj(profile_a)), written
            )


def cmd_weyl(cfg: RunConfig, written: list) -> None:
    cross = parse_cross(cfg)
    model = ModelOperator(
        params=cfg.params, cross=cross, x_max=cfg.x_max,
        right_bc=cfg.right_bc, policy=cfg.policy,
    )
    table = assemble_spectrum(model, cfg.lambdas[-1], workers=cfg.workers)
    counts = [counting_function(table, lam) for lam in cfg.lambdas]
    fit = weyl_fit(table, np.asarray(cfg.lambdas))
    if _wants(cfg, "csv"):
        rows = list(zip(cfg.lambdas, counts))
        _write_artifact(cfg, "weyl_counts.csv", csv_bytes("lambda,N", rows), written)
    if _wants(cfg, "json"):
        obj = {
            "slope": fit.slope,
            "constant": fit.constant,
            "residuals": [float(r) for r in fit.residuals],
            "lambda": list(cfg.lambdas),
            "N": counts,
        }
        _write_artifact(cfg, "weyl_fit.json", to_json_bytes(obj), written)


def cmd_riesz(cfg: RunConfig, written: list) -> None:
    cross = parse_cross(cfg)
    model = ModelOperator(
        params=cfg.params, cross=cross, x_max=cfg.x_max,
        right_bc=cfg.right_bc, policy=cfg.policy,
    )
    ref = _reference(cfg)
    v1 = parse_v1(cfg.v1)
    table = assemble_spectrum(model, cfg.lambdas[-1], workers=cfg.workers)
    rhs = lemma1_rhs(ref, v1, volume=cross.volume)
    d = cfg.params.d
    entries = []
    for lam in cfg.lambdas:
        tr = trace_with_potential(model, lam, v1, workers=cfg.workers)
        scaled = tr / lam ** (1.0 + d / 2.0)
        entries.append(
            {
                "lambda": lam,
                "riesz_mean": riesz_mean(table, lam),
                "trace": tr,
                "scaled_trace": scaled,
                "lemma1_rhs": rhs,
                "rel_gap": abs(scaled - rhs) / abs(rhs) if rhs != 0.0 else math.inf,
            }
        )
    _write_artifact(cfg, "riesz_compare.json", to_json_bytes({"entries": entries}), written)


def cmd_density(cfg: RunConfig, written: list) -> None:
    cross = parse_cross(cfg)
    model = ModelOperator(
        params=cfg.params, cross=cross, x_max=cfg.x_max,
        right_bc=cfg.right_bc, policy=cfg.policy,
    )
    ref = _reference(cfg)
    v1 = parse_v1(cfg.v1)
    if v1 is None:
        v1 = Potential("const", a=1.0)
    v2 = parse_v2(cfg.v2)
    profile_b = compute_profile_B(ref)
    table = assemble_spectrum(model, cfg.lambdas[-1], want_vectors=True, workers=cfg.workers)
    reports = [
        moment_report_json_obj(density_moment(table, lam, v1, v2, profile_b=profile_b))
        for lam in cfg.lambdas
    ]
    if _wants(cfg, "json"):
        _write_artifact(cfg, "density_moments.json", to_json_bytes({"reports": reports}), written)
    if _wants(cfg, "csv"):
        quantiles = (0.5, 0.9, 0.95, 0.99)
        rows = []
        for lam in cfg.lambdas:
            for p in quantiles:
                length = profile_quantile(profile_b, p)
                rows.append((lam, p, length, mass_capture(table, lam, length)))
        _write_artifact(cfg, "mass_capture.csv", csv_bytes("lambda,p,L,capture", rows), written)


def cmd_hf_check(cfg: RunConfig, written: list) -> None:
    if cfg.s is None or cfg.epsilon is None:
        raise ParameterDomainError("hf-check needs --s and --epsilon")
    v1 = parse_v1(cfg.v1)
    if v1 is None:
        raise ParameterDomainError("hf-check needs --v1")
    ref = _reference(cfg)
    report = hellmann_feynman(ref, cfg.s, v1, cfg.epsilon)
    obj = {
        "s": cfg.s,
        "epsilon": cfg.epsilon,
        "fd_value": report.fd_value,
        "pairing_value": report.pairing_value,
        "gap": report.gap,
    }
    _write_artifact(cfg, "hf_check.json", to_json_bytes(obj), written)


_SUBCOMMANDS = {
    "params": cmd_params,
    "spectrum": cmd_spectrum,
    "profile": cmd_profile,
    "weyl": cmd_weyl,
    "riesz": cmd_riesz,
    "density": cmd_density,
    "hf-check": cmd_hf_check,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="grushin",
        description="Spectral statistics of singular-axis product models.",
    )
    parser.add_argument("subcommand", choices=sorted(_SUBCOMMANDS))
    parser.add_argument("--n", default=None)
    parser.add_argument("--beta", default=None)
    parser.add_argument("--alpha", default=None)
    parser.add_argument("--cross", default=None,
                        help="circle:<L> | torus:<L1>x<L2> | file:<path>")
    parser.add_argument("--x-max", dest="x_max", default=None)
    parser.add_argument("--right-bc", dest="right_bc", default=None,
                        choices=("dirichlet", "neumann"))
    parser.add_argument("--k-max", dest="k_max", default=None)
    parser.add_argument("--cert-tol", dest="cert_tol", default=None)
    parser.add_argument("--lambda", default=None, help="ascending comma list")
    parser.add_argument("--v1", default=None,
                        help="const:<c> | exp:<a>,<b> | indicator:<a>,<b> | file:<path>")
    parser.add_argument("--v2", default=None, help="const:<c> | cos:<m>")
    parser.add_argument("--workers", default=None)
    parser.add_argument("--out", default=None)
    parser.add_argument("--format", default=None, choices=("csv", "json", "both"))
    parser.add_argument("--config", default=None)
    parser.add_argument("--s", default=None)
    parser.add_argument("--epsilon", default=None)
    parser.add_argument("--nodes-per-wavelength", dest="nodes_per_wavelength", default=None)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        written: list = []
        _SUBCOMMANDS[args.subcommand](cfg, written)
        for path in written:
            print(path)
        return 0
    except EngineError as exc:
        obj = {"code": exc.code, "message": str(exc)}
        certificate = getattr(exc, "certificate", None)
        if certificate:
            obj["certificate"] = certificate
        sys.stderr.buffer.write(to_json_bytes(obj))
        return 2 if isinstance(exc, VALIDATION_ERRORS) else 3


if __name__ == "__main__":
    sys.exit(main())
