"""Configuration ingestion, orchestration, and report emission.

Configs are YAML trees (documented in the README); expressions inside them
use the kernel grammar.  Reports are schema-versioned JSON, deterministic for
a fixed config and seed.  Exit codes: 0 verified/completed, 1 refuted,
2 inconclusive, 3 input error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, field

import numpy as np
import yaml

from . import __version__
from .contact import (
    ContactProblem,
    check_problem,
    classify,
    combine_verdicts,
    INCONCLUSIVE,
    REFUTED,
    VERIFIED,
)
from .geometry import (
    K1j_recursion,
    Q_jet,
    Q_recursion,
    cov_deriv,
    cov_deriv_mixed,
    curvature,
    map_adjoint_jet,
)
from .kernelexpr import BundleSpec, ParseError
from .rkhs import quotient_model, unitary_equiv_check
from .wordcalc import verify_appendix

SCHEMA_VERSION = "1"
TOLERANCE_ENV = "JETCONTACT_TOLERANCE"
TASKS = (
    "pointwise",
    "along-z",
    "curvature",
    "verify-recursions",
    "verify-appendix",
    "rkhs-quotient",
)

EXIT_VERIFIED = 0
EXIT_REFUTED = 1
EXIT_INCONCLUSIVE = 2
EXIT_INPUT_ERROR = 3


class ConfigError(ValueError):
    """Malformed run configuration."""


@dataclass
class RunConfig:
    task: str
    order: int = 1
    tolerance: float = 1e-8
    seed: int = 0
    bundles: list = field(default_factory=list)
    points: list = field(default_factory=list)
    candidate: object = None
    out: str = None
    appendix_bound: int = None

    @property
    def bundle_a(self) -> BundleSpec:
        return self.bundles[0]

    @property
    def bundle_b(self) -> BundleSpec:
        return self.bundles[1]


def _parse_scalar(value, where: str) -> complex:
    if isinstance(value, (int, float)):
        return complex(value)
    if isinstance(value, str):
        try:
            return complex(value.replace(" ", "").replace("i", "j"))
        except ValueError as exc:
            raise ConfigError(f"{where}: cannot read {value!r} as a number") from exc
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return complex(float(value[0]), float(value[1]))
    raise ConfigError(f"{where}: expected a number, 'a+bi' string, or [re, im] pair")


def _parse_point(value, dim: int, where: str) -> tuple:
    if not isinstance(value, (list, tuple)) or len(value) != dim:
        raise ConfigError(f"{where}: expected {dim} coordinates")
    return tuple(_parse_scalar(c, where) for c in value)


def _parse_bundle(node, where: str) -> BundleSpec:
    if not isinstance(node, dict):
        raise ConfigError(f"{where}: expected a mapping with label/dimension/gram")
    try:
        label = node.get("label", where)
        dim = int(node["dimension"])
        gram = node["gram"]
    except KeyError as exc:
        raise ConfigError(f"{where}: missing key {exc.args[0]!r}") from exc
    try:
        return BundleSpec(label, dim, gram)
    except (ParseError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def _expand_grid(node, dim: int) -> list:
    """Rectangular grid on Z: per-coordinate ranges for z2..zm (z1 stays 0)."""
    axes = []
    for j in range(2, dim + 1):
        key = f"z{j}"
        spec = node.get(key)
        if spec is None:
            axes.append([0.0 + 0.0j])
            continue
        re_lo, re_hi = (float(v) for v in spec.get("re", [0.0, 0.0]))
        im_lo, im_hi = (float(v) for v in spec.get("im", [0.0, 0.0]))
        n_re = int(spec.get("count_re", 1))
        n_im = int(spec.get("count_im", 1))
        res = np.linspace(re_lo, re_hi, n_re)
        ims = np.linspace(im_lo, im_hi, n_im)
        axes.append([complex(r, i) for r in res for i in ims])
    points = [(0.0 + 0.0j,)]
    for axis in axes:
        points = [p + (c,) for p in points for c in axis]
    return points


def load_config(path: str) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path!r} is not valid YAML: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a mapping")
    return build_config(raw)


def build_config(raw: dict) -> RunConfig:
    task = raw.get("task")
    if task not in TASKS:
        raise ConfigError(f"task must be one of {', '.join(TASKS)}; got {task!r}")
    default_tol = float(os.environ.get(TOLERANCE_ENV, 1e-8))
    cfg = RunConfig(
        task=task,
        order=int(raw.get("order", 1)),
        tolerance=float(raw.get("tolerance", default_tol)),
        seed=int(raw.get("seed", 0)),
        out=raw.get("out"),
        appendix_bound=raw.get("appendix_bound"),
    )
    if cfg.order < 1 and task != "verify-appendix":
        raise ConfigError("order must be >= 1")
    if cfg.tolerance <= 0:
        raise ConfigError("tolerance must be positive")

    bundles = raw.get("bundles", [])
    cfg.bundles = [
        _parse_bundle(node, f"bundles[{k}]") for k, node in enumerate(bundles)
    ]
    needed = {"pointwise": 2, "along-z": 2, "rkhs-quotient": 2,
              "curvature": 1, "verify-recursions": 1}.get(task, 0)
    if len(cfg.bundles) < needed:
        raise ConfigError(f"task {task!r} needs {needed} bundle(s)")
    for a in cfg.bundles[1:]:
        if a.dimension != cfg.bundles[0].dimension or a.rank != cfg.bundles[0].rank:
            raise ConfigError("bundles must share dimension and rank")

    if needed:
        dim = cfg.bundles[0].dimension
        pts = [
            _parse_point(p, dim, f"points[{k}]")
            for k, p in enumerate(raw.get("points", []))
        ]
        if "grid" in raw:
            if task != "along-z":
                raise ConfigError("grid specifications only apply to along-z")
            pts.extend(_expand_grid(raw["grid"], dim))
        if not pts:
            raise ConfigError("no evaluation points given (points or grid)")
        if task == "along-z":
            for p in pts:
                if abs(p[0]) > 1e-12:
                    raise ConfigError(f"along-z point {p} has z1 != 0")
        cfg.points = pts

    cand = raw.get("candidate")
    if cand is not None:
        if isinstance(cand, str):
            cand = [[cand]]
        if not isinstance(cand, list):
            raise ConfigError("candidate must be an expression or a matrix of them")
        cfg.candidate = cand
    return cfg


# ---------------------------------------------------------------------------
# task runners


def _cnum(value: complex) -> list:
    return [float(np.real(value)), float(np.imag(value))]


def _cmat(mat: np.ndarray) -> list:
    return [[_cnum(v) for v in row] for row in np.atleast_2d(mat)]


def _run_contact(cfg: RunConfig, mode: str) -> tuple[dict, str]:
    problem = ContactProblem(
        bundle_a=cfg.bundle_a,
        bundle_b=cfg.bundle_b,
        order=cfg.order,
        mode=mode,
        points=cfg.points,
        candidate=cfg.candidate,
        tolerance=cfg.tolerance,
        seed=cfg.seed,
    )
    for spec in (cfg.bundle_a, cfg.bundle_b):
        spec.validate(cfg.points)
    report = check_problem(problem)
    return report.as_dict(), report.verdict


def _run_curvature(cfg: RunConfig) -> tuple[dict, str]:
    spec = cfg.bundle_a
    spec.validate(cfg.points)
    n = cfg.order
    out = []
    for point in cfg.points:
        h = spec.gram_jet(point, n + 1, n + 1)
        entry = {"point": [_cnum(c) for c in point], "curvature": {}, "covariant": {}}
        for i in range(1, spec.dimension + 1):
            for j in range(1, spec.dimension + 1):
                entry["curvature"][f"K({i},{j}bar)"] = _cmat(
                    curvature(h, i, j).value()
                )
        k11 = curvature(h, 1, 1)
        for r in range(n):
            for t in range(n):
                entry["covariant"][f"K(1,1bar)_z1^{r}_zb1^{t}"] = _cmat(
                    cov_deriv_mixed(k11, h, 1, r, 1, t).value()
                )
        for j in range(2, spec.dimension + 1):
            for r in range(n):
                entry["covariant"][f"K(1,{j}bar)_z1^{r}"] = _cmat(
                    K1j_recursion(h, j, r + 1)
                )
        out.append(entry)
    return {"points": out}, "completed"


def _run_recursions(cfg: RunConfig) -> tuple[dict, str]:
    spec = cfg.bundle_a
    spec.validate(cfg.points)
    n = cfg.order
    results = []
    worst = 0.0
    for point in cfg.points:
        h = spec.gram_jet(point, n + 2, n + 2)
        entry = {"point": [_cnum(c) for c in point], "residuals": {}}
        h0 = h.value()
        h0inv = np.linalg.inv(h0)
        for j in range(1, spec.dimension + 1):
            k1j = curvature(h, 1, j)
            iterated = k1j
            for order in range(1, n + 1):
                rec = K1j_recursion(h, j, order)
                direct = iterated.value()
                scale = 1.0 + max(np.max(np.abs(rec)), np.max(np.abs(direct)))
                entry["residuals"][f"curvature-tower(j={j},n={order})"] = float(
                    np.max(np.abs(rec - direct)) / scale
                )
                if order < n:
                    iterated = cov_deriv(iterated, h, 1)
            qjet = Q_jet(h, j)
            for order in range(n):
                rec = Q_recursion(h, j, order)
                direct_jet = qjet
                for _ in range(order):
                    direct_jet = direct_jet.deriv(0, conjugate=True)
                direct = direct_jet.value()
                scale = 1.0 + max(np.max(np.abs(rec)), np.max(np.abs(direct)))
                entry["residuals"][f"conjugate-tower(j={j},n={order})"] = float(
                    np.max(np.abs(rec - direct)) / scale
                )
        for i in range(1, spec.dimension + 1):
            for j in range(1, spec.dimension + 1):
                kij = curvature(h, i, j).value()
                kji = curvature(h, j, i).value()
                scale = 1.0 + max(np.max(np.abs(kij)), np.max(np.abs(kji)))
                entry["residuals"][f"adjoint-symmetry(i={i},j={j})"] = float(
                    np.max(np.abs(kij - h0 @ np.conj(kji.T) @ h0inv)) / scale
                )
        phi = curvature(h, 1, 1)
        for i in range(1, spec.dimension + 1):
            lhs = map_adjoint_jet(cov_deriv(phi, h, i), h).value()
            rhs = cov_deriv(map_adjoint_jet(phi, h), h, i, conjugate=True).value()
            scale = 1.0 + max(np.max(np.abs(lhs)), np.max(np.abs(rhs)))
            entry["residuals"][f"adjoint-derivative(i={i})"] = float(
                np.max(np.abs(lhs - rhs)) / scale
            )
        worst = max(worst, max(entry["residuals"].values()))
        results.append(entry)
    return {"points": results, "max_residual": worst}, classify(worst, cfg.tolerance)


def _run_appendix(cfg: RunConfig) -> tuple[dict, str]:
    bound = cfg.appendix_bound if cfg.appendix_bound is not None else min(cfg.order + 3, 6)
    report = verify_appendix(n_max=int(bound), seed=cfg.seed, tol=cfg.tolerance)
    return report.as_dict(), VERIFIED if report.passed else REFUTED


def _run_rkhs(cfg: RunConfig) -> tuple[dict, str]:
    if len(cfg.points) != 1:
        raise ConfigError("rkhs-quotient expects exactly one base point")
    z0 = cfg.points[0]
    for spec in (cfg.bundle_a, cfg.bundle_b):
        spec.validate([z0])
    a = quotient_model(cfg.bundle_a, z0, cfg.order)
    b = quotient_model(cfg.bundle_b, z0, cfg.order)
    rep = unitary_equiv_check(a, b, cfg.tolerance, cfg.seed)
    body = rep.as_dict()
    body["point"] = [_cnum(c) for c in z0]
    verdict = combine_verdicts([rep.contact_verdict, rep.direct_verdict])
    return body, verdict


def run(cfg: RunConfig) -> dict:
    """Dispatch a validated config; returns the report document."""
    if cfg.task == "pointwise":
        results, verdict = _run_contact(cfg, "pointwise")
    elif cfg.task == "along-z":
        results, verdict = _run_contact(cfg, "along-z")
    elif cfg.task == "curvature":
        results, verdict = _run_curvature(cfg)
    elif cfg.task == "verify-recursions":
        results, verdict = _run_recursions(cfg)
    elif cfg.task == "verify-appendix":
        results, verdict = _run_appendix(cfg)
    elif cfg.task == "rkhs-quotient":
        results, verdict = _run_rkhs(cfg)
    else:  # pragma: no cover - guarded by build_config
        raise ConfigError(f"unknown task {cfg.task!r}")
    exit_code = {
        VERIFIED: EXIT_VERIFIED,
        "completed": EXIT_VERIFIED,
        REFUTED: EXIT_REFUTED,
        INCONCLUSIVE: EXIT_INCONCLUSIVE,
    }[verdict]
    return {
        "schema_version": SCHEMA_VERSION,
        "tool": {"name": "jetcontact", "version": __version__},
        "task": cfg.task,
        "config": _config_echo(cfg),
        "seed": cfg.seed,
        "results": results,
        "verdict": verdict,
        "exit_code": exit_code,
    }


def _config_echo(cfg: RunConfig) -> dict:
    echo = {
        "task": cfg.task,
        "order": cfg.order,
        "tolerance": cfg.tolerance,
        "seed": cfg.seed,
        "bundles": [
            {
                "label": b.label,
                "dimension": b.dimension,
                "rank": b.rank,
                "gram": [[e.text() for e in row] for row in b.entries],
            }
            for b in cfg.bundles
        ],
        "points": [[_cnum(c) for c in p] for p in cfg.points],
    }
    if cfg.candidate is not None:
        echo["candidate"] = cfg.candidate
    if cfg.appendix_bound is not None:
        echo["appendix_bound"] = cfg.appendix_bound
    return echo


def _emit(document: dict, out_path) -> None:
    text = json.dumps(document, indent=2, sort_keys=True)
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="jetcontact",
        description="Decide and verify order-n contact between Hermitian "
        "holomorphic vector bundles given by Gram expressions.",
    )
    parser.add_argument("--config", required=True, help="YAML run configuration")
    parser.add_argument("--task", choices=TASKS, help="override the config task")
    parser.add_argument("--order", type=int, help="override the jet order")
    parser.add_argument("--tolerance", type=float, help="override the tolerance")
    parser.add_argument("--seed", type=int, help="override the random seed")
    parser.add_argument("--out", help="write the JSON report here (default stdout)")
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config)
        if args.task:
            cfg.task = args.task
        if args.order is not None:
            cfg.order = args.order
        if args.tolerance is not None:
            cfg.tolerance = args.tolerance
        if args.seed is not None:
            cfg.seed = args.seed
        if args.out:
            cfg.out = args.out
        document = run(cfg)
    except (ConfigError, ParseError) as exc:
        print(f"jetcontact: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"jetcontact: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR

    _emit(document, cfg.out)
    return document["exit_code"]


if __name__ == "__main__":
    sys.exit(main())
