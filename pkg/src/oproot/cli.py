"""Config-driven command line: solve, scan, verify, r0.

Configs are strict JSON (unknown keys rejected) with the top-level keys
instance/contour/solver/task/scan/output.  Results are JSON records and
RFC-4180 CSV tables; repeated runs of the same config produce identical
files except for the timestamp field.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import datetime
import hashlib
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .contour import build_dip_contour, check_solvability, certificate_scale
from .errors import (ConfigError, MaxIterExceeded, NoAdmissibleContour,
                     NotAdmissible, OprootError)
from .model import (DirectRankCoupling, ProblemInstance, SchrodingerCoupling,
                    validate_instance)
from .rootsolve import DipFamily, estimate_r0, solve_fixed_point
from .spectral import eigendecompose
from .transfer import m1_continued
from .verify import run_verification

__all__ = ["RunConfig", "ResultRecord", "load_config", "main", "console_main"]

_TOP_KEYS = {"task", "instance", "contour", "solver", "scan", "output"}
_INSTANCE_KEYS = {"eigenvalues", "j0", "coupling", "dim"}
_COUPLING_KEYS = {"family", "n", "terms", "scale"}
_TERM_KEYS = {"vector", "alpha", "beta"}
_CONTOUR_KEYS = {"half_plane", "depth", "span", "r_join", "r_max", "order",
                 "endpoint_map"}
_SOLVER_KEYS = {"tol", "max_iter"}
_SCAN_KEYS = {"epsilons"}
_OUTPUT_KEYS = {"dir"}
_TASKS = {"solve", "scan", "verify", "r0"}


def _reject_unknown(section: dict, allowed: set, where: str):
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) {sorted(unknown)} in {where}")


def _need(section: dict, key: str, where: str):
    if key not in section:
        raise ConfigError(f"missing required key '{key}' in {where}")
    return section[key]


def _component(x, where):
    if isinstance(x, (int, float)):
        return complex(x)
    if isinstance(x, list) and len(x) == 2 and all(
            isinstance(c, (int, float)) for c in x):
        return complex(x[0], x[1])
    raise ConfigError(f"{where}: vector entries must be numbers or [re, im]")


@dataclass(frozen=True)
class RunConfig:
    task: str
    instance: dict
    contour: dict
    solver: dict = field(default_factory=dict)
    scan: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)
    config_hash: str = ""

    @property
    def tol(self) -> float:
        return float(self.solver.get("tol", 1e-12))

    @property
    def max_iter(self) -> int:
        return int(self.solver.get("max_iter", 200))


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}, "
                          f"column {exc.colno}: {exc.msg}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    _reject_unknown(raw, _TOP_KEYS, "the top level")
    task = _need(raw, "task", "the top level")
    if task not in _TASKS:
        raise ConfigError(f"task must be one of {sorted(_TASKS)}, got {task!r}")
    inst = _need(raw, "instance", "the top level")
    _reject_unknown(inst, _INSTANCE_KEYS, "instance")
    coup = _need(inst, "coupling", "instance")
    _reject_unknown(coup, _COUPLING_KEYS, "instance.coupling")
    for i, term in enumerate(_need(coup, "terms", "instance.coupling")):
        _reject_unknown(term, _TERM_KEYS, f"instance.coupling.terms[{i}]")
    cont = _need(raw, "contour", "the top level")
    _reject_unknown(cont, _CONTOUR_KEYS, "contour")
    _reject_unknown(raw.get("solver", {}), _SOLVER_KEYS, "solver")
    _reject_unknown(raw.get("scan", {}), _SCAN_KEYS, "scan")
    _reject_unknown(raw.get("output", {}), _OUTPUT_KEYS, "output")
    if task == "scan":
        eps = _need(raw.get("scan", {}), "epsilons", "scan")
        if (not isinstance(eps, list) or not eps
                or any(not isinstance(e, (int, float)) or e <= 0 for e in eps)
                or any(b <= a for a, b in zip(eps, eps[1:]))):
            raise ConfigError(
                "scan.epsilons must be a strictly increasing positive list")
    canon = json.dumps(raw, sort_keys=True, separators=(",", ":"))
    digest = hashlib.sha256(canon.encode()).hexdigest()
    return RunConfig(task=task, instance=inst, contour=cont,
                     solver=raw.get("solver", {}), scan=raw.get("scan", {}),
                     output=raw.get("output", {}), config_hash=digest)


def build_instance(cfg: RunConfig) -> ProblemInstance:
    inst = cfg.instance
    lam = _need(inst, "eigenvalues", "instance")
    if isinstance(lam, str):
        kind, _, arg = lam.partition(":")
        if kind != "squares" or not arg.isdigit():
            raise ConfigError(
                f"instance.eigenvalues generator {lam!r} not recognized "
                "(expected 'squares:<m>')")
        lam = [float((i + 1) ** 2) for i in range(int(arg))]
    if not isinstance(lam, list) or not all(
            isinstance(x, (int, float)) for x in lam):
        raise ConfigError("instance.eigenvalues must be a list of reals")
    if "dim" in inst and int(inst["dim"]) != len(lam):
        raise ConfigError(f"instance.dim = {inst['dim']} does not match "
                          f"{len(lam)} eigenvalues")
    j0 = inst.get("j0", [0.0, None])
    if not isinstance(j0, list) or len(j0) != 2:
        raise ConfigError("instance.j0 must be [lo, hi] with hi null for +inf")
    lo = float(j0[0])
    hi = math.inf if j0[1] is None else float(j0[1])
    coup = inst["coupling"]
    family = _need(coup, "family", "instance.coupling")
    scale = float(coup.get("scale", 1.0))
    terms = coup["terms"]
    vectors = [[_component(x, "instance.coupling") for x in
                _need(t, "vector", "coupling term")] for t in terms]
    if family == "schrodinger_radial":
        coupling = SchrodingerCoupling(
            n=int(coup.get("n", 3)), vectors=vectors,
            rates=[float(_need(t, "alpha", "coupling term")) for t in terms],
            scale=scale)
    elif family == "direct_rank":
        coupling = DirectRankCoupling(
            weights=[float(t.get("beta", 1.0)) for t in terms],
            rates=[float(t.get("alpha", 0.0)) for t in terms],
            vectors=vectors, scale=scale)
    else:
        raise ConfigError(f"unknown coupling family {family!r}")
    instance = ProblemInstance(a1_eigenvalues=tuple(float(x) for x in lam),
                               coupling=coupling, j0=(lo, hi))
    report = validate_instance(instance)
    if not report.passed:
        raise ConfigError("instance violates standing assumptions: "
                          + "; ".join(report.violations))
    return instance


def build_contour(cfg: RunConfig, instance: ProblemInstance):
    c = cfg.contour
    span = _need(c, "span", "contour")
    return build_dip_contour(
        instance, int(_need(c, "half_plane", "contour")),
        depth=float(_need(c, "depth", "contour")),
        span=(float(span[0]), float(span[1])),
        r_max=None if c.get("r_max") is None else float(c["r_max"]),
        order=int(c.get("order", 24)),
        r_join=None if c.get("r_join") is None else float(c["r_join"]),
        endpoint_map=bool(c.get("endpoint_map", True)))


# ---------------------------------------------------------------------------
# result records

def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, complex):
        return [x.real, x.imag]
    if isinstance(x, float) and math.isnan(x):
        return None
    return x


@dataclass(frozen=True)
class ResultRecord:
    task: str
    config_hash: str
    created_at: str
    certificate: dict
    eigenvalues: tuple      # (re, im, multiplicity) triples
    residuals: dict
    metrics: dict

    def to_dict(self):
        d = dataclasses.asdict(self)
        d["eigenvalues"] = [list(t) for t in self.eigenvalues]
        return _jsonable(d)

    @staticmethod
    def from_dict(d) -> "ResultRecord":
        return ResultRecord(
            task=d["task"], config_hash=d["config_hash"],
            created_at=d["created_at"], certificate=dict(d["certificate"]),
            eigenvalues=tuple(tuple(t) for t in d["eigenvalues"]),
            residuals=dict(d["residuals"]), metrics=dict(d["metrics"]))

    def save(self, path):
        Path(path).write_text(
            json.dumps(self.to_dict(), sort_keys=True, indent=1) + "\n")

    @staticmethod
    def load(path) -> "ResultRecord":
        return ResultRecord.from_dict(json.loads(Path(path).read_text()))


def _cert_dict(cert):
    return _jsonable({"v0": cert.v0, "d0": cert.d0, "omega": cert.omega,
                      "r_min": cert.r_min, "r_max": cert.r_max,
                      "admissible": cert.admissible})


def _timestamp():
    return datetime.datetime.now(datetime.timezone.utc).isoformat()


# ---------------------------------------------------------------------------
# commands

def cmd_solve(cfg: RunConfig, out_dir: Path, threads: int) -> int:
    instance = build_instance(cfg)
    contour = build_contour(cfg, instance)
    cert = check_solvability(instance, contour)
    if not cert.admissible:
        print(f"inadmissible contour: variation {cert.v0:.12g} is not "
              f"strictly below d0^2/4 = {cert.d0 ** 2 / 4:.12g} "
              "(solvability requires v0 < d0^2/4)", file=sys.stderr)
        return 2
    try:
        root = solve_fixed_point(instance, contour, tol=cfg.tol,
                                 max_iter=cfg.max_iter)
    except MaxIterExceeded as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 3
    scale = certificate_scale(instance, cert)
    eig = eigendecompose(root.h1, scale=scale)
    transport = {}
    for cl in eig.clusters:
        m1 = m1_continued(instance, contour, cl.value).m1
        transport[f"{cl.value.real:.12g}{cl.value.imag:+.12g}j"] = max(
            float(np.linalg.norm(m1 @ v)) for v in cl.vectors)
    record = ResultRecord(
        task="solve", config_hash=cfg.config_hash, created_at=_timestamp(),
        certificate=_cert_dict(cert),
        eigenvalues=tuple((z.real, z.imag, mult) for z, mult in
                          zip(eig.eigenvalues, eig.multiplicities)),
        residuals=_jsonable({"fixed_point": root.final_residual,
                             "transport": transport,
                             "chain_max": max(max(max(r) for r in c.residuals)
                                              for c in eig.clusters)}),
        metrics=_jsonable({"iterations": root.iterations,
                           "x_norm": root.norm_x, "scale": scale,
                           "root_vector_condition": eig.condition_number,
                           "threads": threads}))
    out = out_dir / "result.json"
    record.save(out)
    print(f"solve: {root.iterations} iterations, |X| = {root.norm_x:.6g}, "
          f"residual = {root.final_residual:.3e}")
    for z, mult in zip(eig.eigenvalues, eig.multiplicities):
        print(f"  eigenvalue {z.real:+.12f} {z.imag:+.12f}i  (mult {mult})")
    print(f"wrote {out}")
    return 0


def _scan_one(cfg, eps):
    instance = build_instance(cfg).with_coupling_scale(eps)
    contour = build_contour(cfg, instance)
    cert = check_solvability(instance, contour)
    if not cert.admissible:
        return eps, None, "inadmissible"
    try:
        root = solve_fixed_point(instance, contour, tol=cfg.tol,
                                 max_iter=cfg.max_iter)
    except OprootError as exc:
        return eps, None, type(exc).__name__
    eig = eigendecompose(root.h1,
                         scale=certificate_scale(instance, cert))
    rows = []
    for cl in eig.clusters:
        m1 = m1_continued(instance, contour, cl.value).m1
        res = max(float(np.linalg.norm(m1 @ v)) for v in cl.vectors)
        for _ in range(cl.multiplicity):
            rows.append((cl.value, res))
    return eps, rows, "ok"


def cmd_scan(cfg: RunConfig, out_dir: Path, threads: int) -> int:
    if "epsilons" not in cfg.scan:
        raise ConfigError("task 'scan' requires scan.epsilons")
    epsilons = [float(e) for e in cfg.scan["epsilons"]]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda e: _scan_one(cfg, e), epsilons))
    else:
        results = [_scan_one(cfg, e) for e in epsilons]
    results.sort(key=lambda t: t[0])
    out = out_dir / "trajectories.csv"
    prev = None
    n_ok = 0
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(["epsilon", "j", "re_z", "im_z", "residual", "status"])
        for eps, rows, status in results:
            if rows is None:
                w.writerow([repr(eps), "", "", "", "", status])
                continue
            n_ok += 1
            zs = [z for z, _ in rows]
            if prev is None:
                order = sorted(range(len(zs)), key=lambda i: zs[i].real)
            else:
                # continue trajectories: nearest previous position per index
                order = []
                taken = set()
                for pz in prev:
                    best = min((i for i in range(len(zs)) if i not in taken),
                               key=lambda i: abs(zs[i] - pz))
                    taken.add(best)
                    order.append(best)
            prev = [zs[i] for i in order]
            for j, i in enumerate(order):
                z, res = rows[i]
                w.writerow([repr(eps), j, repr(z.real), repr(z.imag),
                            repr(res), status])
    print(f"scan: {n_ok}/{len(epsilons)} epsilon values solved; wrote {out}")
    return 0 if n_ok >= 1 else 3


def cmd_verify(cfg: RunConfig, out_dir: Path, threads: int) -> int:
    instance = build_instance(cfg)
    contour = build_contour(cfg, instance)
    cert = check_solvability(instance, contour)
    if not cert.admissible:
        print(f"inadmissible contour: variation {cert.v0:.12g} is not "
              f"strictly below d0^2/4 = {cert.d0 ** 2 / 4:.12g} "
              "(solvability requires v0 < d0^2/4)", file=sys.stderr)
        return 2
    try:
        report = run_verification(instance, contour, tol=cfg.tol,
                                  max_iter=cfg.max_iter)
    except MaxIterExceeded as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 3
    payload = {
        "config_hash": cfg.config_hash,
        "created_at": _timestamp(),
        "passed": report.passed,
        "checks": [{"name": c.name, "value": c.value,
                    "threshold": c.threshold, "comparator": c.comparator,
                    "passed": c.passed} for c in report.checks],
        "metrics": _jsonable(report.metrics),
    }
    out = out_dir / "verification.json"
    out.write_text(json.dumps(payload, sort_keys=True, indent=1) + "\n")
    re_, im_, sm = report.landscape
    grid_out = out_dir / "sigma_min_grid.csv"
    with open(grid_out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(["re_z", "im_z", "sigma_min"])
        for a, b, s in zip(re_, im_, sm):
            w.writerow([repr(float(a)), repr(float(b)),
                        "" if math.isnan(s) else repr(float(s))])
    for c in report.checks:
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.name:40s} "
              f"{c.value:.6e} {c.comparator} {c.threshold:.6e}")
    print(f"verification {'passed' if report.passed else 'FAILED'}; "
          f"wrote {out} and {grid_out}")
    return 0 if report.passed else 4


def cmd_r0(cfg: RunConfig, out_dir: Path, threads: int) -> int:
    instance = build_instance(cfg)
    c = cfg.contour
    l = int(c["half_plane"])
    depth = float(c["depth"])
    span = (float(c["span"][0]), float(c["span"][1]))
    r_max = None if c.get("r_max") is None else float(c["r_max"])
    base_join = c.get("r_join")
    joins = ((span[1] + depth,) if base_join is None
             else (float(base_join), float(base_join) + depth))
    family = DipFamily(
        depths=tuple(depth * f for f in (0.6, 0.8, 1.0, 1.25, 1.5)),
        spans=(span,), r_joins=joins, r_max=r_max,
        order=int(c.get("order", 24)))
    try:
        est = estimate_r0(instance, l, family)
    except NoAdmissibleContour as exc:
        print(f"no admissible contour: {exc}", file=sys.stderr)
        return 2
    payload = _jsonable({
        "config_hash": cfg.config_hash,
        "created_at": _timestamp(),
        "r0": est.r0,
        "family_grid": est.family_grid,
        "argmin_vertices": [complex(v) for v in est.argmin_contour.vertices],
        "evaluated": [{"depth": d, "span": list(s), "r_join": rj,
                       "r_min": (None if math.isnan(rm) else rm)}
                      for d, s, rj, rm in est.evaluated],
    })
    out = out_dir / "r0.json"
    out.write_text(json.dumps(payload, sort_keys=True, indent=1) + "\n")
    print(f"r0 upper bound: {est.r0:.12g}; wrote {out}")
    return 0


# ---------------------------------------------------------------------------
# entry point

def _thread_count(args) -> int:
    if args.threads is not None:
        return max(1, int(args.threads))
    env = os.environ.get("OPERATOR_ROOT_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ConfigError(
                f"OPERATOR_ROOT_THREADS={env!r} is not an integer") from exc
    return 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="oproot",
        description="Resonances and operator roots of matrix-Hamiltonian "
                    "transfer functions")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in (("solve", cmd_solve), ("scan", cmd_scan),
                     ("verify", cmd_verify), ("r0", cmd_r0)):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        p.add_argument("--out", default=None)
        p.add_argument("--threads", type=int, default=None)
        p.set_defaults(func=fn)
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        threads = _thread_count(args)
        out_dir = Path(args.out) if args.out else Path(
            cfg.output.get("dir", "oproot-out"))
        out_dir.mkdir(parents=True, exist_ok=True)
        return args.func(cfg, out_dir, threads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except NotAdmissible as exc:
        print(f"inadmissible contour: {exc}", file=sys.stderr)
        return 2
    except MaxIterExceeded as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 3
    except OprootError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


def console_main():
    raise SystemExit(main())
