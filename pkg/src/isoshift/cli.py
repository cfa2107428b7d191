"""Batch front end: run a JSON task spec, write a JSON report.

Usage:
    isoshift run spec.json [--trunc N] [--tol X] [--seed S]
                           [--mode strict|lossy] [--out report.json]

Tasks: validate-bcl, extract-model, factor-invariant, cstar-check,
full-equivalence.  Exit codes: 0 all checks pass, 1 check failures,
2 schema violation, 3 numerical precondition failure.  Reports are
deterministic for a fixed spec and seed (apart from the wall_time field);
ISOSHIFT_THREADS caps the number of workers used for independent checks.
"""

from __future__ import annotations

import argparse
import json
import sys
import time

import numpy as np

from . import blhfactor, bcl, canon, cstar
from .coeffspace import DegreeGrid, PolyVec, SubspaceBasis, canonical_basis
from .errors import PreconditionError, SchemaError
from .matpoly import FiniteBlaschke, MatPoly
from .report import Check, VerificationReport, thread_cap

TASKS = ("validate-bcl", "extract-model", "factor-invariant", "cstar-check",
         "full-equivalence")

DEFAULT_TOL = 1e-8


def _require(cond: bool, msg: str):
    if not cond:
        raise SchemaError(msg)


def load_run_spec(obj: dict, overrides: dict) -> dict:
    _require(isinstance(obj, dict), "spec must be a JSON object")
    task = overrides.get("task") or obj.get("task")
    _require(task in TASKS, f"task must be one of {TASKS}")
    trunc = overrides.get("trunc") or obj.get("trunc")
    _require(trunc is not None, "trunc is required")
    if isinstance(trunc, int):
        trunc = [trunc]
    _require(all(isinstance(t, int) and t >= 2 for t in trunc),
             "trunc entries must be integers >= 2")
    tol = overrides.get("tol") if overrides.get("tol") is not None else obj.get("tol")
    if tol is None:
        # structural tasks default tighter than identity-level tasks
        tol = 1e-10 if task in ("validate-bcl", "extract-model") else DEFAULT_TOL
    _require(isinstance(tol, (int, float)) and tol > 0, "tol must be positive")
    seed = overrides.get("seed") if overrides.get("seed") is not None else obj.get("seed", 0)
    mode = overrides.get("mode") or obj.get("mode", "strict")
    _require(mode in ("strict", "lossy"), "mode must be strict or lossy")
    payload = obj.get("input")
    _require(isinstance(payload, dict), "input payload must be a JSON object")
    return {"task": task, "trunc": list(trunc), "tol": float(tol),
            "seed": int(seed), "mode": mode, "input": payload}


def _decode_tuple(obj) -> bcl.BCLTuple:
    try:
        return bcl.BCLTuple.from_json(obj)
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"bad tuple payload: {exc}") from exc


def _decode_polyvecs(items, grid: DegreeGrid) -> list[PolyVec]:
    out = []
    for it in items:
        try:
            vec = PolyVec.from_json(it)
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"bad coefficient vector: {exc}") from exc
        if vec.grid != grid:
            raise SchemaError("coefficient vector grid does not match the run grid")
        out.append(vec)
    return out


def _uniform(trunc: list[int], n: int) -> tuple[int, ...]:
    if len(trunc) == 1:
        return tuple(trunc) * n
    if len(trunc) != n:
        raise SchemaError(f"trunc must have 1 or {n} entries")
    return tuple(trunc)


def _run_validate_bcl(spec: dict) -> VerificationReport:
    t = _decode_tuple(spec["input"].get("tuple"))
    return bcl.validate_tuple(t, tol=spec["tol"])


def _run_extract_model(spec: dict) -> VerificationReport:
    payload = spec["input"]
    tol = spec["tol"]
    if "tuple" in payload:
        t = _decode_tuple(payload["tuple"])
        grid = DegreeGrid(1, _uniform(spec["trunc"], 1), t.e)
        oracles = [canon.matpoly_oracle(phi, grid) for phi in bcl.tuple_symbols(t)]
    elif "shifts" in payload:
        nv = payload["shifts"].get("nvars")
        _require(isinstance(nv, int) and nv >= 2, "shifts.nvars must be an integer >= 2")
        grid = DegreeGrid(nv, _uniform(spec["trunc"], nv), 1)
        oracles = [canon.coordinate_shift_oracle(grid, v) for v in range(1, nv + 1)]
    else:
        raise SchemaError("extract-model input needs 'tuple' or 'shifts'")
    model = canon.extract_model(oracles, tol=tol)
    rep = model.report
    for j in range(1, model.tuple.n + 1):
        rep.extend(canon.projection_conjugation_check(model, [], j, tol))
        for i in range(1, model.tuple.n + 1):
            if i != j:
                rep.extend(canon.projection_conjugation_check(model, [i], j, tol))
    return rep


def _run_factor_invariant(spec: dict) -> VerificationReport:
    payload = spec["input"]
    ambient = _decode_tuple(payload.get("ambient"))
    trunc = _uniform(spec["trunc"], 1)[0]
    grid = DegreeGrid(1, (trunc,), ambient.e)
    if "generators" in payload:
        gens = _decode_polyvecs(payload["generators"], grid)
        sub = blhfactor.InvariantSubspaceSpec(ambient, trunc, generators=gens)
    elif "theta" in payload:
        try:
            theta = MatPoly.from_json(payload["theta"])
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"bad theta payload: {exc}") from exc
        sub = blhfactor.InvariantSubspaceSpec(ambient, trunc, theta=theta)
    else:
        raise SchemaError("factor-invariant input needs 'generators' or 'theta'")
    return blhfactor.factor_subspace(sub, tol=spec["tol"]).report


def _decode_subspace(payload: dict, grid: DegreeGrid, tol: float) -> SubspaceBasis:
    sdef = payload.get("S")
    _require(isinstance(sdef, dict), "input needs an 'S' object")
    if "codim_complement_basis" in sdef:
        vecs = _decode_polyvecs(sdef["codim_complement_basis"], grid)
        proj = np.eye(grid.size, dtype=complex)
        if vecs:
            from .coeffspace import orthonormal_columns
            comp = orthonormal_columns(np.column_stack([v.coeffs for v in vecs]))
            proj -= comp @ comp.conj().T
        return canonical_basis(grid, proj)
    if "generators" in sdef:
        vecs = _decode_polyvecs(sdef["generators"], grid)
        _require(bool(vecs), "S.generators must be nonempty")
        from .coeffspace import orthonormal_columns, shift_matrix
        ops = [shift_matrix(grid, v) for v in range(1, grid.nvars + 1)]
        basis = orthonormal_columns(np.column_stack([v.coeffs for v in vecs]))
        for _ in range(grid.size):
            bigger = orthonormal_columns(
                np.column_stack([basis] + [op @ basis for op in ops]))
            if bigger.shape[1] == basis.shape[1]:
                break
            basis = bigger
        return SubspaceBasis(grid, basis)
    raise SchemaError("S needs 'codim_complement_basis' or 'generators'")


def _decode_phis(payload: dict) -> list[FiniteBlaschke]:
    phis = payload.get("phis")
    _require(isinstance(phis, list) and len(phis) >= 2, "phis must list >= 2 symbols")
    out = []
    for p in phis:
        try:
            out.append(FiniteBlaschke.from_json(p))
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"bad Blaschke payload: {exc}") from exc
    return out


def _run_cstar_check(spec: dict) -> VerificationReport:
    payload = spec["input"]
    phis = _decode_phis(payload)
    n = len(phis)
    cspec = cstar.CoDoublyCommutingSpec(tuple(phis), _uniform(spec["trunc"], n))
    tol = spec["tol"]
    basis, rep = cstar.codouble_subspace(cspec, tol)
    if cspec.all_finite and basis.dim:
        _, crep = cstar.commutator_check(basis, tol)
        rep.merge(crep)
        result = cstar.codouble_equivalence(cspec, tol, workers=thread_cap())
        rep.merge(result.report)
    else:
        rep.add(Check("cstar.skip_equivalence", 0.0, 0.5,
                      detail="zero symbol present: no finite-codimension equivalence"))
    return rep


def _run_full_equivalence(spec: dict) -> VerificationReport:
    payload = spec["input"]
    n = payload.get("n")
    _require(isinstance(n, int) and n >= 2, "input needs integer n >= 2")
    grid = DegreeGrid(n, _uniform(spec["trunc"], n), 1)
    S = _decode_subspace(payload, grid, spec["tol"])
    _, rep = cstar.full_equivalence(S, tol=spec["tol"], workers=thread_cap())
    return rep


_RUNNERS = {
    "validate-bcl": _run_validate_bcl,
    "extract-model": _run_extract_model,
    "factor-invariant": _run_factor_invariant,
    "cstar-check": _run_cstar_check,
    "full-equivalence": _run_full_equivalence,
}


def run_spec(path: str, overrides: dict | None = None, out_path: str | None = None
             ) -> tuple[int, dict]:
    """Execute a spec file; returns (exit_code, report_dict) and writes the report."""
    overrides = overrides or {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        report = {"error": f"unreadable spec: {exc}", "checks": [], "pass": False}
        return 2, report
    start = time.perf_counter()
    try:
        spec = load_run_spec(raw, overrides)
        rep = _RUNNERS[spec["task"]](spec)
        code = 0 if rep.passed else 1
        rep.environment = {
            "task": spec["task"], "trunc": spec["trunc"], "tol": spec["tol"],
            "seed": spec["seed"], "mode": spec["mode"],
            "wall_time": time.perf_counter() - start,
        }
        report = rep.to_json()
    except SchemaError as exc:
        return 2, {"error": str(exc), "checks": [], "pass": False}
    except PreconditionError as exc:
        return 3, {"error": str(exc), "checks": [], "pass": False}
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return code, report


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="isoshift",
                                     description="finite-truncation checks for "
                                                 "commuting-isometry constructions")
    sub = parser.add_subparsers(dest="command", required=True)
    runp = sub.add_parser("run", help="run a JSON task spec")
    runp.add_argument("spec", help="path to the spec JSON file")
    runp.add_argument("--trunc", type=int, default=None, help="uniform degree bound")
    runp.add_argument("--tol", type=float, default=None, help="tolerance override")
    runp.add_argument("--seed", type=int, default=None, help="seed for randomized checks")
    runp.add_argument("--mode", choices=["strict", "lossy"], default=None)
    runp.add_argument("--out", default=None, help="report path (default: <spec>.report.json)")
    args = parser.parse_args(argv)

    out_path = args.out or (args.spec + ".report.json")
    overrides = {"trunc": [args.trunc] if args.trunc else None, "tol": args.tol,
                 "seed": args.seed, "mode": args.mode}
    code, report = run_spec(args.spec, overrides, out_path)
    if "error" in report:
        print(f"error: {report['error']}", file=sys.stderr)
    else:
        for line in VerificationReport(
                [Check(c["name"], c["residual"], c["tol"], c.get("window", "full"),
                       c.get("rank"), c.get("rank_bound"), c.get("detail", ""))
                 for c in report["checks"]]).summary_lines():
            print(line)
        print(f"report written to {out_path}")
    return code


if __name__ == "__main__":
    sys.exit(main())
