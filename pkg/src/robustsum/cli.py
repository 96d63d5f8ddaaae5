"""Command-line front end.

Every subcommand reads an instance (a file, a shipped fixture name or a
``--family`` shortcut), runs the matching queries and writes a deterministic
report.  Timings never enter the report; with ``--out`` they go to a
``<out>.timings.json`` sidecar.

Exit codes: 0 success, 1 usage or input error, 2 counterexample or
inconsistency, 3 at least one Unknown verdict and no counterexample.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
import time
from typing import Optional

import numpy as np

from . import __version__
from . import certificates as cert
from .bracket import Bracket
from .conjugate import (CheckResult, EpiUnionSet, Tri, closed_convex_regarding, conjugate_numeric,
                        convexity_witness_nonneg, gap_report, lemma7_check, phi_eval,
                        weak_duality_check)
from .errors import InconclusiveGrowth, InstanceError, RobustSumError
from .families import NAMED_FAMILIES, RobustSumFunction
from .instances import OPS, build_family, fixture_names, load_instance, validate
from .scalar import (BUILTIN_NAMES, ScalarFamily, infinite_sum_classify, negative_part_sum,
                     positive_part_sum, robust_sum_scalar, sup_scalar)
from .solvers import best_approx_solution, robust_regression

EXIT_OK, EXIT_USAGE, EXIT_COUNTER, EXIT_UNKNOWN = 0, 1, 2, 3
SWEEP_COLUMNS = ["xstar", "fstar", "phi", "gap", "zero_gap", "strong_gap"]


# -- serialisation ------------------------------------------------------------------------

def fmt_float(v: float):
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    if math.isnan(v):
        return "nan"
    return float(format(v, ".17g"))


def _plain(obj):
    """Convert results to JSON-ready values (tuples, numpy, brackets, enums)."""
    if isinstance(obj, Bracket):
        return {"lo": _plain(obj.lo), "hi": _plain(obj.hi)}
    if isinstance(obj, Tri):
        return obj.value
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    if hasattr(obj, "value") and isinstance(getattr(obj, "value"), str):
        return obj.value
    return obj


def dumps(obj) -> str:
    """JSON with 17 significant digits and infinities as strings."""

    def enc(o, ind):
        pad = "  " * (ind + 1)
        if isinstance(o, float):
            v = fmt_float(o)
            return json.dumps(v) if isinstance(v, str) else format(o, ".17g")
        if isinstance(o, dict):
            if not o:
                return "{}"
            items = [f"{pad}{json.dumps(k)}: {enc(v, ind + 1)}" for k, v in o.items()]
            return "{\n" + ",\n".join(items) + "\n" + "  " * ind + "}"
        if isinstance(o, list):
            if not o:
                return "[]"
            if all(not isinstance(v, (dict, list)) for v in o):
                return "[" + ", ".join(enc(v, ind + 1) for v in o) + "]"
            return "[\n" + ",\n".join(pad + enc(v, ind + 1) for v in o) + "\n" + "  " * ind + "]"
        return json.dumps(o)

    return enc(_plain(obj), 0) + "\n"


def _csv_num(v) -> str:
    if isinstance(v, float):
        r = fmt_float(v)
        return r if isinstance(r, str) else format(v, ".17g")
    return str(v)


# -- queries --------------------------------------------------------------------------------

def _vec(v, dim: Optional[int] = None) -> np.ndarray:
    a = np.atleast_1d(np.asarray(v, dtype=float))
    if dim is not None and a.shape[0] != dim:
        raise InstanceError(f"expected a point of dimension {dim}, got {a.shape[0]}", "/queries")
    return a


def _scalar(b: Bracket) -> float:
    return b.lo if b.lo == b.hi else b.mid


def _status_of_cert(c) -> str:
    return "unknown" if c.verdict == "unknown" else "ok"


class Runner:
    def __init__(self, doc: dict, opts: argparse.Namespace):
        self.doc = doc
        self.opts = opts
        self.family = build_family(doc["family"])
        self._fn = None

    @property
    def fn(self) -> RobustSumFunction:
        if isinstance(self.family, ScalarFamily):
            raise InstanceError("this query needs a function family, not a scalar one", "/family")
        if self._fn is None:
            self._fn = RobustSumFunction(self.family, budget=int(self.opts.budget))
        return self._fn

    def max_card(self, params):
        return params.get("max_card", self.opts.max_card)

    def run(self, op: str, params: dict) -> tuple:
        """Returns ``(result, status)`` with status ok, unknown or counterexample."""
        return getattr(self, "op_" + op.replace("-", "_"))(params)

    def op_eval_scalar(self, params):
        fam = self.family
        if not isinstance(fam, ScalarFamily):
            raise InstanceError("eval-scalar needs a scalar family", "/family")
        tol, budget = self.opts.tol, int(self.opts.budget)
        from .errors import UnknownBudgetExceeded
        try:
            value = robust_sum_scalar(fam, tol, budget)
        except UnknownBudgetExceeded as exc:
            return {"value": exc.bracket, "classification": "unknown", "note": str(exc)}, "unknown"
        cls = infinite_sum_classify(fam, tol, budget)
        out = {"value": value, "classification": cls.kind.value}
        try:
            sup = sup_scalar(fam, tol, budget)
            out["sup"] = sup.value
            out["sup_sign"] = sup.sign.value if sup.sign else "unknown"
            out["positive_part"] = positive_part_sum(fam, tol, budget)
            out["negative_part"] = negative_part_sum(fam, tol, budget)
        except RobustSumError as exc:
            out["note"] = str(exc)
        return out, "unknown" if cls.kind.value == "unknown" else "ok"

    def op_eval(self, params):
        x = _vec(params["x"], self.fn.dim)
        return {"x": x, "value": self.fn(x, self.opts.tol)}, "ok"

    def op_conjugate(self, params):
        y = _vec(params["xstar"], self.fn.dim)
        try:
            r = conjugate_numeric(self.fn, y)
        except InconclusiveGrowth as exc:
            return {"xstar": y, "value": None, "note": str(exc)}, "unknown"
        return {"xstar": y, "value": r.value, "argmax": r.argmax, "iterations": r.iterations,
                "escaped": r.escaped}, "ok"

    def op_phi(self, params):
        y = _vec(params["xstar"], self.fn.dim)
        r = phi_eval(self.fn, y, self.max_card(params))
        out = {"xstar": y, "value": r.value, "best": None if r.best is None else r.best.to_json(),
               "attained": r.attained, "complete": r.complete, "max_card": r.max_card}
        return out, "unknown" if r.unknown else "ok"

    def op_gap(self, params):
        y = _vec(params["xstar"], self.fn.dim)
        rep = gap_report(self.fn, y, self.max_card(params), tol=self.opts.tol)
        out = rep.to_json()
        out["primal"] = _scalar(rep.primal)
        out["dual"] = _scalar(rep.dual)
        out["weak_duality"] = weak_duality_check(rep, max(self.opts.tol, 1e-9))
        if not out["weak_duality"]:
            return out, "counterexample"
        unknown = Tri.UNKNOWN in (rep.zero_gap, rep.strong_gap)
        return out, "unknown" if unknown else "ok"

    def op_certify(self, params):
        kind = params["set"]
        fn = self.fn
        dim = fn.dim
        eps = params.get("eps", 0.0)
        K = self.max_card(params)
        steps = self.opts.eta_steps
        get = lambda k: _vec(params[k], dim) if k in params else None  # noqa: E731
        x, y = get("x"), get("xstar")
        need = {"subdiff": "x xstar", "M": "x xstar", "N": "x xstar", "Pi": "x xstar",
                "Ns": "x xstar", "Pis": "x xstar", "B": "x xstar J parts", "S": "x",
                "T": "x J", "theorem1": "xstar x_sample", "theorem3": "xstar x_sample",
                "theorem2": "x_sample xstar_sample", "theorem4": "x_sample xstar_sample",
                "lemma10": "x", "closed_convex_regarding": "xstar", "lemma7": "xstar_sample",
                "convexity": ""}[kind]
        for k in need.split():
            if k not in params:
                raise InstanceError(f"certify {kind} needs '{k}'", f"/queries/params/{k}")
        if kind in ("subdiff", "M"):
            c = cert.eps_subdiff_membership(fn, x, y, eps)
        elif kind == "N":
            c = cert.N_eps_membership(fn, y, x, eps, steps, K)
        elif kind == "Pi":
            c = cert.Pi_eps_membership(fn, x, y, eps, steps, K)
        elif kind in ("Ns", "Pis"):
            c = cert.Ns_Pis_membership(fn, x, y, eps, K)
        elif kind == "B":
            parts = [_vec(p, dim) for p in params["parts"]]
            c = cert.B_eps_membership(fn, y, tuple(params["J"]), parts, x, eps)
        elif kind == "S":
            sets = cert.S_alpha(fn, x, params.get("alpha", 0.0), K)
            return {"set": kind, "x": x, "subsets": [list(J) for J in sets]}, "ok"
        elif kind == "T":
            ok = cert.T_alpha_membership(fn, params["J"], x, params.get("alpha", 0.0))
            return {"set": kind, "x": x, "J": params["J"], "member": ok}, "ok"
        elif kind in ("theorem1", "theorem3"):
            grid = params.get("eps_grid", [0.0, 0.5])
            xs = [_vec(v, dim) for v in params["x_sample"]]
            g = (cert.theorem1_verify if kind == "theorem1" else cert.theorem3_verify)(fn, y, grid, xs, K)
            return self._grader(kind, g)
        elif kind in ("theorem2", "theorem4"):
            grid = params.get("eps_grid", [0.0, 0.5])
            xs = [_vec(v, dim) for v in params["x_sample"]]
            ys = [_vec(v, dim) for v in params["xstar_sample"]]
            g = (cert.theorem2_verify if kind == "theorem2" else cert.theorem4_verify)(fn, xs, grid, ys, K)
            return self._grader(kind, g)
        elif kind == "lemma10":
            window = tuple(params.get("window", (-2.0, 2.0)))
            g = cert.lemma10_theorem6_check(fn, x, eps, window)
            return self._grader(kind, g)
        elif kind == "closed_convex_regarding":
            v = closed_convex_regarding(EpiUnionSet(fn), y)
            return {"set": kind, "xstar": y, "verdict": v.value}, \
                "unknown" if v.value == "unknown" else "ok"
        elif kind == "lemma7":
            ys = [_vec(v, dim) for v in params["xstar_sample"]]
            return self._check(kind, lemma7_check(fn, ys))
        else:
            return self._check(kind, convexity_witness_nonneg(fn, seed=int(self.opts.seed)))
        out = {"set": kind, "x": x, "xstar": y, "eps": eps}
        out.update(c.to_json())
        return out, _status_of_cert(c)

    @staticmethod
    def _grader(kind, g):
        status = {"consistent": "ok", "counterexample": "counterexample"}.get(g.status, "unknown")
        return dict({"set": kind}, **g.to_json()), status

    @staticmethod
    def _check(kind, r: CheckResult):
        return {"set": kind, "ok": bool(r.ok), "failures": r.failures[:10], "detail": r.detail}, \
            "ok" if r.ok else "counterexample"

    def _solve(self, params, fn):
        p = float(params.get("p", self.opts.p or 2.0))
        kw = {"step": params.get("step", "auto"), "trace": True}
        if "init" in params:
            kw["init"] = _vec(params["init"])
        fam = self.family
        if hasattr(fam, "p") and float(fam.p) != p:
            raise InstanceError(f"family exponent {fam.p} differs from -p {p}", "/family")
        res = fn(fam, p, **kw)
        self.trace = res.trace
        out = res.to_json()
        out["p"] = p
        return out, "ok"

    def op_regress(self, params):
        return self._solve(params, robust_regression)

    def op_approx(self, params):
        return self._solve(params, best_approx_solution)

    def op_sweep(self, params):
        rows = []
        for v in params["xstar_grid"]:
            y = _vec(v, self.fn.dim)
            rep = gap_report(self.fn, y, self.max_card(params), tol=self.opts.tol)
            fstar, phi = rep.fstar, rep.phi.value
            if rep.zero_gap is Tri.YES:
                gap = 0.0
            elif phi.lo == math.inf and fstar.hi < math.inf:
                gap = math.inf
            else:
                gap = max(_scalar(phi) - _scalar(fstar), 0.0)
            rows.append({"xstar": y.tolist() if len(y) > 1 else float(y[0]),
                         "fstar": _scalar(fstar), "phi": _scalar(phi), "gap": gap,
                         "zero_gap": rep.zero_gap.value, "strong_gap": rep.strong_gap.value})
        unknown = any("unknown" in (r["zero_gap"], r["strong_gap"]) for r in rows)
        return {"rows": rows}, "unknown" if unknown else "ok"


# -- argument handling ---------------------------------------------------------------------

def _parse_point(text: str):
    vals = [float(t) for t in text.replace(";", ",").split(",") if t.strip()]
    return vals[0] if len(vals) == 1 else vals


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="robustsum", description="Robust sums, conjugate duality "
                                 "and epsilon-subdifferential certificates.")
    ap.add_argument("--version", action="version", version=f"robustsum {__version__}")
    sub = ap.add_subparsers(dest="command", required=True, metavar="SUBCOMMAND")
    for op in OPS:
        sp = sub.add_parser(op)
        src = sp.add_mutually_exclusive_group(required=True)
        src.add_argument("--instance", help="instance file or shipped fixture name")
        src.add_argument("--family", help="builtin scalar formula, named family or fixture name")
        sp.add_argument("--tol", type=float, default=1e-9)
        sp.add_argument("--max-card", type=int, default=None, dest="max_card")
        sp.add_argument("--eta-steps", type=int, default=20, dest="eta_steps")
        sp.add_argument("--budget", type=float, default=1e6)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out")
        sp.add_argument("--format", choices=["json", "csv"], default="json")
        sp.add_argument("--x", type=_parse_point)
        sp.add_argument("--xstar", type=_parse_point)
        sp.add_argument("--eps", type=float)
        sp.add_argument("--set", dest="set_", choices=None)
        sp.add_argument("--grid", help="comma separated x* values for sweep")
        sp.add_argument("-p", type=float, default=None)
    return ap


def _instance_from_args(args) -> tuple:
    if args.instance:
        return load_instance(args.instance)
    name = args.family
    if name in fixture_names():
        return load_instance(name)
    if args.command == "eval-scalar" or name.split("(")[0] in BUILTIN_NAMES:
        doc = {"version": 1, "family": {"kind": "scalar_gen", "formula": name}}
    elif name in NAMED_FAMILIES:
        fam = {"kind": "named", "name": name}
        if args.p is not None and name not in ("geometric_constants", "harmonic_mix"):
            fam["params"] = {"p": args.p}
        doc = {"version": 1, "family": fam}
    else:
        raise InstanceError(f"unknown family {name!r}", "/family")
    validate(doc)
    return doc, json.dumps(doc, sort_keys=True)


def _queries(args, doc) -> list:
    cmd = args.command
    params = {}
    if args.x is not None:
        params["x"] = args.x
    if args.xstar is not None:
        params["xstar"] = args.xstar
    if args.eps is not None:
        params["eps"] = args.eps
    if args.set_ is not None:
        params["set"] = args.set_
    if args.p is not None and cmd in ("regress", "approx"):
        params["p"] = args.p
    if args.grid is not None and cmd == "sweep":
        params["xstar_grid"] = [float(t) for t in args.grid.split(",") if t.strip()]
    from_file = [q for q in doc.get("queries", []) if q["op"] == cmd]
    if params or not from_file:
        merged = dict(from_file[0].get("params", {})) if from_file else {}
        if params.keys() & {"x", "xstar", "set"}:
            merged = {k: v for k, v in merged.items() if k in ("max_card", "p", "eps_grid")}
        merged.update(params)
        q = {"op": cmd, "params": merged}
        validate(dict(doc, queries=[q]))
        return [q]
    return from_file


def _digest(text: str, args) -> str:
    h = hashlib.sha256()
    h.update(json.dumps(json.loads(text), sort_keys=True).encode())
    opts = {k: getattr(args, k) for k in ("command", "tol", "max_card", "eta_steps", "budget",
                                          "seed", "x", "xstar", "eps", "set_", "grid", "p")}
    h.update(json.dumps(opts, sort_keys=True, default=str).encode())
    return h.hexdigest()


def _csv_report(cmd: str, results: list, trace) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if cmd == "sweep":
        w.writerow(SWEEP_COLUMNS)
        for r in results:
            for row in r["result"]["rows"]:
                x = row["xstar"]
                xs = ";".join(_csv_num(v) for v in x) if isinstance(x, list) else _csv_num(x)
                w.writerow([xs] + [_csv_num(row[c]) for c in SWEEP_COLUMNS[1:]])
    elif cmd in ("regress", "approx"):
        w.writerow(["iteration", "objective"])
        for k, v in trace or []:
            w.writerow([k, _csv_num(float(v))])
    else:
        w.writerow(["query", "key", "value"])
        for i, r in enumerate(results):
            for k, v in _flatten(_plain(r["result"])):
                w.writerow([i, k, _csv_num(v) if isinstance(v, float) else json.dumps(v)])
    return buf.getvalue()


def _flatten(obj, prefix=""):
    if isinstance(obj, dict):
        for k, v in obj.items():
            yield from _flatten(v, f"{prefix}.{k}" if prefix else k)
    else:
        yield prefix, obj


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    np.random.seed(args.seed)
    try:
        doc, text = _instance_from_args(args)
        queries = _queries(args, doc)
        runner = Runner(doc, args)
        results, timings, statuses = [], [], []
        for q in queries:
            t0 = time.perf_counter()
            res, status = runner.run(q["op"], q.get("params", {}))
            timings.append(time.perf_counter() - t0)
            results.append({"op": q["op"], "params": q.get("params", {}), "status": status,
                            "result": res})
            statuses.append(status)
    except InstanceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except RobustSumError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    report = {"tool": "robustsum", "version": __version__, "command": args.command,
              "instance": doc.get("name", ""), "input_digest": _digest(text, args),
              "results": results}
    if args.format == "csv":
        body = _csv_report(args.command, results, getattr(runner, "trace", None))
    else:
        body = dumps(report)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(body)
        with open(args.out + ".timings.json", "w") as fh:
            fh.write(dumps({"seconds": timings}))
    else:
        sys.stdout.write(body)
    if "counterexample" in statuses:
        return EXIT_COUNTER
    if "unknown" in statuses:
        return EXIT_UNKNOWN
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
