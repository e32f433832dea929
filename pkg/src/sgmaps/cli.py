"""Command-line driver.

Exit status: 0 when every executed check passes, 1 on a verification
failure (stderr names the stage), 2 on usage or configuration errors.
"""
from __future__ import annotations

import argparse
import datetime
import sys
from collections import Counter
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import analyze, mesh, reeb
from .construct import Hypersurface, build_basic, build_generalized, validate_vertical_spec
from .documents import (
    DocumentError, JobConfig, check_resolutions, dumps, load_config, read_csv_points, write,
)
from .errors import ConstructionError, MeshError, NonGenericSweep, SamplingError, SGMapError
from .region import FitError, certify, fit_boundary, region_components, region_euler

VERIFIED = "SpecialGenericVerified"

PASSED, FAILED, SKIPPED, WAIVED = "passed", "failed", "skipped", "waived"


class UsageError(Exception):
    pass


class Pipeline:
    """Runs stages in order and keeps their results; stops at the first gating failure."""

    def __init__(self, cfg: JobConfig, args):
        self.cfg = cfg
        self.args = args
        self.stages: list[dict] = []
        self.h: Hypersurface | None = None
        self.samples = None
        self.out = Path(args.out) if args.out else None
        self.artifacts: list[str] = []

    # -- bookkeeping ------------------------------------------------------
    def record(self, name: str, status: str, result: dict | None = None) -> bool:
        self.stages.append({"name": name, "status": status, "result": result or {}})
        return status in (PASSED, SKIPPED, WAIVED)

    @property
    def failed_stage(self) -> str | None:
        for s in self.stages:
            if s["status"] == FAILED:
                return s["name"]
        for s in self.stages:
            if s["status"] == WAIVED and not s["result"].get("passed", True):
                return s["name"]
        return None

    def artifact(self, name: str) -> Path | None:
        if self.out is None:
            return None
        self.out.mkdir(parents=True, exist_ok=True)
        self.artifacts.append(name)
        return self.out / name

    # -- stages -----------------------------------------------------------
    def certify(self) -> bool:
        cert = certify(self.cfg.region, self.cfg.resolutions["grid"], self.args.require_margin)
        result = {
            "passed": cert.passed,
            "grid_res": cert.grid_res,
            "tol": cert.tol,
            "margin": cert.margin,
            "gradient_margin": cert.gradient_margin,
            "counts": cert.counts,
            "checks": [{"name": c.name, "passed": c.passed, "witness": c.witness, "detail": c.detail}
                       for c in cert.checks],
        }
        if cert.passed:
            return self.record("certify", PASSED, result)
        if self.args.allow_uncertified:
            return self.record("certify", WAIVED, result)
        return self.record("certify", FAILED, result)

    def validate_spec(self) -> bool:
        if self.cfg.vertical is None:
            return self.record("validate_vertical_spec", SKIPPED, {"reason": "basic construction"})
        rep = validate_vertical_spec(self.cfg.vertical, self.cfg.k)
        result = {"passed": rep.passed, "failed_condition": rep.failed_condition,
                  "checks": [asdict(c) for c in rep.checks]}
        return self.record("validate_vertical_spec", PASSED if rep.passed else FAILED, result)

    def construct(self) -> bool:
        req = not self.args.allow_uncertified
        try:
            if self.cfg.vertical is None:
                self.h = build_basic(self.cfg.region, self.cfg.k, require_certified=req)
            else:
                self.h = build_generalized(self.cfg.region, self.cfg.vertical, require_certified=req)
        except ConstructionError as exc:
            return self.record("construct", FAILED, {"error": str(exc)})
        h = self.h
        result = {
            "n": h.n, "k": h.k, "m": h.m, "basic": h.basic, "T": h.T,
            "level_max": h.level_max,
            "bbox": {"min": list(h.bbox_min), "max": list(h.bbox_max)},
            "terms": len(h.P.terms),
            "degree": h.P.degree,
        }
        path = self.artifact("polynomial.json")
        if path is not None:
            write({"n": h.n, "k": h.k, "T": h.T, "bbox": result["bbox"], "P": h.P.to_doc()}, path)
        return self.record("construct", PASSED, result)

    def verify_nonsingular(self) -> bool:
        try:
            self.samples = analyze.sample_manifold(self.h, self.cfg.resolutions["samples"], self.cfg.seed)
        except SamplingError as exc:
            return self.record("verify_nonsingular", FAILED, {"error": str(exc)})
        rep = analyze.verify_nonsingular(self.h, self.samples)
        z = np.array([s.coords for s in self.samples])
        collar = np.abs(self.h.level(z[:, : self.h.n]) - self.h.fvert(z[:, self.h.n:]))
        result = asdict(rep)
        result["max_collar_residual"] = float(collar.max())
        return self.record("verify_nonsingular", PASSED if rep.passed else FAILED, result)

    def singular_set(self) -> bool:
        rep = analyze.singular_set_check(self.h, 1e-6, self.samples, seed=self.cfg.seed)
        result = {
            "passed": rep.passed,
            "candidates": len(rep.candidates),
            "hausdorff_to_boundary": rep.hausdorff_to_boundary,
            "max_fvert": rep.max_fvert,
            "interior_violations": rep.interior_violations[:10],
            "boundary_samples": rep.boundary_samples,
            "tol": rep.tol,
        }
        return self.record("singular_set", PASSED if rep.passed else FAILED, result)

    def fibers(self) -> bool:
        reps = analyze.fiber_suite(self.h, seed=self.cfg.seed)
        by_region = Counter((f.region_class, f.classification.value) for f in reps)
        bad = [{"base_x": f.base_x, "region_class": f.region_class, "classification": f.classification.value,
                "expected": f.expected.value} for f in reps if not f.ok]
        not_computed = all(f.classification == analyze.FiberClass.NOT_COMPUTED for f in reps
                           if f.region_class == "interior")
        result = {
            "passed": not bad,
            "fibers": len(reps),
            "counts": [{"region_class": rc, "classification": c, "count": n}
                       for (rc, c), n in sorted(by_region.items())],
            "mismatches": bad[:10],
            "interior_topology": "not_computed" if not_computed and self.h.k >= 3 else "classified",
        }
        return self.record("fibers", PASSED if not bad else FAILED, result)

    def collar(self) -> bool:
        rep = analyze.collar_model_check(self.h, seed=self.cfg.seed)
        result = asdict(rep)
        result["failures"] = result["failures"][:10]
        return self.record("collar", PASSED if rep.passed else FAILED, result)

    def expected_topology(self) -> tuple[int, int]:
        r, k = self.cfg.region, self.h.k
        chi_n = region_euler(r)
        chi_b = 2 * chi_n if r.dim % 2 == 1 else 0
        chi = (chi_n - chi_b) * (1 + (-1) ** (k - 1)) + chi_b
        return chi, region_components(r)

    def mesh(self) -> bool:
        h = self.h
        if h.n + h.k not in (2, 3):
            return self.record("mesh", SKIPPED, {"reason": f"total dimension {h.n + h.k} is not 2 or 3"})
        res = self.cfg.resolutions["mesh"]
        try:
            m = mesh.extract_isosurface(h.P, h.bbox_min, h.bbox_max, res)
            fine = mesh.extract_isosurface(h.P, h.bbox_min, h.bbox_max, 2 * res)
            a, b = m.summary(), fine.summary()
        except MeshError as exc:
            return self.record("mesh", FAILED, {"error": str(exc)})
        chi, comps = self.expected_topology()
        stable = a["euler"] == b["euler"] and a["components"] == b["components"]
        ok = stable and a["euler"] == chi and a["components"] == comps
        result = {"passed": ok, "res": res, "summary": a, "summary_2x": b,
                  "expected": {"euler": chi, "components": comps}, "stable": stable}
        if h.n + h.k == 3:
            path = self.artifact("mesh.obj")
            if path is not None:
                mesh.export_obj(m, path)
        return self.record("mesh", PASSED if ok else FAILED, result)

    def reeb(self) -> bool:
        h = self.h
        if self.cfg.region.dim != 2:
            return self.record("reeb", SKIPPED, {"reason": "sweep graph needs a planar region"})
        try:
            if h.k >= 2:
                g = reeb.reeb_of_composition(h, self.cfg.resolutions["sweep"], self.args.sweep_angle)
            else:
                g = reeb.poincare_reeb(h.region, self.cfg.resolutions["sweep"], self.args.sweep_angle)
                g.note = "region sweep graph; with k = 1 it is not the Reeb graph of x1 on M0"
        except (NonGenericSweep, SGMapError) as exc:
            return self.record("reeb", FAILED, {"error": str(exc)})
        return self._reeb_result(g)

    def _reeb_result(self, g) -> bool:
        r = self.cfg.region
        expected = region_components(r) - region_euler(r)
        ok = g.betti1 == expected
        result = {"passed": ok, "V": len(g.vertices), "E": len(g.edges), **g.summary(),
                  "expected_betti1": expected, "note": g.note}
        path = self.artifact("reeb.dot")
        if path is not None:
            reeb.export_dot(g, path)
        return self.record("reeb", PASSED if ok else FAILED, result)

    def report(self, command: str) -> dict:
        failed = self.failed_stage
        doc = {
            "command": command,
            "config": self.cfg.to_doc(),
            "stages": self.stages,
            "verdict": VERIFIED if failed is None else f"Failed({failed})",
            "artifacts": sorted(self.artifacts),
        }
        if not self.args.no_timestamp:
            doc["generated_at"] = datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")
        return doc


def _run_stages(p: Pipeline, stages) -> None:
    for stage in stages:
        if not stage():
            break


def _config(args) -> JobConfig:
    if not args.config:
        raise UsageError("--config is required")
    cfg = load_config(args.config)
    for key, attr in (("grid", "grid_res"), ("mesh", "mesh_res"), ("sweep", "sweep_res"), ("samples", "samples")):
        v = getattr(args, attr)
        if v is not None:
            cfg.resolutions[key] = v
    check_resolutions(cfg.resolutions)
    if args.seed is not None:
        if not 0 <= args.seed < 2**64:
            raise UsageError("--seed must be an unsigned 64-bit integer")
        cfg.seed = args.seed
    return cfg


def _finish(p: Pipeline, command: str) -> int:
    doc = p.report(command)
    path = p.artifact(f"{command}.json")
    if path is not None:
        write(doc, path)
    sys.stdout.write(dumps(doc))
    failed = p.failed_stage
    if failed is not None:
        print(f"sgmaps {command}: failed at stage {failed}", file=sys.stderr)
        return 1
    return 0


def cmd_pipeline(args) -> int:
    cfg = _config(args)
    p = Pipeline(cfg, args)
    build = [p.certify, p.validate_spec, p.construct]
    verify = [p.verify_nonsingular, p.singular_set, p.fibers, p.collar]
    plan = {
        "certify": [p.certify],
        "construct": build,
        "verify": build + verify,
        "mesh": build + [p.mesh],
        "reeb": build + [p.reeb],
        "full": build + verify + [p.mesh, p.reeb],
    }[args.command]
    if args.command == "reeb" and cfg.region.dim != 2:
        raise UsageError("reeb needs a planar region (dim 2)")
    if args.command == "mesh" and cfg.region.dim + cfg.k not in (2, 3):
        raise UsageError("mesh needs total dimension n + k of 2 or 3")
    _run_stages(p, plan)
    return _finish(p, args.command)


def cmd_fit(args) -> int:
    pts = read_csv_points(args.samples_csv)
    try:
        fit = fit_boundary(pts, args.degree)
    except FitError as exc:
        print(f"sgmaps fit: failed at stage fit: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    doc = {
        "command": "fit",
        "samples": int(pts.shape[0]),
        "degree": args.degree,
        "poly": fit.poly.to_doc(),
        "rms_residual": fit.rms_residual,
        "min_grad_norm": fit.min_grad_norm,
        "singular_values": list(fit.singular_values),
    }
    if not args.no_timestamp:
        doc["generated_at"] = datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        write(doc, out / "fit.json")
    sys.stdout.write(dumps(doc))
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="job config document (JSON)")
    common.add_argument("--out", help="directory for reports and artifacts")
    common.add_argument("--seed", type=int, help="sampling seed (unsigned 64-bit)")
    common.add_argument("--grid-res", type=int, help="region grid resolution")
    common.add_argument("--mesh-res", type=int, help="isosurface grid resolution (also checked at twice this)")
    common.add_argument("--sweep-res", type=int, help="number of sweep slices")
    common.add_argument("--samples", type=int, help="number of Newton seeds on M0")
    common.add_argument("--sweep-angle", type=float, default=0.0, help="rotate the sweep axis (degrees)")
    common.add_argument("--require-margin", type=float, help="minimum gradient norm along the region boundary")
    common.add_argument("--no-timestamp", action="store_true", help="omit the timestamp from reports")
    common.add_argument("--allow-uncertified", action="store_true",
                        help="build even if the region certificate fails (the run still fails)")

    parser = argparse.ArgumentParser(prog="sgmaps", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "certify": "check the sign conditions of the region",
        "construct": "build and write the defining polynomial",
        "verify": "non-singularity, singular set, fibers and collar checks",
        "mesh": "extract M0 and compare its topology with the region",
        "reeb": "sweep graph of a planar region",
        "full": "every stage, with an overall verdict",
    }
    for name, text in helps.items():
        sp = sub.add_parser(name, parents=[common], help=text)
        sp.set_defaults(func=cmd_pipeline)
    fp = sub.add_parser("fit", parents=[common], help="fit a boundary polynomial to sample points (CSV)")
    fp.add_argument("samples_csv", help="one point per line, comma-separated coordinates")
    fp.add_argument("--degree", type=int, default=2)
    fp.set_defaults(func=cmd_fit)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, DocumentError) as exc:
        print(f"sgmaps {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
