"""Command-line front end: seeded invariant suites with JSON reports.

Every subcommand samples deterministically from ``--seed`` and emits either a
human summary (with wall time) or, under ``--json``, a byte-stable report
``{schema, command, signature, seed, checks, pass}`` plus a ``values`` object
for requested scalars.  Exit code 0 means every check passed; usage errors
exit 2, computational failures exit 1.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import classifier as classify_mod
from . import cone as cone_mod
from . import curvature as curv_mod
from . import frame as frame_mod
from . import lee as lee_mod
from . import maps as maps_mod
from . import sampling
from .errors import EllipcrError
from .model import jet
from .signature import Signature, SurfacePoint

SCHEMA_VERSION = 1


@dataclass
class Report:
    command: str
    signature: str
    seed: int
    checks: list = field(default_factory=list)
    values: dict = field(default_factory=dict)
    wall_time_ms: float = 0.0

    def add(self, name: str, max_residual: float, tolerance: float) -> bool:
        ok = bool(max_residual <= tolerance)
        self.checks.append(
            {
                "name": name,
                "max_residual": float(max_residual),
                "tolerance": float(tolerance),
                "pass": ok,
            }
        )
        return ok

    @property
    def passed(self) -> bool:
        return all(c["pass"] for c in self.checks)

    def to_json(self) -> str:
        payload = {
            "schema": SCHEMA_VERSION,
            "command": self.command,
            "signature": self.signature,
            "seed": self.seed,
            "checks": self.checks,
            "pass": self.passed,
        }
        if self.values:
            payload["values"] = self.values
        return json.dumps(payload, indent=2, sort_keys=True)

    def human(self) -> str:
        lines = [f"[{self.command}] signature {self.signature} seed {self.seed}"]
        for c in self.checks:
            mark = "PASS" if c["pass"] else "FAIL"
            lines.append(
                f"  {mark}  {c['name']}: max residual {c['max_residual']:.3e}"
                f" (tol {c['tolerance']:.1e})"
            )
        for key, val in self.values.items():
            lines.append(f"  value {key} = {val}")
        lines.append(
            f"  {'PASS' if self.passed else 'FAIL'} overall"
            f"  ({self.wall_time_ms:.0f} ms)"
        )
        return "\n".join(lines)


def _points_for(args, sig, rng, count=None):
    if getattr(args, "point", None):
        return [SurfacePoint.from_json(args.point)]
    return sampling.random_points(sig, rng, count or args.samples)


def _cmd_invariants(args, report: Report, sig: Signature, rng) -> None:
    pts = _points_for(args, sig, rng, count=min(args.samples, 25))
    worst_cmp = worst_tors = worst_sym = worst_trace = worst_levi = worst_q = 0.0
    for P in pts:
        cn = curv_mod.curvature_numeric(sig, P)
        cc = curv_mod.curvature_closed(sig, P)
        scale = 1.0 + float(np.abs(cc.riem).max())
        worst_cmp = max(worst_cmp, float(np.abs(cn.riem - cc.riem).max()) / scale)
        worst_cmp = max(
            worst_cmp,
            float(np.abs(cn.ricci - cc.ricci).max()) / (1.0 + np.abs(cc.ricci).max()),
            abs(cn.scalar - cc.scalar) / (1.0 + abs(cc.scalar)),
        )
        tors = curv_mod.curvature_numeric(sig, P, with_torsion=True).torsion
        worst_tors = max(worst_tors, float(np.abs(tors).max()))
        worst_sym = max(
            worst_sym,
            float(np.abs(cn.riem - np.einsum("lbam->ablm", cn.riem)).max()),
            float(
                np.abs(cn.riem - np.conj(np.einsum("balm->abml", cn.riem))).max()
            ),
        )
        G = frame_mod.levi_inverse_matrix(sig, P.z)
        worst_trace = max(
            worst_trace, float(np.abs(np.einsum("ab,ablm->lm", G, cn.chern)).max())
        )
        ld = frame_mod.levi(sig, P)
        worst_levi = max(
            worst_levi,
            float(
                np.abs(
                    np.einsum("ag,bg->ab", ld.h_inv, ld.h) - np.eye(sig.total_n)
                ).max()
            ),
        )
        fd = frame_mod.frame_fields(sig, P)
        for ev in fd.E_basis:
            for a in range(sig.total_n):
                zb = frame_mod.TangentVector.holomorphic(
                    P, np.eye(sig.total_n, dtype=complex)[a]
                )
                worst_q = max(worst_q, abs(frame_mod.q_flat(sig, P, ev, zb)))
        for basis in fd.W_bases:
            for v in basis:
                qv = frame_mod.q_flat(sig, P, v, v)
                lv = frame_mod.levi_pair(ld.h, v.hol, v.hol)
                worst_q = max(worst_q, abs(qv - lv))
    report.add("closed_vs_numeric_curvature", worst_cmp, 1e-8)
    report.add("torsion_vanishes", worst_tors, 1e-9)
    report.add("curvature_symmetries", worst_sym, 1e-9)
    report.add("chern_trace_free", worst_trace, 1e-9)
    report.add("levi_inverse", worst_levi, 1e-10)
    report.add("projection_form", worst_q, 1e-10)
    P0 = pts[0]
    report.values["scalar_curvature"] = curv_mod.curvature_closed(sig, P0).scalar
    report.values["point"] = json.loads(P0.to_json())


def _cmd_cone(args, report: Report, sig: Signature, rng) -> None:
    pts = _points_for(args, sig, rng, count=1)
    P = pts[0]
    ctx = cone_mod.ConeContext.build(sig, P)
    if args.vector:
        coeffs = np.array(
            [complex(re, im) for re, im in json.loads(args.vector)], dtype=complex
        )
        verdict = cone_mod.cone_test_definitional(sig, P, coeffs, ctx=ctx, seed=args.seed)
        report.values["verdict"] = {
            "member": verdict.member,
            "max_residual": float(verdict.max_residual),
        }
        if verdict.witness is not None:
            V, Z, W, val = verdict.witness
            report.values["verdict"]["witness"] = {
                "V": [[float(v.real), float(v.imag)] for v in V],
                "Z": [[float(v.real), float(v.imag)] for v in Z],
                "W": [[float(v.real), float(v.imag)] for v in W],
                "residual": [float(val.real), float(val.imag)],
            }
        report.add(
            "cone_definitional_consistent",
            0.0 if verdict.member == cone_mod.cone_test_structural(
                sig, P, coeffs, ctx=ctx
            ).member else 1.0,
            0.5,
        )
        return
    mismatches = 0
    total = 0
    for label, u in cone_mod._membership_samples(ctx, rng, args.samples):
        d = cone_mod.cone_test_definitional(sig, P, u, ctx=ctx, seed=args.seed)
        s = cone_mod.cone_test_structural(sig, P, u, ctx=ctx)
        mismatches += d.member != s.member
        total += 1
    report.add("cone_definitional_vs_structural", float(mismatches), 0.5)
    report.values["vectors_tested"] = total
    if args.map:
        desc = maps_mod.parse_map(args.map, sig)
        rep = cone_mod.cone_preserved(sig, desc, P, sample_count=24, seed=args.seed)
        report.add("cone_preserved", float(rep.mismatched), 0.5)
        routing = cone_mod.block_routing(sig, desc, P)
        report.add("block_routing", routing.max_residual, 1e-8)
        report.values["sigma"] = list(routing.sigma)


def _cmd_verify_map(args, report: Report, sig: Signature, rng) -> None:
    if not args.map:
        raise EllipcrError("verify-map needs --map")
    desc = maps_mod.parse_map(args.map, sig)
    pts = _points_for(args, sig, rng)
    rep = maps_mod.verify_cr(sig, desc, pts, seed=args.seed)
    report.add("theta_residual", rep.theta_residual, 1e-8)
    report.add("antiholomorphic_leakage", rep.antiholomorphic_leakage, 1e-8)
    report.add("levi_pairing", rep.pairing_residual, 1e-8)
    report.add("factor_positive", 0.0 if rep.min_factor > 0 else 1.0, 0.5)
    factors = [maps_mod.cr_factor(sig, desc, P, check=False) for P in pts]
    report.values["cr_factors"] = factors
    report.values["map"] = str(desc)


def _cmd_lee_check(args, report: Report, sig: Signature, rng) -> None:
    if not args.map:
        raise EllipcrError("lee-check needs --map")
    desc = maps_mod.parse_map(args.map, sig)
    count = args.points if args.points is not None else min(args.samples, 5)
    pts = _points_for(args, sig, rng, count=count)
    worst = {"ricci": 0.0, "torsion": 0.0, "scalar": 0.0, "chern": 0.0}
    for P in pts:
        rep = lee_mod.check_lee(sig, desc, P)
        worst["ricci"] = max(worst["ricci"], rep.ricci_residual / rep.ricci_scale)
        worst["torsion"] = max(
            worst["torsion"], rep.torsion_residual / rep.torsion_scale
        )
        worst["scalar"] = max(
            worst["scalar"], rep.scalar_residual / rep.scalar_scale
        )
        crep = lee_mod.check_chern_invariance(sig, desc, P, seed=args.seed)
        worst["chern"] = max(
            worst["chern"],
            crep.tensor_residual / crep.scale,
            crep.sample_residual,
        )
    report.add("ricci_transformation", worst["ricci"], 1e-6)
    report.add("torsion_transformation", worst["torsion"], 1e-6)
    report.add("scalar_transformation", worst["scalar"], 1e-6)
    report.add("chern_relative_invariance", worst["chern"], 1e-6)
    report.values["map"] = str(desc)


def _classification_values(cls: classify_mod.Classification) -> dict:
    return {
        "J": cls.J,
        "r": float(cls.r),
        "a_s": [[float(v.real), float(v.imag)] for v in cls.a_s],
        "a_t0": float(cls.a_t0),
        "sigma": list(cls.psi.sigma),
        "psi_t0": float(cls.psi.t0),
        "psi_b_s": [[float(v.real), float(v.imag)] for v in cls.psi.b_s],
        "gauge_note": cls.gauge_note,
        "residual": float(cls.residual),
        "word": str(cls.word),
    }


def _cmd_classify(args, report: Report, sig: Signature, rng) -> None:
    if args.map:
        desc = maps_mod.parse_map(args.map, sig)
        P0 = (
            SurfacePoint.from_json(args.point)
            if args.point
            else sampling.random_point(sig, rng)
        )
        cls = classify_mod.classify(sig, desc, P0, seed=args.seed)
        report.add("classification_residual", cls.residual, 1e-7)
        report.values["classification"] = _classification_values(cls)
        return
    if args.samples_file:
        data = json.loads(open(args.samples_file).read())
        records = [
            classify_mod.SampleRecord(
                point=SurfacePoint.from_json(json.dumps(rec["point"])),
                image=SurfacePoint.from_json(json.dumps(rec["image"])),
                jacobian=_jacobian_from_json(rec["jacobian"]),
            )
            for rec in data["samples"]
        ]
        cls = classify_mod.classify_from_samples(sig, records, seed=args.seed)
        report.add("classification_residual", cls.residual, 1e-7)
        report.values["classification"] = _classification_values(cls)
        return
    raise EllipcrError("classify needs --map (self-test) or a samples file")


def _jacobian_from_json(data) -> maps_mod.ChartJacobian:
    mat = np.array(
        [[complex(re, im) for re, im in row] for row in data["mat"]],
        dtype=np.complex128,
    )
    return maps_mod.ChartJacobian(mat=mat)


def jacobian_to_json(cj: maps_mod.ChartJacobian) -> dict:
    return {"mat": [[[v.real, v.imag] for v in row] for row in cj.mat]}


def _cmd_selftest(args, report: Report, sig: Signature, rng) -> None:
    args.point = None
    args.vector = None
    _cmd_invariants(args, report, sig, rng)
    args.samples = min(args.samples, 40)
    _cmd_cone(args, report, sig, rng)
    for word in ("dil(r=2.0)", "inv", "phi-auto"):
        if word == "phi-auto":
            gen = sampling.random_translation(sig, rng)
            desc = maps_mod.MapDescriptor(word=(gen,))
        else:
            desc = maps_mod.parse_map(word, sig)
        pts = sampling.random_points(sig, rng, 5)
        rep = maps_mod.verify_cr(sig, desc, pts, seed=args.seed)
        report.add(f"verify_cr[{word}]", max(
            rep.theta_residual, rep.antiholomorphic_leakage, rep.pairing_residual
        ), 1e-8)
        lrep = lee_mod.check_lee(sig, desc, pts[0])
        report.add(f"lee[{word}]", lrep.worst, 1e-6)
    P0 = sampling.random_point(sig, rng)
    word = sampling.random_normal_form_word(sig, rng)
    cls = classify_mod.classify(sig, word, P0, seed=args.seed, validation_points=20)
    report.add("classify_round_trip", cls.residual, 1e-7)


_COMMANDS = {
    "invariants": _cmd_invariants,
    "cone": _cmd_cone,
    "verify-map": _cmd_verify_map,
    "lee-check": _cmd_lee_check,
    "classify": _cmd_classify,
    "selftest": _cmd_selftest,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ellipcr",
        description="Pseudohermitian invariants and CR-map classification "
        "on generalized ellipsoid hypersurfaces",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--signature", required=True, help='e.g. "m=2;n=2,1"')
        p.add_argument("--point", help='JSON {"z": [[re,im],...], "t": t}')
        p.add_argument("--map", help='map word, e.g. "dil(r=2.0) . inv"')
        p.add_argument("--seed", type=int, default=42)
        p.add_argument(
            "--samples",
            default="50",
            help="sample count (classify: sample count or a samples .json file)",
        )
        p.add_argument("--points", type=int, default=None, help="lee-check point count")
        p.add_argument("--vector", help="cone: (1,0) vector as JSON [[re,im],...]")
        p.add_argument("--json", action="store_true", dest="as_json")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    args.samples_file = None
    try:
        args.samples = int(args.samples)
    except ValueError:
        args.samples_file = args.samples
        args.samples = 50
    try:
        sig = Signature.parse(args.signature)
    except ValueError as exc:
        print(f"bad signature: {exc}", file=sys.stderr)
        return 2
    report = Report(command=args.command, signature=str(sig), seed=args.seed)
    rng = np.random.default_rng(args.seed)
    start = time.perf_counter()
    try:
        _COMMANDS[args.command](args, report, sig, rng)
    except EllipcrError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    report.wall_time_ms = 1000.0 * (time.perf_counter() - start)
    if args.as_json:
        print(report.to_json())
    else:
        print(report.human())
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
