"""Batch front end: build, verify, eval, report.

Everything is driven by a JSON config so runs are versionable; flags only
select the command, the config path, --force and --resume.  Exit codes:
0 ok, 2 validation, 3 resource, 4 verification failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import shutil
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import assigner, evaluate, mellin, meromorph, spectrum
from .assigner import BlockLog, BuildInterrupted, CharacterTable, ChecksumError
from .mellin import KernelTable, TransformGridError
from .spectrum import SpecValidationError, SpectrumSpec

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_RESOURCE = 3
EXIT_VERIFICATION = 4

ARTIFACTS = ("atoms.csv", "kernel.hzkq", "chi.hzta", "blocklog.csv", "summary.json")

RECURRENCE_TOL = 1e-9
RESIDUE_TOL = 1e-8
ROUNDTRIP_TOL = 1e-4
GROWTH_TOL = 1.0 + 1e-12


class CliError(Exception):
    def __init__(self, code: int, kind: str, detail):
        self.code = code
        self.kind = kind
        self.detail = detail
        super().__init__(str(detail))


@dataclass
class RunConfig:
    spec: SpectrumSpec
    half_width: float = mellin.DEFAULT_HALF_WIDTH
    n_samples: int = mellin.DEFAULT_SAMPLES
    tolerances: dict = field(default_factory=lambda: dict(mellin.DEFAULT_TOLERANCES))
    output_dir: str = "out"
    checkpoint_every: int = 256
    diagnostics: list = field(default_factory=list)

    @classmethod
    def from_json_dict(cls, doc: dict) -> "RunConfig":
        spec = spectrum.spec_from_json_dict(doc["spec"])
        transform = doc.get("transform", {})
        tol = dict(mellin.DEFAULT_TOLERANCES)
        tol.update(transform.get("tolerances", {}))
        for name, value in tol.items():
            if not (isinstance(value, (int, float)) and value > 0):
                raise ValueError(f"tolerance {name!r} must be positive")
        n = int(transform.get("N", mellin.DEFAULT_SAMPLES))
        if n < 2 or n & (n - 1):
            raise ValueError("transform.N must be a power of two")
        return cls(
            spec=spec,
            half_width=float(transform.get("T", mellin.DEFAULT_HALF_WIDTH)),
            n_samples=n,
            tolerances=tol,
            output_dir=doc.get("output_dir", "out"),
            checkpoint_every=int(doc.get("checkpoint_every", 256)),
            diagnostics=doc.get("diagnostics", []),
        )

    def to_json_dict(self) -> dict:
        return {
            "spec": self.spec.to_json_dict(),
            "transform": {"T": self.half_width, "N": self.n_samples,
                          "tolerances": self.tolerances},
            "output_dir": self.output_dir,
            "checkpoint_every": self.checkpoint_every,
            "diagnostics": self.diagnostics,
        }


def load_config(path) -> RunConfig:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except FileNotFoundError as exc:
        raise CliError(EXIT_RESOURCE, "missing-config", str(exc))
    except json.JSONDecodeError as exc:
        raise CliError(EXIT_VALIDATION, "bad-config-json", str(exc))
    try:
        return RunConfig.from_json_dict(doc)
    except (KeyError, TypeError, ValueError) as exc:
        raise CliError(EXIT_VALIDATION, "bad-config", str(exc))


def _file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def build_artifacts(config: RunConfig, out_dir=None, force: bool = False,
                    resume: bool = False, stop_after_blocks: int | None = None) -> dict:
    """Run the full pipeline and write the five artifacts plus the config copy."""
    out = out_dir or config.output_dir
    os.makedirs(out, exist_ok=True)
    existing = [a for a in ARTIFACTS if os.path.exists(os.path.join(out, a))]
    if existing and not force and not resume:
        raise CliError(EXIT_VALIDATION, "would-overwrite",
                       f"artifacts already present in {out!r}; pass --force or --resume")

    try:
        spec = spectrum.validate_spec(config.spec)
    except SpecValidationError as exc:
        raise CliError(EXIT_VALIDATION, "invalid-spec", exc.violations)

    t0 = time.time()
    targets = spectrum.build_residue_targets(spec)
    try:
        model = meromorph.assemble(targets, alpha=spec.alpha)
    except meromorph.AssemblyError as exc:
        raise CliError(EXIT_VALIDATION, "assembly", str(exc))
    model.write_atoms_csv(os.path.join(out, "atoms.csv"))

    kernel_path = os.path.join(out, "kernel.hzkq")
    if resume and os.path.exists(kernel_path):
        kernel = KernelTable.load(kernel_path)
    else:
        try:
            kernel = mellin.build_kernel(model, half_width=config.half_width,
                                         n=config.n_samples,
                                         sieve_limit=spec.sieve_limit,
                                         as_real=spec.is_real,
                                         tolerances=config.tolerances)
        except TransformGridError as exc:
            raise CliError(EXIT_VALIDATION, "transform-grid", str(exc))
        kernel.save(kernel_path)
    t_kernel = time.time() - t0

    t0 = time.time()
    table, log = assigner.run_pipeline(
        spec, kernel, checkpoint_dir=out, checkpoint_every=config.checkpoint_every,
        stop_after_blocks=stop_after_blocks)
    t_walk = time.time() - t0

    table.save(os.path.join(out, "chi.hzta"))
    log.to_csv(os.path.join(out, "blocklog.csv"))

    xs = [rec.x for rec in log.records]
    r_abs = [abs(rec.r) for rec in log.records]
    bound = assigner.measure_residual_bound(xs, r_abs)
    summary = {
        "spec": spec.to_json_dict(),
        "transform": {"T": config.half_width, "N": config.n_samples,
                      "tolerances": config.tolerances},
        "alpha": spec.alpha,
        "n_primes": int(len(table.primes)),
        "n_blocks": len(log.records),
        "residual_bound": bound,
        "final_r": [log.final_r.real, log.final_r.imag],
        "kernel_diagnostics": kernel.diagnostics,
        "atoms": [{"z0": [t.point.real, t.point.imag], "residue": t.residue,
                   "n": a.n, "budget": a.budget}
                  for t, a in zip(model.targets, model.atoms)],
        "timings": {"kernel_s": t_kernel, "walk_s": t_walk},
        "checksums": {"chi.hzta": _file_sha256(os.path.join(out, "chi.hzta")),
                      "kernel.hzkq": _file_sha256(kernel_path)},
    }
    with open(os.path.join(out, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2)
    with open(os.path.join(out, "config.json"), "w") as fh:
        json.dump(config.to_json_dict(), fh, indent=2)
    return summary


def _load_artifacts(art_dir):
    for name in ("summary.json", "kernel.hzkq", "chi.hzta", "blocklog.csv"):
        if not os.path.exists(os.path.join(art_dir, name)):
            raise CliError(EXIT_RESOURCE, "missing-artifact", f"{name} not found in {art_dir!r}")
    with open(os.path.join(art_dir, "summary.json")) as fh:
        summary = json.load(fh)
    spec = spectrum.validate_spec(spectrum.spec_from_json_dict(summary["spec"]))
    kernel = KernelTable.load(os.path.join(art_dir, "kernel.hzkq"))
    try:
        table = CharacterTable.load(os.path.join(art_dir, "chi.hzta"))
    except ChecksumError as exc:
        raise CliError(EXIT_VERIFICATION, "checksum", str(exc))
    rows = BlockLog.rows_from_csv(os.path.join(art_dir, "blocklog.csv"))
    return summary, spec, kernel, table, rows


def verify_artifacts(art_dir, n_replay_blocks: int = 32) -> dict:
    """Re-run every invariant suite against the on-disk artifacts."""
    summary, spec, kernel, table, rows = _load_artifacts(art_dir)
    checks = []

    def check(name, ok, measured):
        checks.append({"name": name, "pass": bool(ok), "measured": measured})

    # file integrity beyond the embedded checksum
    chi_sha = _file_sha256(os.path.join(art_dir, "chi.hzta"))
    check("chi-sha256-matches-summary", chi_sha == summary["checksums"]["chi.hzta"], chi_sha)
    kq_sha = _file_sha256(os.path.join(art_dir, "kernel.hzkq"))
    check("kernel-sha256-matches-summary",
          kq_sha == summary["checksums"]["kernel.hzkq"], kq_sha)
    check("kernel-covers-sieve-range", kernel.u_max >= math.log(spec.sieve_limit),
          kernel.u_max)

    # residue certification and growth envelope
    targets = spectrum.build_residue_targets(spec)
    model = meromorph.assemble(targets, alpha=spec.alpha)
    worst_res = 0.0
    for t in targets:
        got = model.contour_residue(t.point, radius=0.01, nodes=512)
        worst_res = max(worst_res, abs(got - t.residue))
    check("contour-residues", worst_res < RESIDUE_TOL, worst_res)
    sup = growth_envelope_sup(model)
    check("growth-envelope", sup <= GROWTH_TOL, sup)

    # transform invariants from the stored table
    m_neg = kernel.count - 1 - int(round(kernel.u_max / kernel.du))
    causality = float(np.abs(np.asarray(kernel.values[:m_neg])).max()) if m_neg else 0.0
    check("causality", causality < 1e-6, causality)
    check("decay-edge", float(abs(kernel.values[-1])) < 1e-6, float(abs(kernel.values[-1])))
    if spec.is_real:
        check("kernel-real", kernel.is_real, kernel.is_real)
        check("residuals-exactly-real", all(r["im_r"] == 0.0 for r in rows), True)

    # forward identity against the independent evaluation
    samples = mellin.default_roundtrip_samples(model)
    rt = mellin.roundtrip_report(kernel, model, samples)
    check("forward-roundtrip", rt["max_rel_err"] < ROUNDTRIP_TOL, rt["max_rel_err"])

    # block recurrence replay with greedy re-choice on sampled blocks
    idx = np.unique(np.linspace(0, len(rows) - 2, min(n_replay_blocks, len(rows) - 1),
                                dtype=int))
    rep = assigner.replay_block_records(rows, kernel, table, spec.regime, idx.tolist(),
                                        tol=RECURRENCE_TOL)
    check("recurrence-replay", rep["recurrence_ok"] and rep["code_mismatches"] == 0,
          rep)
    check("step-contraction", rep["contraction_violations"] == 0,
          rep["contraction_violations"])

    # residual bound from the log
    xs = [r["x_j"] for r in rows]
    r_abs = [math.hypot(r["re_r"], r["im_r"]) for r in rows]
    bound = assigner.measure_residual_bound(xs, r_abs)
    check("residual-bound", bound["violations_past_M"] == 0, bound)

    # difference convergence (envelope decay; the fitted exponent is reported)
    s_diag = spec.alpha + 0.275
    grid = evaluate.dyadic_grid(min(spec.sieve_limit, float(table.sieve_limit)))
    if len(grid) >= 8:
        rpt = evaluate.difference_series(table, kernel, s_diag, grid, alpha=spec.alpha)
        sups = rpt.tail_sup()
        dec = sups[-1] < sups[rpt.discarded]
        check("difference-envelope-decay", dec,
              {"fitted_exponent": rpt.fitted_exponent,
               "tail_sup_first": sups[rpt.discarded], "tail_sup_last": sups[-1]})

    ok = all(c["pass"] for c in checks)
    return {"pass": ok, "checks": checks}


def growth_envelope_sup(model, re_values=(1.0, 1.1, 1.25, 1.5, 2.0, 3.0, 5.0, 8.0),
                        im_span: float = 1000.0, im_step: float = 0.5) -> float:
    """sup over the test grid {Re z >= 1, |Im z| <= im_span} of
    |g(z)| |z|^2 e^{Re z}, which is exactly the modulus of the atom sum."""
    ims = np.arange(-im_span, im_span + im_step / 2, im_step)
    ims = np.concatenate([ims, [t.point.imag for t in model.targets]])
    sup = 0.0
    for re in re_values:
        z = re + 1j * ims
        sup = max(sup, float(np.abs(model.atom_sum(z)).max()))
    return sup


# -- commands ----------------------------------------------------------------


def cmd_build(args) -> int:
    config = load_config(args.config)
    if args.output_dir:
        config.output_dir = args.output_dir
    summary = build_artifacts(config, force=args.force, resume=args.resume)
    print(json.dumps({"ok": True,
                      "output_dir": config.output_dir,
                      "K": summary["residual_bound"]["K"],
                      "M": summary["residual_bound"]["M"]}))
    return EXIT_OK


def cmd_verify(args) -> int:
    report = verify_artifacts(args.artifact_dir)
    print(json.dumps(report, default=str, indent=2))
    return EXIT_OK if report["pass"] else EXIT_VERIFICATION


def cmd_eval(args) -> int:
    summary, spec, kernel, table, rows = _load_artifacts(args.artifact_dir)
    try:
        s = complex(args.s.replace("i", "j"))
    except ValueError:
        raise CliError(EXIT_VALIDATION, "bad-argument", f"cannot parse s = {args.s!r}")
    X = float(args.X) if args.X else float(table.sieve_limit)
    if s.real <= 1.0:
        raise CliError(EXIT_VALIDATION, "usage",
                       "the Euler-product evaluation needs Re s > 1")
    value = evaluate.zeta_value(table, s, X)
    print(json.dumps({"s": [s.real, s.imag], "X": X,
                      "zeta_chi": [value.real, value.imag]}))
    return EXIT_OK


def cmd_report(args) -> int:
    summary, spec, kernel, table, rows = _load_artifacts(args.artifact_dir)
    diagnostics = []
    if args.config:
        diagnostics = load_config(args.config).diagnostics
    if not diagnostics:
        diagnostics = [{"name": "dseries", "s": [spec.alpha + 0.275, 0.0]}]
    out = {}
    for diag in diagnostics:
        name = diag.get("name", "dseries")
        s = complex(diag["s"][0], diag["s"][1]) if isinstance(diag.get("s"), list) \
            else complex(diag.get("s", spec.alpha + 0.275))
        start = float(diag.get("x_start", 2.0))
        factor = float(diag.get("x_factor", 2.0))
        xs = []
        x = start
        while x <= table.sieve_limit:
            xs.append(x)
            x *= factor
        rpt = evaluate.difference_series(table, kernel, s, xs, alpha=spec.alpha)
        csv_path = os.path.join(args.artifact_dir, f"report_{name}.csv")
        rpt.to_csv(csv_path)
        expected = s.real - spec.alpha
        fitted = rpt.fitted_exponent
        out[name] = {"s": [s.real, s.imag], "fitted_exponent": fitted,
                     "expected_exponent": expected,
                     "within_factor_2": bool(expected / 2 <= fitted <= expected * 2),
                     "csv": csv_path}
    path = os.path.join(args.artifact_dir, "report_summary.json")
    with open(path, "w") as fh:
        json.dump(out, fh, indent=2)
    print(json.dumps(out, indent=2))
    return EXIT_OK


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="helsonzeta",
                                 description="prescribed zero/pole character pipeline")
    sub = ap.add_subparsers(dest="command", required=True)

    b = sub.add_parser("build", help="run the pipeline from a JSON config")
    b.add_argument("config")
    b.add_argument("--output-dir", default=None)
    b.add_argument("--force", action="store_true")
    b.add_argument("--resume", action="store_true")
    b.set_defaults(fn=cmd_build)

    v = sub.add_parser("verify", help="re-check every invariant of built artifacts")
    v.add_argument("artifact_dir")
    v.set_defaults(fn=cmd_verify)

    e = sub.add_parser("eval", help="evaluate the twisted zeta at a point")
    e.add_argument("artifact_dir")
    e.add_argument("--s", required=True, help="complex point, e.g. 2 or 1.5+2j")
    e.add_argument("--X", default=None, help="Euler-product truncation height")
    e.set_defaults(fn=cmd_eval)

    r = sub.add_parser("report", help="emit convergence diagnostics as CSV")
    r.add_argument("artifact_dir")
    r.add_argument("--config", default=None)
    r.set_defaults(fn=cmd_report)
    return ap


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        return args.fn(args)
    except CliError as exc:
        print(json.dumps({"error": {"kind": exc.kind, "detail": exc.detail}}))
        return exc.code
    except BuildInterrupted as exc:
        print(json.dumps({"error": {"kind": "interrupted", "detail": str(exc)}}))
        return EXIT_RESOURCE
    except (OSError, ValueError) as exc:
        print(json.dumps({"error": {"kind": "resource", "detail": str(exc)}}))
        return EXIT_RESOURCE


if __name__ == "__main__":
    sys.exit(main())
