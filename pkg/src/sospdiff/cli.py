"""Command-line front end: solve problem files, verify bundles, export grids.

A problem file is a single JSON document (schema sospdiff-problem/1) holding
the variable names, the defining expressions of A and B, the region and
B bounding boxes, degrees, objective mode and tolerances.  Solving writes a
result bundle directory:

    manifest.json        config echo, per-constraint stats, artifact hashes
    problem.json         the problem file, verbatim
    c_polys.txt          the certified c_i in plain text (coeff + exponents)
    certificates.json    Gram matrices, residuals, eigenvalues, margins
    verification.json    the sampling report
    grid.txt             scalar fields for a, b and min_i c_i

Exit codes: 0 all constraints certified; 1 input or bundle errors; 2 solved
but a certificate failed validation; 3 solver failure on some constraint.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .pdiff import PdiffResult, compute_pdiff, pack_polys, scalar_field
from .polyring import Polynomial
from .semialg import (
    Box,
    ParseError,
    ProblemSpec,
    SemiAlgebraicSet,
    ToleranceSet,
    parse_polynomial,
)
from .verify import (
    default_grid_resolution,
    default_z_samples,
    verify_result,
)

PROBLEM_SCHEMA = "sospdiff-problem/1"
MANIFEST_SCHEMA = "sospdiff-bundle/1"
GRID_MAGIC = "sospdiff-grid 1"


@dataclass
class ProblemFile:
    """Lossless in-memory form of a problem JSON document."""

    name: str
    variables: list[str]
    set_a: list[str]
    set_b: list[str]
    region_lower: list[float]
    region_upper: list[float]
    b_box_lower: list[float]
    b_box_upper: list[float]
    deg_c: int
    deg_s: int
    objective: str = "box"  # "box" | "mc"
    n_samples: int = 100_000
    seed: int = 0
    sdp_gap: float = 1e-8
    psd_margin: float = 1e-7
    residual_max: float = 1e-6
    shrink: str = "auto"
    grid_resolution: int | None = None
    verify_z_samples: int | None = None
    long_running: bool = False

    def to_dict(self) -> dict:
        d = {"schema": PROBLEM_SCHEMA}
        d.update(asdict(self))
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ProblemFile":
        if d.get("schema") != PROBLEM_SCHEMA:
            raise ValueError(f"unsupported problem schema {d.get('schema')!r}")
        body = {k: v for k, v in d.items() if k != "schema"}
        return cls(**body)

    def to_problem_spec(self) -> ProblemSpec:
        mode = {"box": "box-integral", "mc": "monte-carlo"}.get(self.objective)
        if mode is None:
            raise ValueError(f"objective must be 'box' or 'mc', got {self.objective!r}")
        return ProblemSpec(
            set_a=SemiAlgebraicSet.from_strings(self.set_a, self.variables, self.name),
            set_b=SemiAlgebraicSet.from_strings(self.set_b, self.variables),
            region=Box(tuple(self.region_lower), tuple(self.region_upper)),
            b_box=Box(tuple(self.b_box_lower), tuple(self.b_box_upper)),
            deg_c=self.deg_c,
            deg_s=self.deg_s,
            objective_mode=mode,
            n_samples=self.n_samples,
            rng_seed=self.seed,
            tolerances=ToleranceSet(
                sdp_gap=self.sdp_gap,
                psd_margin=self.psd_margin,
                residual_max=self.residual_max,
                shrink_epsilon_mode=self.shrink,
            ),
            name=self.name,
        )


def load_problem(path) -> ProblemFile:
    with open(path) as fh:
        return ProblemFile.from_dict(json.load(fh))


def save_problem(pf: ProblemFile, path) -> None:
    with open(path, "w") as fh:
        json.dump(pf.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    h.update(path.read_bytes())
    return h.hexdigest()


def _format_c_polys(c_polys: list, nvars: int) -> str:
    lines = [f"# sospdiff c polynomials: coeff then {nvars} exponents per line"]
    for i, poly in enumerate(c_polys):
        lines.append(f"# constraint {i}")
        if poly is None:
            lines.append("FAILED")
            continue
        for exps, coeff in poly.sorted_terms():
            lines.append(f"{coeff!r} " + " ".join(str(e) for e in exps))
    return "\n".join(lines) + "\n"


def read_c_polys(path, nvars: int) -> list[Polynomial | None]:
    polys: list[Polynomial | None] = []
    terms: dict | None = None
    failed = False

    def flush():
        nonlocal terms, failed
        if terms is None:
            return
        polys.append(None if failed else Polynomial(nvars, terms))
        terms, failed = None, False

    for raw in Path(path).read_text().splitlines():
        line = raw.strip()
        if line.startswith("# constraint"):
            flush()
            terms, failed = {}, False
        elif line == "FAILED":
            failed = True
        elif line and not line.startswith("#"):
            parts = line.split()
            if len(parts) != nvars + 1:
                raise ValueError(f"malformed c_polys line: {raw!r}")
            exps = tuple(int(p) for p in parts[1:])
            terms[exps] = terms.get(exps, 0.0) + float(parts[0])
    flush()
    return polys


def format_grid_file(spec: ProblemSpec, c_polys, resolution: int) -> str:
    """The three scalar fields as delimited text; bit-stable across runs."""

    def field_lines(name, polys, box):
        dims = " ".join(
            f"{lo!r} {hi!r} {resolution}" for lo, hi in zip(box.lower, box.upper)
        )
        vals = scalar_field(polys, box, resolution).ravel()
        chunk = [f"field {name} {box.dim} {dims}"]
        chunk.extend(f"{float(v)!r}" for v in vals)
        return chunk

    lines = [GRID_MAGIC]
    lines += field_lines("a", spec.set_a.constraints, spec.region)
    lines += field_lines("b", spec.set_b.constraints, spec.b_box)
    lines += field_lines("cmin", c_polys, spec.region)
    return "\n".join(lines) + "\n"


def _certificates_payload(result: PdiffResult) -> list:
    out = []
    for cert in result.certificates:
        if cert is None:
            out.append(None)
            continue
        out.append(
            {
                "c_coeffs": [float(v) for v in cert.c_coeffs],
                "gram_matrices": [Q.tolist() for Q in cert.gram_matrices],
                "residual_max": cert.residual_max,
                "min_eigenvalues": cert.min_eigenvalues,
                "objective_value": cert.objective_value,
                "epsilon": cert.epsilon,
            }
        )
    return out


def _stats_payload(result: PdiffResult) -> list:
    out = []
    for s in result.stats:
        d = asdict(s)
        for k, v in d.items():
            if isinstance(v, float) and not np.isfinite(v):
                d[k] = None
        out.append(d)
    return out


def write_bundle(
    outdir: Path,
    pf: ProblemFile,
    result: PdiffResult,
    report,
    grid_resolution: int,
    timings: dict,
) -> None:
    outdir.mkdir(parents=True, exist_ok=True)
    spec = result.spec
    artifacts = {}

    save_problem(pf, outdir / "problem.json")
    artifacts["problem.json"] = None

    (outdir / "c_polys.txt").write_text(
        _format_c_polys(result.c_polys, spec.set_a.nvars)
    )
    artifacts["c_polys.txt"] = None

    with open(outdir / "certificates.json", "w") as fh:
        json.dump(_certificates_payload(result), fh)
        fh.write("\n")
    artifacts["certificates.json"] = None

    if report is not None:
        with open(outdir / "verification.json", "w") as fh:
            json.dump(asdict(report), fh, indent=2, sort_keys=True)
            fh.write("\n")
        artifacts["verification.json"] = None

    if all(c is not None for c in result.c_polys):
        (outdir / "grid.txt").write_text(
            format_grid_file(spec, result.c_polys, grid_resolution)
        )
        artifacts["grid.txt"] = None

    for name in list(artifacts):
        artifacts[name] = _sha256(outdir / name)

    manifest = {
        "schema": MANIFEST_SCHEMA,
        "name": pf.name,
        "config": pf.to_dict(),
        "constraint_stats": _stats_payload(result),
        "all_valid": result.all_valid,
        "any_solver_failure": result.any_solver_failure,
        "empty": result.empty,
        "empty_flags": result.empty_flags,
        "origin_warning": result.origin_warning,
        "objective_discrepancy": result.objective_discrepancy,
        "scale": list(result.scale),
        "shift": list(result.shift),
        "sound_slack": result.sound_slack,
        "grid_resolution": grid_resolution,
        "timings": timings,
        "artifacts": artifacts,
    }
    with open(outdir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def check_bundle(outdir: Path) -> dict:
    """Load the manifest and verify every artifact hash; raises on mismatch."""
    manifest_path = outdir / "manifest.json"
    if not manifest_path.exists():
        raise FileNotFoundError(f"no manifest.json in {outdir}")
    manifest = json.loads(manifest_path.read_text())
    if manifest.get("schema") != MANIFEST_SCHEMA:
        raise ValueError("unsupported bundle schema")
    for name, digest in manifest["artifacts"].items():
        p = outdir / name
        if not p.exists():
            raise FileNotFoundError(f"bundle artifact missing: {name}")
        actual = _sha256(p)
        if actual != digest:
            raise ValueError(f"bundle artifact corrupted: {name}")
    return manifest


def _result_shim(manifest: dict, pf: ProblemFile, c_polys) -> PdiffResult:
    spec = pf.to_problem_spec()
    return PdiffResult(
        c_polys=c_polys,
        certificates=[None] * len(c_polys),
        stats=[],
        empty_flags=list(manifest.get("empty_flags", [False] * len(c_polys))),
        scale=tuple(manifest["scale"]),
        shift=tuple(manifest["shift"]),
        sound_slack=float(manifest["sound_slack"]),
        origin_warning=bool(manifest.get("origin_warning", False)),
        objective_discrepancy=manifest.get("objective_discrepancy"),
        spec=spec,
    )


def cmd_solve(args) -> int:
    try:
        pf = load_problem(args.problem)
        if args.seed is not None:
            pf.seed = args.seed
        if args.objective is not None:
            pf.objective = args.objective
        if args.grid_res is not None:
            pf.grid_resolution = args.grid_res
        spec = pf.to_problem_spec()
    except (ParseError, ValueError, OSError, KeyError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if pf.long_running and not args.long_running:
        print(
            "error: this problem is marked long_running; pass --long-running to solve it",
            file=sys.stderr,
        )
        return 1

    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    dump_dir = str(outdir) if args.dump_sdp else None

    t0 = time.perf_counter()
    result = compute_pdiff(spec, dump_dir=dump_dir)
    t_solve = time.perf_counter() - t0

    report = None
    t_verify = 0.0
    if all(c is not None for c in result.c_polys):
        t1 = time.perf_counter()
        report = verify_result(
            result,
            grid_resolution=pf.grid_resolution
            or default_grid_resolution(spec.set_a.nvars),
            n_z=pf.verify_z_samples or default_z_samples(spec.set_a.nvars),
            seed=pf.seed,
        )
        t_verify = time.perf_counter() - t1

    grid_res = pf.grid_resolution or default_grid_resolution(spec.set_a.nvars)
    write_bundle(
        outdir, pf, result, report, grid_res,
        {"solve_s": t_solve, "verify_s": t_verify},
    )
    check_bundle(outdir)  # self-check hashes after write

    for s in result.stats:
        msg = (
            f"constraint {s.index}: {s.status}, iters={s.iterations}, "
            f"residual={s.residual_max:.3g}, min_eig={s.min_eigenvalue:.3g}, "
            f"valid={s.valid}"
        )
        if s.error:
            msg += f" ({s.error})"
        print(msg, file=sys.stderr)
    if result.empty:
        print("note: the computed inner approximation is empty", file=sys.stderr)
    if report is not None:
        print(
            f"verification: {report.soundness_violations} violations, "
            f"conservatism {report.conservatism:.4f}, area ratio {report.area_ratio:.4f}",
            file=sys.stderr,
        )

    if result.any_solver_failure:
        return 3
    if not result.all_valid:
        return 2
    return 0


def cmd_verify(args) -> int:
    outdir = Path(args.bundle)
    try:
        manifest = check_bundle(outdir)
        pf = load_problem(outdir / "problem.json")
        spec = pf.to_problem_spec()
        c_polys = read_c_polys(outdir / "c_polys.txt", spec.set_a.nvars)
        if any(c is None for c in c_polys):
            print("error: bundle contains failed constraints", file=sys.stderr)
            return 1
        result = _result_shim(manifest, pf, c_polys)
    except (ParseError, ValueError, OSError, KeyError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    dim = spec.set_a.nvars
    report = verify_result(
        result,
        grid_resolution=args.grid_res or manifest.get("grid_resolution")
        or default_grid_resolution(dim),
        n_z=args.n_z or default_z_samples(dim),
        seed=args.seed if args.seed is not None else pf.seed,
    )
    print(json.dumps(asdict(report), indent=2, sort_keys=True))
    return 0 if report.soundness_violations == 0 else 2


def cmd_grid(args) -> int:
    outdir = Path(args.bundle)
    try:
        manifest = check_bundle(outdir)
        pf = load_problem(outdir / "problem.json")
        spec = pf.to_problem_spec()
        c_polys = read_c_polys(outdir / "c_polys.txt", spec.set_a.nvars)
        if any(c is None for c in c_polys):
            print("error: bundle contains failed constraints", file=sys.stderr)
            return 1
        res = args.grid_res or manifest.get("grid_resolution") or default_grid_resolution(
            spec.set_a.nvars
        )
        text = format_grid_file(spec, c_polys, res)
        Path(args.out).write_text(text)
    except (ParseError, ValueError, OSError, KeyError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="sospdiff",
        description="Certified inner approximations of the Pontryagin difference "
        "of semi-algebraic sets",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="solve a problem file into a bundle")
    p_solve.add_argument("problem", help="path to the problem JSON file")
    p_solve.add_argument("outdir", help="bundle output directory")
    p_solve.add_argument("--seed", type=int, default=None)
    p_solve.add_argument("--grid-res", type=int, default=None)
    p_solve.add_argument("--objective", choices=("box", "mc"), default=None)
    p_solve.add_argument("--dump-sdp", action="store_true")
    p_solve.add_argument("--long-running", action="store_true")
    p_solve.set_defaults(func=cmd_solve)

    p_verify = sub.add_parser("verify", help="re-verify an existing bundle")
    p_verify.add_argument("bundle")
    p_verify.add_argument("--grid-res", type=int, default=None)
    p_verify.add_argument("--n-z", type=int, default=None)
    p_verify.add_argument("--seed", type=int, default=None)
    p_verify.set_defaults(func=cmd_verify)

    p_grid = sub.add_parser("grid", help="export scalar-field grids from a bundle")
    p_grid.add_argument("bundle")
    p_grid.add_argument("--out", required=True)
    p_grid.add_argument("--grid-res", type=int, default=None)
    p_grid.set_defaults(func=cmd_grid)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
