"""Curve ingestion, mesh and report serialization, and the ``ksurf`` command line."""
from __future__ import annotations

import argparse
import json
import math
import sys
import warnings
from dataclasses import dataclass, field, fields, replace
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import diagnostics as dg
from .errors import CurveSpecError, DegenerateMeshError, DivergenceWarning, DomainError, KSurfError
from .harmonic_cauchy import DEFAULT_KV, solve_cauchy
from .sphere_curves import SphericalCurve, circle, cone_angle, cusp_demo, equator, perturbed_circle, troyanov_check
from .surface_builder import (
    SurfacePatch,
    diameter,
    integrate_surface,
    legendre_transform,
    parallel_cmc,
    reflect_patch,
    rotational_conformal,
    rotational_peaked_sphere,
    sample_patch,
    sample_patch_at,
)

EXIT_PASS, EXIT_RESIDUAL, EXIT_INPUT, EXIT_NUMERICAL = 0, 2, 3, 4
# the strip bounds the tail of values; second derivatives need some margin below it
CLIP_FRACTION = 0.8


# ------------------------------------------------------------------ curves

def parse_curve_spec(text: str) -> SphericalCurve:
    """Curve from JSON ``{"cos": [[x, y, z], ...], "sin": [...], "normalize": bool}``."""
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CurveSpecError(f"malformed curve JSON: {exc}") from None
    if not isinstance(obj, dict) or "cos" not in obj:
        raise CurveSpecError('curve JSON must be an object with a "cos" list')
    unknown = set(obj) - {"cos", "sin", "normalize"}
    if unknown:
        raise CurveSpecError(f"unknown curve keys: {sorted(unknown)}")
    normalize = obj.get("normalize", True)
    if not isinstance(normalize, bool):
        raise CurveSpecError('"normalize" must be a boolean')
    try:
        cos = np.asarray(obj["cos"], dtype=float).reshape(-1, 3)
        sin = np.asarray(obj.get("sin", []), dtype=float).reshape(-1, 3)
    except (TypeError, ValueError) as exc:
        raise CurveSpecError(f"coefficients must be lists of 3-vectors: {exc}") from None
    if len(cos) == 0 or not (np.all(np.isfinite(cos)) and np.all(np.isfinite(sin))):
        raise CurveSpecError("coefficients must be finite and include the mean")
    return SphericalCurve.from_coeffs(cos, sin, normalize=normalize)


def load_curve(source: str) -> SphericalCurve:
    """Builtin name (``circle:A``, ``equator``, ``cusp-demo``, ``perturbed:A:amp:seed``) or JSON file."""
    name, _, arg = source.partition(":")
    try:
        if name == "circle":
            return circle(float(arg) if arg else 0.5)
        if name == "equator":
            return equator()
        if name == "cusp-demo":
            return cusp_demo(float(arg)) if arg else cusp_demo()
        if name == "perturbed":
            parts = arg.split(":") if arg else []
            A, amp, seed = parts + ["0.5", "0.03", "1"][len(parts):]
            return perturbed_circle(float(A), float(amp), int(seed))
    except ValueError as exc:
        if isinstance(exc, KSurfError):
            raise
        raise CurveSpecError(f"bad builtin curve {source!r}: {exc}") from None
    path = Path(source)
    if not path.exists():
        raise CurveSpecError(f"no builtin curve or file named {source!r}")
    return parse_curve_spec(path.read_text())


# ------------------------------------------------------------------ meshes

def _mean_curvature(patch: SurfacePatch) -> np.ndarray:
    Xu, Xv, N = patch.X[(1, 0)], patch.X[(0, 1)], patch.N[(0, 0)]
    d = lambda a, b: np.einsum("...i,...i->...", a, b)
    E, F, G = d(Xu, Xu), d(Xu, Xv), d(Xv, Xv)
    e, f, g = (d(patch.X[k], N) for k in ((2, 0), (1, 1), (0, 2)))
    with np.errstate(divide="ignore", invalid="ignore"):
        return (e * G - 2 * f * F + g * E) / (2 * (E * G - F * F))


def _closed_axes(patch: SurfacePatch):
    return patch.periodic_u, bool(patch.meta.get("periodic_v", False))


def _g(x) -> str:
    return format(float(x), ".17g")


def export_mesh(patch: SurfacePatch, path, fmt: str) -> Path:
    """Write the patch as an OBJ quad mesh or a CSV sample table."""
    path = Path(path)
    X, N = patch.X[(0, 0)], patch.N[(0, 0)]
    nu, nv = patch.shape
    if fmt == "csv":
        has2 = all(k in patch.X for k in ((2, 0), (1, 1), (0, 2)))
        H = _mean_curvature(patch) if has2 else np.full((nu, nv), np.nan)
        K = dg.gaussian_curvature(patch) if has2 else np.full((nu, nv), np.nan)
        lines = ["u,v,x,y,z,nx,ny,nz,H,K"]
        for i in range(nu):
            for j in range(nv):
                row = [patch.u[i], patch.v[j], *X[i, j], *N[i, j], H[i, j], K[i, j]]
                lines.append(",".join(_g(x) for x in row))
    elif fmt == "obj":
        cu, cv = _closed_axes(patch)
        faces = []
        scale = max(float(np.abs(X).max()), 1e-300)
        for i in range(nu if cu else nu - 1):
            for j in range(nv if cv else nv - 1):
                a, b = (i, j), ((i + 1) % nu, j)
                c, d = ((i + 1) % nu, (j + 1) % nv), (i, (j + 1) % nv)
                area = np.linalg.norm(np.cross(X[c] - X[a], X[d] - X[b]))
                if area <= 1e-14 * scale**2:
                    raise DegenerateMeshError(f"zero-area face at grid cell {i},{j}; export CSV instead")
                faces.append([a, b, c, d])
        idx = lambda p: p[0] * nv + p[1] + 1
        lines = [f"# ksurf {patch.origin} mesh {nu}x{nv}"]
        lines += [f"v {_g(x)} {_g(y)} {_g(z)}" for x, y, z in X.reshape(-1, 3)]
        lines += [f"vn {_g(x)} {_g(y)} {_g(z)}" for x, y, z in N.reshape(-1, 3)]
        lines += ["f " + " ".join(f"{idx(p)}//{idx(p)}" for p in face) for face in faces]
    else:
        raise DomainError(f"unknown mesh format {fmt!r}")
    path.write_text("\n".join(lines) + "\n")
    return path


# ------------------------------------------------------------------ reports

def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    return obj


def dumps_report(obj) -> str:
    """Deterministic JSON with 17 significant digits; non-finite floats become null."""

    def enc(x, ind):
        pad = "  " * (ind + 1)
        if isinstance(x, dict):
            if not x:
                return "{}"
            items = [f"{pad}{json.dumps(k)}: {enc(x[k], ind + 1)}" for k in sorted(x)]
            return "{\n" + ",\n".join(items) + "\n" + "  " * ind + "}"
        if isinstance(x, list):
            return "[" + ", ".join(enc(v, ind) for v in x) + "]"
        if isinstance(x, bool) or x is None:
            return json.dumps(x)
        if isinstance(x, int):
            return str(x)
        if isinstance(x, float):
            return _g(x) if math.isfinite(x) else "null"
        return json.dumps(x)

    return enc(_plain(obj), 0) + "\n"


def report_dict(report: dg.DiagnosticsReport, failures: list, exit_code: int, extras: dict | None = None) -> dict:
    out = dict(report.residuals)
    out.update(report.extras)
    out.update({
        "verdict": report.verdict,
        "area": report.area,
        "total_mean_curvature": report.total_mean_curvature,
        "singular_scan": report.singular_scan,
        "cone_angle": report.cone_angle,
        "failures": failures,
        "exit_code": exit_code,
    })
    out.update(extras or {})
    return out


# ------------------------------------------------------------------ pipeline

@dataclass
class PipelineConfig:
    curve: str = "circle:0.5"
    K_v: int = DEFAULT_KV
    M_u: int | None = None
    v_range: tuple = (0.01, 0.3)
    u_count: int = 128
    v_count: int = 64
    obj: str | None = None
    csv: str | None = None
    report: str | None = None
    checks: list | None = None  # residual names to gate on; None means all defaults
    v_mins: list = field(default_factory=lambda: [0.04, 0.02, 0.01])

    def validate(self):
        if self.K_v < 2 or self.u_count <= 0 or self.v_count < 2:
            raise DomainError("K_v >= 2 and positive grid sizes are required")
        if self.M_u is not None and self.M_u <= 0:
            raise DomainError("M_u must be positive")
        lo, hi = self.v_range
        if not 0.0 < lo < hi:
            raise DomainError("v_range must satisfy 0 < v_min < v_max")
        if any(not 0.0 < v < hi for v in self.v_mins):
            raise DomainError("area truncations must lie inside (0, v_max)")
        return self

    @classmethod
    def from_mapping(cls, data: dict, base: "PipelineConfig | None" = None) -> "PipelineConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise CurveSpecError(f"unknown configuration keys: {sorted(unknown)}")
        cfg = replace(base or cls(), **data)
        cfg.v_range = tuple(cfg.v_range)
        return cfg


@dataclass
class PipelineResult:
    exit_code: int
    report: dict
    patch: SurfacePatch | None = None
    artifacts: list = field(default_factory=list)


def run_pipeline(config: PipelineConfig) -> PipelineResult:
    """Curve -> Gauss jet -> surface -> diagnostics, with optional mesh output.

    Inner errors are caught and turned into their exit status with a tagged
    code in the report, so the driver always produces a report.
    """
    try:
        config.validate()
        alpha = load_curve(config.curve)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", DivergenceWarning)
            jet = solve_cauchy(alpha, config.K_v, config.M_u)
        notes = [str(w.message) for w in caught if issubclass(w.category, DivergenceWarning)]
        sjet = integrate_surface(jet)
        lo, hi = config.v_range
        usable = CLIP_FRACTION * jet.trust_height
        if hi > usable:
            notes.append(f"v_max {hi:g} clipped to {usable:.6g}, {CLIP_FRACTION:g} of the trusted strip")
            hi = usable
        if lo >= hi:
            raise DomainError(f"trusted strip {jet.trust_height:.3g} lies below v_min {lo:g}")
        patch = sample_patch(sjet, config.u_count, (lo, hi), config.v_count)
        sampler = lambda v: sample_patch_at(sjet, config.u_count, v, order=1)
        v_mins = sorted((v for v in config.v_mins if v < hi), reverse=True)
        report = dg.diagnose_jet(alpha, jet, sjet, patch, sampler, v_mins or [lo])
    except KSurfError as exc:
        rep = {"error": exc.code, "message": str(exc), "exit_code": exc.exit_code}
        _write_report(config, rep)
        return PipelineResult(exc.exit_code, rep)
    failures = report.failures(enabled=config.checks)
    code = EXIT_RESIDUAL if failures else EXIT_PASS
    extras = {"notes": notes, "v_range": [lo, hi], "curve": config.curve}
    artifacts = []
    if failures and (config.csv or config.obj):
        # a surface that fails its checks is reported, never emitted
        extras["meshes_withheld"] = failures
    elif config.csv:
        artifacts.append(str(export_mesh(patch, config.csv, "csv")))
    if config.obj and not failures:
        try:
            artifacts.append(str(export_mesh(patch, config.obj, "obj")))
        except DegenerateMeshError as exc:
            extras["obj_refused"] = exc.code
    rep = report_dict(report, failures, code, extras)
    _write_report(config, rep)
    return PipelineResult(code, rep, patch, artifacts)


def _write_report(config: PipelineConfig, rep: dict):
    if config.report:
        Path(config.report).write_text(dumps_report(rep))


# ------------------------------------------------------------------ command line

def _add_pipeline_flags(p):
    p.add_argument("--curve", default="circle:0.5",
                   help="circle:A, equator, cusp-demo, perturbed:A:amp:seed or a curve JSON file")
    p.add_argument("--K-v", dest="K_v", type=int, default=DEFAULT_KV)
    p.add_argument("--M-u", dest="M_u", type=int, default=None)
    p.add_argument("--v-min", type=float, default=0.01)
    p.add_argument("--v-max", type=float, default=0.3)
    p.add_argument("--u-count", type=int, default=128)
    p.add_argument("--v-count", type=int, default=64)
    p.add_argument("--obj")
    p.add_argument("--csv")
    p.add_argument("--report")
    p.add_argument("--config", help="JSON file whose keys override the flags")


def _config_from_args(args) -> PipelineConfig:
    cfg = PipelineConfig(args.curve, args.K_v, args.M_u, (args.v_min, args.v_max), args.u_count, args.v_count,
                         args.obj, args.csv, args.report)
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise CurveSpecError(f"cannot read configuration: {exc}") from None
        cfg = PipelineConfig.from_mapping(data, cfg)
    return cfg


def _emit(obj, path=None):
    text = dumps_report(obj)
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def _cmd_pipeline(args) -> int:
    cfg = _config_from_args(args)
    res = run_pipeline(cfg)
    if not cfg.report:
        _emit(res.report)
    return res.exit_code


def _cmd_rotational(args) -> int:
    A = args.A
    lo, hi = -math.pi / 2 + args.margin, math.pi / 2 - args.margin
    patch = rotational_peaked_sphere(A, (lo, hi), args.u_count, (0.0, 2 * math.pi), args.v_count)
    K = dg.gaussian_curvature(patch)
    rep = {"A": A, "K_minus_1": float(np.nanmax(np.abs(K - 1))), "diameter": diameter(A)}
    if A < 1.0:
        rc = rotational_conformal(A)
        rep.update({"a": rc.a, "modulus": rc.modulus})
    for fmt in ("obj", "csv"):
        if getattr(args, fmt):
            export_mesh(patch, getattr(args, fmt), fmt)
    _emit(rep, args.report)
    return EXIT_PASS if rep["K_minus_1"] <= dg.TOLERANCES["K_minus_1"] else EXIT_RESIDUAL


def _cmd_transform(args, kind: str) -> int:
    cfg = _config_from_args(args)
    cfg.obj = cfg.csv = cfg.report = None
    res = run_pipeline(cfg)
    if res.exit_code != EXIT_PASS:
        # transforms are only applied to surfaces that pass their checks
        _emit(res.report, args.report)
        return res.exit_code
    patch = res.patch
    if kind == "parallel":
        out = parallel_cmc(patch, args.sign)
        rep = {"sign": args.sign, "H": out.meta["H"], "flagged": int(out.flags.sum())}
    elif kind == "reflect":
        out = reflect_patch(patch)
        rep = {"samples": int(np.prod(out.shape))}
    else:
        out = legendre_transform(patch)
        rep = {"samples": int(np.prod(out.shape)), "min_height": float(out.X[(0, 0)][..., 2].min())}
    if args.obj:
        export_mesh(out, args.obj, "obj")
    if args.csv:
        export_mesh(out, args.csv, "csv")
    _emit(rep, args.report)
    return EXIT_PASS


def _cmd_cone_angle(args) -> int:
    alpha = load_curve(args.curve)
    ca = cone_angle(alpha)
    _emit({"angle_area": ca.angle_area, "angle_gb": ca.angle_gb, "difference": ca.difference,
           "verdict": alpha.classification.verdict}, args.report)
    return EXIT_PASS


def _cmd_troyanov(args) -> int:
    _emit({"angles": [str(a) for a in args.angles], "admissible": troyanov_check(args.angles)}, args.report)
    return EXIT_PASS


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ksurf", allow_abbrev=False,
                                     description="K=1 surfaces with conical singularities from spherical curves")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("rotational", allow_abbrev=False, help="exact rotational peaked sphere")
    p.add_argument("--A", type=float, default=0.5)
    p.add_argument("--u-count", type=int, default=200)
    p.add_argument("--v-count", type=int, default=200)
    p.add_argument("--margin", type=float, default=0.05)
    for flag in ("--obj", "--csv", "--report"):
        p.add_argument(flag)

    for name, text in (("cauchy", "build the surface from a curve and export meshes"),
                       ("diagnose", "build the surface and report every residual")):
        _add_pipeline_flags(sub.add_parser(name, allow_abbrev=False, help=text))
    for name, text in (("parallel", "parallel constant mean curvature surface"),
                       ("reflect", "point reflection across the singularity"),
                       ("legendre", "Legendre transform of the surface")):
        p = sub.add_parser(name, allow_abbrev=False, help=text)
        _add_pipeline_flags(p)
        if name == "parallel":
            p.add_argument("--sign", type=int, choices=(1, -1), default=1)

    p = sub.add_parser("cone-angle", allow_abbrev=False, help="cone angle enclosed by a curve")
    p.add_argument("--curve", default="circle:0.5")
    p.add_argument("--report")
    p = sub.add_parser("troyanov", allow_abbrev=False, help="angle condition for n cone points")
    p.add_argument("--angles", type=Fraction, nargs="+", required=True,
                   help="cone angles as fractions of 2 pi, each in (0, 1), e.g. 1/3 or 0.25")
    p.add_argument("--report")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {
        "rotational": _cmd_rotational,
        "cauchy": _cmd_pipeline,
        "diagnose": _cmd_pipeline,
        "parallel": lambda a: _cmd_transform(a, "parallel"),
        "reflect": lambda a: _cmd_transform(a, "reflect"),
        "legendre": lambda a: _cmd_transform(a, "legendre"),
        "cone-angle": _cmd_cone_angle,
        "troyanov": _cmd_troyanov,
    }
    try:
        return handlers[args.command](args)
    except KSurfError as exc:
        sys.stderr.write(f"ksurf: {exc.code}: {exc}\n")
        return exc.exit_code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
