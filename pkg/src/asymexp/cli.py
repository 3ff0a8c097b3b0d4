"""Command-line scenario runner.

    asymexp run --scenario verify_thm1 --tau 0 --k 1 --out out/

Configuration precedence is flags > JSON file (--config) > defaults.  Exit
status: 0 when every assertion of the scenario passes, 1 when one fails (the
report is still written), 2 on an invalid configuration.
"""

from __future__ import annotations

import argparse
import json
import math
import re
import sys
from pathlib import Path

import numpy as np

from . import acceptance
from .decay import DecaySpec, fit_decay
from .errors import AsymExpError, ConfigError
from .expansion_fit import (
    DEFAULT_FRAME_SHELLS,
    DEFAULT_QUAD_SHELLS,
    DEFAULT_RATE_SHELLS,
    estimate_quadratic,
    fit_expansion,
    verify_theorem1,
    verify_theorem2,
)
from .legendre import legendre_dual, reduce_inverse_tau, reduce_small_tau, shifted_sample
from .operator_core import Branch, TauParams, check_domain, eval_DF, eval_F
from .potential import decaying_bump, measure_decay
from .radial_lab import RadialAnsatz, anisotropic_ansatz, ansatz_field, induced_rhs, rhs_from_hessian
from .report import Curve, Report, write_report
from .sampling import fd_matrix_gradient

SCENARIOS = (
    "operator_eval",
    "radial_manufacture",
    "legendre_check",
    "poisson_exterior",
    "expand_fit",
    "verify_thm1",
    "verify_thm2",
    "suite",
)

DEFAULTS = {
    "scenario": None,
    "tau": 0.0,
    "n": 3,
    "C1": 1.0,
    "C2": 1.0,
    "k": 1.0,
    "zeta": None,
    "matrix": None,
    "remainder_amplitude": 0.0,
    "K": None,
    "r_min": None,
    "r_max": None,
    "shell_count": None,
    "quad_degree": None,
    "slack": 0.1,
    "rel_tol": None,
    "seed": 7,
    "out": "asymexp-out",
    "plots": False,
    "quiet": False,
}

# presentation-only fields stay out of the embedded config so reruns into
# different directories still produce identical reports
_PRESENTATION = ("out", "plots", "quiet")

# per-scenario (r_min, r_max, count) and relative tolerance
SHELL_DEFAULTS = {
    "radial_manufacture": (4.0, 400.0, 16),
    "legendre_check": (2.0, 20.0, 200),
    "poisson_exterior": (1e2, 1e5, 16),
    "expand_fit": (DEFAULT_FRAME_SHELLS[0], DEFAULT_FRAME_SHELLS[-1], len(DEFAULT_FRAME_SHELLS)),
    "verify_thm1": (DEFAULT_RATE_SHELLS[0], DEFAULT_RATE_SHELLS[-1], len(DEFAULT_RATE_SHELLS)),
    "verify_thm2": (DEFAULT_FRAME_SHELLS[0], DEFAULT_FRAME_SHELLS[-1], len(DEFAULT_FRAME_SHELLS)),
}
REL_TOL_DEFAULTS = {"operator_eval": 1e-6, "legendre_check": 1e-5, "expand_fit": 1e-6}

_TAU_RE = re.compile(r"^\s*(?:(\d+(?:\.\d*)?)\s*\*?\s*)?pi\s*(?:/\s*(\d+(?:\.\d*)?))?\s*$")


def parse_tau(text) -> float:
    """Accept plain numbers and multiples of pi such as ``pi/8`` or ``3pi/8``."""
    if isinstance(text, (int, float)) and not isinstance(text, bool):
        return float(text)
    s = str(text).strip().lower().replace("π", "pi")
    m = _TAU_RE.match(s)
    if m:
        num = float(m.group(1)) if m.group(1) else 1.0
        den = float(m.group(2)) if m.group(2) else 1.0
        return num * math.pi / den if num != 1.0 else math.pi / den
    return float(s)


def parse_matrix(text, n=None) -> np.ndarray:
    """``I3``, ``diag(1,1.5,2)`` or a JSON nested list."""
    if isinstance(text, (list, tuple)):
        return np.asarray(text, dtype=float)
    s = str(text).strip()
    m = re.fullmatch(r"I(\d*)", s)
    if m:
        dim = int(m.group(1)) if m.group(1) else n
        if dim is None:
            raise ValueError("identity needs a dimension, e.g. I3")
        return np.eye(dim)
    m = re.fullmatch(r"diag\((.*)\)", s)
    if m:
        return np.diag([float(v) for v in m.group(1).split(",")])
    return np.asarray(json.loads(s), dtype=float)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="asymexp", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run one scenario and write its report",
                         argument_default=argparse.SUPPRESS)
    run.add_argument("--scenario", choices=SCENARIOS)
    run.add_argument("--config", dest="config_path", help="JSON configuration file")
    run.add_argument("--out", help="output directory")
    run.add_argument("--tau", help="branch parameter, e.g. 0, pi/8, 0.3")
    run.add_argument("--n", type=int)
    run.add_argument("--zeta", type=float)
    run.add_argument("--C1", type=float)
    run.add_argument("--C2", type=float)
    run.add_argument("--k", type=float)
    run.add_argument("--matrix", help="I3, diag(1,1.5,2) or a JSON nested list")
    run.add_argument("--remainder-amplitude", dest="remainder_amplitude", type=float)
    run.add_argument("--K", type=int, help="highest harmonic degree to fit")
    run.add_argument("--r-min", dest="r_min", type=float)
    run.add_argument("--r-max", dest="r_max", type=float)
    run.add_argument("--shell-count", dest="shell_count", type=int)
    run.add_argument("--quad-degree", dest="quad_degree", type=int)
    run.add_argument("--slack", type=float)
    run.add_argument("--rel-tol", dest="rel_tol", type=float)
    run.add_argument("--seed", type=int)
    run.add_argument("--plots", action="store_true", help="also render PNG figures (needs matplotlib)")
    run.add_argument("--quiet", action="store_true")
    return parser


def resolve_config(flags: dict) -> dict:
    """Merge defaults, the JSON file and flags, then validate every field."""
    cfg = dict(DEFAULTS)
    errors = {}
    path = flags.pop("config_path", None)
    if path is not None:
        try:
            loaded = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            raise ConfigError({"config": f"cannot read {path}: {exc}"}) from exc
        if not isinstance(loaded, dict):
            raise ConfigError({"config": "the file must hold a JSON object"})
        unknown = sorted(set(loaded) - set(DEFAULTS))
        for key in unknown:
            errors[key] = "unknown field"
        cfg.update({k: v for k, v in loaded.items() if k in DEFAULTS})
    cfg.update(flags)
    errors.update(_validate(cfg))
    if errors:
        raise ConfigError(errors)
    return cfg


def _number(cfg, errors, key, cast=float, check=None, message=""):
    v = cfg[key]
    if v is None:
        return
    try:
        if isinstance(v, bool):
            raise TypeError
        v = cast(v)
        if cast is int and float(cfg[key]) != v:
            raise ValueError
    except (TypeError, ValueError):
        errors[key] = f"expected {'an integer' if cast is int else 'a number'}, got {cfg[key]!r}"
        return
    if cast is float and not math.isfinite(v):
        errors[key] = "must be finite"
        return
    if check is not None and not check(v):
        errors[key] = message
        return
    cfg[key] = v


def _validate(cfg) -> dict:
    errors = {}
    if cfg["scenario"] not in SCENARIOS:
        errors["scenario"] = f"must be one of {', '.join(SCENARIOS)}"
    try:
        cfg["tau"] = parse_tau(cfg["tau"])
        if not 0.0 <= cfg["tau"] <= math.pi / 2:
            errors["tau"] = "must lie in [0, pi/2]"
    except ValueError:
        errors["tau"] = f"cannot parse {cfg['tau']!r}"
    _number(cfg, errors, "n", int, lambda v: 2 <= v <= 6, "must be between 2 and 6")
    _number(cfg, errors, "C1", float, lambda v: v > 0, "must be positive")
    _number(cfg, errors, "C2")
    _number(cfg, errors, "k", float, lambda v: v > 0, "must be positive")
    _number(cfg, errors, "zeta", float, lambda v: v > 2, "must exceed 2")
    _number(cfg, errors, "remainder_amplitude")
    _number(cfg, errors, "K", int, lambda v: v >= 0, "must be non-negative")
    _number(cfg, errors, "r_min", float, lambda v: v > 0, "must be positive")
    _number(cfg, errors, "r_max", float, lambda v: v > 0, "must be positive")
    _number(cfg, errors, "shell_count", int, lambda v: v >= 8, "need at least 8 shells")
    _number(cfg, errors, "quad_degree", int, lambda v: 1 <= v <= 40, "must be between 1 and 40")
    _number(cfg, errors, "slack", float, lambda v: v > 0, "must be positive")
    _number(cfg, errors, "rel_tol", float, lambda v: v > 0, "must be positive")
    _number(cfg, errors, "seed", int, lambda v: v >= 0, "must be non-negative")
    if cfg["matrix"] is not None and "n" not in errors:
        try:
            M = parse_matrix(cfg["matrix"], cfg["n"])
            if M.shape != (cfg["n"], cfg["n"]):
                errors["matrix"] = f"shape {M.shape} does not match n={cfg['n']}"
            elif not np.allclose(M, M.T) or not np.all(np.isfinite(M)):
                errors["matrix"] = "must be finite and symmetric"
            else:
                cfg["matrix"] = M.tolist()
        except (ValueError, TypeError) as exc:
            errors["matrix"] = f"cannot parse: {exc}"
    if not errors:
        errors.update(_scenario_checks(cfg))
    return errors


def _scenario_checks(cfg) -> dict:
    errors = {}
    sc = cfg["scenario"]
    lo, hi, _ = _shells_spec(cfg)
    if lo is not None and not hi > lo:
        errors["r_max"] = "must exceed r_min"
    tau = TauParams(cfg["tau"])
    if sc == "poisson_exterior" and cfg["n"] != 3:
        errors["n"] = "the potential is implemented for n = 3"
    if sc == "legendre_check" and tau.branch not in (Branch.SMALL_TAU, Branch.INVERSE):
        errors["tau"] = "the Legendre reductions need 0 < tau <= pi/4"
    if sc in ("verify_thm2", "expand_fit"):
        zeta = _zeta(cfg)
        if not zeta > cfg["n"]:
            errors["zeta"] = f"the expansion needs zeta > n (zeta={zeta}, n={cfg['n']})"
    if sc in ("radial_manufacture", "legendre_check", "verify_thm1") or (
            sc in ("expand_fit", "verify_thm2") and cfg["matrix"] is None):
        try:
            _ansatz(cfg)
        except (AsymExpError, ValueError) as exc:
            errors["ansatz"] = str(exc)
    if sc in ("expand_fit", "verify_thm2") and cfg["matrix"] is not None:
        rep = check_domain(tau, np.asarray(cfg["matrix"]))
        if not rep.admissible:
            errors["matrix"] = f"not admissible for the branch ({rep.violated_constraint})"
    return errors


def _shells_spec(cfg):
    lo, hi, count = SHELL_DEFAULTS.get(cfg["scenario"], (None, None, None))
    return (cfg["r_min"] if cfg["r_min"] is not None else lo,
            cfg["r_max"] if cfg["r_max"] is not None else hi,
            cfg["shell_count"] if cfg["shell_count"] is not None else count)


def _shells(cfg):
    lo, hi, count = _shells_spec(cfg)
    return np.geomspace(lo, hi, count)


def _rel_tol(cfg):
    return cfg["rel_tol"] if cfg["rel_tol"] is not None else REL_TOL_DEFAULTS.get(cfg["scenario"])


def _ansatz(cfg) -> RadialAnsatz:
    return RadialAnsatz(cfg["n"], cfg["C1"], cfg["C2"], cfg["k"], TauParams(cfg["tau"]))


def radial_rate(n: int, k: float) -> float:
    """Decay exponent of f - f(inf) for the radial ansatz.

    The linear part is proportional to Delta r^-k = k(k+2-n) r^-k-2, which
    vanishes for k = n - 2 and leaves the quadratic part r^-2(k+2).
    """
    return 2.0 * (k + 2.0) if abs(k - (n - 2)) < 1e-12 else k + 2.0


def _zeta(cfg) -> float:
    if cfg["zeta"] is not None:
        return cfg["zeta"]
    if cfg["scenario"] in ("expand_fit", "verify_thm2") and cfg["matrix"] is not None:
        return 2.0 * cfg["n"]
    if cfg["scenario"] == "poisson_exterior":
        return 4.0
    return radial_rate(cfg["n"], cfg["k"])


def _expansion_field(cfg):
    tau = TauParams(cfg["tau"])
    if cfg["matrix"] is None:
        a = _ansatz(cfg)
        return ansatz_field(a), induced_rhs(a)
    A = np.asarray(cfg["matrix"])
    u = anisotropic_ansatz(A, cfg["C2"], tau, remainder_amplitude=cfg["remainder_amplitude"])
    return u, rhs_from_hessian(u, tau, A, _zeta(cfg))


def _ray(n):
    d = np.arange(1.0, n + 1.0)
    return d / np.linalg.norm(d)


# scenarios ------------------------------------------------------------------

def scenario_operator_eval(cfg, rep: Report):
    tau = TauParams(cfg["tau"])
    M = np.asarray(cfg["matrix"]) if cfg["matrix"] is not None else np.eye(cfg["n"])
    dom = check_domain(tau, M)
    rep.results["branch"] = tau.branch.value
    rep.results["eigenvalues"] = np.linalg.eigvalsh(M)
    rep.results["domain"] = dom.to_dict()
    if not rep.check("admissible", dom.admissible):
        return
    F = eval_F(tau, M)
    DF = eval_DF(tau, M).array
    fd = fd_matrix_gradient(tau, M)
    err = float(np.linalg.norm(DF - fd) / max(np.linalg.norm(DF), 1e-300))
    rep.results.update({"F": F, "DF": DF, "DF_fd_rel_err": err})
    rep.check("DF_matches_finite_differences", err < _rel_tol(cfg))
    rep.tables["DF"] = [{"i": i, "j": j, "DF": DF[i, j], "DF_fd": fd[i, j]}
                        for i in range(len(M)) for j in range(len(M))]


def scenario_radial_manufacture(cfg, rep: Report):
    a = _ansatz(cfg)
    f = induced_rhs(a)
    r = _shells(cfg)
    x = r[:, None] * _ray(cfg["n"])
    radial, tangential = a.eigenvalues(r)
    dev = f.deviation(x)
    direct = f.eval(x) - a.f_infinity
    fit = fit_decay(r, dev, allow_log=False)
    predicted = radial_rate(cfg["n"], cfg["k"])
    rep.results.update({
        "f_infinity": a.f_infinity, "predicted_exponent": predicted, "decay": fit.to_dict(),
        "deviation_vs_direct_max": float(np.max(np.abs(dev - direct))),
    })
    rep.check("deviation_rate", abs(fit.p_hat - predicted) <= cfg["slack"])
    rep.tables["profile"] = [
        {"r": ri, "radial_eigenvalue": l1, "tangential_eigenvalue": l2, "f_minus_f_inf": d}
        for ri, l1, l2, d in zip(r, radial, tangential, dev)]
    rep.curves.append(Curve("f_minus_f_inf", r.tolist(), dev.tolist(), "r", "|f - f(inf)|",
                            reference=(abs(fit.amplitude) * r ** -predicted).tolist()))


def scenario_legendre_check(cfg, rep: Report):
    tau = TauParams(cfg["tau"])
    a = _ansatz(cfg)
    lo, hi, count = _shells_spec(cfg)
    rng = np.random.default_rng(cfg["seed"])
    d = rng.standard_normal((count, cfg["n"]))
    pts = d / np.linalg.norm(d, axis=1, keepdims=True) * rng.uniform(lo, hi, (count, 1))
    pair = legendre_dual(shifted_sample(ansatz_field(a), pts, tau), tau)
    red = (reduce_small_tau if tau.branch is Branch.SMALL_TAU else reduce_inverse_tau)(pair, induced_rhs(a))
    hp = pair.hessian_product_error()
    rep.results.update({"branch": tau.branch.value, "reduction": red.to_dict(),
                        "hessian_product_error": hp, "growth_ratio": list(pair.growth_ratio()),
                        "convexity_margin": pair.forward.convexity_margin})
    tol = _rel_tol(cfg)
    rep.check("reduction_residual", red.residual is not None and red.residual < tol)
    rep.check("hessian_product", hp is not None and hp < tol)


def scenario_poisson_exterior(cfg, rep: Report):
    zeta = _zeta(cfg)
    lo, hi, count = _shells_spec(cfg)
    fit = measure_decay(decaying_bump(zeta), lo, hi, count)
    spec = DecaySpec(zeta, 3)
    rep.results.update({"zeta": zeta, "predicted_exponent": spec.predicted_exponent,
                        "predicted_log": int(spec.log_flag), "decay": fit.to_dict()})
    rep.check("exponent", abs(fit.p_hat - spec.predicted_exponent) <= cfg["slack"])
    rep.check("log_power", fit.q_hat == int(spec.log_flag))
    r = np.array([s[0] for s in fit.samples])
    w = np.array([s[1] for s in fit.samples])
    rep.tables["potential"] = [{"r": ri, "w": wi, "w_minus_w_inf": wi - fit.offset_value}
                               for ri, wi in zip(r, w)]
    model = fit.amplitude * r ** -fit.p_hat * (np.log(r) ** fit.q_hat if fit.q_hat else 1.0)
    rep.curves.append(Curve("w_minus_w_inf", r.tolist(), (w - fit.offset_value).tolist(), "|x|",
                            "|w - w(inf)|", reference=np.abs(model).tolist()))


def _expansion_outputs(rep, res):
    rep.tables["coefficients"] = res.csv_rows()
    rep.tables["shells"] = [{"s": s, "residual_rms": a, "remainder_rms": b}
                            for s, a, b in zip(res.shells, res.residual_rms, res.remainder_rms)]
    rep.curves.append(Curve("residual_rms", res.shells.tolist(), res.residual_rms.tolist(), "s", "RMS |u - Q|"))
    rep.curves.append(Curve("remainder_rms", res.shells.tolist(), res.remainder_rms.tolist(), "s",
                            "RMS remainder"))


def scenario_expand_fit(cfg, rep: Report):
    tau = TauParams(cfg["tau"])
    u, f = _expansion_field(cfg)
    Q = estimate_quadratic(u, tau, DEFAULT_QUAD_SHELLS)
    res = fit_expansion(u, Q, tau, _zeta(cfg), _shells(cfg), cfg["K"], cfg["quad_degree"])
    f_inf = f.decay_meta.f_infinity
    gap = abs(Q.F_A - f_inf)
    rep.results.update({"expansion": res.to_dict(), "f_infinity": f_inf, "F_A_error": gap,
                        "explained_fraction": res.explained_fraction})
    rep.check("F_A_matches_f_infinity", gap <= _rel_tol(cfg) * max(1.0, abs(f_inf)))
    _expansion_outputs(rep, res)


def _rate_curves(rep, checks):
    rows = []
    for ch in checks:
        r = [s[0] for s in ch.report.samples]
        v = [s[1] for s in ch.report.samples]
        rows += [{"quantity": ch.name, "r": ri, "value": vi} for ri, vi in zip(r, v)]
        rep.curves.append(Curve(ch.name, r, v, "r", f"|{ch.name}|"))
    rep.tables["rates"] = rows


def scenario_verify_thm1(cfg, rep: Report):
    a = _ansatz(cfg)
    out = verify_theorem1(ansatz_field(a), induced_rhs(a), a.tau, cfg["zeta"], _shells(cfg), cfg["slack"])
    rep.results["theorem"] = out.to_dict()
    for ch in out.checks:
        rep.check(f"rate[{ch.name}]", ch.passed)
    _rate_curves(rep, out.checks)


def scenario_verify_thm2(cfg, rep: Report):
    tau = TauParams(cfg["tau"])
    u, f = _expansion_field(cfg)
    out = verify_theorem2(u, f, tau, _zeta(cfg), _shells(cfg), cfg["K"], cfg["slack"])
    rep.results["theorem"] = out.to_dict()
    for ch in out.checks:
        rep.check(f"rate[{ch.name}]", ch.passed)
    _expansion_outputs(rep, out.expansion)


def _flatten(prefix, value, rows, number):
    if isinstance(value, dict):
        for k in sorted(value):
            _flatten(f"{prefix}.{k}" if prefix else str(k), value[k], rows, number)
    elif isinstance(value, (list, tuple)) and value and all(isinstance(v, (int, float)) for v in value):
        for i, v in enumerate(value):
            rows.append({"criterion": number, "metric": f"{prefix}[{i}]", "value": v})
    else:
        rows.append({"criterion": number, "metric": prefix, "value": value})


def scenario_suite(cfg, rep: Report):
    criteria = acceptance.run_suite(cfg["seed"], cfg["slack"])
    rep.results["criteria"] = [c.to_dict() for c in criteria]
    rows = []
    for c in criteria:
        rep.check(f"criterion_{c.number:02d}", c.passed)
        _flatten("", c.metrics, rows, c.number)
        if not cfg["quiet"]:
            print(c.line())
    rep.tables["criteria"] = rows


RUNNERS = {name: globals()[f"scenario_{name}"] for name in SCENARIOS}


def run(cfg: dict) -> tuple[int, Report]:
    """Run a validated configuration, write its report, return (status, report)."""
    embedded = {k: v for k, v in sorted(cfg.items()) if k not in _PRESENTATION}
    rep = Report(cfg["scenario"], embedded)
    try:
        RUNNERS[cfg["scenario"]](cfg, rep)
    except AsymExpError as exc:
        rep.results["error"] = {"type": type(exc).__name__, "message": str(exc)}
        rep.check("completed", False)
    write_report(rep, cfg["out"], plots=cfg["plots"])
    return (0 if rep.passed else 1), rep


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    flags = {k: v for k, v in vars(args).items() if k != "command"}
    try:
        cfg = resolve_config(flags)
    except ConfigError as exc:
        print(f"asymexp: {exc}", file=sys.stderr)
        return 2
    status, rep = run(cfg)
    if not cfg["quiet"]:
        failed = [k for k, ok in rep.assertions.items() if not ok]
        verdict = "PASS" if status == 0 else "FAIL (" + ", ".join(failed) + ")"
        print(f"{cfg['scenario']}: {verdict}; report in {cfg['out']}")
    return status


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
