"""Command-line driver: config -> staged pipeline -> JSON report (+ CSV grid).

Stages run in order periods, verify, ba, schrodinger.  Everything written to
disk is a deterministic function of the config and seed: no timings, sorted
keys, floats with 17 significant digits.

Exit codes: 0 all checks pass, 1 a verification failed, 2 config error,
3 numerical breakdown.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import json
import math
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .baker_akhiezer import (
    ZGrid,
    build_config,
    condition4_residuals,
    path_independence,
    psi_assembled,
    psi_hat_rep,
    psi_j,
    psi_two_involution,
    random_divisor,
    solve_schrodinger,
)
from .curve import Curve, CurveSpec
from .errors import ConfigError, NumericalBreakdown, RankDeficient, ZeroCountMismatch
from .numerics import Tolerances, lattice_distance, reduce_mod_lattice
from .periods import compute_periods
from .prym import (
    PrymGeometry,
    bisect_vn_point,
    check_vn1,
    check_vn2,
    eps,
    fay_offset,
    vn_delta,
    vn_rank_check,
    zeros_of_F_e,
)

STAGES = ("periods", "verify", "ba", "schrodinger")
EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3
RESIDUAL_THRESHOLD = 1e-4
NEGATIVE_THRESHOLD = 1e-2


# --------------------------------------------------------------------- config
@dataclass
class RunConfig:
    spec: CurveSpec
    tol: Tolerances = field(default_factory=Tolerances)
    grid: ZGrid = field(default_factory=ZGrid)
    seed: int = 0
    n_random: int = 10
    vn2_trials: int = 20
    stages: tuple = STAGES
    negative_control: bool = True
    out: Path = Path("prymlab_out")

    def quick(self):
        return replace(self, n_random=min(self.n_random, 3), vn2_trials=min(self.vn2_trials, 5),
                       grid=ZGrid(self.grid.center, self.grid.extent, min(self.grid.n, 11)))

    def describe(self):
        return {
            "family": self.spec.family,
            "branch_params": list(self.spec.branch_params),
            "seed": self.seed,
            "n_random": self.n_random,
            "vn2_trials": self.vn2_trials,
            "stages": list(self.stages),
            "negative_control": self.negative_control,
            "grid": {"center": self.grid.center, "extent": self.grid.extent, "n": self.grid.n},
            "tolerances": {k: getattr(self.tol, k)
                           for k in ("quad_tol", "theta_tol", "lattice_tol", "fd_step")},
        }


def _complex_list(text):
    return tuple(complex(s.strip().replace(" ", "")) for s in text.split(",") if s.strip())


def load_config(path) -> RunConfig:
    """Read an INI file with sections [curve], [tolerances], [grid], [run]."""
    cp = configparser.ConfigParser()
    try:
        with open(path, encoding="utf-8") as fh:
            cp.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return config_from_parser(cp)


def config_from_parser(cp: configparser.ConfigParser) -> RunConfig:
    try:
        cur = cp["curve"]
        spec = CurveSpec(cur.get("family", "A"), _complex_list(cur["branch_params"]))
        t = cp["tolerances"] if cp.has_section("tolerances") else {}
        d = Tolerances()
        tol = Tolerances(
            quad_tol=float(t.get("quad_tol", d.quad_tol)),
            theta_tol=float(t.get("theta_tol", d.theta_tol)),
            lattice_tol=float(t.get("lattice_tol", d.lattice_tol)),
            fd_step=float(t.get("fd_step", d.fd_step)),
        )
        g = cp["grid"] if cp.has_section("grid") else {}
        dg = ZGrid()
        grid = ZGrid(complex(str(g.get("center", dg.center)).replace(" ", "")),
                     float(g.get("extent", dg.extent)), int(g.get("n", dg.n)))
        r = cp["run"] if cp.has_section("run") else {}
        stages = str(r.get("stages", "all")).replace(" ", "")
        stages = STAGES if stages == "all" else tuple(s for s in stages.split(",") if s)
        for s in stages:
            if s not in STAGES:
                raise ConfigError(f"unknown stage {s!r}")
        cfg = RunConfig(
            spec=spec,
            tol=tol,
            grid=grid,
            seed=int(r.get("seed", 0)),
            n_random=int(r.get("n_random", 10)),
            vn2_trials=int(r.get("vn2_trials", 20)),
            stages=stages,
            negative_control=str(r.get("negative_control", "true")).lower() in ("1", "true", "yes"),
            out=Path(r.get("out", "prymlab_out")),
        )
    except ConfigError:
        raise
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"bad config: {exc}") from exc
    if cfg.n_random < 1 or cfg.vn2_trials < 1:
        raise ConfigError("n_random and vn2_trials must be positive")
    return cfg


# ------------------------------------------------------------------ report IO
def _fmt(x):
    return "null" if not math.isfinite(x) else format(x, ".17g")


def _convert(obj):
    if isinstance(obj, dict):
        return {str(k): _convert(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_convert(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_convert(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    if isinstance(obj, Path):
        return str(obj)
    return obj


def dumps(obj, indent=0):
    """Deterministic JSON text: sorted keys, 17 significant digits, NaN as null."""
    obj = _convert(obj)
    pad = "  " * (indent + 1)
    end = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(k)}: {dumps(obj[k], indent + 1)}" for k in sorted(obj)]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, list):
        if not obj:
            return "[]"
        return "[\n" + ",\n".join(pad + dumps(v, indent + 1) for v in obj) + "\n" + end + "]"
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, float):
        return _fmt(obj)
    return json.dumps(obj)


def write_csv(path, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["z_re", "z_im", "psi_re", "psi_im", "u_re", "u_im", "abs_r"])
        for row in rows:
            w.writerow([_fmt(float(v)) for v in row])


def schema_path():
    return Path(__file__).with_name("report.schema.json")


# --------------------------------------------------------------------- stages
def _random_e(rng, h):
    return 0.5 * (rng.normal(size=h) + 1j * rng.normal(size=h))


def _random_point(curve, rng):
    while True:
        x = complex(rng.uniform(-2.5, 2.5), rng.uniform(-1.5, 1.5))
        if np.min(np.abs(curve.branch_points - x)) > 0.25 and abs(x) > 0.25:
            return curve.point(x, sheet=1 if rng.random() < 0.5 else -1)


class Pipeline:
    """Lazily built curve, periods and geometry shared by the stages."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.curve = Curve(cfg.spec)
        self.curve.quad_tol = cfg.tol.quad_tol
        self._periods = None
        self._geom = None

    @property
    def periods(self):
        if self._periods is None:
            self._periods = compute_periods(self.curve)
        return self._periods

    @property
    def geom(self):
        if self._geom is None:
            self._geom = PrymGeometry(self.curve, self.periods, self.cfg.tol)
        return self._geom

    def rng(self, stage):
        return np.random.default_rng([self.cfg.seed, STAGES.index(stage)])


def cmd_periods(pipe: Pipeline):
    p = pipe.periods
    g = p.g
    a_norm = float(np.max(np.abs(p.a_periods(p.jac_coeffs) - 2j * np.pi * np.eye(g))))
    prym_a = p.a_periods(p.prym_coeffs)[:, : p.h]
    prym_norm = float(np.max(np.abs(prym_a - 2j * np.pi * np.eye(p.h))))
    symB = float(np.max(np.abs(p.B - p.B.T)))
    symPi = float(np.max(np.abs(p.Pi - p.Pi.T)))
    negB = bool(np.max(np.linalg.eigvalsh(p.B.real)) < 0)
    negPi = bool(np.max(np.linalg.eigvalsh(p.Pi.real)) < 0)
    ok = max(a_norm, prym_norm, symB, symPi) < 1e-8 and negB and negPi
    rep = p.to_dict()
    rep.update({
        "a_normalization_residual": a_norm,
        "prym_normalization_residual": prym_norm,
        "B_symmetry_residual": symB,
        "Pi_symmetry_residual": symPi,
        "B_real_negative_definite": negB,
        "Pi_real_negative_definite": negPi,
        "pass": ok,
    })
    return rep


def cmd_verify(pipe: Pipeline):
    """Fay offset, divisor identities and VN conditions over seeded random e."""
    cfg, geom, c = pipe.cfg, pipe.geom, pipe.curve
    rng = pipe.rng("verify")
    tol = 1e-6
    delta = vn_delta(geom)
    counts, sums, fays, eps_res, double_res, vn1, sig = [], [], [], [], [], [], []
    for _ in range(cfg.n_random):
        e = _random_e(rng, c.h)
        try:
            zeta = zeros_of_F_e(geom, e)
        except ZeroCountMismatch:
            counts.append(-1)
            continue
        counts.append(zeta.degree)
        r = check_vn1(geom, zeta, delta)
        vn1.append(r)
        sums.append(r.witness)
        fays.append(fay_offset(geom, e, zeta))
        A = geom.abel_prym(zeta)
        eps_res.append(lattice_distance(A - eps(e, c.g_sigma, c.h), geom.prym_lattice))
        double_res.append(lattice_distance(A - 2 * e, geom.prym_lattice))
        if len(sig) < 3:
            zm = zeros_of_F_e(geom, -e)
            sz = geom.sigma_divisor(zeta).expanded()
            others = zm.expanded()
            sig.append(sum(not any(c.same_point(P, Q, 1e-6) for Q in others) for P in sz))
    spread = lambda vs: max((lattice_distance(v - vs[0], geom.jac_lattice) for v in vs), default=0.0)
    constancy = spread(sums)
    off2 = reduce_mod_lattice(sums[0] - 2 * delta.ab, geom.jac_lattice)[0] if sums else []
    rep = {
        "zeros": {"expected": 2 * c.h, "counts": counts,
                  "pass": all(n == 2 * c.h for n in counts)},
        "sigma_zeta_equals_zeta_minus_e": {"unmatched_points": sig, "pass": not any(sig)},
        "zeta_sum_constancy": {
            "constancy": constancy,
            "residual_vs_2delta_max": max((r.residual_2delta for r in vn1), default=0.0),
            "offset_vs_2delta": off2,
            "pass": constancy < tol,
        },
        "vn1": {
            "residual_vs_delta_max": max((r.residual for r in vn1), default=0.0),
            "residual_vs_2delta_max": max((r.residual_2delta for r in vn1), default=0.0),
            "degree_zeta_plus_sigma_zeta": vn1[0].degree_zeta_sum if vn1 else None,
            "degree_2delta": 2 * delta.degree,
            "pass": all(r.holds for r in vn1),
        },
        "fay": {"offset_spread": spread(fays), "pass": spread(fays) < tol},
        "abel_prym_vs_eps": {"residual_max": max(eps_res, default=0.0),
                 "residual_vs_2e_max": max(double_res, default=0.0),
                 "pass": max(eps_res, default=0.0) < tol},
    }
    if c.k:
        rep["vn2"] = _verify_vn2(pipe, rng)
    rep["pass"] = all(v["pass"] for v in rep.values() if isinstance(v, dict))
    return rep


def _verify_vn2(pipe, rng):
    cfg, geom, c = pipe.cfg, pipe.geom, pipe.curve
    e0 = _random_e(rng, c.h)
    failures = 0
    defects = []
    for _ in range(cfg.vn2_trials):
        e = _random_e(rng, c.h)
        zeta = zeros_of_F_e(geom, e)
        r = check_vn2(geom, zeta, e, e0)
        failures += not r.holds
        defects.append(abs(r.defect))
    found = None
    for _ in range(10):
        res = bisect_vn_point(geom, _random_e(rng, c.h), _random_e(rng, c.h), e0)
        if res is not None:
            found = res
            break
    point = found[0] if found else _random_e(rng, c.h)
    try:
        rank = vn_rank_check(geom, point, e0)
        sv = None
    except RankDeficient as exc:
        rank, sv = exc.rank, exc.singular_values
    need = math.ceil(0.9 * cfg.vn2_trials)
    bis_ok = found is not None and found[1] < 1e-6
    return {
        "generic_failures": failures,
        "trials": cfg.vn2_trials,
        "required_failures": need,
        "defect_max": max(defects),
        "bisection": {"found": found is not None, "defect": found[1] if found else None},
        "rank": rank,
        "rank_singular_values": sv,
        "expected_rank": c.k,
        "pass": failures >= need and bis_ok and rank == c.k,
    }


def _rel(a, b):
    return float(abs(a - b) / max(abs(a), abs(b), 1e-300))


def cmd_ba(pipe: Pipeline):
    """Agreement of the representations at seeded random (P, z)."""
    cfg, geom, c = pipe.cfg, pipe.geom, pipe.curve
    rng = pipe.rng("ba")
    e = _random_e(rng, c.h)
    ba = build_config(geom, e)
    n = 2 * cfg.n_random
    samples = []
    for _ in range(n):
        P = _random_point(c, rng)
        z = complex(*(0.5 * rng.uniform(-1, 1, size=2)))
        samples.append((P, z))
    agree = {}
    for m in range(c.k + 1):
        agree[f"assembled_vs_two_involution_m{m}"] = max(
            _rel(psi_assembled(P, z, ba), psi_two_involution(P, z, m, ba)) for P, z in samples)
    if c.k:
        agree["block1_vs_hat_m1"] = max(
            _rel(psi_j(P, z, 1, ba), psi_hat_rep(P, z, 1, 1, ba)) for P, z in samples)
    zs = [z for _, z in samples[:10]]
    cond4 = {"assembled": condition4_residuals(ba, lambda P, z: psi_assembled(P, z, ba), zs)}
    for m in range(c.k + 1):
        cond4[f"two_involution_m{m}"] = condition4_residuals(
            ba, lambda P, z, m=m: psi_two_involution(P, z, m, ba), zs)
    P0, z0 = samples[0]
    paths = {
        "assembled": path_independence(ba, lambda P, z, L=(): psi_assembled(P, z, ba, L), P0, z0),
    }
    for m in range(c.k + 1):
        paths[f"two_involution_m{m}"] = path_independence(
            ba, lambda P, z, L=(), m=m: psi_two_involution(P, z, m, ba, L), P0, z0)
    try:
        psi_two_involution(P0, z0, c.k + 1, ba)
        rejected = False
    except ValueError:
        rejected = True
    m_top = c.k
    pair_keys = [f"assembled_vs_two_involution_m{m_top}"] + (["block1_vs_hat_m1"] if c.k else [])
    rep = {
        "U1": ba.U1, "U2": ba.U2, "cancellation_residual": ba.u_residual,
        "agreement": agree,
        "condition4": cond4,
        "path_independence_b": paths,
        "m_above_k_rejected": rejected,
        "pass": (all(agree[k] < 1e-6 for k in pair_keys)
                 and all(max(v, default=0.0) < 1e-8 for k, v in cond4.items()
                         if k in ("assembled", f"two_involution_m{m_top}"))
                 and all(v < 1e-6 for v in paths.values()) and rejected),
    }
    return rep


def cmd_schrodinger(pipe: Pipeline, out: Path | None = None):
    cfg, geom, c = pipe.cfg, pipe.geom, pipe.curve
    rng = pipe.rng("schrodinger")
    e = _random_e(rng, c.h)
    ba = build_config(geom, e)
    step = cfg.tol.fd_step
    m = c.k
    sol = solve_schrodinger(ba, "two_involution", m, cfg.grid, step)
    if out is not None:
        write_csv(out / "schrodinger_grid.csv", sol.csv_rows())
    rep = {"headline": sol.summary}
    ok = sol.residual.relative < RESIDUAL_THRESHOLD and (sol.order or 0) >= 1.8
    xi = sol.summary.get("xi_agreement")
    if xi:
        best = xi["matching_variant"]
        rep["cross_potential"] = {**xi, "pass": xi["deviation"][best] < 1e-3}
        ok = ok and rep["cross_potential"]["pass"]
    if c.k:
        low = solve_schrodinger(ba, "two_involution", 0, cfg.grid, step, order_check=False)
        rep["m0"] = low.summary
    if cfg.negative_control:
        zr = random_divisor(geom, 2 * c.h, rng)
        neg_cfg = build_config(geom, zeta=zr, kappa=ba.kappa)
        neg = solve_schrodinger(neg_cfg, "assembled", 0, cfg.grid, step, u_source="-dbar xi1",
                                order_check=False, max_excluded=0.05 + 1.0 / cfg.grid.n)
        rep["negative_control"] = {
            "relative_residual": neg.residual.relative,
            "excluded_points": neg.residual.excluded,
            "flag": "EXPECTED-FAIL",
            "pass": neg.residual.relative > NEGATIVE_THRESHOLD,
        }
        ok = ok and rep["negative_control"]["pass"]
    rep["pass"] = bool(ok)
    return rep


# ------------------------------------------------------------------------ run
def run(cfg: RunConfig, stages=None, out: Path | None = None):
    """Run the selected stages; returns (report dict, exit code)."""
    stages = tuple(stages or cfg.stages)
    pipe = Pipeline(cfg)
    report = {"config": cfg.describe(), "stages": {}}
    fns = {"periods": cmd_periods, "verify": cmd_verify, "ba": cmd_ba,
           "schrodinger": lambda p: cmd_schrodinger(p, out)}
    for s in STAGES:
        if s in stages:
            report["stages"][s] = fns[s](pipe)
    passed = all(v.get("pass", True) for v in report["stages"].values())
    report["pass"] = passed
    return report, EXIT_OK if passed else EXIT_FAIL


def _parser():
    ap = argparse.ArgumentParser(prog="prymlab", description=__doc__.splitlines()[0])
    ap.add_argument("--config", required=True, help="INI config file")
    ap.add_argument("--stage", choices=STAGES + ("all",), default=None)
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--quick", action="store_true", help="fewer random trials, 11x11 grid")
    ap.add_argument("--out", default=None, help="output directory")
    return ap


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = replace(cfg, seed=args.seed)
        if args.out is not None:
            cfg = replace(cfg, out=Path(args.out))
        if args.quick:
            cfg = cfg.quick()
        stages = None
        if args.stage and args.stage != "all":
            stages = (args.stage,)
            cfg = replace(cfg, stages=stages)
    except ConfigError as exc:
        print(f"config error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        report, code = run(cfg, stages, out)
    except ConfigError as exc:
        print(f"config error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalBreakdown as exc:
        print(f"numerical breakdown: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    (out / "report.json").write_text(dumps(report) + "\n", encoding="utf-8")
    for name, st in report["stages"].items():
        print(f"{name}: {'PASS' if st.get('pass', True) else 'FAIL'}")
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
