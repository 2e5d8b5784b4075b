"""Command line runner: ``python -m superdensity <subcommand> [options]``.

Every run writes its resolved configuration (``config.ini``), a manifest of
input hashes (``manifest.txt``) and CSV outputs into the output directory.
Exit codes: 0 success, 1 a checked assertion failed, 2 configuration error.
"""
from __future__ import annotations

import argparse
import configparser
import hashlib
import io
import logging
import math
import sys
from dataclasses import asdict, dataclass, field, fields, replace
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .density import RadiusLadder, estimate_degree, plot_estimate, write_csv
from .measure_core import ContractViolation, QuadratureSpec

log = logging.getLogger("superdensity")

SUBCOMMANDS = ("estimate", "laws", "forms", "approx", "gallery-list")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class LadderSpec:
    r0: float = 2.0 ** -4
    ratio: float = 0.5
    rungs: int = 8

    def build(self):
        return RadiusLadder(self.r0, self.ratio, self.rungs)


@dataclass(frozen=True)
class QuadSpec:
    samples_per_axis: int = 64
    refinement_levels: int = 1
    mode: str = "midpoint"
    use_hooks: bool = True

    def build(self, seed):
        return QuadratureSpec(self.samples_per_axis, self.refinement_levels, self.mode, seed, self.use_hooks)


@dataclass(frozen=True)
class RunConfig:
    subcommand: str = "estimate"
    seed: int = 0
    output: str = "out"
    gallery: str = "cusp4"
    points: str = "0,0"
    samples: int = 20
    svg: bool = False
    ladder: LadderSpec = field(default_factory=LadderSpec)
    quadrature: QuadSpec = field(default_factory=QuadSpec)
    params: tuple = ()
    tolerances: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "params", tuple(sorted((str(k), str(v)) for k, v in dict(self.params).items())))
        object.__setattr__(self, "tolerances",
                           tuple(sorted((str(k), str(v)) for k, v in dict(self.tolerances).items())))

    def param(self, key, default=None):
        return dict(self.params).get(key, default)

    def tolerance(self, key, default):
        return float(dict(self.tolerances).get(key, default))

    def to_ini(self):
        cp = configparser.ConfigParser()
        cp.optionxform = str
        cp["run"] = {k: _fmt(getattr(self, k)) for k in
                     ("subcommand", "seed", "output", "gallery", "points", "samples", "svg")}
        cp["ladder"] = {k: _fmt(v) for k, v in asdict(self.ladder).items()}
        cp["quadrature"] = {k: _fmt(v) for k, v in asdict(self.quadrature).items()}
        cp["params"] = dict(self.params)
        cp["tolerances"] = dict(self.tolerances)
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    @classmethod
    def from_ini(cls, text):
        cp = configparser.ConfigParser()
        cp.optionxform = str
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"unreadable config: {exc}") from exc
        kw = {}
        if "run" in cp:
            kw.update(_parse_section(cls, cp["run"]))
        if "ladder" in cp:
            kw["ladder"] = LadderSpec(**_parse_section(LadderSpec, cp["ladder"]))
        if "quadrature" in cp:
            kw["quadrature"] = QuadSpec(**_parse_section(QuadSpec, cp["quadrature"]))
        if "params" in cp:
            kw["params"] = tuple(sorted(cp["params"].items()))
        if "tolerances" in cp:
            kw["tolerances"] = tuple(sorted(cp["tolerances"].items()))
        return cls(**kw).validated()

    def validated(self):
        if self.subcommand not in SUBCOMMANDS:
            raise ConfigError(f"unknown subcommand {self.subcommand!r}")
        try:
            self.ladder.build()
            self.quadrature.build(self.seed)
        except ContractViolation as exc:
            raise ConfigError(str(exc)) from exc
        if self.samples < 0:
            raise ConfigError("samples must be nonnegative")
        return self


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _parse_section(cls, section):
    types = {f.name: f.type for f in fields(cls)}
    out = {}
    for key, raw in section.items():
        if key not in types:
            raise ConfigError(f"unknown key {key!r} in [{section.name}]")
        t = types[key]
        try:
            if t in ("bool", bool):
                out[key] = section.getboolean(key)
            elif t in ("int", int):
                out[key] = int(raw)
            elif t in ("float", float):
                out[key] = float(raw)
            else:
                out[key] = raw
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {raw!r}") from exc
    return out


# ---------------------------------------------------------------- helpers

def _source_hashes():
    pkg = resources.files(__package__)
    out = {}
    for name in sorted(p.name for p in pkg.iterdir() if p.name.endswith((".py", ".ini"))):
        out[name] = hashlib.sha256(pkg.joinpath(name).read_bytes()).hexdigest()
    return out


def _prepare(cfg):
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    text = cfg.to_ini()
    (out / "config.ini").write_text(text)
    lines = [f"superdensity {__version__}", f"config.ini sha256 {hashlib.sha256(text.encode()).hexdigest()}"]
    lines += [f"{name} sha256 {h}" for name, h in _source_hashes().items()]
    (out / "manifest.txt").write_text("\n".join(lines) + "\n")
    return out


def _parse_points(text, n):
    text = text.strip()
    if not text:
        return np.zeros((0, n))
    try:
        pts = [tuple(float(v) for v in chunk.split(",")) for chunk in text.split(";") if chunk.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad point list {text!r}") from exc
    if any(len(p) != n for p in pts):
        raise ConfigError(f"points must have {n} coordinates")
    return np.array(pts, dtype=float).reshape(-1, n)


def _sample_members(E, count, seed, window=None):
    window = window or E.bbox
    rng = np.random.default_rng(seed)
    got = []
    for _ in range(200):
        if sum(len(g) for g in got) >= count:
            break
        pts = rng.uniform(window.lower, window.upper, size=(max(4 * count, 64), E.dimension))
        got.append(pts[E.contains(pts)])
    pts = np.concatenate(got) if got else np.zeros((0, E.dimension))
    return pts[:count]


# ---------------------------------------------------------------- subcommands

def cmd_gallery_list(cfg, stream=None):
    from .gallery import load_manifest
    stream = stream or sys.stdout
    cp = load_manifest()
    for name in cp.sections():
        sec = cp[name]
        params = ", ".join(f"{k}={v}" for k, v in sec.items() if k not in ("kind", "expected_degree", "basis", "point"))
        stream.write(f"{name}: {sec['kind']} ({params}) expected {sec['expected_degree']} [{sec['basis']}]\n")
    return 0


def cmd_estimate(cfg):
    from .gallery import build, load_manifest
    cp = load_manifest()
    if cfg.gallery not in cp:
        raise ConfigError(f"unknown gallery entry {cfg.gallery!r}")
    try:
        E = build(cfg.gallery, **dict(cfg.params))
    except (ContractViolation, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    out = _prepare(cfg)
    if cfg.points.strip() == "sampled":
        pts = _sample_members(E, cfg.samples, cfg.seed)
    else:
        pts = _parse_points(cfg.points, E.dimension)
    ladder, q = cfg.ladder.build(), cfg.quadrature.build(cfg.seed)
    ests = [estimate_degree(E, x, ladder, q) for x in pts]
    with open(out / "estimates.csv", "w", newline="") as fh:
        write_csv(ests, E.dimension, fh)
    if cfg.svg:
        for i, est in enumerate(ests):
            plot_estimate(est, out / f"estimate_{i:03d}.svg")
    for est in ests:
        log.info("%s: %s %s", est.x, est.cls, est.exponent)
    return 0


def cmd_laws(cfg):
    from .suites import counterexample_battery, equivalence_battery, half_plane_battery, identical_battery
    out = _prepare(cfg)
    ladder, q = cfg.ladder.build(), cfg.quadrature.build(cfg.seed)
    pairs = int(cfg.param("pairs", 20))
    rows, failures = [], 0
    ce = counterexample_battery(q)
    rows.append(("counterexample_1d", int(ce["union_infinite"]), int(ce["max_zero"]), int(ce["reproduced"])))
    failures += not ce["reproduced"]
    ident = identical_battery(ladder, q, cfg.seed)
    rows.append(("identical_pairs", ident.checked, ident.skipped, ident.violations))
    failures += ident.violations > 0
    hp = half_plane_battery(pairs, ladder, q, cfg.seed)
    rows.append(("random_pairs", hp.checked, hp.skipped, hp.violations))
    failures += hp.violations > 0
    eq = equivalence_battery(ladder, q)
    rows.append(("null_perturbations", len(eq.rows), 0, len(eq.disagreements)))
    failures += not eq.agree
    with open(out / "laws.csv", "w", newline="") as fh:
        fh.write("battery,checked,skipped,violations\n")
        for r in rows:
            fh.write(",".join(str(v) for v in r) + "\n")
    return 1 if failures else 0


def cmd_forms(cfg):
    from .forms import cantor_tangency_setup, tangency_experiment
    from .suites import algebra_suite, pairing_suite
    out = _prepare(cfg)
    alg = algebra_suite(cfg.seed)
    pair = pairing_suite(cfg.seed, forms=int(cfg.param("forms", 10)), bumps=int(cfg.param("bumps", 20)))
    lam, Delta, mu, window, C = cantor_tangency_setup(int(cfg.param("cantor_depth", 6)))
    rng = np.random.default_rng(cfg.seed)
    n_s = cfg.samples
    pts = np.column_stack([rng.uniform(0, 1, n_s), rng.uniform(-0.5, 0.5, n_s)])
    q = cfg.quadrature.build(cfg.seed)
    rep = tangency_experiment(Delta, mu, window, pts, cfg.ladder.build(), q,
                               c_big=cfg.tolerance("c_big", 0.1), identity_points=pts[:2],
                               samples_per_axis=int(cfg.param("identity_samples", 256)))
    with open(out / "algebra.csv", "w", newline="") as fh:
        fh.write("check,value,tolerance\n")
        for k, (v, tol) in alg.items():
            fh.write(f"{k},{v:.6e},{tol:.1e}\n")
    with open(out / "pairing.csv", "w", newline="") as fh:
        fh.write("h,form,bump,relative_residual\n")
        for h, i, j, r in pair:
            fh.write(f"{h},{i},{j},{r:.6e}\n")
    with open(out / "tangency.csv", "w", newline="") as fh:
        fh.write("x_1,x_2,class,exponent,dmu,verdict\n")
        for r in rep.rows:
            e = "" if r.exponent is None else f"{r.exponent:.10g}"
            fh.write(f"{r.x[0]:.10g},{r.x[1]:.10g},{r.cls},{e},{r.dmu:.10g},{r.verdict}\n")
    if cfg.svg:
        _tangency_plot(rep, out / "tangency.svg")
    ok = all(v <= tol for v, tol in alg.values())
    ok &= max((r for *_, r in pair), default=0.0) <= cfg.tolerance("pairing", 1e-3)
    ok &= rep.passed
    return 0 if ok else 1


def _tangency_plot(rep, path):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    fig, ax = plt.subplots(figsize=(4, 3))
    xs = [r.exponent if r.exponent is not None else (0.0 if r.cls == "zero" else 4.0) for r in rep.rows]
    ax.scatter(xs, [r.dmu for r in rep.rows], s=8)
    ax.set_xlabel("degree (infinite plotted at 4)")
    ax.set_ylabel("|dmu|")
    fig.tight_layout()
    with matplotlib.rc_context({"svg.hashsalt": "superdensity"}):
        fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def cmd_approx(cfg):
    from .approximation import (convergence_report, impossibility_demo, indicator_target,
                                piecewise_target, pipeline_ladder, run_pipeline)
    from .gallery import make_graded_removal
    from .measure_core import Box
    out = _prepare(cfg)
    target = cfg.param("target", "two_valued")
    if target == "indicator":
        W = Box((-0.125, -0.125), (1.125, 1.125))
        f = indicator_target(float(cfg.param("value", 3.0)), Box((0, 0), (1, 1)), W)
    elif target == "two_valued":
        W = Box((0.0, 0.0), (1.0, 1.0))
        f = piecewise_target([(2.5, ((0, 0), (0.5, 0.5))), (4.0, ((0.5, 0.5), (1, 1)))], W)
    elif target == "zero":
        W = Box((0.0, 0.0), (1.0, 1.0))
        f = piecewise_target([], W, "zero")
    else:
        raise ConfigError(f"unknown target {target!r}")
    try:
        stages_k = tuple(int(v) for v in str(cfg.param("stages", "4,6,8")).split(","))
    except ValueError as exc:
        raise ConfigError("stages must be a comma separated list of integers") from exc
    stages = run_pipeline(f, stages_k, seed=cfg.seed)
    rng = np.random.default_rng(cfg.seed)
    pts = rng.uniform(W.lower, W.upper, size=(cfg.samples, 2))
    ladder = pipeline_ladder()
    rep = convergence_report(f, stages, pts, ladder, tolerance=cfg.tolerance("final_median", 0.25))
    (out / "trajectories.csv").write_text(rep.to_csv())
    lines = [f"target {f.label}", f"stages {stages_k}"]
    for st in stages:
        led = st.budget_ledger()
        lines.append("stage {k}: rectangles {rectangles} gap {gap:.6g} partial {partial_cells:.6g} "
                     "removed_bound {removed_bound:.6g} total {total:.6g}".format(**led))
        for row in st.F.report():
            lines.append("  {kind} target {target:.6g} volume {volume:.6g} achieved {achieved_measure:.6g} "
                         "budget {budget:.6g}".format(**row))
    lines.append(f"medians {tuple(round(m, 6) for m in rep.medians)}")
    for v, meds in rep.medians_by_target().items():
        lines.append(f"medians for target {v:g} {tuple(round(m, 6) for m in meds)}")
    lines.append(f"excluded fraction {rep.excluded_fraction:.4f}")
    ok = rep.passed if target != "zero" else all(m == 0 for m in rep.medians)
    for v, meds in rep.medians_by_target().items():
        if v > 0:
            ok &= all(b <= a for a, b in zip(meds, meds[1:])) and meds[-1] <= rep.tolerance
    m_req = cfg.param("impossibility_m")
    if m_req is not None:
        F = make_graded_removal(float(cfg.param("impossibility_t", 2.5)))
        demo = impossibility_demo(float(m_req), F, _sample_members(F, 30, cfg.seed), ladder)
        lines.append(demo.narrative)
        ok &= demo.precondition_ok
    (out / "pipeline.txt").write_text("\n".join(lines) + "\n")
    return 0 if ok else 1


COMMANDS = {"estimate": cmd_estimate, "laws": cmd_laws, "forms": cmd_forms,
            "approx": cmd_approx, "gallery-list": cmd_gallery_list}


def build_parser():
    p = argparse.ArgumentParser(prog="superdensity", description=__doc__.splitlines()[0])
    p.add_argument("subcommand", choices=SUBCOMMANDS)
    p.add_argument("--config", help="key/value config file; flags override it")
    p.add_argument("--seed", type=int)
    p.add_argument("--output", "-o")
    p.add_argument("--gallery")
    p.add_argument("--points", help="'x,y;x,y' or 'sampled'")
    p.add_argument("--samples", type=int)
    p.add_argument("--svg", action="store_true", default=None)
    p.add_argument("--r0", type=float)
    p.add_argument("--ratio", type=float)
    p.add_argument("--rungs", type=int)
    p.add_argument("--samples-per-axis", type=int)
    p.add_argument("--refinement-levels", type=int)
    p.add_argument("--mode", choices=("midpoint", "stratified"))
    p.add_argument("--param", action="append", default=[], metavar="KEY=VALUE")
    p.add_argument("--tolerance", action="append", default=[], metavar="KEY=VALUE")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _pairs(items, what):
    out = {}
    for item in items:
        if "=" not in item:
            raise ConfigError(f"{what} must look like KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def resolve_config(args):
    cfg = RunConfig()
    if args.config:
        try:
            cfg = RunConfig.from_ini(Path(args.config).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
    cfg = replace(cfg, subcommand=args.subcommand)
    over = {k: getattr(args, k) for k in ("seed", "output", "gallery", "points", "samples", "svg")
            if getattr(args, k) is not None}
    cfg = replace(cfg, **over)
    lad = {k: v for k, v in (("r0", args.r0), ("ratio", args.ratio), ("rungs", args.rungs)) if v is not None}
    if lad:
        cfg = replace(cfg, ladder=replace(cfg.ladder, **lad))
    qd = {k: v for k, v in (("samples_per_axis", args.samples_per_axis),
                            ("refinement_levels", args.refinement_levels), ("mode", args.mode)) if v is not None}
    if qd:
        cfg = replace(cfg, quadrature=replace(cfg.quadrature, **qd))
    if args.param:
        cfg = replace(cfg, params=tuple(sorted({**dict(cfg.params), **_pairs(args.param, "--param")}.items())))
    if args.tolerance:
        cfg = replace(cfg, tolerances=tuple(sorted({**dict(cfg.tolerances),
                                                    **_pairs(args.tolerance, "--tolerance")}.items())))
    return cfg.validated()


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = resolve_config(args)
        return COMMANDS[cfg.subcommand](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ContractViolation as exc:
        print(f"contract violation: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
