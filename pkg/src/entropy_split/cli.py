"""Command-line driver: solve, converge, bench and verify-ops.

Run configurations are plain ``key = value`` files (``#`` starts a
comment).  Every key can be overridden on the command line as
``--key value``.  Exit codes: 0 success, 1 configuration error, 2 a
non-admissible state during the run.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import diagnostics as dg
from . import gas as gm
from .gas import AdmissibilityError, GasModel
from .mesh import MeshError, build_mesh, compute_element_ops
from .operators import OperatorFormatError, build_reference_ops, import_operators, verify_operators
from .problems import get_problem, interval_map
from .spatial import ConfigError, SchemeConfig, residual
from .timestepping import EntropyFunctional, compute_dt, integrate

__all__ = ["RunConfig", "RunResult", "parse_config", "prepare", "run", "converge", "bench", "main"]

OUTPUT_ENV = "ENTROPY_SPLIT_OUTPUT"
_INTEGRATORS = ("rk4", "rrk4", "rrk4_conservative", "rrk4_dissipative")


def _bool(v) -> bool:
    if isinstance(v, bool):
        return v
    s = str(v).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {v!r}")


def _cells(v) -> tuple[int, ...]:
    if isinstance(v, (tuple, list)):
        return tuple(int(c) for c in v)
    return tuple(int(c) for c in str(v).replace("x", ",").split(",") if c.strip())


def _regions(v) -> list[tuple[float, float]]:
    if isinstance(v, (list, tuple)):
        return [tuple(map(float, r)) for r in v]
    out = []
    for part in str(v).split(";"):
        part = part.strip()
        if not part:
            continue
        if not (part.startswith("[") and part.endswith("]")):
            raise ConfigError(f"region {part!r} must look like [a,b]")
        a, b = (float(s) for s in part[1:-1].split(","))
        if b < a:
            raise ConfigError(f"region {part!r} has b < a")
        out.append((a, b))
    return out


@dataclass
class RunConfig:
    """A validated run description.

    ``None`` entries fall back to the problem defaults.
    """

    problem: str = "vortex2d"
    p: int | None = None
    cells: tuple | None = None
    warp: str | None = None
    p_geom: int | None = None
    scheme: str = "entropy_split"
    flux: str | None = None
    dissipation: bool = False
    viscous_sat: str = "BO"
    integrator: str | None = None
    cfl: float | None = None
    t_final: float | None = None
    n_steps: int | None = None
    beta: float = 2.5
    mu: float | None = None
    Pr: float | None = None
    heat_flux: bool = True
    Re: float = 100.0
    dim: int = 2
    hybrid_regions: list = field(default_factory=list)
    hybrid_auto_sod: bool = False
    output: str | None = None
    series_every: int = 1
    threads: int = 1

    _KEYS = {
        "problem": str, "p": int, "cells": _cells, "warp": str, "p_geom": int, "scheme": str, "flux": str,
        "dissipation": _bool, "viscous_sat": str, "integrator": str, "cfl": float, "t_final": float,
        "n_steps": int, "beta": float, "mu": float, "Pr": float, "heat_flux": _bool, "Re": float, "dim": int,
        "hybrid.regions": _regions, "hybrid.auto_sod": _bool, "output": str, "series_every": int, "threads": int,
    }

    @classmethod
    def from_dict(cls, values: dict) -> "RunConfig":
        cfg = cls()
        for key, raw in values.items():
            if key not in cls._KEYS:
                raise ConfigError(f"unknown configuration key {key!r}")
            try:
                val = cls._KEYS[key](raw)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad value {raw!r} for {key}: {exc}") from None
            setattr(cfg, key.replace(".", "_"), val)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.scheme not in ("entropy_split", "hadamard", "hybrid"):
            raise ConfigError(f"scheme must be entropy_split, hadamard or hybrid, not {self.scheme!r}")
        if self.integrator not in (None,) + _INTEGRATORS:
            raise ConfigError(f"integrator must be one of {', '.join(_INTEGRATORS)}")
        if self.p is not None and not 1 <= self.p <= 10:
            raise ConfigError("p must lie in 1..10")
        if self.scheme == "hybrid" and not (self.hybrid_regions or self.hybrid_auto_sod):
            if self.problem not in ("sod", "shu_osher"):
                raise ConfigError("hybrid scheme needs hybrid.regions or hybrid.auto_sod")
        if self.hybrid_auto_sod and self.problem != "sod":
            raise ConfigError("hybrid.auto_sod applies to the sod problem only")


def parse_config(text: str) -> dict:
    """Parse ``key = value`` lines into a dictionary of strings."""
    out = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected 'key = value'")
        k, v = line.split("=", 1)
        out[k.strip()] = v.strip()
    return out


@dataclass
class RunSetup:
    problem: object
    mesh: object
    ops: object
    scheme: SchemeConfig
    u0: np.ndarray
    t_final: float
    cfl: float
    integrator: str
    n_steps: int | None
    hybrid: object


def prepare(cfg: RunConfig) -> RunSetup:
    """Build problem, mesh, operators, scheme and initial state."""
    kwargs = {}
    if cfg.problem == "taylor_green":
        kwargs["Re"] = cfg.Re
        if cfg.Pr is not None:
            kwargs["Pr"] = cfg.Pr
    if cfg.problem == "mms":
        kwargs["d"] = cfg.dim
    try:
        prob = get_problem(cfg.problem, **kwargs)
    except KeyError as exc:
        raise ConfigError(str(exc)) from None
    base = prob.gas
    flux = cfg.flux or "sjogreen_yee"
    family = "generalized" if flux in ("ismail_roe", "ir") else "harten"
    gas = GasModel(
        gamma=base.gamma, R=base.R, beta=cfg.beta,
        mu=base.mu if cfg.mu is None else cfg.mu,
        Pr=base.Pr if cfg.Pr is None else cfg.Pr,
        include_heat_flux=cfg.heat_flux, entropy_family=family,
    )
    if gas != base:
        if cfg.problem == "taylor_green":
            prob = dataclasses.replace(prob, gas=gas)
        else:
            prob = get_problem(cfg.problem, gas=gas, **kwargs)
    p = cfg.p or prob.p
    cells = cfg.cells or prob.cells
    if len(cells) == 1 and prob.d > 1:
        cells = cells * prob.d
    mesh = build_mesh(p, prob.d, cells, prob.domain, cfg.warp or prob.warp, cfg.p_geom)
    ops = compute_element_ops(mesh)
    hybrid = None
    if cfg.scheme == "hybrid":
        if cfg.hybrid_regions:
            regions = cfg.hybrid_regions
            hybrid = lambda m, t: interval_map(m.centroids(), regions)  # noqa: E731
        elif prob.hybrid is not None:
            hybrid = prob.hybrid
        else:
            raise ConfigError("no hybrid rule for this problem")
        mode_map = hybrid(mesh, 0.0)
    else:
        mode_map = None
    scheme = SchemeConfig(
        gas=gas, flux=flux, mode_map=mode_map,
        default_mode="hadamard" if cfg.scheme == "hadamard" else "entropy_split",
        dissipation=cfg.dissipation, viscous=prob.viscous and gas.mu > 0, viscous_sat=cfg.viscous_sat,
        source=prob.source,
    )
    x = mesh.x
    if prob.discontinuous:
        x = x + 1e-9 * (mesh.centroids()[:, None, :] - x)
    u0 = prob.initial(x)
    return RunSetup(
        prob, mesh, ops, scheme, u0,
        cfg.t_final if cfg.t_final is not None else prob.t_final,
        cfg.cfl if cfg.cfl is not None else prob.cfl,
        cfg.integrator or prob.integrator,
        cfg.n_steps if cfg.n_steps is not None else prob.n_steps,
        hybrid,
    )


@dataclass
class RunResult:
    setup: RunSetup
    u: np.ndarray
    t: float
    steps: int
    series: dict
    final: dict
    wall_time: float


def run(cfg: RunConfig, setup: RunSetup | None = None, record: bool = True, fixed_dt: bool = False) -> RunResult:
    """Integrate a configured problem to its final time.

    ``fixed_dt`` takes equal steps sized by the CFL condition at ``t = 0``
    (used when a uniformly sampled history is needed).
    """
    s = setup or prepare(cfg)
    ops, scheme, gas = s.ops, s.scheme, s.scheme.gas
    ent = EntropyFunctional(ops, gas)
    u0 = s.u0
    s0 = ent.total(u0)
    tot0 = dg.conserved_totals(u0, ops)
    scale0 = dg.conservation_scale(u0, ops)
    rho0 = s.problem.info.get("rho0", 1.0)
    vol = s.problem.info.get("volume")
    series = {"t": [0.0], "entropy": [s0], "entropy_change": [0.0], "gamma": [1.0], "kinetic_energy": [],
              "totals": [tot0]}
    if record:
        series["kinetic_energy"].append(dg.kinetic_energy(u0, ops, rho0, vol))
    every = max(1, cfg.series_every)

    def rhs(u, t):
        return residual(u, t, ops, scheme)

    def before(u, t, step):
        if s.hybrid is not None:
            scheme.mode_map = s.hybrid(s.mesh, t)

    def after(u, t, rec):
        if record and (rec.step % every == 0 or t >= s.t_final):
            st = ent.total(u)
            series["t"].append(t)
            series["entropy"].append(st)
            series["entropy_change"].append(dg.entropy_change(st, s0))
            series["gamma"].append(rec.gamma)
            series["kinetic_energy"].append(dg.kinetic_energy(u, ops, rho0, vol))
            series["totals"].append(dg.conserved_totals(u, ops))

    n_steps = s.n_steps
    fixed_dt = fixed_dt or s.problem.info.get("uniform_steps", False)
    if fixed_dt and n_steps is None:
        dt0 = compute_dt(u0, ops, gas, s.cfl)
        n_steps = int(np.ceil(s.t_final / dt0 - 1e-12))
    method = s.integrator
    mode = "dissipative" if scheme.dissipation else "conservative"
    if method.startswith("rrk4_"):
        method, mode = "rrk4", method[5:]
    start = time.perf_counter()
    u, t, steps = integrate(
        u0, 0.0, s.t_final, rhs, lambda u, t: compute_dt(u, ops, gas, s.cfl), method, ent, mode,
        n_steps, before, after,
    )
    wall = time.perf_counter() - start
    final = {"t": t, "steps": steps, "wall_time": wall}
    tot = dg.conserved_totals(u, ops)
    drift = dg.conservation_error(tot0, tot, scale0)
    for c, name in enumerate(_component_names(s.mesh.d)):
        final[f"conservation_{name}"] = float(drift[c])
    final["entropy_change"] = dg.entropy_change(ent.total(u), s0)
    sol = s.problem.info.get("riemann")
    if sol is not None and t > 0:
        # right-moving shock between the contact and the middle of the mirrored domain
        rho = u[..., 0]
        level = 0.5 * (sol.rho_star_right + sol.right[0])
        xc = 0.5 + sol.contact_speed * t
        final["shock_position"] = dg.front_position(s.mesh.x[..., 0], rho, level, (xc, 1.0))
    if s.problem.exact is not None:
        final["l2_error"] = dg.l2_error(u, s.problem.exact, ops, t)
    if record and fixed_dt and every == 1 and len(series["t"]) >= 7:
        series["dissipation_rate"] = dg.dissipation_rate(series["kinetic_energy"], series["t"][1] - series["t"][0])
    return RunResult(s, u, t, steps, series, final, wall)


def _component_names(d: int) -> list[str]:
    return ["mass"] + [f"momentum{i + 1}" for i in range(d)] + ["energy"]


def _fmt(v) -> str:
    return format(float(v), ".17g")


def write_outputs(res: RunResult, out_dir: Path) -> None:
    """Write ``series.csv``, ``final.csv``, ``solution.csv`` and, when available, ``dissipation_rate.csv``."""
    out_dir.mkdir(parents=True, exist_ok=True)
    d = res.setup.mesh.d
    names = _component_names(d)
    ser = res.series
    with open(out_dir / "series.csv", "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["t", "entropy", "entropy_change", "gamma", "kinetic_energy"] + [f"total_{n}" for n in names])
        ke = ser["kinetic_energy"] or [float("nan")] * len(ser["t"])
        for i, t in enumerate(ser["t"]):
            wr.writerow([_fmt(t), _fmt(ser["entropy"][i]), _fmt(ser["entropy_change"][i]), _fmt(ser["gamma"][i]),
                        _fmt(ke[i])]
                        + [_fmt(v) for v in ser["totals"][i]])
    with open(out_dir / "final.csv", "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["quantity", "value"])
        for k, v in res.final.items():
            wr.writerow([k, _fmt(v)])
    if "dissipation_rate" in ser:
        with open(out_dir / "dissipation_rate.csv", "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["t", "kinetic_energy", "dissipation_rate"])
            for t, k, e in zip(ser["t"], ser["kinetic_energy"], ser["dissipation_rate"]):
                wr.writerow([_fmt(t), _fmt(k), _fmt(e)])
    x = res.setup.mesh.x.reshape(-1, d)
    u = res.u.reshape(-1, d + 2)
    rho, V, p = gm.primitive(u, res.setup.scheme.gas)
    with open(out_dir / "solution.csv", "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow([f"x{i + 1}" for i in range(d)] + ["rho"] + [f"V{i + 1}" for i in range(d)] + ["p"])
        for j in range(x.shape[0]):
            wr.writerow([_fmt(c) for c in x[j]] + [_fmt(rho[j])] + [_fmt(c) for c in V[j]] + [_fmt(p[j])])


def converge(cfg: RunConfig, meshes: list[int]) -> list[dict]:
    """Run on a sequence of meshes and report errors and observed rates."""
    if len(meshes) < 2:
        raise ConfigError("a convergence study needs at least two meshes")
    rows = []
    for n in meshes:
        c = dataclasses.replace(cfg, cells=(n,))
        res = run(c, record=False)
        rows.append({"cells": n, "h": res.setup.mesh.element_size,
                     "l2_error": res.final.get("l2_error", float("nan")),
                     "conservation_mass": res.final["conservation_mass"],
                     "conservation_energy": res.final["conservation_energy"]})
    for key, rate in (("l2_error", "rate"), ("conservation_mass", "mass_rate"),
                      ("conservation_energy", "energy_rate")):
        rows[0][rate] = float("nan")
        for prev, row in zip(rows, rows[1:]):
            with np.errstate(divide="ignore", invalid="ignore"):
                row[rate] = dg.convergence_rate(prev[key], row[key], prev["h"], row["h"])
    return rows


def bench(cfg: RunConfig, repeats: int = 5, steps: int = 50) -> dict:
    """Time ``steps`` residual evaluations, ``repeats`` times, for both volume forms.

    Only residual assembly is timed.  Returns the per-repeat times, their
    means and the ratio ``entropy_split / hadamard`` of the means.
    """
    out = {"times": {}}
    for scheme in ("entropy_split", "hadamard"):
        flux = cfg.flux if scheme == "hadamard" else "sjogreen_yee"
        c = dataclasses.replace(cfg, scheme=scheme, flux=flux or "sjogreen_yee")
        s = prepare(c)
        residual(s.u0, 0.0, s.ops, s.scheme)
        times = []
        for _ in range(repeats):
            t0 = time.perf_counter()
            for _ in range(steps):
                residual(s.u0, 0.0, s.ops, s.scheme)
            times.append(time.perf_counter() - t0)
        out["times"][scheme] = times
        out[scheme] = float(np.mean(times))
    out["ratio"] = out["entropy_split"] / out["hadamard"]
    return out


def _output_dir(cfg: RunConfig, default: str) -> Path:
    env = os.environ.get(OUTPUT_ENV)
    if env:
        return Path(env)
    return Path(cfg.output or default)


def _load(args) -> RunConfig:
    values = parse_config(Path(args.config).read_text()) if args.config else {}
    extra = args.overrides
    i = 0
    while i < len(extra):
        key = extra[i]
        if not key.startswith("--") or i + 1 >= len(extra):
            raise ConfigError(f"override {key!r} must be '--key value'")
        values[key[2:]] = extra[i + 1]
        i += 2
    if getattr(args, "threads", None):
        values["threads"] = args.threads
    return RunConfig.from_dict(values)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="entropy-split", description=__doc__.splitlines()[0])
    parser.add_argument("--threads", type=int, default=None, help="worker threads (results do not depend on it)")
    sub = parser.add_subparsers(dest="command", required=True)
    ps = sub.add_parser("solve", help="run one configuration")
    ps.add_argument("config")
    pc = sub.add_parser("converge", help="grid-convergence study")
    pc.add_argument("config")
    pc.add_argument("--meshes", default="60,80,100,120")
    pb = sub.add_parser("bench", help="time residual evaluations")
    pb.add_argument("config")
    pb.add_argument("--repeats", type=int, default=5)
    pb.add_argument("--steps", type=int, default=50)
    pv = sub.add_parser("verify-ops", help="check SBP operators")
    pv.add_argument("file", nargs="?")
    pv.add_argument("--p", type=int, default=2)
    pv.add_argument("--d", type=int, default=2)
    args, rest = parser.parse_known_args(argv)
    args.overrides = rest
    try:
        if args.command == "verify-ops":
            if rest:
                raise ConfigError(f"unexpected arguments {rest}")
            ops = import_operators(args.file, verify=False) if args.file else build_reference_ops(args.p, args.d)
            rep = verify_operators(ops)
            print(rep)
            return 0 if rep.passed else 1
        cfg = _load(args)
        if args.command == "solve":
            res = run(cfg)
            out = _output_dir(cfg, f"out_{cfg.problem}")
            write_outputs(res, out)
            for k, v in res.final.items():
                print(f"{k:>22s}  {v:.10g}")
            print(f"outputs written to {out}")
        elif args.command == "converge":
            meshes = [int(m) for m in args.meshes.split(",")]
            rows = converge(cfg, meshes)
            out = _output_dir(cfg, f"out_{cfg.problem}_converge")
            out.mkdir(parents=True, exist_ok=True)
            cols = ["cells", "h", "l2_error", "rate", "conservation_mass", "mass_rate", "conservation_energy",
                    "energy_rate"]
            with open(out / "convergence.csv", "w", newline="") as fh:
                wr = csv.writer(fh)
                wr.writerow(["scheme"] + cols)
                for r in rows:
                    wr.writerow([cfg.scheme, r["cells"]] + [_fmt(r[c]) for c in cols[1:]])
                    print(f"{r['cells']:6d}  h={r['h']:.4g}  L2={r['l2_error']:.4e}  rate={r['rate']:.3f}  "
                          f"mass={r['conservation_mass']:.3e}  mass rate={r['mass_rate']:.3f}")
        elif args.command == "bench":
            res = bench(cfg, args.repeats, args.steps)
            out = _output_dir(cfg, f"out_{cfg.problem}_bench")
            out.mkdir(parents=True, exist_ok=True)
            with open(out / "bench.csv", "w", newline="") as fh:
                wr = csv.writer(fh)
                wr.writerow(["repeat", "entropy_split", "hadamard"])
                for i, (a, b) in enumerate(zip(res["times"]["entropy_split"], res["times"]["hadamard"])):
                    wr.writerow([i, _fmt(a), _fmt(b)])
                wr.writerow(["mean", _fmt(res["entropy_split"]), _fmt(res["hadamard"])])
                wr.writerow(["ratio", _fmt(res["ratio"]), _fmt(1.0)])
            for k in ("entropy_split", "hadamard", "ratio"):
                print(f"{k:>14s}  {res[k]:.6g}")
    except AdmissibilityError as exc:
        print(f"admissibility failure: {exc}", file=sys.stderr)
        return 2
    except (ConfigError, MeshError, OperatorFormatError, OSError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
