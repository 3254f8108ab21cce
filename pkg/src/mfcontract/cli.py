"""``mfcl`` experiment runner.

    mfcl <solve|simulate|nplayer|sensitivity|hjb> --config <path> [--seed N] [--out DIR] [--perturb X]

Exit codes: 0 success, 2 validation, 3 convergence, 4 verification failure.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import platform
import sys
from dataclasses import dataclass, field
from importlib import metadata
from pathlib import Path

import numpy as np

from . import closed_form as cf
from . import hjb_check, io, mfg_sim, nplayer, sensitivity
from .model import (MeanFieldModel, RiskAversePenalties, TimeGrid, UnsupportedModelError, ValidationError,
                    read_document, validate, validate_penalties)

EXIT_OK, EXIT_VALIDATION, EXIT_CONVERGENCE, EXIT_VERIFICATION = 0, 2, 3, 4

SIM_KEYS = {"particles", "steps", "seed", "meanfield_mode", "workers", "perturbations", "tol", "max_iter"}
NPLAYER_KEYS = {"Ns", "games", "seed", "steps"}
TOP_KEYS = {"model", "penalties", "sim", "nplayer", "output_dir"}


@dataclass(frozen=True)
class ExperimentConfig:
    model: MeanFieldModel
    penalties: RiskAversePenalties = field(default_factory=RiskAversePenalties)
    sim: dict = field(default_factory=dict)
    nplayer: dict = field(default_factory=dict)
    output_dir: Path = Path("out")

    @property
    def grid(self) -> TimeGrid:
        return TimeGrid(self.model.T, int(self.sim.get("steps", 200)))

    def sim_config(self, meanfield_mode: str | None = None) -> mfg_sim.SimConfig:
        return mfg_sim.SimConfig(int(self.sim.get("particles", 100_000)), self.grid,
                                 int(self.sim.get("seed", 42)),
                                 meanfield_mode or self.sim.get("meanfield_mode", "analytic"),
                                 int(self.sim.get("workers", 1)))


def _block(raw, name, keys):
    block = raw.get(name, {})
    if not isinstance(block, dict):
        raise ValidationError(f"[{name}] must be a table")
    unknown = set(block) - keys
    if unknown:
        raise ValidationError(f"unknown [{name}] keys: {sorted(unknown)}")
    return dict(block)


def load_experiment(path, seed: int | None = None, out: str | None = None) -> ExperimentConfig:
    raw = read_document(path)
    unknown = set(raw) - TOP_KEYS
    if unknown:
        raise ValidationError(f"unknown config keys: {sorted(unknown)}")
    if "model" not in raw:
        raise ValidationError("config needs a [model] table")
    model = validate(raw["model"])
    penalties = validate_penalties(raw.get("penalties", {}))
    sim = _block(raw, "sim", SIM_KEYS)
    npl = _block(raw, "nplayer", NPLAYER_KEYS)
    if seed is not None:
        sim["seed"] = seed
        npl["seed"] = seed
    cfg = ExperimentConfig(model, penalties, sim, npl, Path(out if out is not None else raw.get("output_dir", "out")))
    cfg.sim_config()  # validates the simulation block
    return cfg


def _policy_and_contract(cfg: ExperimentConfig, grid: TimeGrid):
    if cfg.penalties.is_zero:
        return cf.optimal_policy(cfg.model, grid), cf.contract_spec(cfg.model, grid)
    return cf.risk_averse_solution(cfg.model, cfg.penalties, grid)


def cmd_solve(cfg: ExperimentConfig) -> int:
    m, out = cfg.model, cfg.output_dir
    grid = TimeGrid(m.T)
    policy, contract = _policy_and_contract(cfg, grid)
    moments = cf.moment_curves(m, policy, grid, method="auto" if policy.kind == "optimal" else "rk4")
    t = grid.points
    io.write_columns(out / "policy.csv", ("t", "z_star", "a_star"), t, policy.z_star.values, policy.a_star.values)
    io.write_columns(out / "moments.csv", ("t", "f", "g", "variance"), t, moments.f.values, moments.g.values,
                     moments.variance_values)
    io.write_json(out / "contract.json", contract.to_dict())
    value = {"t": 0.0, "m1": m.m0, "m2": m.R0, "var1": m.v0}
    if cfg.penalties.is_zero:
        value.update(criterion="risk_neutral", value=float(cf.principal_value(0.0, m.m0, m.R0, m.v0, m)))
    else:
        value.update(criterion="mean_variance",
                     value=cf.risk_averse_objective(m, cfg.penalties, policy, contract, grid))
    io.write_json(out / "value.json", value)
    return EXIT_OK


def _perturbation_curves(policy, count: int, seed: int):
    """Constant shifts of +-0.2, zero effort, and random bounded sinusoidal perturbations."""
    curves = {"a_star": policy.a_star,
              "plus_0.2": lambda s: policy.a_star(s) + 0.2,
              "minus_0.2": lambda s: np.maximum(policy.a_star(s) - 0.2, 0.0),
              "zero": lambda s: 0.0 * np.asarray(s)}
    gen = np.random.default_rng(seed)
    T = policy.a_star.grid.T
    for i in range(count):
        amp, freq, phase = gen.uniform(-0.5, 0.5), gen.uniform(0, 3), gen.uniform(0, 2 * np.pi)
        curves[f"random_{i}"] = (lambda s, amp=amp, freq=freq, phase=phase:
                                 np.maximum(policy.a_star(s) + amp * np.sin(2 * np.pi * freq * np.asarray(s) / max(T, 1e-300) + phase), 0.0))
    return curves


def cmd_simulate(cfg: ExperimentConfig) -> int:
    m, out = cfg.model, cfg.output_dir
    sim = cfg.sim_config()
    grid = sim.grid
    policy, contract = _policy_and_contract(cfg, grid)
    method = "auto" if policy.kind == "optimal" else "rk4"
    moments = cf.moment_curves(m, policy, grid, method=method)
    estimates = {"seed": sim.seed, "particles": sim.particles, "steps": grid.steps,
                 "meanfield_mode": sim.meanfield_mode}
    if sim.meanfield_mode == "particle":
        fp = mfg_sim.fixed_point_meanfield(m, policy, sim, tol=float(cfg.sim.get("tol", 1e-3)),
                                           max_iter=int(cfg.sim.get("max_iter", 50)))
        estimates["fixed_point_max_mean_gap"] = float(np.max(np.abs(fp.f.values - moments.f.values)))
        moments = fp
    ens = mfg_sim.simulate_equilibrium(m, policy, moments, sim)
    ens, xi = mfg_sim.simulate_continuation_utility(ens, m, policy, moments)
    utilities = {}
    for name, curve in _perturbation_curves(policy, int(cfg.sim.get("perturbations", 20)), sim.seed).items():
        utilities[name] = mfg_sim.agent_utility(m, curve, moments, contract, sim, policy).to_dict()
    estimates["agent_utility"] = utilities
    penalties = None if cfg.penalties.is_zero else cfg.penalties
    estimates["principal_objective"] = mfg_sim.principal_objective(ens, xi, m, penalties).to_dict()
    if penalties is None:
        estimates["principal_value"] = float(cf.principal_value(0.0, m.m0, m.R0, m.v0, m))
    else:
        estimates["principal_value"] = cf.risk_averse_objective(m, cfg.penalties, policy, contract, grid)
    estimates["contract_law"] = contract.to_dict()
    io.write_json(out / "estimates.json", estimates)
    io.write_json(out / "gaussian_check.json", mfg_sim.gaussian_check(xi, contract.law))
    return EXIT_OK


def cmd_nplayer(cfg: ExperimentConfig) -> int:
    m, out = cfg.model, cfg.output_dir
    Ns = [int(n) for n in cfg.nplayer.get("Ns", [4, 16, 64, 256])]
    games = int(cfg.nplayer.get("games", 10_000))
    seed = int(cfg.nplayer.get("seed", 42))
    steps = int(cfg.nplayer.get("steps", 200))
    header = ("N", "samples", "w1", "w1_noise_floor")
    summary = {"effort_match": nplayer.effort_match(m), "Ns": Ns, "games": games, "seed": seed}
    for quantity, name in (("contract", "convergence.csv"), ("state", "convergence_state.csv")):
        rows = nplayer.convergence_experiment(m, Ns, games, seed, steps, quantity)
        io.write_csv(out / name, header, ([r.N, r.samples, r.w1, r.w1_noise_floor] for r in rows))
        summary[quantity] = {"rows": [r.to_dict() for r in rows], "trend": nplayer.trend_verdict(rows)}
    summary["verdict"] = "pass" if summary["contract"]["trend"]["passed"] else "fail"
    io.write_json(out / "nplayer.json", summary)
    return EXIT_OK


def cmd_sensitivity(cfg: ExperimentConfig) -> int:
    cells = sensitivity.sensitivity_table(cfg.model) + sensitivity.penalty_table(cfg.model)
    header = ("quantity", "parameter", "baseline", "derivative", "sign", "expected", "match", "required")
    io.write_csv(cfg.output_dir / "sensitivity.csv", header,
                 ([c.quantity, c.parameter, c.baseline, c.derivative, c.sign, c.expected, c.match, c.required]
                  for c in cells))
    io.write_json(cfg.output_dir / "sensitivity.json", sensitivity.summary(cells))
    return EXIT_OK


def cmd_hjb(cfg: ExperimentConfig, perturb: float = 0.0) -> int:
    m = cfg.model
    functional = hjb_check.value_functional(m, perturb)
    rf = hjb_check.hjb_residual(m, functional=functional)
    io.write_csv(cfg.output_dir / "residuals.csv", rf.header, rf.rows.tolist())
    sim = cfg.sim_config()
    report = hjb_check.verification_report(m, perturb, sim.particles, sim.grid.steps, sim.seed, residual_field=rf)
    io.write_json(cfg.output_dir / "verification_report.json", report)
    return EXIT_OK if report["passed"] else EXIT_VERIFICATION


COMMANDS = {"solve": cmd_solve, "simulate": cmd_simulate, "nplayer": cmd_nplayer,
            "sensitivity": cmd_sensitivity, "hjb": cmd_hjb}


def _run_meta(cfg: ExperimentConfig, argv) -> dict:
    try:
        version = metadata.version("artifact")
    except metadata.PackageNotFoundError:  # pragma: no cover
        version = "unknown"
    return {"argv": list(argv), "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(),
            "host": platform.node(), "python": platform.python_version(), "numpy": np.__version__,
            "package_version": version}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mfcl", description="Mean-field contracting experiments.")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", required=True, help="TOML or JSON experiment config")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None, help="output directory (overrides output_dir)")
    p.add_argument("--perturb", type=float, default=0.0, help="add perturb*t to the value (hjb only)")
    return p


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    args = build_parser().parse_args(argv)
    try:
        cfg = load_experiment(args.config, args.seed, args.out)
        cfg.output_dir.mkdir(parents=True, exist_ok=True)
        if args.command == "hjb":
            code = cmd_hjb(cfg, args.perturb)
        else:
            code = COMMANDS[args.command](cfg)
        io.write_json(cfg.output_dir / "run_meta.json", _run_meta(cfg, argv))
        return code
    except (ValidationError, UnsupportedModelError, FileNotFoundError, OSError, ValueError) as exc:
        print(f"mfcl: error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except mfg_sim.ConvergenceError as exc:
        print(f"mfcl: convergence failure: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
