"""Command-line front end.

Subcommands
-----------
run             every analysis listed under ``[analysis] run``
simulate        propagate the configured initial state (defect.csv, schmidt.csv)
find-pointers   scan the initial-state sphere (candidates.csv) and follow the best ray
check-theorems  evaluate the structural tests (theorems.txt)
bloch           Bloch trajectory and asymptote (bloch.csv, asymptote.txt)
report          summarize files already written to ``--out`` without recomputing

Exit status is 0 on success, 2 for invalid input and 3 for a numerical
failure such as Fock-space leakage.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import math
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import bloch as blochmod
from . import pointer as ptr
from . import theorems as thm
from .config import ConfigError, ScenarioConfig, complex_pairs, load_config, npz_matrices
from .evolution import EvolutionModel, HamiltonianModel, TimeGrid, propagate
from .exceptions import InvalidArgumentError, NumericFailureError, PointerLabError
from .hilbert import KET_A, KET_B, basis_state, schmidt, tensor
from .models import (
    JCMParams,
    SBMParams,
    SpinSpinParams,
    coherent_state,
    fock_state,
    gaussian_couplings,
)

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NUMERIC = 3
THEOREM_POINTS = 50


def fmt(x: float) -> str:
    return "%.17g" % float(x)


def fmt_residual(x: float) -> str:
    """One-decimal mantissa with an unpadded exponent, e.g. ``0.0e0``."""
    mant, exp = ("%.1e" % float(x)).split("e")
    return f"{mant}e{int(exp)}"


@dataclass
class Scenario:
    config: ScenarioConfig
    model: EvolutionModel
    env_initial: np.ndarray
    system_initial: np.ndarray
    grid: TimeGrid
    hamiltonian: tuple | None
    scalar_tol: float
    theorem_tol: float
    seed: int | None


def _threads(raw) -> int:
    if raw is None:
        return 1
    if str(raw) == "auto":
        return os.cpu_count() or 1
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"--threads takes an integer or 'auto', got {raw!r}") from None
    if n < 1:
        raise ConfigError("--threads must be >= 1")
    return n


def _build_model(cfg: ScenarioConfig, seed):
    kind = cfg.model_type
    if kind == "jcm":
        n_trunc = cfg.get("model", "n_trunc")
        p = JCMParams(nbar=cfg.require("model", "nbar"), g=cfg.get("model", "g", 1.0),
                      phi=cfg.get("model", "phi", 0.0), n_trunc=n_trunc,
                      omega=cfg.get("model", "omega", 1.0))
        env = {"kind": "coherent"} | cfg.sections.get("environment", {})
        if env.get("kind") != "coherent" or set(env) - {"kind"}:
            raise ConfigError("the jcm model takes its coherent field from nbar and phi only")
        return p, p.env_initial(), p.hamiltonian_terms()
    if kind == "sbm":
        g = cfg.require("model", "g") * np.exp(1j * cfg.get("model", "g_phase", 0.0))
        p = SBMParams(omega0=cfg.require("model", "omega0"), omega=cfg.require("model", "omega"),
                      g=complex(g), n_trunc=cfg.get("model", "n_trunc", 64))
        return p, _field_state(cfg, p.n_trunc), p.hamiltonian_terms()
    if kind == "spin-spin":
        couplings = cfg.float_list("model", "couplings")
        if not couplings:
            n = cfg.require("model", "spins")
            if seed is None:
                raise ConfigError("random couplings need a seed ([run] seed or --seed)")
            couplings = gaussian_couplings(n, cfg.require("model", "coupling_mean"),
                                           cfg.require("model", "coupling_sigma"), seed)
        amps = cfg.get("environment", "amplitudes")
        amps = None if amps in (None, "equal") else complex_pairs(amps)
        p = SpinSpinParams(delta0=cfg.get("model", "delta0", 0.0), couplings=tuple(couplings),
                           env_amplitudes=amps)
        return p, p.env_initial(), p.hamiltonian_terms()
    # custom-hamiltonian
    if cfg.get("model", "energy_units") != "rad/t":
        raise ConfigError("custom Hamiltonians need [model] energy_units = rad/t")
    H_S, H_E, H_prime = npz_matrices(cfg.require("model", "hamiltonian"), cfg.source)
    n_trunc = cfg.get("model", "n_trunc")
    model = HamiltonianModel(H_S, H_E, H_prime, picture=cfg.get("model", "picture", "interaction"),
                             truncated=n_trunc is not None)
    env = cfg.sections.get("environment", {})
    if env.get("kind", "fock") != "fock":
        raise ConfigError("custom Hamiltonians take a basis-state environment ([environment] kind = fock)")
    return model, basis_state(model.env_dim, env.get("n", 0)), (model.H_S, model.H_E, model.H_prime)


def _field_state(cfg, n_trunc):
    env = cfg.sections.get("environment", {})
    kind = env.get("kind", "fock")
    if kind == "fock":
        return fock_state(env.get("n", 0), n_trunc)
    if kind == "coherent":
        nu = env.get("amplitude", 0.0) * np.exp(1j * env.get("amplitude_phase", 0.0))
        return coherent_state(nu, n_trunc)
    raise ConfigError(f"unknown environment kind {kind!r}")


def _system_state(cfg, model) -> np.ndarray:
    sec = cfg.sections.get("system", {})
    state = sec.get("state")
    if state is not None and ("theta" in sec or "chi" in sec):
        raise ConfigError("give either [system] state or theta/chi, not both")
    if state is None:
        theta, chi = sec.get("theta", 0.0), sec.get("chi", 0.0)
        return np.array(ptr.amplitudes(theta, chi))
    named = {"a": KET_A, "b": KET_B, "x+": (KET_A + KET_B) / math.sqrt(2),
             "x-": (KET_A - KET_B) / math.sqrt(2)}
    if state in named:
        return np.array(named[state])
    if state in ("jcm+", "jcm-"):
        if not isinstance(model, JCMParams):
            raise ConfigError(f"system state {state} needs the jcm model")
        sign = 1.0 if state == "jcm+" else -1.0
        return np.array([np.exp(-1j * model.phi), sign]) / math.sqrt(2)
    raise ConfigError(f"unknown system state {state!r}")


def _grid(cfg, model) -> TimeGrid:
    t_max, unit = cfg.require("grid", "t_max")
    points = cfg.require("grid", "points")
    if unit == "t_R":
        t_abs = t_max * model.revival_time
    elif unit == "1/g":
        g = abs(complex(getattr(model, "g", 0.0)))
        if not g > 0:
            raise ConfigError("1/g time units need a model with a coupling g")
        t_abs = t_max / g
    else:
        t_abs = t_max
    return TimeGrid.linspace(t_abs, points, units="t")


def build_scenario(cfg: ScenarioConfig, seed=None, tol=None) -> Scenario:
    seed = cfg.get("run", "seed") if seed is None else seed
    model, env, ham = _build_model(cfg, seed)
    grid = _grid(cfg, model)
    tols = cfg.sections.get("tolerances", {})
    if tol is not None and tol <= 0:
        raise ConfigError("--tol must be positive")
    scalar_tol = tol if tol is not None else tols.get("scalar", ptr.default_scalar_tol(model))
    theorem_tol = tol if tol is not None else tols.get("theorem", thm.DEFAULT_TOL)
    return Scenario(cfg, model, env, _system_state(cfg, model), grid, ham, scalar_tol,
                    theorem_tol, seed)


# ------------------------------------------------------------------ writers


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(x) if isinstance(x, (float, int, np.floating, np.integer)) else x for x in r])


def _complex_cols(prefix, n):
    return [c for i in range(n) for c in (f"{prefix}{i}_re", f"{prefix}{i}_im")]


def _complex_vals(v):
    return [x for z in v for x in (float(np.real(z)), float(np.imag(z)))]


class Runner:
    def __init__(self, sc: Scenario, out: Path, resolution=None, threads=1):
        self.sc = sc
        self.out = out
        self.resolution = resolution
        self.threads = threads
        self._evolutions = None
        self._scan = None
        self._reports = None
        out.mkdir(parents=True, exist_ok=True)

    @property
    def evolutions(self):
        if self._evolutions is None:
            self._evolutions = self.sc.model.evolutions(self.sc.grid.points)
        return self._evolutions

    def states(self, system=None):
        sys_state = self.sc.system_initial if system is None else system
        return propagate(tensor(sys_state, self.sc.env_initial), self.sc.model, self.sc.grid,
                         self.evolutions)

    def propagate(self):
        defect, entropy = ptr.defect_profile(self.sc.model, self.sc.env_initial, self.sc.grid,
                                             *self.sc.system_initial, evolutions=self.evolutions)
        _write_csv(self.out / "defect.csv", ["t", "defect", "entropy"],
                   zip(self.sc.grid.points, defect, entropy))
        return defect, entropy

    def schmidt(self):
        rows = []
        for t, s in zip(self.sc.grid.points, self.states()):
            c = schmidt(s).coefficients
            rows.append((t, c[0], c[1] if c.size > 1 else 0.0))
        _write_csv(self.out / "schmidt.csv", ["t", "lambda1", "lambda2"], rows)

    def scan(self):
        res = self.resolution or self.sc.config.get("scan", "resolution", 32)
        seeds = self.sc.config.get("scan", "seeds", 6)
        self._scan = ptr.scan_pointer_candidates(self.sc.model, self.sc.env_initial, self.sc.grid,
                                                 res, n_seeds=seeds, threads=self.threads,
                                                 evolutions=self.evolutions)
        header = ["theta", "chi", "alpha_re", "alpha_im", "beta_re", "beta_im", "defect_max",
                  "entropy_max"]
        _write_csv(self.out / "candidates.csv", header,
                   ([c.theta, c.chi, c.alpha.real, c.alpha.imag, c.beta.real, c.beta.imag,
                     c.defect_max, c.entropy_max] for c in self._scan))
        return self._scan

    def trajectory(self):
        if self._scan is None:
            self.scan()
        best = self._scan[0]
        tr = ptr.pointer_trajectory(best, self.sc.model, self.sc.env_initial, self.sc.grid,
                                    self.sc.scalar_tol, self.evolutions)
        _write_csv(self.out / "trajectory_system.csv",
                   ["t", "a_re", "a_im", "b_re", "b_im", "defect", "product_fidelity"],
                   ([t, *_complex_vals(s), d, f] for t, s, d, f in
                    zip(tr.times, tr.system_states, tr.defects, tr.reconstruction_fidelity)))
        dim = tr.env_states[0].size
        _write_csv(self.out / "trajectory_env.csv", ["t", *_complex_cols("c", dim)],
                   ([t, *_complex_vals(e)] for t, e in zip(tr.times, tr.env_states)))
        return tr

    def bloch(self):
        traj = blochmod.trajectory(self.states(), self.sc.grid)
        _write_csv(self.out / "bloch.csv", ["t", "Rx", "Ry", "Rz"],
                   ([t, *R] for t, R in zip(traj.times, traj.R)))
        return traj

    def asymptote(self):
        traj = self.bloch()
        tols = self.sc.config.sections.get("tolerances", {})
        rep = blochmod.detect_asymptote(traj, tols.get("window_fraction", blochmod.WINDOW_FRACTION),
                                        tols.get("settle", blochmod.SETTLE_TOL),
                                        tols.get("polarization_floor", blochmod.POLARIZATION_FLOOR))
        lines = ["[asymptote]",
                 f"settled = {str(rep.settled).lower()}",
                 f"window = {fmt(rep.window[0])},{fmt(rep.window[1])}",
                 "R_inf = " + ",".join(fmt(x) for x in rep.R_inf),
                 f"drift = {fmt(rep.drift)}",
                 f"window_fraction = {fmt(rep.window_fraction)}",
                 f"settle_tol = {fmt(rep.settle_tol)}",
                 f"polarization_floor = {fmt(rep.polarization_floor)}"]
        if rep.preferred_basis is None:
            lines.append("basis = none")
        else:
            for i, v in enumerate(rep.preferred_basis):
                lines.append(f"basis.{i} = " + ",".join(fmt(x) for x in _complex_vals(v)))
        (self.out / "asymptote.txt").write_text("\n".join(lines) + "\n")
        return rep

    def theorems(self, echo=False):
        H_S, H_E, H_prime = self.sc.hamiltonian
        tol = self.sc.theorem_tol
        times = self.sc.grid.points
        decomps = self.evolutions
        if len(times) > THEOREM_POINTS:
            # the tested relations are identities in t; a uniform subsample suffices
            pick = np.unique(np.linspace(0, len(times) - 1, THEOREM_POINTS).round().astype(int))
            times = times[pick]
            decomps = [decomps[i] for i in pick]
        if getattr(self.sc.model, "picture", "interaction") == "schrodinger":
            # the structural tests refer to the interaction-picture propagator
            decomps = HamiltonianModel(H_S, H_E, H_prime, picture="interaction").evolutions(times)
        blocks = thm.interaction_blocks_series(H_S, H_E, H_prime, times)
        reports = thm.run_all(decomps, H_S, H_prime, blocks, tol)
        self._reports = reports
        parts = []
        for r in reports:
            parts.append(_report_stanza(r))
            if echo:
                print(f"Theorem {r.theorem_id}: {'HOLDS' if r.holds else 'FAILS'} "
                      f"(residual {fmt_residual(r.max_residual)})")
        if self._scan is not None:
            angle_tol = self.sc.config.get("tolerances", "angle_deg", 2.0)
            for r in reports:
                cv = thm.cross_validate(r, self._scan, angle_tol)
                parts.append("\n".join([
                    f"[cross-validation {r.theorem_id}]",
                    f"verdict = {cv.verdict}",
                    "angle_errors_deg = " + ",".join(fmt(x) for x in cv.angle_errors),
                    f"angle_tol_deg = {fmt(cv.angle_tol)}"]))
        (self.out / "theorems.txt").write_text("\n\n".join(parts) + "\n")
        return reports


def _report_stanza(r: thm.TheoremReport) -> str:
    lines = [f"[theorem {r.theorem_id}]",
             f"holds = {str(r.holds).lower()}",
             f"tolerance = {fmt(r.tolerance)}"]
    for k, v in r.residuals.items():
        lines.append(f"residual {k} = {fmt(v)}")
    lines.append("phi = " + ("none" if r.fitted_phase is None else fmt(r.fitted_phase)))
    if r.predicted_basis is None:
        lines.append("basis = none")
    else:
        for i, v in enumerate(r.predicted_basis):
            lines.append(f"basis.{i} = " + ",".join(fmt(x) for x in _complex_vals(v)))
    lines.append(f"schrodinger_caveat = {str(r.schrodinger_caveat).lower()}")
    if r.notes:
        lines.append(f"notes = {r.notes}")
    return "\n".join(lines)


def _write_manifest(runner: Runner, command: str, analyses):
    sc = runner.sc
    lines = ["[run]", f"command = {command}", f"config = {Path(sc.config.source).name}",
             f"model = {sc.config.model_type}", "analyses = " + ",".join(analyses),
             f"seed = {'none' if sc.seed is None else sc.seed}",
             f"grid_points = {len(sc.grid)}", f"theorem_points = {min(len(sc.grid), THEOREM_POINTS)}",
             f"t_max = {fmt(sc.grid.points[-1])}",
             f"scan_resolution = {runner.resolution or sc.config.get('scan', 'resolution', 32)}",
             f"scalar_tol = {fmt(sc.scalar_tol)}", f"theorem_tol = {fmt(sc.theorem_tol)}"]
    (runner.out / "manifest.txt").write_text("\n".join(lines) + "\n")


_SUBCOMMAND_ANALYSES = {
    "simulate": ["propagate", "schmidt"],
    "find-pointers": ["scan", "trajectory"],
    "check-theorems": ["theorems"],
    "bloch": ["asymptote"],
}


def execute(command: str, args) -> int:
    cfg = load_config(args.config)
    sc = build_scenario(cfg, seed=args.seed, tol=args.tol)
    if args.resolution is not None and args.resolution < 8:
        raise ConfigError("--resolution must be >= 8")
    runner = Runner(sc, Path(args.out), args.resolution, _threads(args.threads))
    if command == "run":
        analyses = cfg.analyses
        if not analyses:
            raise ConfigError("[analysis] run lists no analyses")
    else:
        analyses = _SUBCOMMAND_ANALYSES[command]
    order = [a for a in ("propagate", "schmidt", "scan", "trajectory", "bloch", "asymptote",
                         "theorems") if a in analyses]
    if "asymptote" in order and "bloch" in order:
        order.remove("bloch")
    for a in order:
        if a == "theorems":
            runner.theorems(echo=True)
        else:
            getattr(runner, a)()
    _write_manifest(runner, command, order)
    return EXIT_OK


def report(out: Path) -> int:
    """Print a summary of previously written outputs."""
    if not out.is_dir():
        raise InvalidArgumentError(f"output directory {out} does not exist")
    found = False
    manifest = out / "manifest.txt"
    if manifest.is_file():
        found = True
        cp = configparser.ConfigParser(interpolation=None)
        cp.read(manifest)
        r = cp["run"]
        print(f"model {r.get('model')} from {r.get('config')}: {r.get('analyses')} "
              f"(scalar tol {r.get('scalar_tol')}, theorem tol {r.get('theorem_tol')})")
    cand = out / "candidates.csv"
    if cand.is_file():
        found = True
        with open(cand) as fh:
            rows = list(csv.DictReader(fh))
        print(f"{len(rows)} pointer candidates; best:")
        for row in rows[:2]:
            print(f"  theta={math.degrees(float(row['theta'])):.3f} deg "
                  f"chi={math.degrees(float(row['chi'])):.3f} deg "
                  f"defect_max={float(row['defect_max']):.3e} "
                  f"entropy_max={float(row['entropy_max']):.3e}")
    defect = out / "defect.csv"
    if defect.is_file():
        found = True
        data = np.loadtxt(defect, delimiter=",", skiprows=1, ndmin=2)
        print(f"propagation: max defect {data[:, 1].max():.3e}, max entropy {data[:, 2].max():.3e} nats")
    th = out / "theorems.txt"
    if th.is_file():
        found = True
        cp = configparser.ConfigParser(interpolation=None)
        cp.read(th)
        for name in cp.sections():
            sec = cp[name]
            if name.startswith("theorem "):
                res = [float(v) for k, v in sec.items() if k.startswith("residual ")]
                status = "HOLDS" if sec.get("holds") == "true" else "FAILS"
                print(f"Theorem {name.split()[1]}: {status} (residual {fmt_residual(max(res, default=0.0))})")
            else:
                print(f"{name}: {sec.get('verdict')}")
    asym = out / "asymptote.txt"
    if asym.is_file():
        found = True
        cp = configparser.ConfigParser(interpolation=None)
        cp.read(asym)
        a = cp["asymptote"]
        print(f"asymptote: settled={a.get('settled')} drift={float(a.get('drift')):.3e} "
              f"R_inf=({a.get('R_inf')})")
    if not found:
        raise InvalidArgumentError(f"no outputs found in {out}")
    return EXIT_OK


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="scenario file (bundled names allowed)")
    common.add_argument("--out", default="pointerlab_out", help="output directory")
    common.add_argument("--seed", type=int, help="seed for random couplings")
    common.add_argument("--resolution", type=int, help="scan grid size (default 32)")
    common.add_argument("--tol", type=float, help="parallelism and theorem tolerance")
    common.add_argument("--threads", default=None, help="scan worker threads, integer or 'auto'")
    p = argparse.ArgumentParser(prog="pointerlab", description="pointer-state laboratory")
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("run", "simulate", "find-pointers", "check-theorems", "bloch"):
        sub.add_parser(name, parents=[common])
    rep = sub.add_parser("report")
    rep.add_argument("--out", default="pointerlab_out")
    return p


def main(argv=None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code else EXIT_OK
    try:
        if args.command == "report":
            return report(Path(args.out))
        return execute(args.command, args)
    except NumericFailureError as exc:
        where = "" if exc.time is None else f" (t={exc.time:g})"
        print(f"numeric failure{where}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (InvalidArgumentError, PointerLabError, ValueError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
