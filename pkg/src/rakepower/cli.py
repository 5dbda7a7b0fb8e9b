"""Command-line experiment driver.

Each subcommand evaluates one study end to end and writes a CSV: the
target-SINR curve, the power-decay profile, the interference coefficient
surfaces, outage probability against the frame count, per-user utilities
against channel gain for one shared draw, the partial-combining penalty
against the combining fraction, and the full numerical audit. Outputs
start with a single '#' comment line recording the configuration, the
seed, and the package version; everything after that line is
deterministic for a fixed seed.

Exit codes: 0 on success, 1 on usage or configuration errors, 2 when
the validation audit finds a failing row.
"""

from __future__ import annotations

import csv
import dataclasses
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import click
import numpy as np

from . import __version__
from .channel import (ApdpProfile, sample_channel_bank, sample_topology,
                      substream)
from .gains import LinkGains, RakeSelector, SpreadingConfig, link_gains
from .game import UtilityParams, gamma_star, solve_equilibrium
from .lsa import LsaParams, loss_db, min_frames, mu, nu, predict_utility
from .oracle import oracle_audit

_D_MIN, _D_MAX = 3.0, 20.0
_RHO_DB_GRID = (0.0, 10.0, 20.0)
_LOAD_GRID = (0.25, 1.0, 4.0)
_BETA_BANKS = (1.0, 0.5, 0.3, 0.1)
_LOSS_RHO_DB = (0.0, 10.0)
_LOSS_CHIPS = (50, 200)


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment's knobs; defaults follow the reference system."""

    users: int = 8
    paths: int = 200
    chips: int = 50
    frames: int = 20
    rho_db: float = 10.0
    betas: tuple[float, ...] = ()
    trials: int = 1000
    seed: int = 12345
    out: str | None = None
    sigma_sq: float = 5e-16
    utility: UtilityParams = UtilityParams()

    def __post_init__(self):
        if self.users < 1:
            raise ValueError("users must be >= 1")
        if self.paths < 2:
            raise ValueError("paths must be >= 2")
        if self.chips < 1:
            raise ValueError("chips must be >= 1")
        if self.frames < 1:
            raise ValueError("frames must be >= 1")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.rho_db < 0:
            raise ValueError("rho_db must be >= 0 (non-increasing profile)")
        for b in self.betas:
            if not 0 < b <= 1:
                raise ValueError("beta values must lie in (0, 1]")

    @property
    def rho(self) -> float:
        return 10.0 ** (self.rho_db / 10.0)

    @property
    def load(self) -> float:
        return self.chips / self.paths

    def spreading(self, frames: int | None = None) -> SpreadingConfig:
        return SpreadingConfig(frames=self.frames if frames is None else frames,
                               chips_per_frame=self.chips)

    def lsa_params(self, beta: float, rho: float | None = None,
                   chips: int | None = None) -> LsaParams:
        chips = self.chips if chips is None else chips
        return LsaParams(rho=self.rho if rho is None else rho, beta=beta,
                         load=chips / self.paths, gain=self.frames * chips,
                         users=self.users, sigma_sq=self.sigma_sq,
                         utility=self.utility, chips_per_frame=chips)


_INT_KEYS = ("users", "paths", "chips", "frames", "trials", "seed")
_FLOAT_KEYS = ("rho_db", "sigma_sq")


def load_config_file(path: str) -> dict:
    """Parse a flat key=value config file into constructor arguments."""
    data: dict = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ValueError(f"cannot read config file {path}: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, _, val = line.partition("=")
        key = key.strip().lower().replace("-", "_")
        val = val.strip()
        try:
            if key in _INT_KEYS:
                data[key] = int(val)
            elif key in _FLOAT_KEYS:
                data[key] = float(val)
            elif key in ("beta", "betas"):
                data["betas"] = tuple(float(x) for x in val.replace(",", " ").split())
            elif key == "out":
                data["out"] = val
            else:
                raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
        except ValueError as exc:
            if "unknown config key" in str(exc):
                raise
            raise ValueError(f"{path}:{lineno}: bad value for {key}: {val!r}") from exc
    return data


def build_config(config_file: str | None = None, **flags) -> tuple[ExperimentConfig, frozenset]:
    """Merge config-file values and CLI flags; flags win.

    Returns the config plus the set of explicitly provided field names,
    so commands can distinguish defaults from deliberate choices.
    """
    data = load_config_file(config_file) if config_file else {}
    for key, value in flags.items():
        if key == "betas":
            if value:
                data["betas"] = tuple(value)
        elif value is not None:
            data[key] = value
    explicit = frozenset(data)
    try:
        return ExperimentConfig(**data), explicit
    except TypeError as exc:
        raise ValueError(f"bad configuration: {exc}") from exc


# ---------------------------------------------------------------------------
# runners

def _default_beta_grid() -> np.ndarray:
    return np.round(np.arange(0.02, 1.0 + 1e-9, 0.02), 6)


def run_gamma_curve(config: ExperimentConfig):
    """Target SINR against the self-interference headroom ratio."""
    fields = ["varsigma", "target_sinr"]
    rows = []
    for vs in np.logspace(0.0, 12.0, 121):
        rows.append({"varsigma": vs,
                     "target_sinr": gamma_star(vs, config.utility.packet_bits)})
    return fields, rows


def run_apdp(config: ExperimentConfig):
    """Average power-decay profile for a unit-energy user."""
    var = ApdpProfile(config.paths, config.rho).tap_variances(1.0)
    fields = ["tap", "variance", "variance_db"]
    rows = [{"tap": l + 1, "variance": var[l],
             "variance_db": 10.0 * math.log10(var[l])}
            for l in range(config.paths)]
    return fields, rows


def run_mu_nu_curves(config: ExperimentConfig):
    """Interference coefficient surfaces over decay, fraction, and load."""
    betas = config.betas or tuple(_default_beta_grid())
    fields = ["rho_db", "load", "beta", "mu", "nu"]
    rows = []
    for rho_db in _RHO_DB_GRID:
        rho = 10.0 ** (rho_db / 10.0)
        for load in _LOAD_GRID:
            for beta in betas:
                rows.append({"rho_db": rho_db, "load": load, "beta": beta,
                             "mu": mu(rho, beta), "nu": nu(rho, beta, load)})
    return fields, rows


def run_po_vs_frames(config: ExperimentConfig):
    """Outage probability against the frame count, per decay ratio.

    A trial is in outage when the equilibrium solve pins any user at the
    power cap (or fails to settle). Channels and distances are redrawn
    every trial from substreams independent of the frame count, so the
    per-trial outage indicator is non-increasing in the frame count.
    """
    beta = config.betas[0] if config.betas else 0.1
    frames_max = max(25, config.frames)
    selector = RakeSelector(beta)
    spreading_unit = SpreadingConfig(frames=1, chips_per_frame=config.chips)
    fields = ["rho_db", "frames", "outage_fraction", "min_frames"]
    rows = []
    for rho_db in _RHO_DB_GRID:
        rho = 10.0 ** (rho_db / 10.0)
        profile = ApdpProfile(config.paths, rho)
        analytic = min_frames(config.lsa_params(beta, rho=rho))
        outages = np.zeros(frames_max, dtype=np.int64)
        for t in range(config.trials):
            topo = sample_topology(config.users, _D_MIN, _D_MAX,
                                   substream(config.seed, t))
            bank = sample_channel_bank(profile, topo, config.seed, t)
            base = link_gains(bank, selector, spreading_unit, config.sigma_sq)
            for nf in range(1, frames_max + 1):
                gains = LinkGains(base.h_sp, base.h_si / nf, base.h_mai / nf,
                                  config.sigma_sq)
                outcome = solve_equilibrium(gains, config.utility)
                if outcome.any_clamped or not outcome.converged:
                    outages[nf - 1] += 1
        for nf in range(1, frames_max + 1):
            rows.append({"rho_db": rho_db, "frames": nf,
                         "outage_fraction": outages[nf - 1] / config.trials,
                         "min_frames": analytic})
    return fields, rows


def run_utility_vs_gain(config: ExperimentConfig):
    """Equilibrium utilities against channel gain for one shared draw.

    All combining fractions see the same distances and path gains (drawn
    from the trial-0 substreams of the configured seed), so the spread
    across fractions reflects combining alone. The nmse column reports,
    per fraction, the mean squared relative error of the full-combining
    prediction scaled down by the combining penalty against simulated
    utilities over fresh trials (trial indices 1 onward).
    """
    betas = config.betas or _BETA_BANKS
    profile = ApdpProfile(config.paths, config.rho)
    spreading = config.spreading()
    params_full = config.lsa_params(1.0)

    def bank_utilities(bank, beta):
        gains = link_gains(bank, RakeSelector(beta), spreading, config.sigma_sq)
        return gains, solve_equilibrium(gains, config.utility)

    topo0 = sample_topology(config.users, _D_MIN, _D_MAX,
                            substream(config.seed, 0))
    bank0 = sample_channel_bank(profile, topo0, config.seed, 0)

    fields = ["beta", "user", "channel_gain", "power_w", "utility_sim",
              "utility_pred", "nmse"]
    rows = []
    for beta in betas:
        params_b = config.lsa_params(beta)
        penalty = 10.0 ** (loss_db(params_b) / 10.0)
        sq_errs = []
        for t in range(1, config.trials + 1):
            topo = sample_topology(config.users, _D_MIN, _D_MAX,
                                   substream(config.seed, t))
            bank = sample_channel_bank(profile, topo, config.seed, t)
            _, outcome = bank_utilities(bank, beta)
            h_total = np.array([ch.channel_gain for ch in bank])
            pred = predict_utility(params_full, h_total) / penalty
            sq_errs.append(((pred - outcome.utilities) / outcome.utilities) ** 2)
        nmse = float(np.mean(sq_errs))

        gains0, outcome0 = bank_utilities(bank0, beta)
        pred0 = predict_utility(params_b, gains0.h_sp)
        for k in range(config.users):
            rows.append({"beta": beta, "user": k,
                         "channel_gain": bank0[k].channel_gain,
                         "power_w": outcome0.powers[k],
                         "utility_sim": outcome0.utilities[k],
                         "utility_pred": pred0[k], "nmse": nmse})
    return fields, rows


def run_loss_vs_beta(config: ExperimentConfig):
    """Combining penalty against the combining fraction.

    Sweeps the fraction for each decay-ratio / chip-count pair; operating
    points whose interference budget closes (no feasible target) yield
    nan rather than a row omission, keeping the grid rectangular.
    """
    betas = config.betas or tuple(_default_beta_grid())
    fields = ["rho_db", "chips", "beta", "loss_db"]
    rows = []
    for rho_db in _LOSS_RHO_DB:
        rho = 10.0 ** (rho_db / 10.0)
        for chips in _LOSS_CHIPS:
            for beta in betas:
                try:
                    value = loss_db(config.lsa_params(beta, rho=rho, chips=chips))
                except ValueError:
                    value = math.nan
                rows.append({"rho_db": rho_db, "chips": chips, "beta": beta,
                             "loss_db": value})
    return fields, rows


def run_validate(config: ExperimentConfig, explicit: frozenset = frozenset()):
    """Full numerical audit; returns the rows plus an overall verdict."""
    paths = config.paths if "paths" in explicit else 4000
    chips = config.chips if "chips" in explicit else round(0.25 * paths)
    beta = config.betas[0] if config.betas else 0.1
    trials = config.trials if "trials" in explicit else 500
    audit = oracle_audit(paths, config.rho, beta, chips / paths,
                         users=config.users, frames=config.frames,
                         sigma_sq=config.sigma_sq, mc_trials=trials,
                         master_seed=config.seed)
    fields = ["name", "kind", "value", "reference", "rel_err", "tol",
              "passed", "note"]
    rows = [dataclasses.asdict(r) for r in audit]
    return fields, rows, all(r.passed for r in audit)


# ---------------------------------------------------------------------------
# CSV emission

def _fmt(value) -> str:
    if isinstance(value, bool):
        return str(value)
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _comment_line(config: ExperimentConfig) -> str:
    parts = [f"users={config.users}", f"paths={config.paths}",
             f"chips={config.chips}", f"frames={config.frames}",
             f"rho_db={_fmt(config.rho_db)}",
             "betas=" + (",".join(_fmt(b) for b in config.betas) or "default"),
             f"trials={config.trials}", f"seed={config.seed}",
             f"version={__version__}"]
    return "# " + " ".join(parts)


def write_csv(path: str, config: ExperimentConfig, fields: Sequence[str],
              rows: Sequence[dict]) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(_comment_line(config) + "\n")
        writer = csv.writer(fh)
        writer.writerow(fields)
        for row in rows:
            writer.writerow([_fmt(row[f]) for f in fields])


def _emit(config: ExperimentConfig, default_name: str, fields, rows) -> str:
    path = config.out or f"{default_name}.csv"
    write_csv(path, config, fields, rows)
    return path


# ---------------------------------------------------------------------------
# click wiring

def _common_options(f):
    options = [
        click.option("--users", type=int, default=None, help="number of uplink users"),
        click.option("--paths", type=int, default=None, help="resolvable paths per channel"),
        click.option("--chips", type=int, default=None, help="chips per frame"),
        click.option("--frames", type=int, default=None, help="frames per symbol"),
        click.option("--rho-db", "rho_db", type=float, default=None,
                      help="power-decay ratio in dB"),
        click.option("--beta", "betas", type=float, multiple=True,
                      help="combining fraction(s); repeatable"),
        click.option("--trials", type=int, default=None, help="Monte Carlo trials"),
        click.option("--seed", type=int, default=None, help="master seed"),
        click.option("--out", type=str, default=None, help="output CSV path"),
        click.option("--config", "config_file", type=str, default=None,
                      help="flat key=value config file; flags override"),
    ]
    for opt in reversed(options):
        f = opt(f)
    return f


def _configure(flags) -> tuple[ExperimentConfig, frozenset]:
    config_file = flags.pop("config_file", None)
    try:
        return build_config(config_file, **flags)
    except ValueError as exc:
        raise click.ClickException(str(exc)) from exc


@click.group()
def cli():
    """Power-control experiments for partial-combining impulse-radio uplinks."""


def _simple_command(name: str, runner, default_name: str):
    @cli.command(name, help=runner.__doc__)
    @_common_options
    def _cmd(**flags):
        config, _ = _configure(flags)
        fields, rows = runner(config)
        path = _emit(config, default_name, fields, rows)
        click.echo(f"wrote {path} ({len(rows)} rows)")
        return 0
    return _cmd


_simple_command("gamma-curve", run_gamma_curve, "gamma_curve")
_simple_command("apdp", run_apdp, "apdp")
_simple_command("mu-nu", run_mu_nu_curves, "mu_nu")
_simple_command("po-frames", run_po_vs_frames, "po_frames")
_simple_command("utility-gain", run_utility_vs_gain, "utility_gain")
_simple_command("loss-beta", run_loss_vs_beta, "loss_beta")


@cli.command("validate", help=run_validate.__doc__)
@_common_options
def _cmd_validate(**flags):
    config, explicit = _configure(flags)
    fields, rows, ok = run_validate(config, explicit)
    path = _emit(config, "validate", fields, rows)
    for row in rows:
        verdict = "PASS" if row["passed"] else "FAIL"
        click.echo(f"{verdict} {row['name']}: value={_fmt(row['value'])} "
                   f"reference={_fmt(row['reference'])} "
                   f"rel_err={_fmt(row['rel_err'])} tol={_fmt(row['tol'])}")
    failed = sum(1 for row in rows if not row["passed"])
    click.echo(f"wrote {path} ({len(rows)} rows, {failed} failures)")
    return 0 if ok else 2


def main(argv: Sequence[str] | None = None) -> int:
    """Run the CLI without exiting the interpreter; returns the exit code."""
    try:
        rv = cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as exc:
        return int(exc.exit_code)
    except click.ClickException as exc:
        exc.show()
        return 1
    except click.Abort:
        click.echo("aborted", err=True)
        return 1
    return rv if isinstance(rv, int) else 0


def entrypoint() -> None:
    sys.exit(main(sys.argv[1:]))
