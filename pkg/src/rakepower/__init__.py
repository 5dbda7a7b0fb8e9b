"""Energy-efficient power control for IR-UWB uplinks with Rake receivers.

The package has three layers:

* simulation: frequency-selective channel draws (`channel`), exact
  finite-dimensional Rake gain computation (`gains`), and the
  noncooperative power-control game solved by best-response iteration
  (`game`);
* prediction: large-system closed forms for the interference factors,
  equilibrium power/utility, the minimum-frames design rule and the
  partial-Rake loss (`lsa`);
* certification: finite-size and Monte Carlo oracles that validate every
  closed form against brute-force evaluation (`oracle`), wired into a CSV
  experiment CLI (`cli`).
"""

from .channel import (
    ApdpProfile,
    ChannelRealization,
    NetworkTopology,
    sample_channel,
    sample_channel_bank,
    sample_topology,
    substream,
    tap_variance,
)
from .gains import (
    LinkGains,
    RakeSelector,
    SpreadingConfig,
    interference_matrices,
    link_gains,
    phi_coefficient,
    rake_weights,
    sinr,
)
from .game import (
    EquilibriumOutcome,
    UtilityParams,
    best_response,
    closed_form_equilibrium_power,
    efficiency,
    feasibility,
    gamma_star,
    solve_equilibrium,
    utilities,
)
from .lsa import (
    LsaParams,
    LsaPrediction,
    ber_estimate,
    invert_loss,
    loss_db,
    lsa_prediction,
    min_frames,
    mu,
    mu_arake,
    mu_flat,
    mu_flat_arake,
    nu,
    nu_arake,
    nu_flat,
    nu_flat_arake,
    predict_power,
    predict_utility,
)
from .oracle import (
    AuditRow,
    ConvergenceRow,
    InterferencePaths,
    McEstimate,
    ProfileMatrices,
    appendix_intermediates,
    convergence_table,
    finite_mai_inv,
    finite_mu,
    finite_nu,
    finite_si_inv,
    flat_mu_exact,
    flat_nu_exact,
    mc_gain_ratio,
    mc_interference_ratios,
    oracle_audit,
    profile_matrices,
)

__version__ = "0.1.0"

__all__ = [
    "ApdpProfile",
    "AuditRow",
    "ChannelRealization",
    "EquilibriumOutcome",
    "LinkGains",
    "LsaParams",
    "LsaPrediction",
    "NetworkTopology",
    "ProfileMatrices",
    "RakeSelector",
    "SpreadingConfig",
    "UtilityParams",
    "ConvergenceRow",
    "InterferencePaths",
    "McEstimate",
    "appendix_intermediates",
    "ber_estimate",
    "best_response",
    "closed_form_equilibrium_power",
    "convergence_table",
    "efficiency",
    "feasibility",
    "finite_mai_inv",
    "finite_mu",
    "finite_nu",
    "finite_si_inv",
    "flat_mu_exact",
    "flat_nu_exact",
    "gamma_star",
    "interference_matrices",
    "invert_loss",
    "link_gains",
    "loss_db",
    "lsa_prediction",
    "mc_gain_ratio",
    "mc_interference_ratios",
    "min_frames",
    "mu",
    "mu_arake",
    "mu_flat",
    "mu_flat_arake",
    "nu",
    "nu_arake",
    "nu_flat",
    "nu_flat_arake",
    "oracle_audit",
    "phi_coefficient",
    "predict_power",
    "predict_utility",
    "profile_matrices",
    "rake_weights",
    "sample_channel",
    "sample_channel_bank",
    "sample_topology",
    "sinr",
    "solve_equilibrium",
    "substream",
    "tap_variance",
    "utilities",
]
