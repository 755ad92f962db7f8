"""Spectral Galerkin schemes and large deviation rate functions for the
stochastic linear Schroedinger equation with additive noise."""

from .exceptions import (AssumptionViolated, ConfigError, DivergentMoment, EtaZero, LDPError,
                         NotSymplectic, NumericalError, OutsideRange, TailTooDeep)
from .spectral import (ComplexNoise, NoiseSpec, SpectralVector, apply_pinv_sqrtQ, apply_sqrtQ,
                       mass, project, real_inner)
from .exact_law import (ExactLawParams, continuous_lmgf, exact_mean_pairing, exact_var_pairing,
                        exact_var_pairing_complex, fernique_closed_form, fernique_identity_check,
                        galerkin_lmgf, mass_expectation, mode_covariances, sample_galerkin_exact)
from .schemes import (CATALOG, AssumptionReport, SchemeDef, abc, alpha_hat, check_assumptions,
                      closed_form_mean, closed_form_moments, eval_scheme, get_scheme, load_scheme,
                      matrix_power, propagate_moments, step, theta)
from .rates import (LegendreSearch, RateValue, full_lmgf, legendre_numeric, mass_rate_J,
                    preservation_witness, rate_I, rate_IM, rate_IMtau, rate_modified,
                    rate_nonsymplectic)
from .montecarlo import (EstimateWithCI, ExperimentConfig, empirical_lmgf, exact_gaussian_lmgf,
                         simulate_ensemble, tail_probability)

__version__ = "0.1.0"
