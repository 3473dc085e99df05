"""Small shared builders for the test modules."""

import numpy as np

from risfa.channel import assemble_channels, draw_nlos
from risfa.scenario import rng_for_trial, uniform_apv


def channels(s, trial=0, spacing=None):
    d = draw_nlos(s, rng_for_trial(s, trial))
    z = uniform_apv(s, s.min_spacing if spacing is None else spacing)
    return assemble_channels(s, d, z)


def random_feasible_z(s, rng):
    """Sorted positions in [0, D] with gaps >= delta."""
    slack = s.aperture - (s.n_tx - 1) * s.min_spacing
    u = np.sort(rng.random(s.n_tx)) * slack
    return u + s.min_spacing * np.arange(s.n_tx)


def random_phases(s, rng):
    return np.exp(2j * np.pi * rng.random((s.n_ris, s.n_ris_elements)))
