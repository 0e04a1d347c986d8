"""Hybrid linear inverted pendulum walking: orbits, stepping control and aSLIP transfer."""

from hlip.core import (
    HlipParams,
    PlanarState,
    FlowCoefficients,
    ParameterError,
    dsp_flow,
    flow_coefficients,
    impact_d2s,
    impact_s2d,
    lam,
    orbital_energy,
    ssp_flow,
    step_map,
)
from hlip.orbits import (
    Composition3D,
    OrbitalLine,
    OrbitReport,
    P1Orbit,
    P2Orbit,
    compose_3d,
    d2_for_velocity,
    p1_boundary_velocity,
    p1_orbit,
    p2_orbit,
    sigma1,
    sigma2,
    verify_orbit,
)
from hlip.stepping import (
    DivergenceError,
    RolloutLog,
    SteppingGain,
    contraction_factor,
    gain_range,
    optimal_gain,
    p1_step_length,
    p2_step_length,
    rollout,
)

__version__ = "0.1.0"
