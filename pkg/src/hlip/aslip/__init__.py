"""Actuated spring-loaded inverted pendulum (aSLIP) model and walking simulation."""

from hlip.aslip.model import (
    AslipParams,
    AslipStateDSP,
    AslipStateSSP,
    GuardError,
    ModelDomainError,
    SingularityError,
    SwingLeg,
    dsp_dynamics,
    impact_ssp_to_dsp,
    leg_forces,
    mechanical_energy,
    spring_force,
    ssp_dynamics,
    swing_foot_height,
    transition_dsp_to_ssp,
)
