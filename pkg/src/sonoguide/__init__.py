"""Membrane-sonification engine for needle guidance near animated cardiac surfaces."""

__version__ = "0.1.0"

from .anatomy import (
    AnimatedAnatomy,
    Mesh,
    PhantomConfig,
    frame_at,
    generate_phantom,
    icosphere,
    load_mesh,
    save_mesh,
)
from .membrane import ModalVoice, damping_sigma, modal_frequencies, write_wav
from .navkernel import (
    NavigationSample,
    NeedlePose,
    Outcome,
    TrialLog,
    axial_distance,
    classify_outcome,
    distance_to_target,
    min_distance_to_pericardium,
    nav_sample,
    update_contacts,
)
from .planner import PlanningScene, Trajectory, plan
from .session import ScriptedTrajectory, SessionConfig, replay, run_headless
from .sonmap import (
    DEFAULT_CONTROL,
    ExcitationScheduler,
    MembraneControl,
    NormalizedDistances,
    SonificationState,
    classify_state,
    map_params,
    normalize,
)
from .metrics import (
    chi_square,
    cliffs_delta,
    descriptives,
    fisher_z_compare,
    fligner_killeen,
    mann_whitney_u,
    outcome_rates,
    spearman_rho,
)

__all__ = [name for name in dir() if not name.startswith("_")]
