from .generator import SyntheticSpec, BehaviorTemplate, DEFAULT_TEMPLATES, plant_factors, synth_matrix, \
    synth_event_log, expected_cluster_matrix
from .recovery import aligned_recovery_error
