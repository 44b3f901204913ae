"""Singular drift fields, certificates and form-bound estimation."""

from .catalog import (
    FIELD_IDS,
    build_field,
    make_hardy_drift,
    make_hardy_time_drift,
    make_lps_drift,
    make_shell_log_drift,
    make_weak_ld_drift,
)
from .constants import (
    admissible_q_interval,
    critical_hardy_delta,
    hardy_constant,
    lp_threshold,
    sobolev_constant,
    strichartz_delta,
    strichartz_delta_readings,
    unit_ball_volume,
)
from .core import (
    ConstG,
    DriftField,
    FormBoundCertificate,
    GFunction,
    Locus,
    PowerG,
    SumG,
    TimeLogG,
    ZeroG,
    constant_field,
    eval_drift,
    jitter_off_locus,
    zero_field,
)
from .formbound import (
    TestFunction,
    estimate_form_bound,
    morrey_seminorm,
    nested_cubes,
    origin_family,
    random_cubes,
    random_family,
    rayleigh_quotient,
    shell_family,
    sum_certificate,
    sum_fields,
)
