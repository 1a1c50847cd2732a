from .samples import (
    FORCE_COLUMNS,
    STEP_COLUMNS,
    read_force_samples_csv,
    read_step_samples_csv,
    write_force_samples_csv,
    write_step_samples_csv,
)
from .tables import (
    cycles_frame,
    events_payload,
    ledger_frame,
    point_mass_frame,
    read_json,
    solution_frame,
    trace_frame,
    write_frame,
    write_json,
)
