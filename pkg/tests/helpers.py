import numpy as np

from challenge_cascade.trace import ResponseTrace


def make_trace(realism, challenge_id="c", fps=10.0, **columns):
    """Trace with the given realism column and flat compliance channels."""
    realism = np.asarray(realism, dtype=float)
    n = realism.size
    cols = {
        "yaw_deg": np.zeros(n),
        "expression_intensity": np.zeros(n),
        "occlusion_fraction": np.zeros(n),
        "luminance_shift": np.zeros(n),
        "n_faces": np.ones(n, dtype=np.int64),
    }
    cols.update({k: np.asarray(v) for k, v in columns.items()})
    return ResponseTrace(challenge_id=challenge_id, realism=realism, nominal_fps=fps,
                         duration_s=n / fps if n else 0.01, **cols)
