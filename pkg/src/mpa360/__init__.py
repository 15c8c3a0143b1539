"""Motion-plane-adaptive inter prediction for 360-degree (ERP) video."""

from .errors import (
    BadGeometry,
    DimensionMismatch,
    FileTooShort,
    GrazingRay,
    Mpa360Error,
    NonRepresentable,
)
from .geometry import CustomPlane, MotionPlane, SphereCoord, SphericalAngles, plane_rotation
from .motion import BlockSpec, Model, MotionField, MotionInfo, MotionVector, build_motion_field, mpa_map
from .projection import ErpFormat, PerspectiveFormat, PerspectivePoint, default_focal_length
from .sampling import Frame, predict_block, sample_at

__version__ = "0.1.0"
