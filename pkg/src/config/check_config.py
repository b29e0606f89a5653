"""Check names and tolerance classes for srgeodesics verification runs.

Every verification the runner can perform has a stable kebab-case name used in
experiment configs, on the command line and in report.json.
"""

from enum import Enum
from typing import List


class ToleranceKind(str, Enum):
    """Which tolerance a check is judged against."""

    ALGEBRAIC = "algebraic"          # pointwise linear algebra, 1e-10
    NUMERIC = "numeric"              # transport / finite differences, 1e-5
    KAPPA_CONSTANT = "kappa_constant"
    KAPPA_VANISH = "kappa_vanish"
    ROUTE = "route"
    ENERGY = "energy"
    FIXED = "fixed"                  # threshold is part of the check definition


class CheckName(str, Enum):
    """Supported verification checks."""

    MODEL_INVARIANTS = "model-invariants"
    THEOREM1 = "theorem1"
    THEOREM2_PARALLEL = "theorem2-parallel"
    J2 = "j2"
    RVRW_ORTHOGONALITY = "rvrw-orthogonality"
    DOT_KAPPA = "dot-kappa"
    HTYPE = "htype"
    LOCAL_CONDITION_D = "local-condition-d"
    R2 = "r2"
    PARALLEL_CURVATURE = "parallel-curvature"
    CYCLIC_COVDERIV = "cyclic-covderiv"
    TRANSVERSE_SYMMETRIES = "transverse-symmetries"
    VERTICAL_ABELIAN = "vertical-abelian"
    NONDEGENERATE = "nondegenerate"
    STEP2_DECOMPOSITION = "step2-decomposition"
    NORMALIZATION_IDENTITY = "normalization-identity"
    COMPARE_PROJECTIONS = "compare-projections"
    KAPPA1_CONSTANT = "kappa1-constant"
    KAPPA2_VANISHING = "kappa2-vanishing"
    ROUTE_AGREEMENT = "route-agreement"
    ENERGY_DRIFT = "energy-drift"

    @classmethod
    def from_string(cls, value: str) -> "CheckName":
        """Parse a check name (case-insensitive, underscores accepted)."""
        value_lower = value.lower().strip().replace("_", "-")
        for member in cls:
            if member.value == value_lower:
                return member
        raise ValueError(
            f"Invalid check name: {value}. "
            f"Valid checks: {[m.value for m in cls]}"
        )

    @classmethod
    def verify_defaults(cls) -> List["CheckName"]:
        """Checks run by `verify <model>`: every check."""
        return sorted(cls, key=lambda member: member.value)

    @property
    def tolerance_kind(self) -> ToleranceKind:
        return _TOLERANCE_KINDS[self]

    @property
    def description(self) -> str:
        return _DESCRIPTIONS[self]


_TOLERANCE_KINDS = {
    CheckName.MODEL_INVARIANTS: ToleranceKind.ALGEBRAIC,
    CheckName.THEOREM1: ToleranceKind.NUMERIC,
    CheckName.THEOREM2_PARALLEL: ToleranceKind.NUMERIC,
    CheckName.J2: ToleranceKind.ALGEBRAIC,
    CheckName.RVRW_ORTHOGONALITY: ToleranceKind.ALGEBRAIC,
    CheckName.DOT_KAPPA: ToleranceKind.NUMERIC,
    CheckName.HTYPE: ToleranceKind.ALGEBRAIC,
    CheckName.LOCAL_CONDITION_D: ToleranceKind.ALGEBRAIC,
    CheckName.R2: ToleranceKind.ALGEBRAIC,
    CheckName.PARALLEL_CURVATURE: ToleranceKind.NUMERIC,
    CheckName.CYCLIC_COVDERIV: ToleranceKind.NUMERIC,
    CheckName.TRANSVERSE_SYMMETRIES: ToleranceKind.ALGEBRAIC,
    CheckName.VERTICAL_ABELIAN: ToleranceKind.ALGEBRAIC,
    CheckName.NONDEGENERATE: ToleranceKind.FIXED,
    CheckName.STEP2_DECOMPOSITION: ToleranceKind.FIXED,
    CheckName.NORMALIZATION_IDENTITY: ToleranceKind.ALGEBRAIC,
    CheckName.COMPARE_PROJECTIONS: ToleranceKind.NUMERIC,
    CheckName.KAPPA1_CONSTANT: ToleranceKind.KAPPA_CONSTANT,
    CheckName.KAPPA2_VANISHING: ToleranceKind.KAPPA_VANISH,
    CheckName.ROUTE_AGREEMENT: ToleranceKind.ROUTE,
    CheckName.ENERGY_DRIFT: ToleranceKind.ENERGY,
}

_DESCRIPTIONS = {
    CheckName.MODEL_INVARIANTS: "frame orthonormality, dpi(V)=0, independence",
    CheckName.THEOREM1: "|J_beta(t) eta'| constant along base geodesics",
    CheckName.THEOREM2_PARALLEL: "J_beta(t) eta' parallel along base geodesics",
    CheckName.J2: "J_a^2 v = -|J_a v|^2 v",
    CheckName.RVRW_ORTHOGONALITY: "<J_a v, J_a w> = 0 on the admissible complement",
    CheckName.DOT_KAPPA: "<aR(v,.), a(nabla_v R)(v,.)> = 0",
    CheckName.HTYPE: "J_a^2 = -|a|^2 Id and polarization",
    CheckName.LOCAL_CONDITION_D: "-A_k^2 diagonal positive semi-definite",
    CheckName.R2: "R(u,v)^2 w = -|R(u,v)w|^2 w on the base",
    CheckName.PARALLEL_CURVATURE: "nabla_v R = 0 for horizontal v",
    CheckName.CYCLIC_COVDERIV: "cyclic sum of nabla R vanishes",
    CheckName.TRANSVERSE_SYMMETRIES: "vertical fields preserve D and its metric",
    CheckName.VERTICAL_ABELIAN: "[V_k, V_l] = 0",
    CheckName.NONDEGENERATE: "extended cometric positive-definite",
    CheckName.STEP2_DECOMPOSITION: "TM = D + im R",
    CheckName.NORMALIZATION_IDENTITY: "|a|^2 = (1/n) sum |J_a v_i|^2",
    CheckName.COMPARE_PROJECTIONS: "sR and extended-metric projections coincide",
    CheckName.KAPPA1_CONSTANT: "projected geodesics have constant kappa1",
    CheckName.KAPPA2_VANISHING: "projected geodesics have vanishing kappa2",
    CheckName.ROUTE_AGREEMENT: "Frenet and extremal kappa1 agree",
    CheckName.ENERGY_DRIFT: "Hamiltonian conserved along geodesics",
}
