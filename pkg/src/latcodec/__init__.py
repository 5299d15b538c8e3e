"""latcodec: lattice quantization, entropy coding and latent-shift tools."""

from latcodec.companding import Compander, ScalarQuantMap, build_compander, equivalence_check
from latcodec.entropy import (
    FactorizedPdf,
    GaussianField,
    PmfTable,
    pmf_hex,
    pmf_mc,
    pmf_scalar,
    rate_lower_bound,
)
from latcodec.lattice import (
    Dictionary,
    LatticeKind,
    LatticePoint,
    LatticeSpec,
    dequantize,
    enumerate_dictionary,
    nearest_point,
    second_moment,
)
from latcodec.metrics import RDCurve, bd_psnr, bd_rate
from latcodec.rans import rans_decode, rans_encode
from latcodec.shifting import (
    StepCandidates,
    apply_shift_decode,
    baseline_shifts,
    correlation_report,
    dequant_shift_traditional,
    entropy_gradient,
    search_step_main,
    search_step_side,
    true_gradient_bound,
)

__version__ = "0.1.0"

__all__ = [
    "Compander",
    "Dictionary",
    "FactorizedPdf",
    "GaussianField",
    "LatticeKind",
    "LatticePoint",
    "LatticeSpec",
    "PmfTable",
    "RDCurve",
    "ScalarQuantMap",
    "StepCandidates",
    "apply_shift_decode",
    "baseline_shifts",
    "bd_psnr",
    "bd_rate",
    "build_compander",
    "correlation_report",
    "dequantize",
    "dequant_shift_traditional",
    "entropy_gradient",
    "enumerate_dictionary",
    "equivalence_check",
    "nearest_point",
    "pmf_hex",
    "pmf_mc",
    "pmf_scalar",
    "rans_decode",
    "rans_encode",
    "rate_lower_bound",
    "search_step_main",
    "search_step_side",
    "second_moment",
    "true_gradient_bound",
    "__version__",
]
