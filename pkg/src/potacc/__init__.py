"""potacc: bit-exact 4-bit power-of-two weight codec and cycle-level
simulators for shift-based DNN accelerators."""

from .codec import (
    QuantizedTensor,
    load_potq,
    preprocess_weights,
    quantization_stats,
    quantize_array,
    quantize_pot_single,
    quantize_to_method,
    read_potq,
    save_potq,
    write_potq,
)
from .config import SimConfig
from .cost import (
    PE_COST_TABLE,
    ClockConfig,
    PECostProfile,
    TimingProfile,
    energy_per_mac_factor,
    mac_time_factor,
    resource_estimate,
)
from .errors import PotaccError
from .gemm import (
    BenchmarkCase,
    TileConfig,
    benchmark_suite,
    gemm_compute_cycles,
    gemm_execute,
    run_suite,
)
from .accel import (
    AcceleratorConfig,
    LayerConfig,
    LayerKind,
    SimReport,
    conv_execute,
    im2col_lower,
    layer_timing,
    requantize_int8,
    run_model,
)
from .methods import PEKind, PoTMethod, WeightCode, decode
from .models import fixture_layers
from .pe import dot_product, exhaustive_pe_check, pe_mac, pe_multiply

__version__ = "0.1.0"

__all__ = [
    "AcceleratorConfig",
    "BenchmarkCase",
    "ClockConfig",
    "LayerConfig",
    "LayerKind",
    "PECostProfile",
    "PEKind",
    "PE_COST_TABLE",
    "PoTMethod",
    "PotaccError",
    "QuantizedTensor",
    "SimConfig",
    "SimReport",
    "TileConfig",
    "TimingProfile",
    "WeightCode",
    "benchmark_suite",
    "conv_execute",
    "decode",
    "dot_product",
    "energy_per_mac_factor",
    "exhaustive_pe_check",
    "fixture_layers",
    "gemm_compute_cycles",
    "gemm_execute",
    "im2col_lower",
    "layer_timing",
    "load_potq",
    "mac_time_factor",
    "pe_mac",
    "pe_multiply",
    "preprocess_weights",
    "quantization_stats",
    "quantize_array",
    "quantize_pot_single",
    "quantize_to_method",
    "read_potq",
    "requantize_int8",
    "resource_estimate",
    "run_model",
    "run_suite",
    "save_potq",
    "write_potq",
]
