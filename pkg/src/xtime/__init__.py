"""In-memory tree-ensemble inference accelerator: model interchange, range-table
compiler, analog CAM and core models, H-tree NoC, and the chip simulator."""

from .acam import (AcamArray, DefectSpec, MacroCell, QueryLevels, apply_defects,
                   array_search, match_direct, match_two_cycle)
from .compiler import (CamRow, CamTable, ChipConfig, CorePlacement, NocProgram,
                       PlacementPlan, build_cam_table, compile_model, configure_noc,
                       extract_paths, load_artifact, place, save_artifact)
from .core import (CoreSchedule, CoreState, core_infer, core_schedule,
                   initiation_interval, mmr_resolve)
from .ensemble import (Ensemble, Prediction, QuantizationGrid, QuantizedEnsemble,
                       Tree, build_quant_grid, oracle_predict, oracle_predict_batch,
                       parse_ensemble, quantize_ensemble, quantize_input)
from .noc import (Flit, HTreeTopology, LogitFormat, RouterState, build_htree,
                  coprocessor_reduce, router_step)
from .simulator import (CostModel, SimMetrics, SweepSpec, analytic_throughput,
                        defect_experiment, estimate_cost, run_inference, sweep)
from .synth import make_random_ensemble, make_samples

__version__ = "0.1.0"

__all__ = [
    "AcamArray", "DefectSpec", "MacroCell", "QueryLevels", "apply_defects",
    "array_search", "match_direct", "match_two_cycle",
    "CamRow", "CamTable", "ChipConfig", "CorePlacement", "NocProgram",
    "PlacementPlan", "build_cam_table", "compile_model", "configure_noc",
    "extract_paths", "load_artifact", "place", "save_artifact",
    "CoreSchedule", "CoreState", "core_infer", "core_schedule",
    "initiation_interval", "mmr_resolve",
    "Ensemble", "Prediction", "QuantizationGrid", "QuantizedEnsemble", "Tree",
    "build_quant_grid", "oracle_predict", "oracle_predict_batch", "parse_ensemble",
    "quantize_ensemble", "quantize_input",
    "Flit", "HTreeTopology", "LogitFormat", "RouterState", "build_htree",
    "coprocessor_reduce", "router_step",
    "CostModel", "SimMetrics", "SweepSpec", "analytic_throughput",
    "defect_experiment", "estimate_cost", "run_inference", "sweep",
    "make_random_ensemble", "make_samples",
]
