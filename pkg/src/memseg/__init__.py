"""Semi-supervised moving-object segmentation with bounded attention memory.

Annotate one frame; the engine propagates the mask through the sequence
(forward, backward, or both) by matching per-cell descriptors against a
three-tier memory: a per-pixel recurrent sensory state, an exact working
memory of recent frames, and a compact long-term store of consolidated
prototypes.
"""

from .encoder import (AdapterParams, EncoderConfig, adapter_apply,
                      encode_descriptors, encode_query, encode_value,
                      fit_adapter)
from .grids import (FeatureGrid, FlatKeySet, MaskMap, flatten_grid,
                    resize_bilinear, resize_nearest, rgb_to_gray,
                    unflatten, upsample_guided)
from .memory import (GruParams, LongTermMemory, SensoryState, WorkingMemory,
                     affinity, affinity_topk, append_frame,
                     combined_key_matrix, combined_value_matrix, consolidate,
                     gru_step, load_memory_snapshot, potentiate,
                     prototype_select, readout, readout_topk, record_usage,
                     record_usage_topk, save_memory_snapshot,
                     sensory_deep_update, sensory_update)
from .metrics import (FrameScore, SequenceReport, boundary_f,
                      default_tolerance, evaluate_sequence, format_report,
                      jaccard, report_records, report_to_dict)
from .propagate import (ConsolidationEvent, PropagationConfig, Session,
                        SessionResult, aggregate_soft, decode, init_session,
                        run)
from .synth import (ObjectSpec, OccluderSpec, SceneSpec, generate,
                    generate_volume, oracle_track, slice_area)

__version__ = "0.1.0"

__all__ = [
    "AdapterParams", "EncoderConfig", "adapter_apply", "encode_descriptors",
    "encode_query", "encode_value", "fit_adapter",
    "FeatureGrid", "FlatKeySet", "MaskMap", "flatten_grid", "resize_bilinear",
    "resize_nearest", "rgb_to_gray", "unflatten", "upsample_guided",
    "GruParams", "LongTermMemory", "SensoryState", "WorkingMemory",
    "affinity", "affinity_topk", "append_frame", "combined_key_matrix",
    "combined_value_matrix", "consolidate", "gru_step",
    "load_memory_snapshot", "potentiate", "prototype_select", "readout",
    "readout_topk", "record_usage", "record_usage_topk",
    "save_memory_snapshot", "sensory_deep_update", "sensory_update",
    "FrameScore", "SequenceReport", "boundary_f", "default_tolerance",
    "evaluate_sequence", "format_report", "jaccard", "report_records",
    "report_to_dict",
    "ConsolidationEvent", "PropagationConfig", "Session", "SessionResult",
    "aggregate_soft", "decode", "init_session", "run",
    "ObjectSpec", "OccluderSpec", "SceneSpec", "generate", "generate_volume",
    "oracle_track", "slice_area",
    "__version__",
]
