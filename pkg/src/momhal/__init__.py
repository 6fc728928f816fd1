"""Statistical stream descriptors and a self-supervised hallucination trainer.

Submodules:
  kernel   - Gaussian feature maps over fixed pivots
  pn       - power normalization (SigmE, MaxExp)
  sketch   - count sketches and their statistics
  moments  - multi-moment bag descriptors
  odf      - object detection features
  sdf      - saliency detection features
  fusion   - stream reweighting, pooling, golden-section search
  halluc   - stream units, objective, training, inference
  synthgen - deterministic synthetic datasets
  verify   - runnable property suites
  cli      - command-line interface
"""

from .kernel import FeatureMapConfig, feature_map, kernel_approx_constant
from .moments import FeatureBag, MultiMomentDescriptor, assemble_upsilon, multi_moment
from .odf import DetectionRecord, OdfConfig, encode_box, odf_descriptor
from .pn import PnConfig, maxexp, sigme, sigme_grad
from .sdf import SaliencyFrame, SdfConfig, encode_frame, gradients, sdf_descriptor
from .sketch import CountSketch, project, sketch_new, unbiasedness_check
from .fusion import FusionSpec, eq9_weights, golden_section_max, pooled
from .halluc import Model, StreamUnit, SyntheticVideo, TrainConfig, infer, objective, train

__all__ = [
    "FeatureMapConfig", "feature_map", "kernel_approx_constant",
    "PnConfig", "sigme", "sigme_grad", "maxexp",
    "CountSketch", "sketch_new", "project", "unbiasedness_check",
    "FeatureBag", "MultiMomentDescriptor", "assemble_upsilon", "multi_moment",
    "DetectionRecord", "OdfConfig", "encode_box", "odf_descriptor",
    "SaliencyFrame", "SdfConfig", "gradients", "encode_frame", "sdf_descriptor",
    "FusionSpec", "eq9_weights", "pooled", "golden_section_max",
    "StreamUnit", "TrainConfig", "SyntheticVideo", "Model", "objective", "train", "infer",
]

__version__ = "0.1.0"
