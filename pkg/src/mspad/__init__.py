"""Multispectral face presentation attack detection.

Per-band LBP + linear SVM with sum-rule score fusion, wavelet image fusion
followed by LBP + SVM, PAD error metrics and a leave-one-PAI-out protocol
over seeded synthetic multispectral data.
"""
from .data import Band, DatasetManifest, PAIGroup, PAISpecies, SampleRecord, SpectralCube
from .fusion import FusionWeights, WaveletFusion, fuse_cube
from .lbp import LBPHistogram, lbp_histogram
from .pipelines import ImageFusionPAD, ScoreFusionPAD
from .svm import LinearSVM

__version__ = "0.1.0"

__all__ = [
    "Band", "DatasetManifest", "PAIGroup", "PAISpecies", "SampleRecord", "SpectralCube",
    "FusionWeights", "WaveletFusion", "fuse_cube", "LBPHistogram", "lbp_histogram",
    "ImageFusionPAD", "ScoreFusionPAD", "LinearSVM",
]
