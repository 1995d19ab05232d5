"""Spatially coherent spherical deconvolution of diffusion MRI volumes.

The package builds a sparse, non-negative fibre orientation distribution
(fODF) per voxel together with an isotropic diffusion map (IDM), coupling
neighbouring voxels through a directional fibre-continuity prior on the
fODFs and a total-variation prior on the IDM. The optimisation runs with
ADMM.
"""
from .dirfilter import DirectionalFilter, FilterBank, build_filter, solve_fc_ls
from .metrics import MetricsReport, PeakSet, aae, contrast, evaluate, extract_peaks, tp_fp
from .model import (Dictionary, SfrParams, TensorCompartment, add_rician_noise, build_dictionary,
                    fit_sfr, synth_signal)
from .phantom import GroundTruth, PhantomSpec, generate_phantom
from .presets import METHOD_NAMES, make_preset, residual_idm
from .solver import ConvergenceReport, SolverConfig, SolverState, admm_solve, objective
from .sphere import DirectionSet, MeshAdjacency, icosa_tessellate, saff_spiral
from .tv import TvConfig, tv_prox
from .volume import CoefficientVolume, SignalVolume, load_volume, save_volume

__version__ = "0.1.0"
