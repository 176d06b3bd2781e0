"""Modal clustering by gradient flows and by climbing the cluster tree of a density."""
from .climb import (ClimbConfig, ClimbResult, backward_euler_step, boundary_max, climb_alg1, climb_alg2,
                    forward_euler_ms)
from .clustertree import ClusterTree, TreeNode, build_cluster_tree, cluster_of, leaf_clusters
from .controls import Controls
from .density import (DensityBounds, GaussianMixture, KernelDensity, estimate_bounds, kde_fit, load_density,
                      rule_of_thumb_bandwidth)
from .errors import (ArgmaxFailed, GridTooSmall, InputError, ModalflowError, ProjectionFailed,
                     RateExperimentError, StepFailed)
from .fixtures import FIXTURES, get_fixture
from .flow import (Mode, ModeRegistry, TerminalInfo, Trajectory, assign_basin, integrate_gamma, integrate_xi,
                   integrate_zeta)
from .grid import Box, Grid
from .levelset import (ComponentLabeling, argmax_on_component, distance_to_level, label_components,
                       project_to_level, same_component)
from .metrics import Polyline, RateReport, hausdorff, rate_experiment_alg1, rate_experiment_alg2
from .sample_methods import (AgreementReport, LabeledSample, MethodConfig, basin_labels, meanshift_cluster,
                             method1, method2, sample_mixture, score_agreement)

__version__ = "0.1.0"

__all__ = [
    "AgreementReport",
    "ArgmaxFailed",
    "Box",
    "ClimbConfig",
    "ClimbResult",
    "ClusterTree",
    "ComponentLabeling",
    "Controls",
    "DensityBounds",
    "FIXTURES",
    "GaussianMixture",
    "Grid",
    "GridTooSmall",
    "InputError",
    "KernelDensity",
    "LabeledSample",
    "MethodConfig",
    "ModalflowError",
    "Mode",
    "ModeRegistry",
    "Polyline",
    "ProjectionFailed",
    "RateExperimentError",
    "RateReport",
    "StepFailed",
    "TerminalInfo",
    "Trajectory",
    "TreeNode",
    "argmax_on_component",
    "assign_basin",
    "backward_euler_step",
    "basin_labels",
    "boundary_max",
    "build_cluster_tree",
    "climb_alg1",
    "climb_alg2",
    "cluster_of",
    "distance_to_level",
    "estimate_bounds",
    "forward_euler_ms",
    "get_fixture",
    "hausdorff",
    "integrate_gamma",
    "integrate_xi",
    "integrate_zeta",
    "kde_fit",
    "label_components",
    "leaf_clusters",
    "load_density",
    "meanshift_cluster",
    "method1",
    "method2",
    "project_to_level",
    "rate_experiment_alg1",
    "rate_experiment_alg2",
    "rule_of_thumb_bandwidth",
    "same_component",
    "sample_mixture",
    "score_agreement",
]
