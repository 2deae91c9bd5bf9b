"""Represent the variables of a tabular dataset as points on a 2-D beta-VAE latent space."""
from .categorical import OneHotBlock, one_hot_encode, reinforce_entanglement
from .gradfield import (
    CrossProductTensor,
    GradientField,
    GradientMap,
    GridField,
    aggregate_option1,
    aggregate_option2,
    aggregate_option3,
    aggregate_option4,
    cross_product_timeseries,
    gradient_map,
    gradients,
    interpolate,
    spot_cross_product,
)
from .ingest import (
    DataError,
    DataTable,
    generate_synthetic,
    load_csv,
    load_idx,
    minmax_normalize,
    write_csv,
)
from .latent import LatentTable, compute_frames, to_uniform_disk, to_uniform_square
from .metadata import empirical_cdf_grid, empirical_pdf, univariate_stats
from .metrics import (
    AdjacencyMatrix,
    correlation_matrix,
    jaccard_matrix,
    metric_comparison_report,
    metric_matrix,
    mutual_information_matrix,
)
from .pipeline import FlowSpec, build_input, represent_observations, represent_variables
from .vae import TrainConfig, VaeModel, fit_select, train

__version__ = "0.1.0"
