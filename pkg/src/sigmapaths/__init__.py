"""sigmapaths: simulation and verification of multiplicative decompositions
of nonnegative submartingales and their zero-carried ("reflected") family."""

from .calculus import (
    LocalTimeEstimate,
    ReflectionPair,
    ito_integral,
    local_time_occupation,
    local_time_tanaka,
    quadratic_variation,
    running_extremum,
    sigma_example_triple,
    skorokhod_map,
)
from .decompose import (
    CarriedVerdict,
    ClassDReport,
    MultDecomp,
    SigmaTriple,
    carried_by_zeros,
    class_d_diagnostics,
    minimality_gap,
    mult_compose,
    mult_decompose,
    mult_decompose_exp,
    sigma_compose,
    sigma_martingale,
)
from .experiments import (
    azema_conditional_experiment,
    honest_time,
    lemma_balance_experiment,
    saturation_probe,
    tail_experiment,
    two_infinity_check,
)
from .generators import (
    GeneratorSpec,
    gen_bessel3,
    gen_brownian,
    gen_exp_martingale,
    gen_stopped_hitting,
    make_ensemble,
    scale_martingale,
)
from .grids import (
    Ensemble,
    McEstimate,
    Path,
    StoppedPath,
    TimeGrid,
    make_grid,
    read_paths_csv,
    stop_path,
    write_paths_csv,
)
from .streams import StreamKey, gaussian_increments

__version__ = "0.1.0"
