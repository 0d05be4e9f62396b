"""Koopman-residual feature distillation with a parallel quantum classifier.

The package screens diagnostic time-series in three stages: delay-embedded
residual statistics of each record, a fixed random encoding into small
parallel quantum circuits, and exact-measurement classification. A
verification suite checks the operator-level structure the design relies
on, and a CLI wires the stages into a batch pipeline.
"""

from .config import PipelineConfig, from_dict, load_config, save_config
from .koopman import (
    FeatureScaler,
    HankelConfig,
    KoopmanDecomposition,
    apply_scaler,
    build_hankel,
    decompose,
    extract_features,
    fit_generator,
    fit_scaler,
    reduce,
    residual_energy,
)
from .pqnn import (
    AdamW,
    EvalReport,
    MlnModel,
    PqnnConfig,
    PqnnModel,
    TrainConfig,
    cross_entropy,
    evaluate,
    forward,
    init_mln,
    init_pqnn,
    mln_forward,
    silhouette_score,
    train_mln,
    train_pqnn,
)
from .records import (
    Dataset,
    DischargeRecord,
    SyntheticSpec,
    generate_synthetic,
    ingest_discharge_file,
    read_manifest,
    split_dataset,
    standardize,
    write_manifest,
)
from .statevector import (
    QuantumState,
    UnitaryParams,
    apply_unitary,
    build_unitary,
    encode_angles,
    gradient,
    z_expectations,
)

__version__ = "0.1.0"
