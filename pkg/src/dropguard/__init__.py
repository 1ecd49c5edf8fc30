"""dropguard: stochastic test-time defenses and white-box attacks for small CNNs."""

from .analysis import GradientSampleSet, sample_gradients, variance_summary
from .attacks import (
    AttackResult,
    CarliniWagnerL2,
    FastGradientSign,
    MajorityVote,
    SaliencyMapAttack,
    SinglePass,
    distortion_norm,
    expected_input_gradient,
    judge_success,
)
from .campaign import CampaignResult, attack_campaign
from .datasets import Dataset, load_cifar10_bin, load_mnist_idx, make_synthetic
from .defenses import (
    DefenseSearchConfig,
    DefenseSearchTrace,
    defensive_dropout_search,
    sap_defense_eval,
    select_train_rate,
)
from .estimator import ConvNetClassifier
from .exceptions import (
    DataFormatError,
    ParamsFileError,
    ShapeError,
    ZeroActivationError,
)
from .network import (
    Architecture,
    Conv,
    Dense,
    Deterministic,
    MaxPool,
    ModelParams,
    Relu,
    Sap,
    Softmax,
    TestDropout,
    TrainDropout,
    architecture,
    forward,
    init_params,
    input_gradient,
    load_params,
    sap_probabilities,
    save_params,
)
from .rng import SeedStream
from .training import TrainConfig, evaluate_accuracy, train

__version__ = "0.1.0"
