from .global_utils import class_name_to_command_name as as_command_name

from .commands.generate_data import GenerateData
from .commands.annotate import Annotate
from .commands.train import Train
from .commands.infer import Infer
from .commands.baseline import Baseline
from .commands.evaluate import Evaluate
from .commands.overlay import Overlay
from .commands.selfheal_suite import SelfHealSuite
from .commands.ablate import Ablate


__version__ = "0.1.0"


COMMAND_CLASS_MAPPINGS = {
    # DATA
    as_command_name(GenerateData): GenerateData,
    as_command_name(Annotate): Annotate,
    as_command_name(Overlay): Overlay,

    # MODEL
    as_command_name(Train): Train,
    as_command_name(Infer): Infer,

    # BASELINE
    as_command_name(Baseline): Baseline,

    # EVALUATION
    as_command_name(Evaluate): Evaluate,
    as_command_name(SelfHealSuite): SelfHealSuite,
    as_command_name(Ablate): Ablate,
}


COMMAND_DISPLAY_NAME_MAPPINGS = {
    # DATA
    as_command_name(GenerateData): "Generate synthetic sequences",
    as_command_name(Annotate): "Annotate first-frame clicks",
    as_command_name(Overlay): "Render mask overlays",

    # MODEL
    as_command_name(Train): "Train ABS network",
    as_command_name(Infer): "Segment from clicks",

    # BASELINE
    as_command_name(Baseline): "Point-tracking baseline",

    # EVALUATION
    as_command_name(Evaluate): "Evaluate J / F",
    as_command_name(SelfHealSuite): "Self-healing suite",
    as_command_name(Ablate): "Ablation grid",
}


__all__ = ["COMMAND_CLASS_MAPPINGS", "COMMAND_DISPLAY_NAME_MAPPINGS", "__version__"]
