"""In-context instruction forge: synthesize multimodal instruction-tuning
datasets from visual annotations via an LLM annotator pipeline."""

from .records import Dataset, DatasetBuilder, InstructionRecord, MediaRegistry
from .tasks import LANGUAGES, TaskId

__version__ = "0.1.0"

__all__ = [
    "Dataset",
    "DatasetBuilder",
    "InstructionRecord",
    "MediaRegistry",
    "TaskId",
    "LANGUAGES",
    "__version__",
]
