"""The greenlens package."""

__version__ = "1.0.0"

from .config import PipelineConfig, load_config, parse_config
from .corpus import EnvSection, FirmMeta, ReportDocument, SectionPatternSet, extract_env_section
from .errors import GreenlensError
from .gateway import BackendConfig, MockBackend, PromptTemplate, RetrievalConfig, batch_submit
from .indicators import FirmYearIndicator, build_indicators, compute_gi, flag_greenwashing
from .judge_a import GreenDictionary, run_layer_a
from .judge_b import AblationArm, Arm, count_xy, run_layer_b
from .segment import KeywordContextPair, Segmenter, UniqueWordSequence, build_s1, build_s2
from .store import Journal, SnapshotStore
from .validate import ConfusionCounts, SamplingPlan, acc, f1, mcc
