"""Time-bound watermarking of generated token sequences."""
from .analysis import AnalysisParams, ProbReport, analyze
from .decoder import IdentificationResult, VerificationReport, Verdict, identify_time
from .encoder import GenerationRequest, WatermarkedDocument, encode_document, generate, generate_plain
from .keychain import KeyVault, ProviderPastAccessDenied, Role, WindowNotYetReached, evolve
from .token_source import SyntheticModel
from .wm_core import WatermarkConfig

__all__ = [
    "AnalysisParams", "ProbReport", "analyze",
    "IdentificationResult", "VerificationReport", "Verdict", "identify_time",
    "GenerationRequest", "WatermarkedDocument", "encode_document", "generate", "generate_plain",
    "KeyVault", "ProviderPastAccessDenied", "Role", "WindowNotYetReached", "evolve",
    "SyntheticModel", "WatermarkConfig",
]
__version__ = "0.1.0"
