from .base import (
    BuyerContext,
    GenerationFailed,
    OwnedListing,
    PolicySet,
    SellerContext,
    TrendEntry,
    TrendSummary,
)
from .llm import (
    HTTPCompletionClient,
    ReplayClient,
    ReplayMismatch,
    TranscriptLog,
    complete,
    llm_policies,
)
from .mock import (
    MockBuyerPolicy,
    MockDataGenerator,
    MockGoalGenerator,
    MockSellerPolicy,
    mock_policies,
)
from .prompts import PromptBundle

__all__ = [
    "BuyerContext",
    "GenerationFailed",
    "HTTPCompletionClient",
    "MockBuyerPolicy",
    "MockDataGenerator",
    "MockGoalGenerator",
    "MockSellerPolicy",
    "OwnedListing",
    "PolicySet",
    "PromptBundle",
    "ReplayClient",
    "ReplayMismatch",
    "SellerContext",
    "TranscriptLog",
    "TrendEntry",
    "TrendSummary",
    "complete",
    "llm_policies",
    "mock_policies",
]
