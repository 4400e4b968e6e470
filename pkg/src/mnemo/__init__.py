"""Memory-augmented GUI agent toolkit: tri-level memory, parsing, rewards, GRPO kernel, hindsight data, simulator."""

from .core import Action, ActionKind, BoundingBox, Instruction, Observation, Point, Trajectory, Transition, Widget
from .embeddings import HashingEmbedder, RemoteEmbedder, cosine_similarity, make_provider
from .memory import EpisodicStore, MemoryRepository, RetrievalStrategy, RetrievedContext, assemble_context
from .optimizer import ClipSchedule, OptimizationBatch, SequenceLogProbs, grpo_objective, sft_loss
from .parser import ParsedAgentOutput, check_format, parse_agent_output, serialize_agent_output
from .rewards import GroundTruth, RewardBreakdown, RewardWeights, evaluate_reward

__version__ = "0.1.0"
