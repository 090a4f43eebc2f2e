from .genome import (
    BASELINE,
    FAMILIES,
    FAMILY_NAMES,
    Genome,
    all_genomes,
    always_valid,
    design_space_size,
    parse_genome,
    random_genome,
)
from .prompts import PromptTemplate, load_prompt
from .runner import (
    STAGE_ORDER,
    PipelineConfig,
    PipelineContext,
    PipelineOutput,
    RunMeter,
    StageRecord,
    StageTrace,
    run_pipeline,
)
from .stages import (
    Evidence,
    augment,
    compose,
    compose_order,
    condense,
    filter_candidates,
    fuse_rankings,
    generate,
    long_context_order,
    refine,
    rerank,
    retrieve_merged,
    transform_query,
)

__all__ = [
    "BASELINE",
    "Evidence",
    "FAMILIES",
    "FAMILY_NAMES",
    "Genome",
    "PipelineConfig",
    "PipelineContext",
    "PipelineOutput",
    "PromptTemplate",
    "RunMeter",
    "STAGE_ORDER",
    "StageRecord",
    "StageTrace",
    "all_genomes",
    "always_valid",
    "augment",
    "compose",
    "compose_order",
    "condense",
    "design_space_size",
    "filter_candidates",
    "fuse_rankings",
    "generate",
    "load_prompt",
    "long_context_order",
    "parse_genome",
    "random_genome",
    "refine",
    "rerank",
    "retrieve_merged",
    "run_pipeline",
    "transform_query",
]
