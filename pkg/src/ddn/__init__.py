"""Domain-aware dynamic networks: controller-folded expert weights with a
static-network inference path, baselines, and a streaming fold-cache engine."""

__version__ = "0.1.0"
