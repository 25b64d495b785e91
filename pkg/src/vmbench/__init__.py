"""Virtual-metrology cross-benchmark: imputers x feature-selection/regression pairs."""

__version__ = "0.1.0"
