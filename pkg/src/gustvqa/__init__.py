"""Wind-gust heatmaps, colour-region point extraction, VQA dataset generation and scoring."""

__version__ = "0.1.0"
