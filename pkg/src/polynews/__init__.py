"""Multilingual fake-news classification toolkit.

Heterogeneous feature extraction (TF-IDF, LDA, precomputed transformer
embeddings), dimensionality reduction (mutual information, ANOVA, PCA),
MLP base classifiers, and two ensemble-integration policies with
language-aware support accumulation, evaluated under stratified 5x2
cross-validation with the combined F test.
"""

__version__ = "0.1.0"
