"""Vocal fatigue detection from neural speech embeddings.

Pipeline pieces: EMB1 embedding I/O (core), temporal smoothing and
recording normalization (preprocess), PCA (pca), RBF-SVM with SMO and
grid-search CV (svm), t-SNE projection (tsne), classification metrics
(metrics), and a seeded synthetic corpus (synth).  The ``vocalfatigue``
CLI wires them together.
"""

__version__ = "0.1.0"
