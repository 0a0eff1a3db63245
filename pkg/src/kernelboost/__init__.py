"""Multi-descriptor kernel classifiers for object categorization.

Image ingestion, PHOG and bag-of-visual-words descriptors, distance
substitution kernels, an SMO kernel SVM, SVM-KNN local learning and
AdaBoost over per-descriptor SVMs.
"""

__version__ = "0.1.0"
