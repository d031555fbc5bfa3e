"""EEG emotion recognition: Welch band-power features, median-split
valence/arousal labels, KNN / linear SVM baselines and a stacked LSTM."""

__version__ = "0.1.0"
