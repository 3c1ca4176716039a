"""Comparison forecasters: trigram generator, generative LSTM, CNN top-K."""

from .cnn import ConvClassifier, top_k
from .genlstm import GenerativeLSTM
from .trigram import END, TrigramForecaster, TrigramModel, trigram_train

__all__ = [
    "END",
    "ConvClassifier",
    "GenerativeLSTM",
    "TrigramForecaster",
    "TrigramModel",
    "top_k",
    "trigram_train",
]
