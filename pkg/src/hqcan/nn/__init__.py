"""Small numpy neural networks: the CAN-image CNN extractor and an LSTM baseline."""
from .cnn import backprop_check, cnn_features, cnn_forward, cnn_loss_and_grad, cnn_train, init_cnn
from .lstm import init_lstm, lstm_forward, lstm_loss_and_grad, lstm_predict, lstm_train
from .train import GradCheck, TrainConfig, TrainHistory, gradient_check, load_params, save_params

__all__ = [
    "GradCheck", "TrainConfig", "TrainHistory", "backprop_check", "cnn_features", "cnn_forward",
    "cnn_loss_and_grad", "cnn_train", "gradient_check", "init_cnn", "init_lstm",
    "load_params", "lstm_forward", "lstm_loss_and_grad", "lstm_predict", "lstm_train",
    "save_params",
]
