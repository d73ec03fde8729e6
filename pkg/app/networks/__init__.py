# Networks package

from .encoder import SpeechEncoder, SpeechDecoder, num_frames
from .dual_path import DualPathMaskEstimator
from .gesture_encoder import GestureEncoder
from .seg import SegNet
from .dprnn import DprnnNet
from .gsr import GsrNet
from .ops import speech_encode, gesture_encode, seg_forward, dprnn_forward, gsr_forward

__all__ = [
    "SpeechEncoder",
    "SpeechDecoder",
    "num_frames",
    "DualPathMaskEstimator",
    "GestureEncoder",
    "SegNet",
    "DprnnNet",
    "GsrNet",
    "speech_encode",
    "gesture_encode",
    "seg_forward",
    "dprnn_forward",
    "gsr_forward",
]
