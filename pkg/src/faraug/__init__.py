"""Far-field speaker verification augmentation toolkit.

Factorizes speech into prosody/content/speaker/residual subspaces,
substitutes speaker identity across recording domains, and evaluates
the result with standard verification metrics and blind RT60 analysis.
"""

from .audio import Waveform, load_utterance, read_wav, resample, rms_power, write_wav
from .augmentor import (AugJob, AugPlan, SpeakerPool, build_pool, execute_plan, load_plan,
                        plan_train_aug, plan_trial_crossaug, save_plan)
from .classical import (AugConfig, add_noise_snr, apply_rir, derive_seed, filter_augment,
                        shuffle_augment, spec_augment, speed_perturb)
from .codec import (CodecBackend, FactorizedSpeech, RemoteCodecBackend, ToyCodecBackend,
                    convert_speaker, read_fspc, voice_convert, write_fspc)
from .embedder import AamParams, SpeakerEmbedding, ToyEmbedderBackend, aam_softmax_loss, embed
from .features import MelSpectrogram, Spectrogram, log_mel, stft
from .manifests import UtteranceRecord, load_manifest, save_manifest
from .rt60 import ClosenessReport, Rt60Estimate, compare_rt60, emit_rt60_plot, estimate_rt60
from .scoring import (EvalReport, Trial, compute_eer, compute_min_dcf, cosine_score, evaluate,
                      load_trials, score_trials)

__version__ = "0.1.0"

__all__ = [
    "AamParams", "AugConfig", "AugJob", "AugPlan", "ClosenessReport", "CodecBackend",
    "EvalReport", "FactorizedSpeech", "MelSpectrogram", "RemoteCodecBackend",
    "Rt60Estimate", "SpeakerEmbedding", "SpeakerPool", "Spectrogram", "ToyCodecBackend",
    "ToyEmbedderBackend", "Trial", "UtteranceRecord", "Waveform",
    "aam_softmax_loss", "add_noise_snr", "apply_rir", "build_pool", "compare_rt60",
    "compute_eer", "compute_min_dcf", "convert_speaker", "cosine_score", "derive_seed",
    "embed", "emit_rt60_plot", "estimate_rt60", "evaluate", "execute_plan",
    "filter_augment", "load_manifest", "load_plan", "load_trials", "load_utterance",
    "log_mel", "plan_train_aug", "plan_trial_crossaug", "read_fspc", "read_wav",
    "resample", "rms_power", "save_manifest", "save_plan", "score_trials",
    "shuffle_augment", "spec_augment", "speed_perturb", "stft", "voice_convert",
    "write_fspc", "write_wav",
]
