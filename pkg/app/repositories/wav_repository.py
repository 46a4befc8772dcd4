"""
WAV Repository - RIFF/WAVE decode and PCM16 encode
"""
import logging
import os
import warnings

import numpy as np
from scipy.io import wavfile

from app.core.errors import DataError, FormatError, UnsupportedCodecError
from app.models.audio import AudioClip

logger = logging.getLogger(__name__)

# scipy reports these phrases for encodings it cannot decode
_CODEC_MARKERS = ("Unknown wave file format", "Unsupported bit depth", "not supported")


def load_wav(path: str) -> AudioClip:
    """
    Decode a PCM16 or float32 WAV file to a mono clip

    Channels are averaged; int16 samples are scaled by 1/32768 so that
    32767 maps to 32767/32768. The sample rate is preserved.

    Args:
        path: WAV file path

    Returns:
        AudioClip

    Raises:
        FormatError: Not a RIFF/WAVE file or malformed header
        UnsupportedCodecError: Encoding other than PCM16 / IEEE float32
    """
    if not os.path.isfile(path):
        raise DataError(f"audio file not found: {path}", payload={'path': path})

    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", wavfile.WavFileWarning)
            sample_rate, data = wavfile.read(path, mmap=False)
    except ValueError as e:
        message = str(e)
        if any(marker in message for marker in _CODEC_MARKERS):
            raise UnsupportedCodecError(f"{path}: {message}", payload={'path': path})
        raise FormatError(f"{path}: {message}", payload={'path': path})
    except (EOFError, OSError) as e:
        raise FormatError(f"{path}: truncated or unreadable WAV ({e})", payload={'path': path})

    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype == np.float32:
        samples = data.astype(np.float64)
    else:
        raise UnsupportedCodecError(
            f"{path}: unsupported sample type {data.dtype}, expected PCM16 or float32",
            payload={'path': path, 'dtype': str(data.dtype)}
        )

    if samples.ndim == 2:
        samples = samples.mean(axis=1)

    logger.debug(
        "Loaded WAV",
        extra={'path': path, 'samples': samples.shape[0], 'sample_rate': sample_rate}
    )

    return AudioClip(samples, int(sample_rate))


def write_wav(path: str, clip: AudioClip):
    """
    Write a clip as mono PCM16

    Amplitudes are scaled by 32768 and saturated to the int16 range, so a
    clip loaded from PCM16 is written back unchanged.
    """
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)

    pcm = np.clip(np.round(clip.samples * 32768.0), -32768, 32767).astype('<i2')
    wavfile.write(path, clip.sample_rate, pcm)


def write_wav_float32(path: str, clip: AudioClip):
    """Write a clip as mono IEEE float32"""
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)

    wavfile.write(path, clip.sample_rate, clip.samples.astype('<f4'))
