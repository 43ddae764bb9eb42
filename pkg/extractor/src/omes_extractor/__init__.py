"""omes-extractor: pretrained-backbone embeddings in the OMES file format."""

from .extract import DecodeError, ExtractorSpec, expand_prompt_file, extract
from .format import read_omes, write_omes
from .models import DEFAULT_CLIP_VARIANT, MODEL_IDS, Encoder, ModelUnavailable, load_encoder

__version__ = "0.1.0"
