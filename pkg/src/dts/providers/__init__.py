from .base import DistributionProvider
from .ngram import NGramModel, train_ngram
from .pfsa import PfsaModel
from .remote import RemoteProvider
from .scripted import ScriptedModel
from .server import ProviderServer

__all__ = [
    "DistributionProvider",
    "NGramModel",
    "PfsaModel",
    "ProviderServer",
    "RemoteProvider",
    "ScriptedModel",
    "train_ngram",
]
