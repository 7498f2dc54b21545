"""The greenlens persistence package."""

from . import event
from .database import Database
from .journal import Journal, as_uri
from .model import RecordBase
from .records import PassageRecord, TranscriptRecord
from .session import Session
from .snapshot import SnapshotStore
