"""snapscore: retrieve the MIDI passage shown in a photo of sheet music.

Both a MIDI file and a photographed page of printed piano music are
projected into a shared 62-row "bootleg score" grid of notehead positions;
subsequence DTW between the two grids yields the matching time segment.
"""

from .align import AlignmentError, AlignmentResult, align
from .bootleg import (BootlegFormatError, BootlegScore, deserialize,
                      midi_bootleg, pitch_to_rows, serialize)
from .config import Config, ConfigError
from .evaluate import (MeasureMap, Metrics, QueryAnnotation, aggregate,
                       evaluate_dataset, interval_metrics, random_baseline)
from .midi import MidiParseError, NoteEvent, NoteOnset, cluster_onsets, parse_midi
from .sheet import PipelineError, SheetPipelineResult, process_image

__all__ = [
    "AlignmentError", "AlignmentResult", "align",
    "BootlegFormatError", "BootlegScore", "deserialize", "midi_bootleg",
    "pitch_to_rows", "serialize",
    "Config", "ConfigError",
    "MeasureMap", "Metrics", "QueryAnnotation", "aggregate",
    "evaluate_dataset", "interval_metrics", "random_baseline",
    "MidiParseError", "NoteEvent", "NoteOnset", "cluster_onsets", "parse_midi",
    "PipelineError", "SheetPipelineResult", "process_image",
]

__version__ = "0.1.0"
