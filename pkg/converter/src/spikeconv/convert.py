"""MATLAB-container spike dataset conversion.

The simulated-recording containers hold a continuous trace, ground-truth
spike times, and per-spike class labels, but variable names drift between
files and distribution versions.  ``load_container`` probes a candidate name
list for each role and records which names matched; ``convert`` cuts one
peak-aligned frame per annotated spike and writes it through the spike
toolkit's dataset formats.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.io

from cospike import Dataset, SpikeFrame, save_dataset

# candidate variable names per role, in probe order
TRACE_KEYS = ("data", "trace", "signal", "x")
TIME_KEYS = ("spike_times", "spikes_times", "spike_time", "spt", "times")
CLASS_KEYS = ("spike_class", "spike_classes", "spike_labels", "labels",
              "classes")

DEFAULT_FRAME_LENGTH = 128
DEFAULT_PRE_PEAK = 40
# annotated times mark spike onsets; the absolute peak is searched this many
# samples ahead
PEAK_SEARCH = 64


class MissingVariableError(KeyError):
    """Container lacks a required variable; message names the candidates."""


@dataclass(frozen=True)
class ConversionJob:
    input_path: str
    output_path: str
    frame_length: int = DEFAULT_FRAME_LENGTH
    pre_peak: int = DEFAULT_PRE_PEAK
    output_format: str = "csv"

    def validate(self) -> None:
        if self.frame_length < 1:
            raise ValueError(f"frame_length must be positive, got "
                             f"{self.frame_length}")
        if not 0 <= self.pre_peak < self.frame_length:
            raise ValueError(f"pre_peak must be in [0, {self.frame_length}), "
                             f"got {self.pre_peak}")
        if self.output_format not in ("csv", "raw-binary"):
            raise ValueError(f"unsupported output format "
                             f"{self.output_format!r}")


@dataclass(frozen=True)
class ConversionSummary:
    frames_written: int
    skipped_boundary: int
    label_histogram: dict
    variables_used: dict
    output_path: str

    def describe(self) -> str:
        hist = ", ".join(f"{k}: {v}" for k, v in
                         sorted(self.label_histogram.items()))
        used = ", ".join(f"{role}={name}" for role, name in
                         self.variables_used.items())
        lines = [f"wrote {self.frames_written} frames to {self.output_path}",
                 f"label histogram: {hist}",
                 f"container variables: {used}"]
        if self.skipped_boundary:
            lines.append(f"skipped {self.skipped_boundary} frames overlapping "
                         f"the trace boundary")
        return "\n".join(lines)


def _unwrap(value: np.ndarray) -> np.ndarray:
    """Flatten MATLAB wrapping: cell arrays load as object arrays, and the
    per-spike vector sits in the first cell (later cells hold auxiliary
    annotations such as overlap flags)."""
    arr = np.asarray(value)
    while arr.dtype == object:
        flat = arr.ravel()
        if flat.size == 0:
            raise ValueError("empty cell array")
        arr = np.asarray(flat[0])
    return arr.ravel()


def _probe(container: dict, candidates: tuple, role: str):
    for name in candidates:
        if name in container:
            return name, _unwrap(container[name])
    raise MissingVariableError(
        f"container has no {role} variable; expected one of "
        f"{', '.join(candidates)} (found: "
        f"{', '.join(k for k in container if not k.startswith('__')) or 'none'})"
    )


def load_container(path: str | Path):
    """Read trace, spike times, and labels from a MATLAB container.

    Returns (trace, times, labels, variables_used).  Times are converted to
    0-based sample indices.
    """
    try:
        container = scipy.io.loadmat(path)
    except NotImplementedError as exc:
        raise ValueError(
            f"{path}: MATLAB 7.3 (HDF5) containers are not supported; "
            f"re-save as v7 or earlier") from exc
    trace_name, trace = _probe(container, TRACE_KEYS, "trace")
    times_name, times = _probe(container, TIME_KEYS, "spike-time")
    class_name, labels = _probe(container, CLASS_KEYS, "class-label")
    trace = trace.astype(float)
    # MATLAB indices are 1-based
    times = np.round(times.astype(float)).astype(int) - 1
    labels = labels.astype(int)
    if times.shape != labels.shape:
        raise ValueError(f"{path}: {times.size} spike times but "
                         f"{labels.size} labels")
    used = {"trace": trace_name, "times": times_name, "labels": class_name}
    return trace, times, labels, used


def extract_frames(trace: np.ndarray, times: np.ndarray, labels: np.ndarray,
                   frame_length: int, pre_peak: int):
    """Peak-aligned frames at the annotated spike positions.

    Each annotation marks the spike onset; the |peak| is located within
    PEAK_SEARCH samples ahead and the frame is cut so the peak lands at
    ``pre_peak``.  Frames that would cross the trace boundary are skipped.
    """
    frames = []
    skipped = 0
    for t, label in zip(times, labels):
        lo = max(int(t), 0)
        window = np.abs(trace[lo:lo + PEAK_SEARCH])
        if window.size == 0:
            skipped += 1
            continue
        peak = lo + int(np.argmax(window))
        start = peak - pre_peak
        if start < 0 or start + frame_length > trace.size:
            skipped += 1
            continue
        frames.append(SpikeFrame(
            samples=trace[start:start + frame_length].copy(),
            label=int(label), source_index=peak))
    return frames, skipped


def convert(job: ConversionJob) -> ConversionSummary:
    job.validate()
    trace, times, labels, used = load_container(job.input_path)
    frames, skipped = extract_frames(trace, times, labels,
                                     job.frame_length, job.pre_peak)
    if not frames:
        raise ValueError(f"{job.input_path}: no usable frames "
                         f"({skipped} skipped at boundaries)")
    dataset = Dataset(frames=tuple(frames),
                      name=Path(job.input_path).stem,
                      difficulty_tag="converted")
    save_dataset(dataset, job.output_path, fmt=job.output_format)
    values, counts = np.unique([f.label for f in frames], return_counts=True)
    hist = {int(v): int(c) for v, c in zip(values, counts)}
    return ConversionSummary(frames_written=len(frames),
                             skipped_boundary=skipped,
                             label_histogram=hist,
                             variables_used=used,
                             output_path=str(job.output_path))
