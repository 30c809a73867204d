"""Dataset manifest: an INI-style text file listing trial files per subject.

Example::

    [dataset]
    version = 1
    fs = 500.0
    n_channels = 32
    task = OA,TA
    generator_seed = 7

    [subject S01]
    files =
        S01/trial_00.aadb
        S01/trial_01.aadb

All file paths are relative to the directory holding the manifest.
"""

from __future__ import annotations

import configparser
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

from ..exceptions import FormatError
from .trial_io import load_trial, read_header

MANIFEST_NAME = "manifest.ini"
MANIFEST_VERSION = 1
_SUBJECT_PREFIX = "subject "


@dataclass
class DatasetManifest:
    fs: float
    n_channels: int
    subjects: dict = field(default_factory=dict)
    task: str = "OA,TA"
    generator_seed: int | None = None
    version: int = MANIFEST_VERSION
    root: Path | None = None

    def files(self, subject=None):
        names = [subject] if subject is not None else sorted(self.subjects)
        return [(s, self.root / f) for s in names for f in self.subjects[s]]

    def load_trials(self, subject=None):
        return [load_trial(p) for _, p in self.files(subject)]

    def to_text(self):
        cp = configparser.ConfigParser(interpolation=None)
        cp["dataset"] = {
            "version": str(self.version),
            "fs": repr(float(self.fs)),
            "n_channels": str(self.n_channels),
            "task": self.task,
        }
        if self.generator_seed is not None:
            cp["dataset"]["generator_seed"] = str(self.generator_seed)
        for subject in sorted(self.subjects):
            cp[_SUBJECT_PREFIX + subject] = {
                "files": "\n" + "\n".join(str(f) for f in self.subjects[subject])
            }
        lines = []
        for section in cp.sections():
            lines.append(f"[{section}]")
            for key, value in cp[section].items():
                if "\n" in value:
                    lines.append(f"{key} =")
                    lines.extend("    " + v for v in value.strip().splitlines())
                else:
                    lines.append(f"{key} = {value}")
            lines.append("")
        return "\n".join(lines)

    def write(self, directory):
        directory = Path(directory)
        path = directory / MANIFEST_NAME
        path.write_text(self.to_text(), encoding="utf-8")
        self.root = directory
        return path


def read_manifest(path, check_files=True):
    """Parse a manifest (file or directory containing ``manifest.ini``).

    With ``check_files`` every listed trial header is read and must agree
    with the declared sampling rate and channel count.
    """
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST_NAME
    cp = configparser.ConfigParser(interpolation=None)
    try:
        with open(path, encoding="utf-8") as fh:
            cp.read_file(fh)
    except (configparser.Error, UnicodeDecodeError) as exc:
        raise FormatError(f"{path}: unparseable manifest: {exc}") from None
    if "dataset" not in cp:
        raise FormatError(f"{path}: missing [dataset] section")
    ds = cp["dataset"]
    try:
        version = ds.getint("version")
        fs = ds.getfloat("fs")
        n_channels = ds.getint("n_channels")
        seed = ds.get("generator_seed")
        seed = int(seed) if seed is not None else None
    except (TypeError, ValueError) as exc:
        raise FormatError(f"{path}: bad [dataset] value: {exc}") from None
    if version != MANIFEST_VERSION:
        raise FormatError(f"{path}: unsupported manifest version {version}")
    subjects = {}
    for section in cp.sections():
        if section.startswith(_SUBJECT_PREFIX):
            files = [f.strip() for f in cp[section].get("files", "").splitlines() if f.strip()]
            subjects[section[len(_SUBJECT_PREFIX):]] = files
    manifest = DatasetManifest(
        fs=fs, n_channels=n_channels, subjects=subjects,
        task=ds.get("task", "OA,TA"), generator_seed=seed, version=version,
        root=path.parent,
    )
    if check_files:
        for subject, f in manifest.files():
            if not f.exists():
                raise FormatError(f"{path}: listed file {f} does not exist")
            head = read_header(f)
            if head["fs"] != fs or head["n_channels"] != n_channels:
                raise FormatError(
                    f"{f}: fs/channels ({head['fs']}, {head['n_channels']}) disagree with "
                    f"manifest ({fs}, {n_channels})"
                )
    return manifest


def balance_from_labels(labels):
    counts = Counter(int(v) for v in labels)
    n0, n1 = counts.get(0, 0), counts.get(1, 0)
    return {"counts": {0: n0, 1: n1}, "balanced": n0 == n1, "delta": abs(n0 - n1)}


def class_balance(manifest, task="OA"):
    """Per-subject class counts for ``task`` read from the trial headers."""
    key = "label_oa" if task.upper() == "OA" else "label_ta"
    out = {}
    for subject in sorted(manifest.subjects):
        labels = [read_header(p)[key] for _, p in manifest.files(subject)]
        out[subject] = balance_from_labels(labels)
    return out
